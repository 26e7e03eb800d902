#pragma once

#include <cstdint>
#include <map>
#include <string>
#include <vector>

#include "debiasrec/data.hpp"
#include "debiasrec/meta.hpp"
#include "debiasrec/metrics.hpp"

namespace debiasrec {

enum class Method {
    MfBiased,
    MfUniform,
    MfCombine,
    Ips,
    Dr,
    Imputation,
    NegWeight,
    IpsVariant,
    PosIps,
    AutoDebias,
    AutoDebiasW1,
    AutoDebiasW1m,
};

std::string to_string(Method m);
Method method_from_string(const std::string& s);
bool method_valid_for(Method m, FeedbackKind kind);

struct ExperimentSpec {
    std::string dataset;  // yahoo | coat | simulation | custom directory
    std::string data_dir;  // where raw/prepared data lives
    Method method = Method::MfBiased;
    std::vector<double> learning_rates = {1e-4, 1e-3, 1e-2, 1e-1};
    std::vector<double> weight_decays = {1e-4, 1e-3, 1e-2, 1e-1};
    std::vector<std::uint64_t> seeds = {0, 1, 2, 3, 4};
    int dim = 10;
    int epochs = 20;
    int batch_size = 128;
    LossKind loss = LossKind::Squared;
    std::string output_dir = "runs";

    void validate(FeedbackKind kind) const;
};

// key=value config file with a schema_version line
ExperimentSpec load_spec(const std::string& path);
void save_spec(const ExperimentSpec& spec, const std::string& path);

struct RunRow {
    Method method;
    double lr, weight_decay;
    std::uint64_t seed;
    double val_ndcg5;
    MetricsReport test;
};

struct RunResult {
    std::vector<RunRow> rows;           // every grid point x seed
    RunRow best;                        // best-on-validation grid point, first seed
    double mean_ndcg5 = 0, std_ndcg5 = 0;  // over seeds at the best grid point
};

// Trains one method at one grid point / seed and evaluates on test.
RunRow train_and_evaluate(const DatasetBundle& bundle, Method method, double lr,
                          double weight_decay, std::uint64_t seed, int dim, int epochs,
                          int batch_size, LossKind loss);

// Full grid x seeds run; writes results.csv, manifest.txt and, for the
// learned methods, weight-popularity scatter data and slice bars.
RunResult run(const ExperimentSpec& spec, const DatasetBundle& bundle);

struct SweepPoint {
    double ratio;
    double ndcg5_method;
    double ndcg5_biased;
};

// Re-splits the unbiased pool at each ratio and reruns method vs MF(biased).
std::vector<SweepPoint> uniform_ratio_sweep(const ExperimentSpec& spec,
                                            const DatasetBundle& bundle,
                                            const std::vector<double>& ratios);

// FNV-1a content hash used in run manifests
std::uint64_t fingerprint(const DatasetBundle& bundle);

}  // namespace debiasrec
