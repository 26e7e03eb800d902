#pragma once

#include <cstdint>
#include <functional>
#include <random>
#include <string>
#include <vector>

#include "debiasrec/data.hpp"

namespace debiasrec {

enum class LossKind { Squared, Logistic };

std::string to_string(LossKind k);
LossKind loss_kind_from_string(const std::string& s);

// delta(prediction f, label r) and its partials. Labels live in [-1, 1];
// the logistic form log(1 + exp(-r f)) extends smoothly to fractional
// pseudo-labels.
double loss_value(LossKind k, double f, double r);
double loss_df(LossKind k, double f, double r);
double loss_dr(LossKind k, double f, double r);
// mixed partial d^2 delta / (df dr), needed by the phi3 hypergradient
double loss_dfdr(LossKind k, double f, double r);

// Dot-product matrix factorization with user, item and global bias terms.
// The biases absorb base rates (label imbalance, per-item click frequency)
// that would otherwise leak into the embeddings and distort the ranking.
struct FactorModel {
    int n_users = 0;
    int n_items = 0;
    int dim = 0;
    std::vector<double> user_factors;  // n_users x dim, row-major
    std::vector<double> item_factors;  // n_items x dim, row-major
    std::vector<double> user_bias;     // n_users, zero-initialized
    std::vector<double> item_bias;     // n_items, zero-initialized
    double global_bias = 0.0;

    static FactorModel init(int n_users, int n_items, int dim, std::uint64_t seed);

    double predict(int u, int i) const;
    double* user_row(int u) { return user_factors.data() + static_cast<std::size_t>(u) * dim; }
    double* item_row(int i) { return item_factors.data() + static_cast<std::size_t>(i) * dim; }
    const double* user_row(int u) const {
        return user_factors.data() + static_cast<std::size_t>(u) * dim;
    }
    const double* item_row(int i) const {
        return item_factors.data() + static_cast<std::size_t>(i) * dim;
    }

    void save(const std::string& path) const;
    static FactorModel load(const std::string& path);
};

double empirical_risk(const FactorModel& model, const std::vector<Interaction>& data,
                      LossKind loss);

// Deterministic minibatch index stream: reshuffles 0..n-1 each epoch.
class MinibatchSampler {
public:
    MinibatchSampler(std::size_t n, std::size_t batch_size, std::uint64_t seed);
    // next batch of indices; reshuffles when an epoch boundary is crossed
    std::vector<std::size_t> next();
    std::size_t batches_per_epoch() const;

private:
    std::vector<std::size_t> order_;
    std::size_t batch_size_;
    std::size_t pos_ = 0;
    std::mt19937_64 rng_;
};

struct SgdOptions {
    double lr = 0.01;
    double weight_decay = 0.0;
    int epochs = 10;
    int batch_size = 128;
    std::uint64_t seed = 0;
    // called after every epoch, e.g. for best-checkpoint selection
    std::function<void(int, const FactorModel&)> epoch_callback;
};

struct TrainTrace {
    std::vector<double> train_loss;  // per epoch
};

// Mini-batch SGD with L2 regularization. Throws on divergence.
FactorModel sgd_fit(FactorModel model, const std::vector<Interaction>& data, LossKind loss,
                    const SgdOptions& opt, TrainTrace* trace = nullptr);

}  // namespace debiasrec
