#pragma once

#include <functional>
#include <string>
#include <utility>
#include <vector>

#include "debiasrec/data.hpp"
#include "debiasrec/model.hpp"

namespace debiasrec {

// Realized debiasing parameters. w1 is indexed by training example (the
// interaction plus its position in the training list), w2 and m by pair.
struct DebiasConfig {
    std::function<double(const Interaction&, std::size_t k)> w1;
    std::function<double(int u, int i)> w2;
    std::function<double(int u, int i)> m;
    // the doubly-robust provider legitimately emits negative w2
    bool allow_negative_w2 = false;
    std::string name;
};

DebiasConfig identity_config();  // w1 = 1, w2 = 0

// Observation propensity q(u,i) in (0,1]. The naive-Bayes estimate is
// constant per observed label.
struct PropensityTable {
    double q_positive = 1.0;
    double q_negative = 1.0;
    std::string method;

    double at(int label) const;
    void save(const std::string& path) const;
    static PropensityTable load(const std::string& path);
};

// (1/|train|) sum_k w1_k delta(f,r_k) + scale * sum_{pairs} w2 delta(f,m),
// scale = |U||I| / |pair_sample|.
double debiased_risk(const FactorModel& model, const std::vector<Interaction>& train,
                     const std::vector<std::pair<int, int>>& pair_sample,
                     const DebiasConfig& config, LossKind loss, int n_users, int n_items);

std::vector<std::pair<int, int>> all_pairs(int n_users, int n_items);
std::vector<std::pair<int, int>> sample_pairs(int n_users, int n_items, std::size_t count,
                                              std::uint64_t seed);

// Static strategy providers. Each reproduces a classic estimator when fed
// to debiased_risk over all pairs.
DebiasConfig config_ips(const PropensityTable& q, std::size_t n_train, int n_users, int n_items,
                        const ObservationIndicator& obs);
DebiasConfig config_imputation(double lambda, double m_value, std::size_t n_train, int n_users,
                               int n_items);
DebiasConfig config_doubly_robust(const PropensityTable& q, const ObservationIndicator& obs,
                                  std::function<double(int, int)> m_table, std::size_t n_train,
                                  int n_users, int n_items);
DebiasConfig config_negative_weighting(std::function<double(int, int)> exposure,
                                       const ObservationIndicator& obs, double negative_label = 0.0);
DebiasConfig config_ips_variant(const PropensityTable& q, const ObservationIndicator& obs,
                                std::size_t n_train, int n_users, int n_items,
                                double negative_label = 0.0);
DebiasConfig config_position_ips(const std::vector<double>& position_propensity);
// Recovers the conformity-offset objective up to a 1/alpha scale and an
// f-independent constant: w1 = 1, w2 = O (1-alpha) / (alpha |D_T|), m = b.
DebiasConfig config_conformity_offset(double alpha, std::function<double(int, int)> bias_table,
                                      const ObservationIndicator& obs, std::size_t n_train);

// q(r) = P(r | O=1) P(O=1) / P(r), observed-label frequencies from train,
// marginal label frequencies from the uniform split.
PropensityTable estimate_propensity_naive_bayes(const std::vector<Interaction>& train,
                                                const std::vector<Interaction>& uniform,
                                                int n_users, int n_items);

// S_{w1} = sum_k w1_k^2, the variance diagnostic of the generalization bound
double weight_mean_square(const DebiasConfig& config, const std::vector<Interaction>& train);

// SGD on the debiased risk with a static config. Pair batches are drawn
// uniformly from U x I and scaled by |U||I| / |pair_batch|.
struct DebiasedSgdOptions {
    double lr = 0.01;
    double weight_decay = 0.0;
    int epochs = 10;
    int batch_size = 128;
    int pair_batch_size = 128;
    std::uint64_t seed = 0;
    std::function<void(int, const FactorModel&)> epoch_callback;
};

FactorModel sgd_fit_debiased(FactorModel model, const std::vector<Interaction>& train,
                             const DebiasConfig& config, LossKind loss, int n_users, int n_items,
                             const DebiasedSgdOptions& opt, TrainTrace* trace = nullptr);

}  // namespace debiasrec
