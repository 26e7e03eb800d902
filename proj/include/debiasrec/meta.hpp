#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <utility>
#include <vector>

#include "debiasrec/data.hpp"
#include "debiasrec/framework.hpp"
#include "debiasrec/model.hpp"

namespace debiasrec {

// Linear meta model over one-hot features. Weights are exponentiated
// (w1, w2 > 0) and the pseudo-label squashed with tanh (m in (-1,1)).
// phi1 slots: [users | items | labels(-1,+1) | positions (list mode)]
// phi2 slots: [users | items | O in {0,1}]
// phi3 slots: [labels(-1,+1) + missing | O in {0,1}]
struct MetaModel {
    int n_users = 0;
    int n_items = 0;
    int n_positions = 0;  // 0 = non-list mode
    std::vector<double> phi1;
    std::vector<double> phi2;
    std::vector<double> phi3;

    static MetaModel zeros(int n_users, int n_items, int n_positions = 0);

    bool list_mode() const { return n_positions > 0; }
    static int label_slot(int label) { return label > 0 ? 1 : 0; }
    static constexpr int kMissingSlot = 2;

    double w1(int u, int i, int label, int position = 0) const;
    double w2(int u, int i, int observed) const;
    // label = nullopt for unobserved pairs
    double m(std::optional<int> label, int observed) const;

    // diagnostics: the factorized components of w1
    double user_factor(int u) const;
    double item_factor(int i) const;
    double label_factor(int label) const;

    void save(const std::string& path) const;
    static MetaModel load(const std::string& path);
};

enum class AblationKind { Full, W1, W1M, Frozen };

std::string to_string(AblationKind k);

struct TrainerConfig {
    double lr_base = 0.01;       // eta_1
    double lr_meta = 0.01;       // eta_2
    double weight_decay = 0.0;   // applied to theta in both steps
    int batch_train = 128;
    int batch_pairs = 128;
    int batch_uniform = 32;
    int epochs = 20;
    int dim = 10;
    LossKind loss = LossKind::Squared;
    AblationKind ablation = AblationKind::Full;
    std::uint64_t seed = 0;
    // fixed pair weight used by the W1M variant (phi2 frozen)
    double w1m_pair_weight = 1.0;
    // L2 pull of phi toward zero (w -> 1, m -> 0); keeps exp(phi) from
    // running away over long meta-optimization horizons. Kept well below the
    // typical hypergradient magnitude so it acts as a guard, not a prior.
    double meta_weight_decay = 1e-6;
    // epochs during which phi1 stays frozen while the imputation side (phi2,
    // phi3) establishes itself; only applies when the pair term is active.
    // Without the warmup the example weights race ahead and soak up the
    // distribution correction that the imputation should provide.
    int meta_warmup_epochs = 0;
    // harmonic decay horizon for the meta learning rate: lr_meta/(1 + e/T).
    // Zero keeps the rate constant.
    double lr_meta_decay_epochs = 0;
};

// Per-batch quantities cached by base_step for the hypergradient.
struct BaseStepCache {
    struct TrainTerm {
        int u, i, label, position;
        double w1;
        double dloss_df;  // at the pre-step theta
    };
    struct PairTerm {
        int u, i;
        int observed;
        std::optional<int> label;
        double w2;
        double m;
        double dloss_df;    // d delta(f, m) / df
        double dloss_dfdm;  // mixed partial
    };
    std::vector<TrainTerm> train_terms;
    std::vector<PairTerm> pair_terms;
    double batch_risk = 0.0;
    bool pair_term_active = false;
};

// One SGD step on the debiased batch risk
//   (1/|B_T|) sum w1_k delta_k + (1/|B_P|) sum w2_ui delta(f, m_ui)
//   + (decay/2) ||theta||^2.
// Returns the stepped model; the input model is untouched.
FactorModel base_step(const FactorModel& model, const MetaModel& meta,
                      const std::vector<Interaction>& train,
                      const std::vector<std::size_t>& batch_train,
                      const std::vector<std::pair<int, int>>& batch_pairs,
                      const ObservationIndicator& obs, LossKind loss, double lr, double decay,
                      AblationKind ablation, double w1m_pair_weight, BaseStepCache* cache);

struct MetaGradient {
    std::vector<double> g1, g2, g3;
};

// Analytic gradient of the one-step-unrolled uniform risk
//   L_U(theta - eta_1 grad_theta L_T(theta | phi))
// with respect to (phi1, phi2, phi3). model_old is the pre-step theta,
// model_assumed the stepped one from base_step.
MetaGradient hypergradient(const FactorModel& model_old, const FactorModel& model_assumed,
                           const MetaModel& meta, const BaseStepCache& cache,
                           const std::vector<Interaction>& batch_uniform, LossKind loss,
                           double lr_base);

struct TrainEpochRow {
    int epoch;
    double train_risk;
    double uniform_risk;
    double val_ndcg5;
};

struct AutoDebiasResult {
    FactorModel model;  // best checkpoint on validation NDCG@5
    MetaModel meta;
    std::vector<TrainEpochRow> trace;
    int best_epoch = -1;
};

// Three-step alternating loop: assumed theta update, meta update via the
// hypergradient (Adam), actual theta update with the refreshed phi.
AutoDebiasResult train_autodebias(const DatasetBundle& bundle, const TrainerConfig& cfg,
                                  const MetaModel* meta_init = nullptr);

void save_trace(const std::vector<TrainEpochRow>& trace, const std::string& path);

}  // namespace debiasrec
