#pragma once

#include <cstdint>
#include <vector>

#include "debiasrec/data.hpp"
#include "debiasrec/framework.hpp"
#include "debiasrec/model.hpp"

namespace debiasrec {

// Fully enumerated ground truth over (user, item, label) with labels in
// {-1, +1}. p_train is the collection distribution, p_ideal the unbiased
// one; both sum to 1.
struct WorldDistribution {
    int n_users = 0;
    int n_items = 0;
    // tables are n_users x n_items x 2, label -1 at slot 0, +1 at slot 1
    std::vector<double> p_train;
    std::vector<double> p_ideal;

    std::size_t idx(int u, int i, int label) const {
        return (static_cast<std::size_t>(u) * n_items + i) * 2 + (label > 0 ? 1 : 0);
    }
    double pt(int u, int i, int label) const { return p_train[idx(u, i, label)]; }
    double pu(int u, int i, int label) const { return p_ideal[idx(u, i, label)]; }
    void check() const;
};

// Random world whose unobservable slice is degenerate per pair: at most one
// label with p_train = 0, so the pseudo-label at each imputed pair is exact
// and the risk identity holds for any loss. knockout_prob controls how much
// of the support lands in S0.
WorldDistribution random_world(int n_users, int n_items, std::uint64_t seed,
                               double knockout_prob = 0.3);

// L(f) = sum p_ideal(u,i,r) delta(f(u,i), r), exact enumeration
double true_risk(const FactorModel& model, const WorldDistribution& world, LossKind loss);

// E_{p_train}[debiased risk] by exact enumeration:
//   sum_{S1} p_train w1 delta + sum_{u,i} w2 delta(f, m)
double expected_debiased_risk(const FactorModel& model, const WorldDistribution& world,
                              const DebiasConfig& config, LossKind loss);

// The parameters that make the debiased risk an unbiased estimator:
// w1 = p_ideal/p_train on S1, w2 the unobservable p_ideal mass per pair,
// m the conditional mean label over that slice. Querying w1 on S0 throws.
DebiasConfig optimal_config(const WorldDistribution& world);

struct SimulationSpec {
    int n_users = 500;
    int n_items = 500;
    int reserve_per_user = 150;  // unbiased holdout per user
    int warm_items_per_user = 25;
    int list_length = 25;
    // ground-truth rank; kept low so the preference structure is
    // recoverable from a handful of labels per user
    int latent_dim = 3;
    // steepness of the score nonlinearity; pushes scores toward 0/1 so the
    // relevance threshold separates well-apart clusters instead of splitting
    // the bulk of near-threshold pairs
    double score_sharpness = 3.0;
    // shifts the score distribution downward so only the upper tail clears
    // the relevance threshold; real catalogs are mostly irrelevant to any
    // given user, and the debiasing signal depends on that asymmetry
    double score_offset = 1.0;
    // kept short so the warm fit is imperfect: exposure then spreads over a
    // wider slice of the catalog instead of a handful of head items
    int warm_epochs = 15;
    // rank of the warm recommender that builds the lists; keeping it below
    // latent_dim means exposure follows a coarse popularity-like axis rather
    // than the user's true preferences, which is the bias regime of interest
    int warm_dim = 1;
    SplitRatios reserve_ratios;
    std::uint64_t seed = 0;

    void check() const;
};

struct SimulationResult {
    DatasetBundle bundle;
    std::vector<double> true_scores;  // n_users x n_items ground truth in [0,1]
};

// List-feedback generator: warm model on a random slice of each user's
// biased pool, top-k recommendation lists, position-discounted clicks with
// probability min(r / (2 sqrt(p)), 1).
SimulationResult generate_simulation(const SimulationSpec& spec);

// save_bundle plus a scores file for post-hoc analysis
void save_simulation(const SimulationResult& sim, const std::string& dir);

}  // namespace debiasrec
