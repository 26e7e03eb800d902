#include "debiasrec/world.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <numeric>
#include <random>
#include <stdexcept>

namespace debiasrec {

void WorldDistribution::check() const {
    if (n_users < 1 || n_items < 1) throw std::invalid_argument("empty world");
    double st = 0, su = 0;
    for (std::size_t j = 0; j < p_train.size(); ++j) {
        if (p_train[j] < 0 || p_ideal[j] < 0) throw std::invalid_argument("negative probability");
        st += p_train[j];
        su += p_ideal[j];
    }
    if (std::abs(st - 1.0) > 1e-9 || std::abs(su - 1.0) > 1e-9)
        throw std::invalid_argument("world tables must sum to 1");
}

WorldDistribution random_world(int n_users, int n_items, std::uint64_t seed,
                               double knockout_prob) {
    WorldDistribution w;
    w.n_users = n_users;
    w.n_items = n_items;
    std::size_t n = static_cast<std::size_t>(n_users) * n_items * 2;
    w.p_train.assign(n, 0.0);
    w.p_ideal.assign(n, 0.0);
    std::mt19937_64 rng(seed);
    std::uniform_real_distribution<double> mass(0.05, 1.0);
    std::uniform_real_distribution<double> coin(0.0, 1.0);

    for (int u = 0; u < n_users; ++u) {
        for (int i = 0; i < n_items; ++i) {
            for (int s = 0; s < 2; ++s) {
                std::size_t j = w.idx(u, i, s == 0 ? -1 : 1);
                w.p_ideal[j] = mass(rng);
                w.p_train[j] = mass(rng);
            }
            // at most one label per pair lands in S0, keeping the pair's
            // unobservable slice degenerate
            if (coin(rng) < knockout_prob) {
                int s = coin(rng) < 0.5 ? 0 : 1;
                w.p_train[w.idx(u, i, s == 0 ? -1 : 1)] = 0.0;
            }
        }
    }
    double st = std::accumulate(w.p_train.begin(), w.p_train.end(), 0.0);
    double su = std::accumulate(w.p_ideal.begin(), w.p_ideal.end(), 0.0);
    for (auto& v : w.p_train) v /= st;
    for (auto& v : w.p_ideal) v /= su;
    return w;
}

double true_risk(const FactorModel& model, const WorldDistribution& world, LossKind loss) {
    double risk = 0;
    for (int u = 0; u < world.n_users; ++u)
        for (int i = 0; i < world.n_items; ++i) {
            double f = model.predict(u, i);
            for (int r : {-1, 1}) risk += world.pu(u, i, r) * loss_value(loss, f, r);
        }
    return risk;
}

double expected_debiased_risk(const FactorModel& model, const WorldDistribution& world,
                              const DebiasConfig& config, LossKind loss) {
    double risk = 0;
    for (int u = 0; u < world.n_users; ++u)
        for (int i = 0; i < world.n_items; ++i) {
            double f = model.predict(u, i);
            for (int r : {-1, 1}) {
                double pt = world.pt(u, i, r);
                if (pt > 0 && world.pu(u, i, r) > 0) {
                    Interaction x{u, i, r, 0};
                    risk += pt * config.w1(x, 0) * loss_value(loss, f, r);
                }
            }
            double w2 = config.w2(u, i);
            if (w2 != 0) risk += w2 * loss_value(loss, f, config.m(u, i));
        }
    return risk;
}

DebiasConfig optimal_config(const WorldDistribution& world) {
    DebiasConfig c;
    c.w1 = [world](const Interaction& x, std::size_t) {
        double pt = world.pt(x.user, x.item, x.label);
        if (pt <= 0) throw std::domain_error("w1 queried on S0");
        return world.pu(x.user, x.item, x.label) / pt;
    };
    c.w2 = [world](int u, int i) {
        double mass = 0;
        for (int r : {-1, 1})
            if (world.pt(u, i, r) == 0) mass += world.pu(u, i, r);
        return mass;
    };
    c.m = [world](int u, int i) {
        double mass = 0, mean = 0;
        for (int r : {-1, 1})
            if (world.pt(u, i, r) == 0) {
                mass += world.pu(u, i, r);
                mean += r * world.pu(u, i, r);
            }
        return mass > 0 ? mean / mass : 0.0;
    };
    c.name = "optimal";
    return c;
}

void SimulationSpec::check() const {
    if (n_users < 1 || n_items < 1) throw std::invalid_argument("empty simulation");
    if (reserve_per_user < 1 || warm_items_per_user < 1 || list_length < 1)
        throw std::invalid_argument("simulation counts must be positive");
    if (reserve_per_user >= n_items)
        throw std::invalid_argument("reserve must leave a biased pool");
    int pool = n_items - reserve_per_user;
    if (warm_items_per_user > pool || list_length > pool)
        throw std::invalid_argument("pool too small for warm set / list length");
    if (latent_dim < 1 || warm_dim < 1 || score_sharpness <= 0)
        throw std::invalid_argument("latent_dim, warm_dim and score_sharpness must be positive");
}

namespace {

// low-rank preference scores in [0, 1]
std::vector<double> ground_truth_scores(const SimulationSpec& spec, std::mt19937_64& rng) {
    int d = spec.latent_dim;
    std::normal_distribution<double> gauss(0.0, 1.0);
    std::vector<double> user_lat(static_cast<std::size_t>(spec.n_users) * d);
    std::vector<double> item_lat(static_cast<std::size_t>(spec.n_items) * d);
    for (auto& v : user_lat) v = gauss(rng);
    for (auto& v : item_lat) v = gauss(rng);

    std::vector<double> scores(static_cast<std::size_t>(spec.n_users) * spec.n_items);
    double lo = 1e300, hi = -1e300;
    for (int u = 0; u < spec.n_users; ++u)
        for (int i = 0; i < spec.n_items; ++i) {
            double dot = 0;
            for (int k = 0; k < d; ++k)
                dot += user_lat[static_cast<std::size_t>(u) * d + k] *
                       item_lat[static_cast<std::size_t>(i) * d + k];
            double z = dot / std::sqrt(static_cast<double>(d)) - spec.score_offset;
            double s = 1.0 / (1.0 + std::exp(-z * spec.score_sharpness));
            scores[static_cast<std::size_t>(u) * spec.n_items + i] = s;
            lo = std::min(lo, s);
            hi = std::max(hi, s);
        }
    double span = hi - lo;
    if (span > 0)
        for (auto& s : scores) s = (s - lo) / span;
    return scores;
}

}  // namespace

SimulationResult generate_simulation(const SimulationSpec& spec) {
    spec.check();
    std::mt19937_64 rng(spec.seed);

    SimulationResult sim;
    sim.true_scores = ground_truth_scores(spec, rng);
    auto score = [&](int u, int i) {
        return sim.true_scores[static_cast<std::size_t>(u) * spec.n_items + i];
    };

    // per-user split into unbiased reserve and biased pool
    std::vector<std::vector<int>> reserve(spec.n_users), pool(spec.n_users);
    std::vector<int> items(spec.n_items);
    std::iota(items.begin(), items.end(), 0);
    for (int u = 0; u < spec.n_users; ++u) {
        std::shuffle(items.begin(), items.end(), rng);
        reserve[u].assign(items.begin(), items.begin() + spec.reserve_per_user);
        pool[u].assign(items.begin() + spec.reserve_per_user, items.end());
    }

    // warm model on a random slice of each user's pool, fit to raw scores
    std::vector<std::pair<std::pair<int, int>, double>> warm;
    for (int u = 0; u < spec.n_users; ++u) {
        std::vector<int> sampled = pool[u];
        std::shuffle(sampled.begin(), sampled.end(), rng);
        sampled.resize(spec.warm_items_per_user);
        for (int i : sampled) warm.push_back({{u, i}, score(u, i)});
    }
    FactorModel warm_model = FactorModel::init(spec.n_users, spec.n_items, spec.warm_dim,
                                               spec.seed ^ 0xabcdef12ULL);
    {
        std::mt19937_64 warm_rng(spec.seed ^ 0x5555aaaaULL);
        for (int epoch = 0; epoch < spec.warm_epochs; ++epoch) {
            std::shuffle(warm.begin(), warm.end(), warm_rng);
            for (const auto& [pair, target] : warm) {
                auto [u, i] = pair;
                double f = warm_model.predict(u, i);
                double g = 2.0 * (f - target);
                double* pu = warm_model.user_row(u);
                double* qi = warm_model.item_row(i);
                for (int k = 0; k < warm_model.dim; ++k) {
                    double pu_k = pu[k];
                    pu[k] -= 0.05 * g * qi[k];
                    qi[k] -= 0.05 * g * pu_k;
                }
            }
        }
    }

    DatasetBundle& b = sim.bundle;
    b.n_users = spec.n_users;
    b.n_items = spec.n_items;
    b.feedback_kind = FeedbackKind::List;
    b.seed = spec.seed;

    // top-k list per user over its biased pool, clicks discounted by rank
    std::uniform_real_distribution<double> coin(0.0, 1.0);
    for (int u = 0; u < spec.n_users; ++u) {
        std::vector<int> ranked = pool[u];
        std::stable_sort(ranked.begin(), ranked.end(), [&](int a, int c) {
            return warm_model.predict(u, a) > warm_model.predict(u, c);
        });
        for (int p = 1; p <= spec.list_length; ++p) {
            int i = ranked[p - 1];
            double prob = std::min(score(u, i) / (2.0 * std::sqrt(static_cast<double>(p))), 1.0);
            int label = coin(rng) < prob ? 1 : -1;
            b.train.push_back({u, i, label, p});
        }
    }

    // unbiased reserve, thresholded labels, global 5/5/90 split
    std::vector<Interaction> unbiased;
    for (int u = 0; u < spec.n_users; ++u)
        for (int i : reserve[u]) unbiased.push_back({u, i, score(u, i) > 0.5 ? 1 : -1, 0});
    std::shuffle(unbiased.begin(), unbiased.end(), rng);
    std::size_t n = unbiased.size();
    std::size_t n_uni = static_cast<std::size_t>(spec.reserve_ratios.uniform * n + 0.5);
    std::size_t n_val = static_cast<std::size_t>(spec.reserve_ratios.validation * n + 0.5);
    b.uniform.assign(unbiased.begin(), unbiased.begin() + n_uni);
    b.validation.assign(unbiased.begin() + n_uni, unbiased.begin() + n_uni + n_val);
    b.test.assign(unbiased.begin() + n_uni + n_val, unbiased.end());
    b.check();
    return sim;
}

void save_simulation(const SimulationResult& sim, const std::string& dir) {
    save_bundle(sim.bundle, dir);
    std::ofstream out(dir + "/scores.txt");
    if (!out) throw std::runtime_error("cannot write " + dir + "/scores.txt");
    out.precision(17);
    int n_items = sim.bundle.n_items;
    for (std::size_t j = 0; j < sim.true_scores.size(); ++j) {
        out << j / n_items << ' ' << j % n_items << ' ' << sim.true_scores[j] << '\n';
    }
}

}  // namespace debiasrec
