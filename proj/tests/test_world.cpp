#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include "debiasrec/world.hpp"

#include <cmath>
#include <filesystem>
#include <set>

using namespace debiasrec;

TEST_CASE("random worlds are valid distributions with a degenerate unobservable slice") {
    for (std::uint64_t seed = 0; seed < 10; ++seed) {
        auto w = random_world(4, 5, seed);
        CHECK_NOTHROW(w.check());
        for (int u = 0; u < w.n_users; ++u)
            for (int i = 0; i < w.n_items; ++i) {
                int knocked = (w.pt(u, i, -1) == 0) + (w.pt(u, i, 1) == 0);
                CHECK(knocked <= 1);
            }
    }
}

TEST_CASE("world invariant checks reject malformed tables") {
    auto w = random_world(3, 3, 0);
    w.p_train[0] += 0.5;
    CHECK_THROWS_AS(w.check(), std::invalid_argument);
    w = random_world(3, 3, 0);
    w.p_ideal[2] = -0.1;
    CHECK_THROWS_AS(w.check(), std::invalid_argument);
}

TEST_CASE("optimally configured weighted risk is an unbiased estimator of the true risk") {
    // exact expectation identity, both losses, many worlds and models
    int checked_s0 = 0;
    for (std::uint64_t seed = 0; seed < 20; ++seed) {
        auto w = random_world(3 + seed % 4, 3 + (seed / 2) % 4, seed, 0.4);
        auto c = optimal_config(w);
        for (int t = 0; t < 10; ++t) {
            auto model = FactorModel::init(w.n_users, w.n_items, 3, seed * 100 + t);
            for (auto loss : {LossKind::Squared, LossKind::Logistic}) {
                double expected = expected_debiased_risk(model, w, c, loss);
                double truth = true_risk(model, w, loss);
                CHECK(std::abs(expected - truth) < 1e-10);
            }
        }
        // dropping the unobservable-mass term leaves a strictly positive gap
        double s0_mass = 0;
        for (int u = 0; u < w.n_users; ++u)
            for (int i = 0; i < w.n_items; ++i) s0_mass += c.w2(u, i);
        if (s0_mass > 0) {
            ++checked_s0;
            auto c_no_w2 = c;
            c_no_w2.w2 = [](int, int) { return 0.0; };
            auto model = FactorModel::init(w.n_users, w.n_items, 3, seed);
            for (auto loss : {LossKind::Squared, LossKind::Logistic}) {
                double gap = true_risk(model, w, loss) -
                             expected_debiased_risk(model, w, c_no_w2, loss);
                CHECK(gap > 0.0);
            }
        }
    }
    CHECK(checked_s0 >= 15);  // the knockout rate should make S0 common
}

TEST_CASE("optimal weights are the density ratio on the observable slice") {
    auto w = random_world(4, 4, 3, 0.5);
    auto c = optimal_config(w);
    for (int u = 0; u < 4; ++u)
        for (int i = 0; i < 4; ++i)
            for (int r : {-1, 1}) {
                Interaction x{u, i, r, 0};
                if (w.pt(u, i, r) > 0) {
                    CHECK(c.w1(x, 0) == doctest::Approx(w.pu(u, i, r) / w.pt(u, i, r)));
                } else {
                    CHECK_THROWS_AS(c.w1(x, 0), std::domain_error);
                    // the knocked-out mass moves into w2 with its label as m
                    CHECK(c.w2(u, i) == doctest::Approx(w.pu(u, i, r)));
                    CHECK(c.m(u, i) == doctest::Approx(static_cast<double>(r)));
                }
            }
}

TEST_CASE("simulation bundle has the documented shape") {
    SimulationSpec spec;
    spec.seed = 7;
    auto sim = generate_simulation(spec);
    const auto& b = sim.bundle;
    CHECK(b.n_users == 500);
    CHECK(b.n_items == 500);
    CHECK(b.feedback_kind == FeedbackKind::List);
    CHECK(b.train.size() == 12500);
    CHECK(b.uniform.size() == 3750);
    CHECK(b.validation.size() == 3750);
    CHECK(b.test.size() == 67500);
    CHECK(sim.true_scores.size() == 250000);
    CHECK_NOTHROW(b.check());

    // every training row is a ranked impression with a valid position
    for (const auto& x : b.train) {
        CHECK(x.position >= 1);
        CHECK(x.position <= 25);
    }
    CHECK(b.max_position() == 25);

    // per user: exactly one list of 25 distinct pool items
    std::set<std::pair<int, int>> seen;
    std::vector<int> per_user(500, 0);
    for (const auto& x : b.train) {
        CHECK(seen.insert({x.user, x.item}).second);
        ++per_user[x.user];
    }
    for (int u = 0; u < 500; ++u) CHECK(per_user[u] == 25);

    // unbiased splits never overlap the biased per-user pool: a reserve item
    // must not appear in that user's training list
    for (const auto* split : {&b.uniform, &b.validation, &b.test})
        for (const auto& x : *split) CHECK_FALSE(seen.count({x.user, x.item}));

    // scores live in [0, 1] and hit both ends after normalization
    double lo = 1, hi = 0;
    for (double s : sim.true_scores) {
        CHECK(s >= 0.0);
        CHECK(s <= 1.0);
        lo = std::min(lo, s);
        hi = std::max(hi, s);
    }
    CHECK(lo == 0.0);
    CHECK(hi == 1.0);

    // unbiased labels are the thresholded scores
    for (const auto& x : b.test) {
        double s = sim.true_scores[static_cast<std::size_t>(x.user) * 500 + x.item];
        CHECK(x.label == (s > 0.5 ? 1 : -1));
    }
}

TEST_CASE("simulated clicks track the position-discounted model") {
    SimulationSpec spec;
    spec.seed = 11;
    auto sim = generate_simulation(spec);
    // aggregate click frequency must match the generating probability within
    // a 4-sigma binomial band, per position bucket
    for (int p : {1, 5, 25}) {
        double expected = 0;
        int clicks = 0, n = 0;
        for (const auto& x : sim.bundle.train) {
            if (x.position != p) continue;
            double s = sim.true_scores[static_cast<std::size_t>(x.user) * 500 + x.item];
            expected += std::min(s / (2.0 * std::sqrt(static_cast<double>(p))), 1.0);
            clicks += x.label > 0;
            ++n;
        }
        double sigma = std::sqrt(expected);  // upper bound on the Poisson-binomial sd
        CHECK(std::abs(clicks - expected) < 4 * sigma + 1);
        CHECK(n == 500);
    }
    // deeper positions click less often overall
    auto rate = [&](int p) {
        int clicks = 0, n = 0;
        for (const auto& x : sim.bundle.train)
            if (x.position == p) ++n, clicks += x.label > 0;
        return static_cast<double>(clicks) / n;
    };
    CHECK(rate(1) > rate(25));
}

TEST_CASE("simulation is reproducible per seed and sensitive to it") {
    SimulationSpec spec;
    spec.seed = 3;
    auto a = generate_simulation(spec);
    auto b = generate_simulation(spec);
    CHECK(a.true_scores == b.true_scores);
    REQUIRE(a.bundle.train.size() == b.bundle.train.size());
    for (std::size_t j = 0; j < a.bundle.train.size(); ++j) {
        CHECK(a.bundle.train[j].item == b.bundle.train[j].item);
        CHECK(a.bundle.train[j].label == b.bundle.train[j].label);
    }
    spec.seed = 4;
    auto c = generate_simulation(spec);
    CHECK(a.true_scores != c.true_scores);
}

TEST_CASE("simulation spec validation") {
    SimulationSpec spec;
    spec.reserve_per_user = 500;
    CHECK_THROWS_AS(spec.check(), std::invalid_argument);
    spec = SimulationSpec{};
    spec.list_length = 400;  // pool after the reserve is only 350
    CHECK_THROWS_AS(spec.check(), std::invalid_argument);
    spec = SimulationSpec{};
    spec.n_users = 0;
    CHECK_THROWS_AS(spec.check(), std::invalid_argument);
}

TEST_CASE("simulation save writes the bundle plus the score table") {
    SimulationSpec spec;
    spec.n_users = 20;
    spec.n_items = 30;
    spec.reserve_per_user = 10;
    spec.warm_items_per_user = 5;
    spec.list_length = 5;
    spec.warm_epochs = 3;
    auto sim = generate_simulation(spec);
    auto dir = (std::filesystem::temp_directory_path() / "sim_rt").string();
    save_simulation(sim, dir);
    auto r = load_bundle(dir);
    CHECK(r.train.size() == sim.bundle.train.size());
    CHECK(r.feedback_kind == FeedbackKind::List);
    CHECK(std::filesystem::exists(dir + "/scores.txt"));
}
