#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include "debiasrec/metrics.hpp"

#include <algorithm>
#include <cmath>
#include <random>

using namespace debiasrec;

namespace {

// random test setup: a model plus a labeled test set over its pairs
struct Instance {
    FactorModel model;
    std::vector<Interaction> test;
};

Instance random_instance(std::mt19937_64& rng, int n_users = 6, int n_items = 8,
                         double tie_prob = 0.3) {
    Instance inst;
    inst.model = FactorModel::init(n_users, n_items, 3, rng());
    // quantize some factors so score ties actually occur
    if (std::uniform_real_distribution<double>(0, 1)(rng) < tie_prob) {
        for (auto& v : inst.model.user_factors) v = std::round(v * 2) / 2;
        for (auto& v : inst.model.item_factors) v = std::round(v * 2) / 2;
    }
    std::uniform_int_distribution<int> du(0, n_users - 1), di(0, n_items - 1), dl(0, 1);
    int n = 5 + static_cast<int>(rng() % 40);
    bool has_pos = false, has_neg = false;
    for (int j = 0; j < n; ++j) {
        int label = dl(rng) ? 1 : -1;
        inst.test.push_back({du(rng), di(rng), label, 0});
        (label > 0 ? has_pos : has_neg) = true;
    }
    if (!has_pos) inst.test.push_back({0, 0, 1, 0});
    if (!has_neg) inst.test.push_back({0, 1, -1, 0});
    return inst;
}

// O(n^2) concordant-pair oracle with half credit for ties
double auc_oracle(const FactorModel& model, const std::vector<Interaction>& test) {
    double conc = 0;
    long pairs = 0;
    for (const auto& a : test) {
        if (a.label <= 0) continue;
        double sa = model.predict(a.user, a.item);
        for (const auto& b : test) {
            if (b.label > 0) continue;
            double sb = model.predict(b.user, b.item);
            conc += sa > sb ? 1.0 : (sa == sb ? 0.5 : 0.0);
            ++pairs;
        }
    }
    return conc / static_cast<double>(pairs);
}

// direct-definition per-user NDCG@k, independently coded
double ndcg_oracle(const FactorModel& model, const std::vector<Interaction>& test, int k) {
    double total = 0;
    int users = 0;
    for (int u = 0;; ++u) {
        std::vector<Interaction> mine;
        for (const auto& x : test)
            if (x.user == u) mine.push_back(x);
        if (mine.empty()) {
            bool any_later = false;
            for (const auto& x : test) any_later = any_later || x.user > u;
            if (!any_later) break;
            continue;
        }
        int n_pos = 0;
        for (const auto& x : mine) n_pos += x.label > 0;
        if (n_pos == 0) continue;
        std::sort(mine.begin(), mine.end(), [&](const Interaction& a, const Interaction& b) {
            double sa = model.predict(a.user, a.item), sb = model.predict(b.user, b.item);
            return sa != sb ? sa > sb : a.item < b.item;
        });
        double dcg = 0, idcg = 0;
        for (int r = 0; r < k && r < static_cast<int>(mine.size()); ++r)
            if (mine[r].label > 0) dcg += std::log(2.0) / std::log(r + 2.0);
        for (int r = 0; r < k && r < n_pos; ++r) idcg += std::log(2.0) / std::log(r + 2.0);
        total += dcg / idcg;
        ++users;
    }
    return total / users;
}

}  // namespace

TEST_CASE("auc matches the quadratic concordant-pair oracle") {
    std::mt19937_64 rng(11);
    for (int t = 0; t < 200; ++t) {
        auto inst = random_instance(rng);
        CHECK(auc(inst.model, inst.test) ==
              doctest::Approx(auc_oracle(inst.model, inst.test)).epsilon(1e-12));
    }
}

TEST_CASE("auc handles hand-checked corner cases") {
    FactorModel m;
    m.n_users = 1;
    m.n_items = 4;
    m.dim = 1;
    m.user_factors = {1.0};
    m.item_factors = {3.0, 2.0, 1.0, 0.0};
    // perfect ranking
    std::vector<Interaction> perfect = {{0, 0, 1, 0}, {0, 1, 1, 0}, {0, 2, -1, 0}, {0, 3, -1, 0}};
    CHECK(auc(m, perfect) == doctest::Approx(1.0));
    // inverted ranking
    std::vector<Interaction> inverted = {{0, 0, -1, 0}, {0, 1, -1, 0}, {0, 2, 1, 0}, {0, 3, 1, 0}};
    CHECK(auc(m, inverted) == doctest::Approx(0.0));
    // all scores tied -> 0.5 by the average-rank convention
    m.item_factors = {1.0, 1.0, 1.0, 1.0};
    CHECK(auc(m, perfect) == doctest::Approx(0.5));
    std::vector<Interaction> one_class = {{0, 0, 1, 0}, {0, 1, 1, 0}};
    CHECK_THROWS_AS(auc(m, one_class), std::domain_error);
}

TEST_CASE("ndcg matches the direct per-user definition") {
    std::mt19937_64 rng(22);
    for (int t = 0; t < 100; ++t) {
        auto inst = random_instance(rng);
        for (int k : {1, 3, 5})
            CHECK(ndcg_at_k(inst.model, inst.test, k) ==
                  doctest::Approx(ndcg_oracle(inst.model, inst.test, k)).epsilon(1e-12));
    }
}

TEST_CASE("ndcg stays in [0, 1] and saturates once k covers every item") {
    std::mt19937_64 rng(33);
    for (int t = 0; t < 30; ++t) {
        auto inst = random_instance(rng);
        for (int k = 1; k <= 8; ++k) {
            double v = ndcg_at_k(inst.model, inst.test, k);
            CHECK(v >= 0.0);
            CHECK(v <= 1.0 + 1e-12);
        }
        // beyond the largest per-user list the value stops changing
        int cover = static_cast<int>(inst.test.size());
        CHECK(ndcg_at_k(inst.model, inst.test, cover) ==
              doctest::Approx(ndcg_at_k(inst.model, inst.test, cover + 5)).epsilon(1e-15));
    }
}

TEST_CASE("ndcg ignores users without positive feedback") {
    FactorModel m;
    m.n_users = 2;
    m.n_items = 2;
    m.dim = 1;
    m.user_factors = {1.0, 1.0};
    m.item_factors = {2.0, 1.0};
    // user 1 has only negatives and must not dilute the average
    std::vector<Interaction> test = {{0, 0, 1, 0}, {0, 1, -1, 0}, {1, 0, -1, 0}, {1, 1, -1, 0}};
    CHECK(ndcg_at_k(m, test, 1) == doctest::Approx(1.0));
    std::vector<Interaction> no_pos = {{0, 0, -1, 0}};
    CHECK_THROWS_AS(ndcg_at_k(m, no_pos, 1), std::domain_error);
    CHECK_THROWS_AS(ndcg_at_k(m, test, 0), std::domain_error);
}

TEST_CASE("nll of the zero predictor is exactly -log 2") {
    FactorModel m;
    m.n_users = 2;
    m.n_items = 2;
    m.dim = 1;
    m.user_factors = {0.0, 0.0};
    m.item_factors = {1.0, -1.0};
    std::vector<Interaction> test = {{0, 0, 1, 0}, {0, 1, -1, 0}, {1, 0, 1, 0}};
    CHECK(nll(m, test) == doctest::Approx(-std::log(2.0)).epsilon(1e-15));
    // nonpositive in general
    std::mt19937_64 rng(44);
    for (int t = 0; t < 20; ++t) {
        auto inst = random_instance(rng);
        CHECK(nll(inst.model, inst.test) <= 0.0);
    }
}

TEST_CASE("evaluate assembles all metrics") {
    std::mt19937_64 rng(55);
    auto inst = random_instance(rng);
    auto rep = evaluate(inst.model, inst.test, {1, 5});
    CHECK(rep.auc == doctest::Approx(auc(inst.model, inst.test)));
    CHECK(rep.ndcg_at.size() == 2);
    CHECK(rep.ndcg_at.at(5) == doctest::Approx(ndcg_at_k(inst.model, inst.test, 5)));
}

TEST_CASE("item popularity counts positive training feedback only") {
    std::vector<Interaction> train = {{0, 0, 1, 0}, {1, 0, 1, 0}, {0, 1, -1, 0}, {1, 2, 1, 0}};
    auto pop = item_popularity(train, 4);
    CHECK(pop == std::vector<long>{2, 0, 1, 0});
}

TEST_CASE("popularity slices split the test set by training frequency") {
    DatasetBundle b;
    b.n_users = 2;
    b.n_items = 5;
    // item 0 is by far the most popular
    b.train = {{0, 0, 1, 0}, {1, 0, 1, 0}, {0, 1, 1, 0}};
    b.test = {{0, 0, 1, 0}, {0, 2, -1, 0}, {1, 3, 1, 0}, {1, 4, -1, 0}};
    FactorModel m = FactorModel::init(2, 5, 2, 0);
    auto rep = popularity_slices(m, b, 5, 0.2);
    REQUIRE(rep.popular_items.size() == 1);
    CHECK(rep.popular_items[0] == 0);
    CHECK(rep.ndcg_popular == doctest::Approx(1.0));  // single positive item
    CHECK(rep.ndcg_unpopular > 0.0);
}

TEST_CASE("rank correlation is a Spearman coefficient with tie handling") {
    CHECK(rank_correlation({1, 2, 3, 4}, {10, 20, 30, 40}) == doctest::Approx(1.0));
    CHECK(rank_correlation({1, 2, 3, 4}, {40, 30, 20, 10}) == doctest::Approx(-1.0));
    // monotone transform invariance
    CHECK(rank_correlation({1, 2, 3, 4}, {1, 4, 9, 16}) == doctest::Approx(1.0));
    // constant series has zero variance
    CHECK(rank_correlation({1, 2, 3}, {5, 5, 5}) == doctest::Approx(0.0));
    CHECK_THROWS_AS(rank_correlation({1.0}, {2.0}), std::invalid_argument);
    CHECK_THROWS_AS(rank_correlation({1, 2}, {1, 2, 3}), std::invalid_argument);
    // hand-checked tied case: ranks of a = {1.5, 1.5, 3}, b = {1, 2, 3}
    double r = rank_correlation({2, 2, 5}, {1, 2, 3});
    CHECK(r == doctest::Approx(0.5 * std::sqrt(3.0)).epsilon(1e-12));
}
