#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include "debiasrec/data.hpp"

#include <cstdio>
#include <filesystem>
#include <fstream>
#include <set>

using namespace debiasrec;

namespace {

std::string write_temp(const std::string& name, const std::string& content) {
    auto path = (std::filesystem::temp_directory_path() / name).string();
    std::ofstream out(path);
    out << content;
    return path;
}

}  // namespace

TEST_CASE("binarize maps the full rating scale") {
    // exhaustive: positive iff rating above the midpoint
    CHECK(binarize(1) == -1);
    CHECK(binarize(2) == -1);
    CHECK(binarize(3) == -1);
    CHECK(binarize(4) == 1);
    CHECK(binarize(5) == 1);
    CHECK_THROWS_AS(binarize(0), std::domain_error);
    CHECK_THROWS_AS(binarize(6), std::domain_error);
    CHECK_THROWS_AS(binarize(-3), std::domain_error);
}

TEST_CASE("load_explicit reindexes raw ids and splits the unbiased pool") {
    auto biased = write_temp("biased.txt",
                             "10 200 5\n"
                             "10 201 1\n"
                             "11 200 4\n"
                             "10 200 5\n");  // duplicate row stays (multiset)
    std::string lines;
    for (int j = 0; j < 100; ++j)
        lines += std::to_string(10 + j % 5) + " " + std::to_string(200 + j) + " " +
                 std::to_string(1 + j % 5) + "\n";
    auto unbiased = write_temp("unbiased.txt", lines);

    auto b = load_explicit(biased, unbiased, SplitRatios{0.1, 0.1, 0.8}, 7);
    CHECK(b.train.size() == 4);
    CHECK(b.feedback_kind == FeedbackKind::Explicit);
    CHECK(b.uniform.size() == 10);
    CHECK(b.validation.size() == 10);
    CHECK(b.test.size() == 80);
    // re-indexed ids are dense
    CHECK(b.user_index.at(10) == 0);
    CHECK(b.item_index.at(200) == 0);
    for (const auto& x : b.train) {
        CHECK(x.user < b.n_users);
        CHECK(x.item < b.n_items);
    }
    // identical seed gives an identical split
    auto b2 = load_explicit(biased, unbiased, SplitRatios{0.1, 0.1, 0.8}, 7);
    REQUIRE(b2.uniform.size() == b.uniform.size());
    for (std::size_t j = 0; j < b.uniform.size(); ++j) {
        CHECK(b2.uniform[j].user == b.uniform[j].user);
        CHECK(b2.uniform[j].item == b.uniform[j].item);
    }
    // different seed permutes the pool
    auto b3 = load_explicit(biased, unbiased, SplitRatios{0.1, 0.1, 0.8}, 8);
    bool same = true;
    for (std::size_t j = 0; j < b.uniform.size(); ++j)
        same = same && b3.uniform[j].item == b.uniform[j].item;
    CHECK_FALSE(same);
}

TEST_CASE("load_explicit deduplicates test pairs, last occurrence wins") {
    auto biased = write_temp("biased_dup.txt", "0 0 5\n");
    // same pair rated twice in the unbiased file
    auto unbiased = write_temp("unbiased_dup.txt",
                               "0 0 1\n"
                               "0 0 5\n");
    auto b = load_explicit(biased, unbiased, SplitRatios{0.0, 0.0, 1.0}, 0);
    REQUIRE(b.test.size() == 1);
    // whichever order the shuffle leaves, the survivor is the later pool entry
    std::set<int> labels;
    for (const auto& x : b.test) labels.insert(x.label);
    CHECK(labels.size() == 1);
}

TEST_CASE("malformed input reports the offending line") {
    auto bad = write_temp("bad.txt", "0 0 5\nnot a row\n");
    auto ok = write_temp("ok.txt", "0 0 5\n");
    CHECK_THROWS_WITH_AS(load_explicit(bad, ok, SplitRatios{0, 0, 1.0}, 0),
                         doctest::Contains(":2:"), std::runtime_error);
}

TEST_CASE("to_implicit keeps only positive training rows") {
    auto biased = write_temp("imp_b.txt", "0 0 5\n0 1 1\n1 0 4\n");
    auto unbiased = write_temp("imp_u.txt", "0 0 5\n0 1 1\n1 1 2\n");
    auto b = load_explicit(biased, unbiased, SplitRatios{0, 0, 1.0}, 0);
    auto imp = to_implicit(b);
    CHECK(imp.feedback_kind == FeedbackKind::Implicit);
    CHECK(imp.train.size() == 2);
    for (const auto& x : imp.train) CHECK(x.label == 1);
    // other splits untouched
    CHECK(imp.test.size() == b.test.size());
    CHECK_THROWS_AS(to_implicit(imp), std::invalid_argument);
}

TEST_CASE("bundle invariant checks catch bad rows") {
    DatasetBundle b;
    b.n_users = 2;
    b.n_items = 2;
    b.train.push_back({0, 0, 1, 0});
    CHECK_NOTHROW(b.check());
    b.train.push_back({0, 5, 1, 0});
    CHECK_THROWS_AS(b.check(), std::out_of_range);
    b.train.back() = {0, 1, 0, 0};  // label outside {-1, +1}
    CHECK_THROWS_AS(b.check(), std::invalid_argument);
    b.train.back() = {0, 1, 1, -2};
    CHECK_THROWS_AS(b.check(), std::invalid_argument);
}

TEST_CASE("observation indicator tracks observed pairs and labels") {
    std::vector<Interaction> train = {{0, 1, 1, 0}, {1, 0, -1, 0}, {0, 1, -1, 0}};
    ObservationIndicator obs(train, 2, 3);
    CHECK(obs.observed(0, 1));
    CHECK(obs.observed(1, 0));
    CHECK_FALSE(obs.observed(0, 0));
    CHECK_FALSE(obs.observed(1, 2));
    CHECK(obs.count() == 2);
    CHECK(obs.observed_label(0, 1) == -1);  // last occurrence wins
    CHECK(obs.observed_label(1, 0) == -1);
    CHECK_FALSE(obs.observed_label(0, 2).has_value());
}

TEST_CASE("bundle save/load round-trips every split and the metadata") {
    DatasetBundle b;
    b.n_users = 3;
    b.n_items = 4;
    b.feedback_kind = FeedbackKind::List;
    b.seed = 42;
    b.train = {{0, 1, 1, 1}, {1, 2, -1, 3}};
    b.uniform = {{2, 0, 1, 0}};
    b.validation = {{1, 1, -1, 0}};
    b.test = {{0, 3, 1, 0}, {2, 2, -1, 0}};

    auto dir = (std::filesystem::temp_directory_path() / "bundle_rt").string();
    save_bundle(b, dir);
    auto r = load_bundle(dir);
    CHECK(r.n_users == b.n_users);
    CHECK(r.n_items == b.n_items);
    CHECK(r.feedback_kind == FeedbackKind::List);
    CHECK(r.seed == 42);
    REQUIRE(r.train.size() == b.train.size());
    CHECK(r.train[1].position == 3);
    CHECK(r.max_position() == 3);
    REQUIRE(r.test.size() == 2);
    CHECK(r.test[1].item == 2);
    CHECK(r.test[1].label == -1);
}

TEST_CASE("feedback kind strings round-trip") {
    for (auto k : {FeedbackKind::Explicit, FeedbackKind::Implicit, FeedbackKind::List})
        CHECK(feedback_kind_from_string(to_string(k)) == k);
    CHECK_THROWS_AS(feedback_kind_from_string("mystery"), std::invalid_argument);
}
