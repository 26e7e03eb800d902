#include "debiasrec/data.hpp"

#include <algorithm>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <random>
#include <sstream>
#include <stdexcept>

namespace debiasrec {

std::string to_string(FeedbackKind k) {
    switch (k) {
        case FeedbackKind::Explicit: return "explicit";
        case FeedbackKind::Implicit: return "implicit";
        case FeedbackKind::List: return "list";
    }
    return "explicit";
}

FeedbackKind feedback_kind_from_string(const std::string& s) {
    if (s == "explicit") return FeedbackKind::Explicit;
    if (s == "implicit") return FeedbackKind::Implicit;
    if (s == "list") return FeedbackKind::List;
    throw std::invalid_argument("unknown feedback kind: " + s);
}

int DatasetBundle::max_position() const {
    int p = 0;
    for (const auto& x : train) p = std::max(p, x.position);
    return p;
}

static void check_split(const std::vector<Interaction>& split, int n_users, int n_items,
                        const char* name) {
    for (const auto& x : split) {
        if (x.user < 0 || x.user >= n_users || x.item < 0 || x.item >= n_items)
            throw std::out_of_range(std::string("interaction out of range in ") + name);
        if (x.label != -1 && x.label != 1)
            throw std::invalid_argument(std::string("label must be -1 or +1 in ") + name);
        if (x.position < 0)
            throw std::invalid_argument(std::string("negative position in ") + name);
    }
}

void DatasetBundle::check() const {
    check_split(train, n_users, n_items, "train");
    check_split(uniform, n_users, n_items, "uniform");
    check_split(validation, n_users, n_items, "validation");
    check_split(test, n_users, n_items, "test");
}

int binarize(int rating) {
    if (rating < 1 || rating > 5) throw std::domain_error("rating must be in 1..5");
    return rating > 3 ? 1 : -1;
}

namespace {

struct RawRow {
    long user, item;
    int rating;
};

std::vector<RawRow> read_raw(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw std::runtime_error("cannot open " + path);
    std::vector<RawRow> rows;
    std::string line;
    std::size_t lineno = 0;
    while (std::getline(in, line)) {
        ++lineno;
        if (line.empty() || line.find_first_not_of(" \t\r") == std::string::npos) continue;
        std::istringstream ss(line);
        RawRow r;
        if (!(ss >> r.user >> r.item >> r.rating)) {
            throw std::runtime_error(path + ":" + std::to_string(lineno) + ": malformed line");
        }
        rows.push_back(r);
    }
    return rows;
}

int index_of(std::unordered_map<long, int>& map, long raw) {
    auto [it, inserted] = map.try_emplace(raw, static_cast<int>(map.size()));
    return it->second;
}

}  // namespace

DatasetBundle load_explicit(const std::string& path_biased, const std::string& path_unbiased,
                            const SplitRatios& ratios, std::uint64_t seed) {
    double total = ratios.uniform + ratios.validation + ratios.test;
    if (std::abs(total - 1.0) > 1e-9)
        throw std::invalid_argument("split ratios must sum to 1");

    DatasetBundle b;
    b.seed = seed;
    b.feedback_kind = FeedbackKind::Explicit;

    auto biased = read_raw(path_biased);
    auto unbiased = read_raw(path_unbiased);

    for (const auto& r : biased) {
        Interaction x;
        x.user = index_of(b.user_index, r.user);
        x.item = index_of(b.item_index, r.item);
        x.label = binarize(r.rating);
        b.train.push_back(x);
    }

    std::vector<Interaction> pool;
    for (const auto& r : unbiased) {
        Interaction x;
        x.user = index_of(b.user_index, r.user);
        x.item = index_of(b.item_index, r.item);
        x.label = binarize(r.rating);
        pool.push_back(x);
    }
    b.n_users = static_cast<int>(b.user_index.size());
    b.n_items = static_cast<int>(b.item_index.size());

    std::mt19937_64 rng(seed);
    std::shuffle(pool.begin(), pool.end(), rng);
    std::size_t n = pool.size();
    std::size_t n_uni = static_cast<std::size_t>(ratios.uniform * n + 0.5);
    std::size_t n_val = static_cast<std::size_t>(ratios.validation * n + 0.5);
    n_uni = std::min(n_uni, n);
    n_val = std::min(n_val, n - n_uni);

    b.uniform.assign(pool.begin(), pool.begin() + n_uni);
    b.validation.assign(pool.begin() + n_uni, pool.begin() + n_uni + n_val);

    // test is a relevance map: deduplicate (u,i), last wins
    std::unordered_map<std::int64_t, std::size_t> seen;
    std::vector<Interaction> test;
    for (std::size_t i = n_uni + n_val; i < n; ++i) {
        const auto& x = pool[i];
        std::int64_t key = static_cast<std::int64_t>(x.user) * b.n_items + x.item;
        auto it = seen.find(key);
        if (it == seen.end()) {
            seen[key] = test.size();
            test.push_back(x);
        } else {
            test[it->second] = x;
        }
    }
    b.test = std::move(test);
    b.check();
    return b;
}

DatasetBundle to_implicit(const DatasetBundle& bundle) {
    if (bundle.feedback_kind != FeedbackKind::Explicit)
        throw std::invalid_argument("to_implicit expects an explicit bundle");
    DatasetBundle out = bundle;
    out.train.clear();
    for (const auto& x : bundle.train)
        if (x.label > 0) out.train.push_back(x);
    if (out.train.empty() && !bundle.train.empty())
        std::cerr << "warning: to_implicit produced an empty training set\n";
    out.feedback_kind = FeedbackKind::Implicit;
    return out;
}

ObservationIndicator::ObservationIndicator(const std::vector<Interaction>& train, int n_users,
                                           int n_items)
    : n_items_(std::max(1, n_items)) {
    (void)n_users;
    for (const auto& x : train) pairs_[key(x.user, x.item)] = x.label;
}

bool ObservationIndicator::observed(int u, int i) const {
    return pairs_.count(key(u, i)) > 0;
}

std::optional<int> ObservationIndicator::observed_label(int u, int i) const {
    auto it = pairs_.find(key(u, i));
    if (it == pairs_.end()) return std::nullopt;
    return it->second;
}

namespace {

void write_split(const std::vector<Interaction>& split, const std::string& path) {
    std::ofstream out(path);
    if (!out) throw std::runtime_error("cannot write " + path);
    for (const auto& x : split)
        out << x.user << ' ' << x.item << ' ' << x.label << ' ' << x.position << '\n';
}

std::vector<Interaction> read_split(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw std::runtime_error("cannot open " + path);
    std::vector<Interaction> split;
    Interaction x;
    while (in >> x.user >> x.item >> x.label >> x.position) split.push_back(x);
    return split;
}

}  // namespace

void save_bundle(const DatasetBundle& bundle, const std::string& dir) {
    std::filesystem::create_directories(dir);
    write_split(bundle.train, dir + "/train.txt");
    write_split(bundle.uniform, dir + "/uniform.txt");
    write_split(bundle.validation, dir + "/validation.txt");
    write_split(bundle.test, dir + "/test.txt");
    std::ofstream meta(dir + "/metadata.txt");
    meta << "n_users=" << bundle.n_users << '\n'
         << "n_items=" << bundle.n_items << '\n'
         << "feedback_kind=" << to_string(bundle.feedback_kind) << '\n'
         << "seed=" << bundle.seed << '\n';
}

DatasetBundle load_bundle(const std::string& dir) {
    DatasetBundle b;
    b.train = read_split(dir + "/train.txt");
    b.uniform = read_split(dir + "/uniform.txt");
    b.validation = read_split(dir + "/validation.txt");
    b.test = read_split(dir + "/test.txt");
    std::ifstream meta(dir + "/metadata.txt");
    if (!meta) throw std::runtime_error("cannot open " + dir + "/metadata.txt");
    std::string line;
    while (std::getline(meta, line)) {
        auto eq = line.find('=');
        if (eq == std::string::npos) continue;
        std::string key = line.substr(0, eq), val = line.substr(eq + 1);
        if (key == "n_users") b.n_users = std::stoi(val);
        else if (key == "n_items") b.n_items = std::stoi(val);
        else if (key == "feedback_kind") b.feedback_kind = feedback_kind_from_string(val);
        else if (key == "seed") b.seed = std::stoull(val);
    }
    b.check();
    return b;
}

}  // namespace debiasrec
