#include "debiasrec/metrics.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <map>
#include <numeric>
#include <stdexcept>

namespace debiasrec {

void MetricsReport::save_csv(const std::string& path, const std::string& method) const {
    std::ofstream out(path);
    if (!out) throw std::runtime_error("cannot write " + path);
    out << "method,nll,auc";
    for (const auto& [k, _] : ndcg_at) out << ",ndcg@" << k;
    out << '\n' << method << ',' << nll << ',' << auc;
    for (const auto& [_, v] : ndcg_at) out << ',' << v;
    out << '\n';
}

double nll(const FactorModel& model, const std::vector<Interaction>& test) {
    if (test.empty()) throw std::domain_error("nll on empty test");
    double sum = 0;
    for (const auto& x : test) {
        double z = -x.label * model.predict(x.user, x.item);
        sum += z > 0 ? z + std::log1p(std::exp(-z)) : std::log1p(std::exp(z));
    }
    return -sum / static_cast<double>(test.size());
}

double auc(const FactorModel& model, const std::vector<Interaction>& test) {
    std::size_t n = test.size();
    std::vector<double> scores(n);
    std::size_t n_pos = 0;
    for (std::size_t j = 0; j < n; ++j) {
        scores[j] = model.predict(test[j].user, test[j].item);
        n_pos += test[j].label > 0;
    }
    if (n_pos == 0 || n_pos == n) throw std::domain_error("auc needs both classes");

    // ascending ranks, average rank on ties
    std::vector<std::size_t> order(n);
    std::iota(order.begin(), order.end(), std::size_t{0});
    std::sort(order.begin(), order.end(),
              [&](std::size_t a, std::size_t b) { return scores[a] < scores[b]; });
    std::vector<double> rank(n);
    std::size_t j = 0;
    while (j < n) {
        std::size_t k = j;
        while (k + 1 < n && scores[order[k + 1]] == scores[order[j]]) ++k;
        double avg = (static_cast<double>(j) + k) / 2.0 + 1.0;
        for (std::size_t t = j; t <= k; ++t) rank[order[t]] = avg;
        j = k + 1;
    }

    double rank_sum = 0;
    for (std::size_t t = 0; t < n; ++t)
        if (test[t].label > 0) rank_sum += rank[t];
    double np = static_cast<double>(n_pos);
    return (rank_sum - (np + 1) * np / 2.0) / (np * (static_cast<double>(n) - np));
}

double ndcg_at_k(const FactorModel& model, const std::vector<Interaction>& test, int k) {
    if (k < 1) throw std::domain_error("ndcg_at_k needs k >= 1");
    std::map<int, std::vector<const Interaction*>> by_user;
    for (const auto& x : test) by_user[x.user].push_back(&x);

    double total = 0;
    std::size_t users = 0;
    for (auto& [u, items] : by_user) {
        std::size_t n_pos = 0;
        for (const auto* x : items) n_pos += x->label > 0;
        if (n_pos == 0) continue;

        // descending score, stable tie-break by item index
        std::stable_sort(items.begin(), items.end(), [&](const Interaction* a, const Interaction* b) {
            double sa = model.predict(a->user, a->item), sb = model.predict(b->user, b->item);
            if (sa != sb) return sa > sb;
            return a->item < b->item;
        });
        double dcg = 0;
        for (std::size_t r = 0; r < items.size() && r < static_cast<std::size_t>(k); ++r)
            if (items[r]->label > 0) dcg += 1.0 / std::log2(static_cast<double>(r) + 2.0);
        double idcg = 0;
        for (std::size_t r = 0; r < n_pos && r < static_cast<std::size_t>(k); ++r)
            idcg += 1.0 / std::log2(static_cast<double>(r) + 2.0);
        total += dcg / idcg;
        ++users;
    }
    if (users == 0) throw std::domain_error("ndcg: no user with positive test feedback");
    return total / static_cast<double>(users);
}

MetricsReport evaluate(const FactorModel& model, const std::vector<Interaction>& test,
                       const std::vector<int>& ndcg_ks) {
    MetricsReport r;
    r.nll = nll(model, test);
    r.auc = auc(model, test);
    for (int k : ndcg_ks) r.ndcg_at[k] = ndcg_at_k(model, test, k);
    return r;
}

std::vector<long> item_popularity(const std::vector<Interaction>& train, int n_items) {
    std::vector<long> pop(n_items, 0);
    for (const auto& x : train)
        if (x.label > 0) ++pop[x.item];
    return pop;
}

SlicedReport popularity_slices(const FactorModel& model, const DatasetBundle& bundle, int k,
                               double top_fraction) {
    auto pop = item_popularity(bundle.train, bundle.n_items);
    std::vector<int> order(bundle.n_items);
    std::iota(order.begin(), order.end(), 0);
    std::stable_sort(order.begin(), order.end(), [&](int a, int b) { return pop[a] > pop[b]; });
    std::size_t n_top =
        static_cast<std::size_t>(std::ceil(top_fraction * bundle.n_items));
    std::vector<char> is_popular(bundle.n_items, 0);
    SlicedReport rep;
    for (std::size_t j = 0; j < n_top && j < order.size(); ++j) {
        is_popular[order[j]] = 1;
        rep.popular_items.push_back(order[j]);
    }
    std::vector<Interaction> pop_test, unpop_test;
    for (const auto& x : bundle.test)
        (is_popular[x.item] ? pop_test : unpop_test).push_back(x);
    rep.ndcg_popular = pop_test.empty() ? 0.0 : ndcg_at_k(model, pop_test, k);
    rep.ndcg_unpopular = unpop_test.empty() ? 0.0 : ndcg_at_k(model, unpop_test, k);
    return rep;
}

namespace {
std::vector<double> average_ranks(const std::vector<double>& v) {
    std::size_t n = v.size();
    std::vector<std::size_t> order(n);
    std::iota(order.begin(), order.end(), std::size_t{0});
    std::sort(order.begin(), order.end(),
              [&](std::size_t a, std::size_t b) { return v[a] < v[b]; });
    std::vector<double> rank(n);
    std::size_t j = 0;
    while (j < n) {
        std::size_t k = j;
        while (k + 1 < n && v[order[k + 1]] == v[order[j]]) ++k;
        double avg = (static_cast<double>(j) + k) / 2.0 + 1.0;
        for (std::size_t t = j; t <= k; ++t) rank[order[t]] = avg;
        j = k + 1;
    }
    return rank;
}
}  // namespace

double rank_correlation(const std::vector<double>& a, const std::vector<double>& b) {
    if (a.size() != b.size() || a.size() < 2)
        throw std::invalid_argument("rank_correlation needs two equal-length series");
    auto ra = average_ranks(a), rb = average_ranks(b);
    double ma = 0, mb = 0;
    for (std::size_t j = 0; j < ra.size(); ++j) {
        ma += ra[j];
        mb += rb[j];
    }
    ma /= ra.size();
    mb /= rb.size();
    double num = 0, va = 0, vb = 0;
    for (std::size_t j = 0; j < ra.size(); ++j) {
        num += (ra[j] - ma) * (rb[j] - mb);
        va += (ra[j] - ma) * (ra[j] - ma);
        vb += (rb[j] - mb) * (rb[j] - mb);
    }
    if (va == 0 || vb == 0) return 0.0;
    return num / std::sqrt(va * vb);
}

}  // namespace debiasrec
