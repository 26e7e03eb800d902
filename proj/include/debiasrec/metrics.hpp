#pragma once

#include <map>
#include <string>
#include <vector>

#include "debiasrec/data.hpp"
#include "debiasrec/model.hpp"

namespace debiasrec {

struct MetricsReport {
    double nll = 0.0;
    double auc = 0.0;
    std::map<int, double> ndcg_at;

    void save_csv(const std::string& path, const std::string& method) const;
};

// -(1/n) sum log(1 + exp(-r f)); nonpositive, closer to 0 is better
double nll(const FactorModel& model, const std::vector<Interaction>& test);

// Mann-Whitney statistic over the whole test set, average rank for ties
double auc(const FactorModel& model, const std::vector<Interaction>& test);

// Per-user ranking of that user's test items, base-2 log discount,
// stable tie-break by item index; averaged over users with a positive.
double ndcg_at_k(const FactorModel& model, const std::vector<Interaction>& test, int k);

MetricsReport evaluate(const FactorModel& model, const std::vector<Interaction>& test,
                       const std::vector<int>& ndcg_ks = {5});

struct SlicedReport {
    double ndcg_popular = 0.0;
    double ndcg_unpopular = 0.0;
    std::vector<int> popular_items;
};

// Items split by training positive-feedback frequency; top fraction
// (ties broken by item index) forms the popular slice.
SlicedReport popularity_slices(const FactorModel& model, const DatasetBundle& bundle, int k,
                               double top_fraction = 0.2);

// frequency of positive training feedback per item
std::vector<long> item_popularity(const std::vector<Interaction>& train, int n_items);

// Spearman rank correlation, average ranks on ties
double rank_correlation(const std::vector<double>& a, const std::vector<double>& b);

}  // namespace debiasrec
