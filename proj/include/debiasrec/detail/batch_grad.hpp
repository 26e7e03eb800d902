#pragma once

#include <unordered_map>
#include <vector>

#include "debiasrec/model.hpp"

namespace debiasrec::detail {

// Sparse accumulator for a minibatch gradient over embedding rows. Rows are
// disjoint, so the apply order does not affect the result.
struct BatchGrad {
    int dim = 0;
    std::unordered_map<int, std::vector<double>> user_rows;
    std::unordered_map<int, std::vector<double>> item_rows;
    std::unordered_map<int, double> user_biases;
    std::unordered_map<int, double> item_biases;
    double global_bias = 0.0;

    explicit BatchGrad(int d) : dim(d) {}

    void add_user(int u, const double* v, double c) {
        auto& row = user_rows.try_emplace(u, dim, 0.0).first->second;
        for (int k = 0; k < dim; ++k) row[k] += c * v[k];
    }
    void add_item(int i, const double* v, double c) {
        auto& row = item_rows.try_emplace(i, dim, 0.0).first->second;
        for (int k = 0; k < dim; ++k) row[k] += c * v[k];
    }
    // df/dbias = 1 for the user, item and global bias alike
    void add_bias(int u, int i, double c) {
        user_biases[u] += c;
        item_biases[i] += c;
        global_bias += c;
    }

    const std::vector<double>* user_row(int u) const {
        auto it = user_rows.find(u);
        return it == user_rows.end() ? nullptr : &it->second;
    }
    const std::vector<double>* item_row(int i) const {
        auto it = item_rows.find(i);
        return it == item_rows.end() ? nullptr : &it->second;
    }
    double user_bias(int u) const {
        auto it = user_biases.find(u);
        return it == user_biases.end() ? 0.0 : it->second;
    }
    double item_bias(int i) const {
        auto it = item_biases.find(i);
        return it == item_biases.end() ? 0.0 : it->second;
    }

    // theta <- theta (1 - lr*decay) - lr * grad; biases are exempt from the
    // decay so base rates are not pulled toward zero
    void apply(FactorModel& model, double lr, double decay) const {
        // hand-built models may arrive without bias vectors
        model.user_bias.resize(model.n_users, 0.0);
        model.item_bias.resize(model.n_items, 0.0);
        if (decay > 0) {
            double shrink = lr * decay;
            for (auto& v : model.user_factors) v -= shrink * v;
            for (auto& v : model.item_factors) v -= shrink * v;
        }
        for (const auto& [u, row] : user_rows) {
            double* pu = model.user_row(u);
            for (int k = 0; k < dim; ++k) pu[k] -= lr * row[k];
        }
        for (const auto& [i, row] : item_rows) {
            double* qi = model.item_row(i);
            for (int k = 0; k < dim; ++k) qi[k] -= lr * row[k];
        }
        for (const auto& [u, g] : user_biases) model.user_bias[u] -= lr * g;
        for (const auto& [i, g] : item_biases) model.item_bias[i] -= lr * g;
        model.global_bias -= lr * global_bias;
    }
};

}  // namespace debiasrec::detail
