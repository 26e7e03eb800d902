#include "debiasrec/framework.hpp"

#include "debiasrec/detail/batch_grad.hpp"

#include <cmath>
#include <fstream>
#include <random>
#include <stdexcept>

namespace debiasrec {

DebiasConfig identity_config() {
    DebiasConfig c;
    c.w1 = [](const Interaction&, std::size_t) { return 1.0; };
    c.w2 = [](int, int) { return 0.0; };
    c.m = [](int, int) { return 0.0; };
    c.name = "identity";
    return c;
}

double PropensityTable::at(int label) const {
    double q = label > 0 ? q_positive : q_negative;
    if (q <= 0) throw std::domain_error("propensity must be positive");
    return q;
}

void PropensityTable::save(const std::string& path) const {
    std::ofstream out(path);
    if (!out) throw std::runtime_error("cannot write " + path);
    out.precision(17);
    out << "method=" << method << '\n'
        << "q_positive=" << q_positive << '\n'
        << "q_negative=" << q_negative << '\n';
}

PropensityTable PropensityTable::load(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw std::runtime_error("cannot open " + path);
    PropensityTable t;
    std::string line;
    while (std::getline(in, line)) {
        auto eq = line.find('=');
        if (eq == std::string::npos) continue;
        std::string key = line.substr(0, eq), val = line.substr(eq + 1);
        if (key == "method") t.method = val;
        else if (key == "q_positive") t.q_positive = std::stod(val);
        else if (key == "q_negative") t.q_negative = std::stod(val);
    }
    return t;
}

double debiased_risk(const FactorModel& model, const std::vector<Interaction>& train,
                     const std::vector<std::pair<int, int>>& pair_sample,
                     const DebiasConfig& config, LossKind loss, int n_users, int n_items) {
    if (train.empty()) throw std::domain_error("debiased_risk on empty train");
    double sum1 = 0;
    for (std::size_t k = 0; k < train.size(); ++k) {
        const auto& x = train[k];
        double w = config.w1(x, k);
        if (w < 0) throw std::invalid_argument("negative w1 from config " + config.name);
        sum1 += w * loss_value(loss, model.predict(x.user, x.item), x.label);
    }
    sum1 /= static_cast<double>(train.size());

    double sum2 = 0;
    if (!pair_sample.empty()) {
        for (const auto& [u, i] : pair_sample) {
            double w = config.w2(u, i);
            if (w < 0 && !config.allow_negative_w2)
                throw std::invalid_argument("negative w2 from config " + config.name);
            if (w == 0) continue;
            sum2 += w * loss_value(loss, model.predict(u, i), config.m(u, i));
        }
        double scale = static_cast<double>(n_users) * n_items / pair_sample.size();
        sum2 *= scale;
    }
    return sum1 + sum2;
}

std::vector<std::pair<int, int>> all_pairs(int n_users, int n_items) {
    std::vector<std::pair<int, int>> pairs;
    pairs.reserve(static_cast<std::size_t>(n_users) * n_items);
    for (int u = 0; u < n_users; ++u)
        for (int i = 0; i < n_items; ++i) pairs.emplace_back(u, i);
    return pairs;
}

std::vector<std::pair<int, int>> sample_pairs(int n_users, int n_items, std::size_t count,
                                              std::uint64_t seed) {
    std::mt19937_64 rng(seed);
    std::uniform_int_distribution<int> du(0, n_users - 1), di(0, n_items - 1);
    std::vector<std::pair<int, int>> pairs(count);
    for (auto& p : pairs) p = {du(rng), di(rng)};
    return pairs;
}

DebiasConfig config_ips(const PropensityTable& q, std::size_t n_train, int n_users, int n_items,
                        const ObservationIndicator& obs) {
    (void)obs;
    double scale = static_cast<double>(n_train) / (static_cast<double>(n_users) * n_items);
    DebiasConfig c;
    c.w1 = [q, scale](const Interaction& x, std::size_t) { return scale / q.at(x.label); };
    c.w2 = [](int, int) { return 0.0; };
    c.m = [](int, int) { return 0.0; };
    c.name = "ips";
    return c;
}

DebiasConfig config_imputation(double lambda, double m_value, std::size_t n_train, int n_users,
                               int n_items) {
    double ui = static_cast<double>(n_users) * n_items;
    double w1 = static_cast<double>(n_train) / ui;
    double w2 = lambda / ui;
    DebiasConfig c;
    c.w1 = [w1](const Interaction&, std::size_t) { return w1; };
    c.w2 = [w2](int, int) { return w2; };
    c.m = [m_value](int, int) { return m_value; };
    c.name = "imputation";
    return c;
}

DebiasConfig config_doubly_robust(const PropensityTable& q, const ObservationIndicator& obs,
                                  std::function<double(int, int)> m_table, std::size_t n_train,
                                  int n_users, int n_items) {
    double ui = static_cast<double>(n_users) * n_items;
    double scale = static_cast<double>(n_train) / ui;
    DebiasConfig c;
    c.w1 = [q, scale](const Interaction& x, std::size_t) { return scale / q.at(x.label); };
    c.w2 = [q, obs, ui](int u, int i) {
        auto label = obs.observed_label(u, i);
        if (!label) return 1.0 / ui;
        return 1.0 / ui - 1.0 / (q.at(*label) * ui);
    };
    c.m = std::move(m_table);
    c.allow_negative_w2 = true;  // O=1 with q<1 pushes w2 below zero
    c.name = "doubly_robust";
    return c;
}

DebiasConfig config_negative_weighting(std::function<double(int, int)> exposure,
                                       const ObservationIndicator& obs, double negative_label) {
    DebiasConfig c;
    c.w1 = [](const Interaction&, std::size_t) { return 1.0; };
    c.w2 = [exposure = std::move(exposure), obs](int u, int i) {
        return obs.observed(u, i) ? 0.0 : exposure(u, i);
    };
    c.m = [negative_label](int, int) { return negative_label; };
    c.name = "negative_weighting";
    return c;
}

DebiasConfig config_ips_variant(const PropensityTable& q, const ObservationIndicator& obs,
                                std::size_t n_train, int n_users, int n_items,
                                double negative_label) {
    double ui = static_cast<double>(n_users) * n_items;
    double scale = static_cast<double>(n_train) / ui;
    DebiasConfig c;
    c.w1 = [q, scale](const Interaction& x, std::size_t) { return scale / q.at(x.label); };
    c.w2 = [q, obs, ui](int u, int i) {
        auto label = obs.observed_label(u, i);
        if (!label) return 1.0 / ui;
        return 1.0 / ui - 1.0 / (q.at(*label) * ui);
    };
    c.m = [negative_label](int, int) { return negative_label; };
    c.allow_negative_w2 = true;
    c.name = "ips_variant";
    return c;
}

DebiasConfig config_position_ips(const std::vector<double>& position_propensity) {
    DebiasConfig c;
    c.w1 = [qt = position_propensity](const Interaction& x, std::size_t) {
        if (!x.has_position() || static_cast<std::size_t>(x.position) > qt.size())
            throw std::out_of_range("position-IPS needs a position propensity per rank");
        double q = qt[x.position - 1];
        if (q <= 0) throw std::domain_error("position propensity must be positive");
        return 1.0 / q;
    };
    c.w2 = [](int, int) { return 0.0; };
    c.m = [](int, int) { return 0.0; };
    c.name = "position_ips";
    return c;
}

DebiasConfig config_conformity_offset(double alpha, std::function<double(int, int)> bias_table,
                                      const ObservationIndicator& obs, std::size_t n_train) {
    if (alpha <= 0 || alpha > 1) throw std::invalid_argument("alpha must be in (0, 1]");
    double c2 = (1.0 - alpha) / (alpha * static_cast<double>(n_train));
    DebiasConfig c;
    c.w1 = [](const Interaction&, std::size_t) { return 1.0; };
    c.w2 = [c2, obs](int u, int i) { return obs.observed(u, i) ? c2 : 0.0; };
    c.m = [bias_table = std::move(bias_table)](int u, int i) { return bias_table(u, i); };
    c.name = "conformity_offset";
    return c;
}

PropensityTable estimate_propensity_naive_bayes(const std::vector<Interaction>& train,
                                                const std::vector<Interaction>& uniform,
                                                int n_users, int n_items) {
    if (uniform.empty()) throw std::invalid_argument("naive bayes needs a uniform split");
    double n_pos_t = 0, n_pos_u = 0;
    for (const auto& x : train) n_pos_t += x.label > 0;
    for (const auto& x : uniform) n_pos_u += x.label > 0;
    double p_pos_given_o = n_pos_t / train.size();
    double p_o = static_cast<double>(train.size()) / (static_cast<double>(n_users) * n_items);
    double p_pos = n_pos_u / uniform.size();
    if (p_pos <= 0 || p_pos >= 1)
        throw std::runtime_error("naive bayes: a label class is absent from the uniform split");
    PropensityTable t;
    t.q_positive = p_pos_given_o * p_o / p_pos;
    t.q_negative = (1.0 - p_pos_given_o) * p_o / (1.0 - p_pos);
    t.method = "naive_bayes";
    return t;
}

double weight_mean_square(const DebiasConfig& config, const std::vector<Interaction>& train) {
    double s = 0;
    for (std::size_t k = 0; k < train.size(); ++k) {
        double w = config.w1(train[k], k);
        s += w * w;
    }
    return s;
}

FactorModel sgd_fit_debiased(FactorModel model, const std::vector<Interaction>& train,
                             const DebiasConfig& config, LossKind loss, int n_users, int n_items,
                             const DebiasedSgdOptions& opt, TrainTrace* trace) {
    if (train.empty()) throw std::domain_error("sgd_fit_debiased on empty train");
    MinibatchSampler sampler(train.size(), opt.batch_size, opt.seed);
    std::mt19937_64 pair_rng(opt.seed ^ 0x9e3779b97f4a7c15ULL);
    std::uniform_int_distribution<int> du(0, n_users - 1), di(0, n_items - 1);
    std::size_t per_epoch = sampler.batches_per_epoch();
    double ui = static_cast<double>(n_users) * n_items;

    for (int epoch = 0; epoch < opt.epochs; ++epoch) {
        for (std::size_t b = 0; b < per_epoch; ++b) {
            auto batch = sampler.next();
            detail::BatchGrad grad(model.dim);
            double inv = 1.0 / static_cast<double>(batch.size());
            for (std::size_t idx : batch) {
                const auto& x = train[idx];
                double w = config.w1(x, idx);
                double f = model.predict(x.user, x.item);
                double g = w * loss_df(loss, f, x.label) * inv;
                grad.add_user(x.user, model.item_row(x.item), g);
                grad.add_item(x.item, model.user_row(x.user), g);
                grad.add_bias(x.user, x.item, g);
            }
            double pair_scale = ui / static_cast<double>(opt.pair_batch_size);
            for (int j = 0; j < opt.pair_batch_size; ++j) {
                int u = du(pair_rng), i = di(pair_rng);
                double w = config.w2(u, i);
                if (w == 0) continue;
                double f = model.predict(u, i);
                double g = w * loss_df(loss, f, config.m(u, i)) * pair_scale;
                grad.add_user(u, model.item_row(i), g);
                grad.add_item(i, model.user_row(u), g);
                grad.add_bias(u, i, g);
            }
            grad.apply(model, opt.lr, opt.weight_decay);
        }
        double risk = empirical_risk(model, train, loss);
        if (!std::isfinite(risk))
            throw std::runtime_error("sgd_fit_debiased diverged at epoch " + std::to_string(epoch));
        if (trace) trace->train_loss.push_back(risk);
        if (opt.epoch_callback) opt.epoch_callback(epoch, model);
    }
    return model;
}

}  // namespace debiasrec
