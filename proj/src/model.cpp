#include "debiasrec/model.hpp"

#include "debiasrec/detail/batch_grad.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <numeric>
#include <stdexcept>

namespace debiasrec {

std::string to_string(LossKind k) {
    return k == LossKind::Squared ? "squared" : "logistic";
}

LossKind loss_kind_from_string(const std::string& s) {
    if (s == "squared") return LossKind::Squared;
    if (s == "logistic") return LossKind::Logistic;
    throw std::invalid_argument("unknown loss kind: " + s);
}

namespace {
inline double sigmoid(double x) { return 1.0 / (1.0 + std::exp(-x)); }
}  // namespace

double loss_value(LossKind k, double f, double r) {
    if (k == LossKind::Squared) {
        double d = f - r;
        return d * d;
    }
    // log(1 + exp(-rf)), numerically stable
    double z = -r * f;
    return z > 0 ? z + std::log1p(std::exp(-z)) : std::log1p(std::exp(z));
}

double loss_df(LossKind k, double f, double r) {
    if (k == LossKind::Squared) return 2.0 * (f - r);
    return -r * sigmoid(-r * f);
}

double loss_dr(LossKind k, double f, double r) {
    if (k == LossKind::Squared) return -2.0 * (f - r);
    return -f * sigmoid(-r * f);
}

double loss_dfdr(LossKind k, double f, double r) {
    if (k == LossKind::Squared) return -2.0;
    double s = sigmoid(-r * f);
    return -s + r * f * s * (1.0 - s);
}

FactorModel FactorModel::init(int n_users, int n_items, int dim, std::uint64_t seed) {
    if (dim < 1) throw std::invalid_argument("dim must be >= 1");
    FactorModel m;
    m.n_users = n_users;
    m.n_items = n_items;
    m.dim = dim;
    // wide enough that dot products start at a useful magnitude; tiny
    // initializations stall bias-free factorization under plain SGD
    double scale = 0.5 / std::sqrt(std::sqrt(static_cast<double>(dim)));
    std::mt19937_64 rng(seed);
    std::uniform_real_distribution<double> dist(-scale, scale);
    m.user_factors.resize(static_cast<std::size_t>(n_users) * dim);
    m.item_factors.resize(static_cast<std::size_t>(n_items) * dim);
    for (auto& v : m.user_factors) v = dist(rng);
    for (auto& v : m.item_factors) v = dist(rng);
    m.user_bias.assign(n_users, 0.0);
    m.item_bias.assign(n_items, 0.0);
    return m;
}

double FactorModel::predict(int u, int i) const {
    if (u < 0 || u >= n_users || i < 0 || i >= n_items)
        throw std::out_of_range("predict: index out of range");
    const double* pu = user_row(u);
    const double* qi = item_row(i);
    // hand-built models may leave the bias vectors empty; treat that as zero
    double s = global_bias;
    if (!user_bias.empty()) s += user_bias[u];
    if (!item_bias.empty()) s += item_bias[i];
    for (int k = 0; k < dim; ++k) s += pu[k] * qi[k];
    return s;
}

void FactorModel::save(const std::string& path) const {
    std::ofstream out(path);
    if (!out) throw std::runtime_error("cannot write " + path);
    out.precision(17);
    out << n_users << ' ' << n_items << ' ' << dim << '\n';
    for (double v : user_factors) out << v << '\n';
    for (double v : item_factors) out << v << '\n';
    for (double v : user_bias) out << v << '\n';
    for (double v : item_bias) out << v << '\n';
    out << global_bias << '\n';
}

FactorModel FactorModel::load(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw std::runtime_error("cannot open " + path);
    FactorModel m;
    in >> m.n_users >> m.n_items >> m.dim;
    m.user_factors.resize(static_cast<std::size_t>(m.n_users) * m.dim);
    m.item_factors.resize(static_cast<std::size_t>(m.n_items) * m.dim);
    m.user_bias.resize(m.n_users);
    m.item_bias.resize(m.n_items);
    for (auto& v : m.user_factors) in >> v;
    for (auto& v : m.item_factors) in >> v;
    for (auto& v : m.user_bias) in >> v;
    for (auto& v : m.item_bias) in >> v;
    in >> m.global_bias;
    if (!in) throw std::runtime_error("truncated model file " + path);
    return m;
}

double empirical_risk(const FactorModel& model, const std::vector<Interaction>& data,
                      LossKind loss) {
    if (data.empty()) throw std::domain_error("empirical_risk on empty data");
    double sum = 0;
    for (const auto& x : data) sum += loss_value(loss, model.predict(x.user, x.item), x.label);
    return sum / static_cast<double>(data.size());
}

MinibatchSampler::MinibatchSampler(std::size_t n, std::size_t batch_size, std::uint64_t seed)
    : order_(n), batch_size_(std::max<std::size_t>(1, batch_size)), rng_(seed) {
    std::iota(order_.begin(), order_.end(), std::size_t{0});
    std::shuffle(order_.begin(), order_.end(), rng_);
}

std::size_t MinibatchSampler::batches_per_epoch() const {
    return (order_.size() + batch_size_ - 1) / batch_size_;
}

std::vector<std::size_t> MinibatchSampler::next() {
    if (pos_ >= order_.size()) {
        std::shuffle(order_.begin(), order_.end(), rng_);
        pos_ = 0;
    }
    std::size_t end = std::min(pos_ + batch_size_, order_.size());
    std::vector<std::size_t> batch(order_.begin() + pos_, order_.begin() + end);
    pos_ = end;
    return batch;
}

FactorModel sgd_fit(FactorModel model, const std::vector<Interaction>& data, LossKind loss,
                    const SgdOptions& opt, TrainTrace* trace) {
    if (data.empty()) throw std::domain_error("sgd_fit on empty data");
    if (opt.epochs < 0 || opt.batch_size < 1) throw std::invalid_argument("bad sgd options");

    MinibatchSampler sampler(data.size(), opt.batch_size, opt.seed);
    std::size_t per_epoch = sampler.batches_per_epoch();
    int d = model.dim;

    for (int epoch = 0; epoch < opt.epochs; ++epoch) {
        for (std::size_t b = 0; b < per_epoch; ++b) {
            auto batch = sampler.next();
            double inv = 1.0 / static_cast<double>(batch.size());
            detail::BatchGrad grad(d);
            for (std::size_t idx : batch) {
                const auto& x = data[idx];
                double f = model.predict(x.user, x.item);
                double g = loss_df(loss, f, x.label) * inv;
                grad.add_user(x.user, model.item_row(x.item), g);
                grad.add_item(x.item, model.user_row(x.user), g);
                grad.add_bias(x.user, x.item, g);
            }
            grad.apply(model, opt.lr, opt.weight_decay);
        }
        double risk = empirical_risk(model, data, loss);
        if (!std::isfinite(risk))
            throw std::runtime_error("sgd_fit diverged at epoch " + std::to_string(epoch));
        if (trace) trace->train_loss.push_back(risk);
        if (opt.epoch_callback) opt.epoch_callback(epoch, model);
    }
    return model;
}

}  // namespace debiasrec
