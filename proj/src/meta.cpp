#include "debiasrec/meta.hpp"

#include "debiasrec/detail/batch_grad.hpp"
#include "debiasrec/metrics.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <stdexcept>

namespace debiasrec {

std::string to_string(AblationKind k) {
    switch (k) {
        case AblationKind::Full: return "full";
        case AblationKind::W1: return "w1";
        case AblationKind::W1M: return "w1m";
        case AblationKind::Frozen: return "frozen";
    }
    return "full";
}

MetaModel MetaModel::zeros(int n_users, int n_items, int n_positions) {
    MetaModel m;
    m.n_users = n_users;
    m.n_items = n_items;
    m.n_positions = n_positions;
    m.phi1.assign(static_cast<std::size_t>(n_users) + n_items + 2 + n_positions, 0.0);
    m.phi2.assign(static_cast<std::size_t>(n_users) + n_items + 2, 0.0);
    m.phi3.assign(3 + 2, 0.0);
    return m;
}

double MetaModel::w1(int u, int i, int label, int position) const {
    double z = phi1[u] + phi1[n_users + i] + phi1[n_users + n_items + label_slot(label)];
    if (list_mode()) {
        if (position < 1 || position > n_positions)
            throw std::out_of_range("w1: position outside the modeled range");
        z += phi1[n_users + n_items + 2 + (position - 1)];
    }
    return std::exp(z);
}

double MetaModel::w2(int u, int i, int observed) const {
    return std::exp(phi2[u] + phi2[n_users + i] + phi2[n_users + n_items + (observed ? 1 : 0)]);
}

double MetaModel::m(std::optional<int> label, int observed) const {
    int slot = label ? label_slot(*label) : kMissingSlot;
    return std::tanh(phi3[slot] + phi3[3 + (observed ? 1 : 0)]);
}

double MetaModel::user_factor(int u) const { return std::exp(phi1[u]); }
double MetaModel::item_factor(int i) const { return std::exp(phi1[n_users + i]); }
double MetaModel::label_factor(int label) const {
    return std::exp(phi1[n_users + n_items + label_slot(label)]);
}

void MetaModel::save(const std::string& path) const {
    std::ofstream out(path);
    if (!out) throw std::runtime_error("cannot write " + path);
    out.precision(17);
    out << n_users << ' ' << n_items << ' ' << n_positions << '\n';
    for (double v : phi1) out << v << '\n';
    for (double v : phi2) out << v << '\n';
    for (double v : phi3) out << v << '\n';
}

MetaModel MetaModel::load(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw std::runtime_error("cannot open " + path);
    int nu, ni, np;
    in >> nu >> ni >> np;
    MetaModel m = MetaModel::zeros(nu, ni, np);
    for (auto& v : m.phi1) in >> v;
    for (auto& v : m.phi2) in >> v;
    for (auto& v : m.phi3) in >> v;
    if (!in) throw std::runtime_error("truncated meta model file " + path);
    return m;
}

FactorModel base_step(const FactorModel& model, const MetaModel& meta,
                      const std::vector<Interaction>& train,
                      const std::vector<std::size_t>& batch_train,
                      const std::vector<std::pair<int, int>>& batch_pairs,
                      const ObservationIndicator& obs, LossKind loss, double lr, double decay,
                      AblationKind ablation, double w1m_pair_weight, BaseStepCache* cache) {
    if (batch_train.empty()) throw std::invalid_argument("base_step: empty training batch");

    bool learn_w1 = ablation != AblationKind::Frozen;
    bool pair_term = ablation == AblationKind::Full || ablation == AblationKind::W1M;

    detail::BatchGrad grad(model.dim);
    double batch_risk = 0;
    double inv_t = 1.0 / static_cast<double>(batch_train.size());

    if (cache) {
        *cache = BaseStepCache{};
        cache->train_terms.reserve(batch_train.size());
        cache->pair_terms.reserve(batch_pairs.size());
        cache->pair_term_active = pair_term;
    }

    for (std::size_t idx : batch_train) {
        const auto& x = train[idx];
        double w = learn_w1 ? meta.w1(x.user, x.item, x.label, x.position) : 1.0;
        double f = model.predict(x.user, x.item);
        double d = loss_df(loss, f, x.label);
        batch_risk += w * loss_value(loss, f, x.label) * inv_t;
        double g = w * d * inv_t;
        grad.add_user(x.user, model.item_row(x.item), g);
        grad.add_item(x.item, model.user_row(x.user), g);
        grad.add_bias(x.user, x.item, g);
        if (cache) cache->train_terms.push_back({x.user, x.item, x.label, x.position, w, d});
    }

    if (pair_term && !batch_pairs.empty()) {
        double inv_p = 1.0 / static_cast<double>(batch_pairs.size());
        for (const auto& [u, i] : batch_pairs) {
            auto label = obs.observed_label(u, i);
            int O = label.has_value() ? 1 : 0;
            double w = ablation == AblationKind::W1M ? w1m_pair_weight : meta.w2(u, i, O);
            double m = meta.m(label, O);
            double f = model.predict(u, i);
            double d = loss_df(loss, f, m);
            batch_risk += w * loss_value(loss, f, m) * inv_p;
            double g = w * d * inv_p;
            grad.add_user(u, model.item_row(i), g);
            grad.add_item(i, model.user_row(u), g);
            grad.add_bias(u, i, g);
            if (cache)
                cache->pair_terms.push_back({u, i, O, label, w, m, d, loss_dfdr(loss, f, m)});
        }
    }

    if (!std::isfinite(batch_risk)) throw std::runtime_error("base_step: non-finite batch risk");
    if (cache) cache->batch_risk = batch_risk;

    FactorModel stepped = model;
    grad.apply(stepped, lr, decay);
    return stepped;
}

MetaGradient hypergradient(const FactorModel& model_old, const FactorModel& model_assumed,
                           const MetaModel& meta, const BaseStepCache& cache,
                           const std::vector<Interaction>& batch_uniform, LossKind loss,
                           double lr_base) {
    MetaGradient g;
    g.g1.assign(meta.phi1.size(), 0.0);
    g.g2.assign(meta.phi2.size(), 0.0);
    g.g3.assign(meta.phi3.size(), 0.0);
    if (batch_uniform.empty() || lr_base == 0) return g;

    // g_U = grad of the uniform risk at the assumed theta'
    detail::BatchGrad gu(model_assumed.dim);
    double inv_u = 1.0 / static_cast<double>(batch_uniform.size());
    for (const auto& x : batch_uniform) {
        double f = model_assumed.predict(x.user, x.item);
        double d = loss_df(loss, f, x.label) * inv_u;
        gu.add_user(x.user, model_assumed.item_row(x.item), d);
        gu.add_item(x.item, model_assumed.user_row(x.user), d);
        gu.add_bias(x.user, x.item, d);
    }

    int dim = model_old.dim;
    // inner product of grad_theta f(u,i) (at old theta) with g_U; the bias
    // coordinates of grad_theta f are all one
    auto chain = [&](int u, int i) {
        double s = gu.global_bias + gu.user_bias(u) + gu.item_bias(i);
        if (const auto* row = gu.user_row(u)) {
            const double* qi = model_old.item_row(i);
            for (int k = 0; k < dim; ++k) s += qi[k] * (*row)[k];
        }
        if (const auto* row = gu.item_row(i)) {
            const double* pu = model_old.user_row(u);
            for (int k = 0; k < dim; ++k) s += pu[k] * (*row)[k];
        }
        return s;
    };

    int nu = meta.n_users, ni = meta.n_items;
    double inv_t = cache.train_terms.empty() ? 0 : 1.0 / cache.train_terms.size();
    for (const auto& t : cache.train_terms) {
        double c = -lr_base * inv_t * t.w1 * t.dloss_df * chain(t.u, t.i);
        if (c == 0) continue;
        g.g1[t.u] += c;
        g.g1[nu + t.i] += c;
        g.g1[nu + ni + MetaModel::label_slot(t.label)] += c;
        if (meta.list_mode()) g.g1[nu + ni + 2 + (t.position - 1)] += c;
    }

    if (cache.pair_term_active && !cache.pair_terms.empty()) {
        double inv_p = 1.0 / cache.pair_terms.size();
        for (const auto& p : cache.pair_terms) {
            double ch = chain(p.u, p.i);
            if (ch == 0) continue;
            // phi2: through dw2/dphi2 = w2 * feature
            double c2 = -lr_base * inv_p * p.w2 * p.dloss_df * ch;
            g.g2[p.u] += c2;
            g.g2[nu + p.i] += c2;
            g.g2[nu + ni + p.observed] += c2;
            // phi3: through the mixed partial and tanh'
            double c3 = -lr_base * inv_p * p.w2 * p.dloss_dfdm * (1.0 - p.m * p.m) * ch;
            int slot = p.label ? MetaModel::label_slot(*p.label) : MetaModel::kMissingSlot;
            g.g3[slot] += c3;
            g.g3[3 + p.observed] += c3;
        }
    }
    return g;
}

namespace {

// Adaptive moment estimation with the conventional constants.
struct Adam {
    double lr, beta1 = 0.9, beta2 = 0.999, eps = 1e-8;
    std::vector<double> m;
    std::vector<double> v;
    long t = 0;

    Adam(std::size_t n, double lr_) : lr(lr_), m(n, 0.0), v(n, 0.0) {}

    void step(std::vector<double>& x, const std::vector<double>& grad) {
        ++t;
        double bc1 = 1.0 - std::pow(beta1, t), bc2 = 1.0 - std::pow(beta2, t);
        for (std::size_t j = 0; j < x.size(); ++j) {
            m[j] = beta1 * m[j] + (1 - beta1) * grad[j];
            v[j] = beta2 * v[j] + (1 - beta2) * grad[j] * grad[j];
            x[j] -= lr * (m[j] / bc1) / (std::sqrt(v[j] / bc2) + eps);
        }
    }
};

bool all_zero(const std::vector<double>& v) {
    for (double x : v)
        if (x != 0) return false;
    return true;
}

// The overall scale of w1 is not identifiable separately from the base
// learning rate, and a myopic meta step prefers shrinking every weight
// toward zero over reweighting. Pin the geometric mean of each factor
// block to one so the meta can only express relative importance.
void center_block(std::vector<double>& phi, std::size_t begin, std::size_t end) {
    if (end <= begin) return;
    double mean = 0;
    for (std::size_t j = begin; j < end; ++j) mean += phi[j];
    mean /= static_cast<double>(end - begin);
    for (std::size_t j = begin; j < end; ++j) phi[j] -= mean;
}

// Trust region on the meta parameters: |phi| <= 6 caps each exponentiated
// factor at e^6 ~ 400. Without the cap a run that momentarily favors one
// label class can push its weight past 1e3, after which the weighted batch
// risk overflows and the base model diverges.
void clamp_phi(std::vector<double>& phi, double bound = 6.0) {
    for (double& x : phi) x = std::clamp(x, -bound, bound);
}

void center_w1_blocks(MetaModel& meta) {
    std::size_t nu = meta.n_users, ni = meta.n_items;
    center_block(meta.phi1, 0, nu);
    center_block(meta.phi1, nu, nu + ni);
    center_block(meta.phi1, nu + ni, nu + ni + 2);
    center_block(meta.phi1, nu + ni + 2, meta.phi1.size());
}

}  // namespace

AutoDebiasResult train_autodebias(const DatasetBundle& bundle, const TrainerConfig& cfg,
                                  const MetaModel* meta_init) {
    if (bundle.uniform.empty() && cfg.ablation != AblationKind::Frozen)
        throw std::invalid_argument("train_autodebias needs a nonempty uniform set");
    if (bundle.train.empty()) throw std::invalid_argument("train_autodebias: empty train");

    int n_positions = bundle.feedback_kind == FeedbackKind::List ? bundle.max_position() : 0;
    AutoDebiasResult out;
    out.meta = meta_init ? *meta_init : MetaModel::zeros(bundle.n_users, bundle.n_items, n_positions);
    FactorModel model = FactorModel::init(bundle.n_users, bundle.n_items, cfg.dim, cfg.seed);
    ObservationIndicator obs(bundle.train, bundle.n_users, bundle.n_items);

    MinibatchSampler train_sampler(bundle.train.size(), cfg.batch_train, cfg.seed);
    std::mt19937_64 pair_rng(cfg.seed ^ 0x9e3779b97f4a7c15ULL);
    std::mt19937_64 uniform_rng(cfg.seed ^ 0x7f4a7c159e3779b9ULL);
    std::uniform_int_distribution<int> du(0, bundle.n_users - 1), di(0, bundle.n_items - 1);
    std::uniform_int_distribution<std::size_t> dl(0, bundle.uniform.empty()
                                                         ? 0
                                                         : bundle.uniform.size() - 1);

    Adam adam1(out.meta.phi1.size(), cfg.lr_meta);
    Adam adam2(out.meta.phi2.size(), cfg.lr_meta);
    Adam adam3(out.meta.phi3.size(), cfg.lr_meta);

    bool frozen = cfg.ablation == AblationKind::Frozen;
    bool learn_w2 = cfg.ablation == AblationKind::Full;
    bool learn_m = cfg.ablation == AblationKind::Full || cfg.ablation == AblationKind::W1M;
    bool use_pairs = cfg.ablation == AblationKind::Full || cfg.ablation == AblationKind::W1M;

    double best_ndcg = -1;
    std::size_t per_epoch = train_sampler.batches_per_epoch();

    for (int epoch = 0; epoch < cfg.epochs; ++epoch) {
        if (cfg.lr_meta_decay_epochs > 0) {
            double lr = cfg.lr_meta / (1.0 + epoch / cfg.lr_meta_decay_epochs);
            adam1.lr = adam2.lr = adam3.lr = lr;
        }
        bool w1_frozen = use_pairs && epoch < cfg.meta_warmup_epochs;
        double epoch_risk = 0;
        for (std::size_t b = 0; b < per_epoch; ++b) {
            auto batch_t = train_sampler.next();
            std::vector<std::pair<int, int>> batch_p;
            std::vector<Interaction> batch_u;
            if (!frozen) {
                if (use_pairs) {
                    batch_p.resize(cfg.batch_pairs);
                    for (auto& p : batch_p) p = {du(pair_rng), di(pair_rng)};
                }
                batch_u.resize(cfg.batch_uniform);
                for (auto& x : batch_u) x = bundle.uniform[dl(uniform_rng)];

                BaseStepCache cache;
                FactorModel assumed =
                    base_step(model, out.meta, bundle.train, batch_t, batch_p, obs, cfg.loss,
                              cfg.lr_base, cfg.weight_decay, cfg.ablation, cfg.w1m_pair_weight,
                              &cache);
                MetaGradient hg = hypergradient(model, assumed, out.meta, cache, batch_u,
                                                cfg.loss, cfg.lr_base);
                if (!(all_zero(hg.g1) && all_zero(hg.g2) && all_zero(hg.g3))) {
                    if (cfg.meta_weight_decay > 0) {
                        for (std::size_t j = 0; j < hg.g1.size(); ++j)
                            hg.g1[j] += cfg.meta_weight_decay * out.meta.phi1[j];
                        for (std::size_t j = 0; j < hg.g2.size(); ++j)
                            hg.g2[j] += cfg.meta_weight_decay * out.meta.phi2[j];
                        for (std::size_t j = 0; j < hg.g3.size(); ++j)
                            hg.g3[j] += cfg.meta_weight_decay * out.meta.phi3[j];
                    }
                    if (!w1_frozen) {
                        adam1.step(out.meta.phi1, hg.g1);
                        center_w1_blocks(out.meta);
                        clamp_phi(out.meta.phi1);
                    }
                    if (learn_w2) {
                        adam2.step(out.meta.phi2, hg.g2);
                        clamp_phi(out.meta.phi2);
                    }
                    if (learn_m) {
                        adam3.step(out.meta.phi3, hg.g3);
                        clamp_phi(out.meta.phi3);
                    }
                }
            }

            BaseStepCache cache;
            model = base_step(model, out.meta, bundle.train, batch_t, batch_p, obs, cfg.loss,
                              cfg.lr_base, cfg.weight_decay, cfg.ablation, cfg.w1m_pair_weight,
                              &cache);
            epoch_risk += cache.batch_risk;
        }

        TrainEpochRow row;
        row.epoch = epoch;
        row.train_risk = epoch_risk / static_cast<double>(per_epoch);
        row.uniform_risk =
            bundle.uniform.empty() ? 0.0 : empirical_risk(model, bundle.uniform, cfg.loss);
        row.val_ndcg5 = bundle.validation.empty() ? 0.0 : ndcg_at_k(model, bundle.validation, 5);
        if (!std::isfinite(row.train_risk))
            throw std::runtime_error("train_autodebias diverged at epoch " +
                                     std::to_string(epoch));
        out.trace.push_back(row);

        if (row.val_ndcg5 >= best_ndcg) {
            best_ndcg = row.val_ndcg5;
            out.model = model;
            out.best_epoch = epoch;
        }
    }
    if (out.best_epoch < 0) out.model = model;  // zero-epoch run
    return out;
}

void save_trace(const std::vector<TrainEpochRow>& trace, const std::string& path) {
    std::ofstream out(path);
    if (!out) throw std::runtime_error("cannot write " + path);
    out << "epoch,train_risk,uniform_risk,val_ndcg5\n";
    for (const auto& r : trace)
        out << r.epoch << ',' << r.train_risk << ',' << r.uniform_risk << ',' << r.val_ndcg5
            << '\n';
}

}  // namespace debiasrec
