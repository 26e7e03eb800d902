#include "debiasrec/experiment.hpp"

#include "debiasrec/framework.hpp"
#include "debiasrec/world.hpp"

#include <algorithm>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <sstream>
#include <stdexcept>

namespace debiasrec {

std::string to_string(Method m) {
    switch (m) {
        case Method::MfBiased: return "mf_biased";
        case Method::MfUniform: return "mf_uniform";
        case Method::MfCombine: return "mf_combine";
        case Method::Ips: return "ips";
        case Method::Dr: return "dr";
        case Method::Imputation: return "imputation";
        case Method::NegWeight: return "neg_weight";
        case Method::IpsVariant: return "ips_variant";
        case Method::PosIps: return "pos_ips";
        case Method::AutoDebias: return "autodebias";
        case Method::AutoDebiasW1: return "autodebias_w1";
        case Method::AutoDebiasW1m: return "autodebias_w1m";
    }
    return "mf_biased";
}

Method method_from_string(const std::string& s) {
    for (int j = 0; j <= static_cast<int>(Method::AutoDebiasW1m); ++j) {
        Method m = static_cast<Method>(j);
        if (to_string(m) == s) return m;
    }
    throw std::invalid_argument("unknown method: " + s);
}

bool method_valid_for(Method m, FeedbackKind kind) {
    if (m == Method::PosIps) return kind == FeedbackKind::List;
    // label-conditioned propensities need both label classes in train
    if ((m == Method::Ips || m == Method::Dr || m == Method::IpsVariant) &&
        kind == FeedbackKind::Implicit)
        return false;
    return true;
}

void ExperimentSpec::validate(FeedbackKind kind) const {
    if (seeds.empty()) throw std::invalid_argument("spec needs at least one seed");
    if (learning_rates.empty() || weight_decays.empty())
        throw std::invalid_argument("spec needs a nonempty grid");
    if (dim <= 0 || epochs <= 0 || batch_size <= 0)
        throw std::invalid_argument("dim, epochs and batch_size must be positive");
    if (!method_valid_for(method, kind))
        throw std::invalid_argument("method " + to_string(method) + " is invalid for " +
                                    to_string(kind) + " feedback");
}

namespace {

constexpr int kSchemaVersion = 1;

template <typename T>
std::string join(const std::vector<T>& v) {
    std::ostringstream ss;
    for (std::size_t j = 0; j < v.size(); ++j) ss << (j ? "," : "") << v[j];
    return ss.str();
}

template <typename T, typename F>
std::vector<T> split_list(const std::string& s, F parse) {
    std::vector<T> out;
    std::istringstream ss(s);
    std::string tok;
    while (std::getline(ss, tok, ','))
        if (!tok.empty()) out.push_back(parse(tok));
    return out;
}

}  // namespace

void save_spec(const ExperimentSpec& spec, const std::string& path) {
    std::ofstream out(path);
    if (!out) throw std::runtime_error("cannot write " + path);
    out << "schema_version=" << kSchemaVersion << '\n'
        << "dataset=" << spec.dataset << '\n'
        << "data_dir=" << spec.data_dir << '\n'
        << "method=" << to_string(spec.method) << '\n'
        << "learning_rates=" << join(spec.learning_rates) << '\n'
        << "weight_decays=" << join(spec.weight_decays) << '\n'
        << "seeds=" << join(spec.seeds) << '\n'
        << "dim=" << spec.dim << '\n'
        << "epochs=" << spec.epochs << '\n'
        << "batch_size=" << spec.batch_size << '\n'
        << "loss=" << to_string(spec.loss) << '\n'
        << "output_dir=" << spec.output_dir << '\n';
}

ExperimentSpec load_spec(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw std::runtime_error("cannot open " + path);
    ExperimentSpec spec;
    std::string line;
    bool versioned = false;
    while (std::getline(in, line)) {
        if (line.empty() || line[0] == '#') continue;
        auto eq = line.find('=');
        if (eq == std::string::npos) continue;
        std::string key = line.substr(0, eq), val = line.substr(eq + 1);
        if (key == "schema_version") {
            if (std::stoi(val) != kSchemaVersion)
                throw std::runtime_error("unsupported config schema version " + val);
            versioned = true;
        } else if (key == "dataset") spec.dataset = val;
        else if (key == "data_dir") spec.data_dir = val;
        else if (key == "method") spec.method = method_from_string(val);
        else if (key == "learning_rates")
            spec.learning_rates = split_list<double>(val, [](const std::string& t) { return std::stod(t); });
        else if (key == "weight_decays")
            spec.weight_decays = split_list<double>(val, [](const std::string& t) { return std::stod(t); });
        else if (key == "seeds")
            spec.seeds = split_list<std::uint64_t>(val, [](const std::string& t) { return std::stoull(t); });
        else if (key == "dim") spec.dim = std::stoi(val);
        else if (key == "epochs") spec.epochs = std::stoi(val);
        else if (key == "batch_size") spec.batch_size = std::stoi(val);
        else if (key == "loss") spec.loss = loss_kind_from_string(val);
        else if (key == "output_dir") spec.output_dir = val;
        else throw std::runtime_error("unknown config key: " + key);
    }
    if (!versioned) throw std::runtime_error("config is missing a schema_version line");
    return spec;
}

namespace {

// epoch-wise best-on-validation selection shared by all static methods
struct BestTracker {
    const DatasetBundle& bundle;
    FactorModel best;
    double best_ndcg = -1;

    void observe(const FactorModel& model) {
        double v = bundle.validation.empty() ? 0.0 : ndcg_at_k(model, bundle.validation, 5);
        if (v >= best_ndcg) {
            best_ndcg = v;
            best = model;
        }
    }
};

FactorModel train_static(const DatasetBundle& bundle, Method method, double lr, double wd,
                         std::uint64_t seed, int dim, int epochs, int batch_size, LossKind loss) {
    FactorModel init = FactorModel::init(bundle.n_users, bundle.n_items, dim, seed);
    BestTracker tracker{bundle, init};

    auto plain = [&](const std::vector<Interaction>& data) {
        SgdOptions opt;
        opt.lr = lr;
        opt.weight_decay = wd;
        opt.epochs = epochs;
        opt.batch_size = batch_size;
        opt.seed = seed;
        opt.epoch_callback = [&](int, const FactorModel& m) { tracker.observe(m); };
        sgd_fit(init, data, loss, opt);
        return tracker.best;
    };
    auto weighted = [&](const DebiasConfig& config) {
        DebiasedSgdOptions opt;
        opt.lr = lr;
        opt.weight_decay = wd;
        opt.epochs = epochs;
        opt.batch_size = batch_size;
        opt.pair_batch_size = batch_size;
        opt.seed = seed;
        opt.epoch_callback = [&](int, const FactorModel& m) { tracker.observe(m); };
        sgd_fit_debiased(init, bundle.train, config, loss, bundle.n_users, bundle.n_items, opt);
        return tracker.best;
    };

    ObservationIndicator obs(bundle.train, bundle.n_users, bundle.n_items);
    switch (method) {
        case Method::MfBiased: return plain(bundle.train);
        case Method::MfUniform: return plain(bundle.uniform);
        case Method::MfCombine: {
            std::vector<Interaction> combined = bundle.train;
            combined.insert(combined.end(), bundle.uniform.begin(), bundle.uniform.end());
            return plain(combined);
        }
        case Method::Ips: {
            auto q = estimate_propensity_naive_bayes(bundle.train, bundle.uniform, bundle.n_users,
                                                     bundle.n_items);
            return weighted(config_ips(q, bundle.train.size(), bundle.n_users, bundle.n_items, obs));
        }
        case Method::Dr: {
            auto q = estimate_propensity_naive_bayes(bundle.train, bundle.uniform, bundle.n_users,
                                                     bundle.n_items);
            double mean_label = 0;
            for (const auto& x : bundle.uniform) mean_label += x.label;
            mean_label /= std::max<std::size_t>(1, bundle.uniform.size());
            return weighted(config_doubly_robust(
                q, obs, [mean_label](int, int) { return mean_label; }, bundle.train.size(),
                bundle.n_users, bundle.n_items));
        }
        case Method::Imputation: {
            double mean_label = 0;
            for (const auto& x : bundle.uniform) mean_label += x.label;
            mean_label /= std::max<std::size_t>(1, bundle.uniform.size());
            return weighted(config_imputation(1.0, mean_label, bundle.train.size(),
                                              bundle.n_users, bundle.n_items));
        }
        case Method::NegWeight: {
            // per-pair confidence = observation rate, normalized by the pair
            // count so the summed unobserved term stays on the same scale as
            // the averaged observed term
            double ui = static_cast<double>(bundle.n_users) * bundle.n_items;
            double w = static_cast<double>(bundle.train.size()) / (ui * ui);
            return weighted(
                config_negative_weighting([w](int, int) { return w; }, obs, -1.0));
        }
        case Method::IpsVariant: {
            auto q = estimate_propensity_naive_bayes(bundle.train, bundle.uniform, bundle.n_users,
                                                     bundle.n_items);
            return weighted(config_ips_variant(q, obs, bundle.train.size(), bundle.n_users,
                                               bundle.n_items, -1.0));
        }
        case Method::PosIps: {
            // examination propensity of the generating click model: 1/sqrt(p)
            int max_p = bundle.max_position();
            std::vector<double> qt(max_p);
            for (int p = 1; p <= max_p; ++p) qt[p - 1] = 1.0 / std::sqrt(static_cast<double>(p));
            return weighted(config_position_ips(qt));
        }
        default: throw std::logic_error("train_static called with a learned method");
    }
}

AblationKind ablation_of(Method m) {
    if (m == Method::AutoDebiasW1) return AblationKind::W1;
    if (m == Method::AutoDebiasW1m) return AblationKind::W1M;
    return AblationKind::Full;
}

}  // namespace

RunRow train_and_evaluate(const DatasetBundle& bundle, Method method, double lr,
                          double weight_decay, std::uint64_t seed, int dim, int epochs,
                          int batch_size, LossKind loss) {
    RunRow row;
    row.method = method;
    row.lr = lr;
    row.weight_decay = weight_decay;
    row.seed = seed;

    FactorModel model;
    if (method == Method::AutoDebias || method == Method::AutoDebiasW1 ||
        method == Method::AutoDebiasW1m) {
        TrainerConfig cfg;
        cfg.lr_base = lr;
        // Adam on the meta parameters wants a conventional step size even
        // when the base model runs hot
        cfg.lr_meta = std::min(lr, 0.01);
        cfg.weight_decay = weight_decay;
        cfg.batch_train = batch_size;
        cfg.batch_pairs = batch_size;
        cfg.batch_uniform = std::min<int>(batch_size, static_cast<int>(bundle.uniform.size()));
        cfg.epochs = epochs;
        cfg.dim = dim;
        cfg.loss = loss;
        cfg.seed = seed;
        cfg.ablation = ablation_of(method);
        model = train_autodebias(bundle, cfg).model;
    } else {
        model = train_static(bundle, method, lr, weight_decay, seed, dim, epochs, batch_size,
                             loss);
    }
    row.val_ndcg5 = bundle.validation.empty() ? 0.0 : ndcg_at_k(model, bundle.validation, 5);
    row.test = evaluate(model, bundle.test, {5});
    return row;
}

std::uint64_t fingerprint(const DatasetBundle& bundle) {
    std::uint64_t h = 14695981039346656037ULL;
    auto mix = [&h](std::uint64_t v) {
        for (int b = 0; b < 8; ++b) {
            h ^= (v >> (8 * b)) & 0xff;
            h *= 1099511628211ULL;
        }
    };
    mix(bundle.n_users);
    mix(bundle.n_items);
    mix(static_cast<std::uint64_t>(bundle.feedback_kind));
    for (const auto* split : {&bundle.train, &bundle.uniform, &bundle.validation, &bundle.test})
        for (const auto& x : *split) {
            mix(x.user);
            mix(x.item);
            mix(static_cast<std::uint64_t>(static_cast<std::int64_t>(x.label)));
            mix(x.position);
        }
    return h;
}

RunResult run(const ExperimentSpec& spec, const DatasetBundle& bundle) {
    spec.validate(bundle.feedback_kind);
    std::filesystem::create_directories(spec.output_dir);

    RunResult result;
    double best_val = -1;
    double best_lr = spec.learning_rates.front(), best_wd = spec.weight_decays.front();

    for (double lr : spec.learning_rates) {
        for (double wd : spec.weight_decays) {
            double val_sum = 0;
            for (auto seed : spec.seeds) {
                RunRow row = train_and_evaluate(bundle, spec.method, lr, wd, seed, spec.dim,
                                                spec.epochs, spec.batch_size, spec.loss);
                val_sum += row.val_ndcg5;
                result.rows.push_back(row);
            }
            double val_mean = val_sum / static_cast<double>(spec.seeds.size());
            if (val_mean > best_val) {
                best_val = val_mean;
                best_lr = lr;
                best_wd = wd;
            }
        }
    }

    // replicate statistics at the winning grid point
    std::vector<double> ndcgs;
    for (const auto& row : result.rows)
        if (row.lr == best_lr && row.weight_decay == best_wd) {
            ndcgs.push_back(row.test.ndcg_at.at(5));
            if (ndcgs.size() == 1) result.best = row;
        }
    double mean = 0;
    for (double v : ndcgs) mean += v;
    mean /= static_cast<double>(ndcgs.size());
    double var = 0;
    for (double v : ndcgs) var += (v - mean) * (v - mean);
    result.mean_ndcg5 = mean;
    result.std_ndcg5 = ndcgs.size() > 1 ? std::sqrt(var / (ndcgs.size() - 1)) : 0.0;

    // artifacts
    {
        std::ofstream out(spec.output_dir + "/results.csv");
        out << "method,lr,weight_decay,seed,val_ndcg5,nll,auc,ndcg5\n";
        for (const auto& r : result.rows)
            out << to_string(r.method) << ',' << r.lr << ',' << r.weight_decay << ',' << r.seed
                << ',' << r.val_ndcg5 << ',' << r.test.nll << ',' << r.test.auc << ','
                << r.test.ndcg_at.at(5) << '\n';
        out << "# best lr=" << best_lr << " wd=" << best_wd << " mean_ndcg5=" << result.mean_ndcg5
            << " std_ndcg5=" << result.std_ndcg5 << '\n';
    }
    {
        std::ofstream out(spec.output_dir + "/manifest.txt");
        out << "schema_version=" << 1 << '\n'
            << "method=" << to_string(spec.method) << '\n'
            << "dataset=" << spec.dataset << '\n'
            << "dataset_fingerprint=" << fingerprint(bundle) << '\n'
            << "seeds=" << join(spec.seeds) << '\n'
            << "learning_rates=" << join(spec.learning_rates) << '\n'
            << "weight_decays=" << join(spec.weight_decays) << '\n'
            << "dim=" << spec.dim << '\n'
            << "epochs=" << spec.epochs << '\n'
            << "batch_size=" << spec.batch_size << '\n'
            << "loss=" << to_string(spec.loss) << '\n';
    }
    if (spec.method == Method::AutoDebias) {
        // weight-vs-popularity scatter and popularity-slice bars for the
        // winning grid point's first seed
        TrainerConfig cfg;
        cfg.lr_base = best_lr;
        cfg.lr_meta = best_lr;
        cfg.weight_decay = best_wd;
        cfg.batch_train = spec.batch_size;
        cfg.batch_pairs = spec.batch_size;
        cfg.batch_uniform = std::min<int>(spec.batch_size, static_cast<int>(bundle.uniform.size()));
        cfg.epochs = spec.epochs;
        cfg.dim = spec.dim;
        cfg.loss = spec.loss;
        cfg.seed = spec.seeds.front();
        auto trained = train_autodebias(bundle, cfg);
        auto pop = item_popularity(bundle.train, bundle.n_items);
        std::ofstream scatter(spec.output_dir + "/item_weight_vs_popularity.csv");
        scatter << "item,popularity,w1_item_factor\n";
        for (int i = 0; i < bundle.n_items; ++i)
            scatter << i << ',' << pop[i] << ',' << trained.meta.item_factor(i) << '\n';
        auto slices = popularity_slices(trained.model, bundle, 5);
        std::ofstream bars(spec.output_dir + "/popularity_slices.csv");
        bars << "slice,ndcg5\npopular," << slices.ndcg_popular << "\nunpopular,"
             << slices.ndcg_unpopular << '\n';
        save_trace(trained.trace, spec.output_dir + "/trace.csv");
        trained.model.save(spec.output_dir + "/model.txt");
        trained.meta.save(spec.output_dir + "/meta.txt");
    }
    return result;
}

std::vector<SweepPoint> uniform_ratio_sweep(const ExperimentSpec& spec,
                                            const DatasetBundle& bundle,
                                            const std::vector<double>& ratios) {
    std::vector<SweepPoint> points;
    for (double ratio : ratios) {
        if (ratio <= 0 || ratio > 1) throw std::invalid_argument("ratio must be in (0, 1]");
        DatasetBundle sub = bundle;
        std::size_t n = static_cast<std::size_t>(std::ceil(ratio * bundle.uniform.size()));
        sub.uniform.assign(bundle.uniform.begin(), bundle.uniform.begin() + n);

        double lr = spec.learning_rates.front(), wd = spec.weight_decays.front();
        auto seed = spec.seeds.front();
        RunRow method_row = train_and_evaluate(sub, spec.method, lr, wd, seed, spec.dim,
                                               spec.epochs, spec.batch_size, spec.loss);
        RunRow biased_row = train_and_evaluate(sub, Method::MfBiased, lr, wd, seed, spec.dim,
                                               spec.epochs, spec.batch_size, spec.loss);
        points.push_back({ratio, method_row.test.ndcg_at.at(5), biased_row.test.ndcg_at.at(5)});
    }
    return points;
}

}  // namespace debiasrec
