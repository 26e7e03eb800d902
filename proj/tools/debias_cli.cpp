// Command-line front end: prepare data, train/evaluate models, sweep the
// uniform-data budget, run the ablation family, and summarize run outputs.
#include <CLI11.hpp>

#include "debiasrec/experiment.hpp"
#include "debiasrec/framework.hpp"
#include "debiasrec/meta.hpp"
#include "debiasrec/metrics.hpp"
#include "debiasrec/world.hpp"

#include <filesystem>
#include <fstream>
#include <iostream>
#include <sstream>

namespace {

using namespace debiasrec;

DatasetBundle load_prepared(const std::string& data_dir) {
    DatasetBundle bundle = load_bundle(data_dir);
    bundle.check();
    return bundle;
}

int cmd_prepare(const std::string& dataset, const std::string& biased_path,
                const std::string& unbiased_path, const std::string& out_dir,
                std::uint64_t seed, bool implicit) {
    std::filesystem::create_directories(out_dir);
    if (dataset == "simulation") {
        SimulationSpec spec;
        spec.seed = seed;
        SimulationResult sim = generate_simulation(spec);
        save_simulation(sim, out_dir);
        std::cout << "simulation written to " << out_dir << " (train=" << sim.bundle.train.size()
                  << " uniform=" << sim.bundle.uniform.size()
                  << " validation=" << sim.bundle.validation.size()
                  << " test=" << sim.bundle.test.size() << ")\n";
        return 0;
    }
    if (biased_path.empty() || unbiased_path.empty())
        throw CLI::ValidationError("--biased and --unbiased are required for " + dataset);
    DatasetBundle bundle = load_explicit(biased_path, unbiased_path, SplitRatios{}, seed);
    if (implicit) bundle = to_implicit(bundle);
    bundle.check();
    save_bundle(bundle, out_dir);
    std::cout << "prepared " << dataset << " in " << out_dir << " (train=" << bundle.train.size()
              << " uniform=" << bundle.uniform.size() << ")\n";
    return 0;
}

int cmd_train(const std::string& config_path, const std::string& data_dir,
              const std::string& output_dir) {
    ExperimentSpec spec = load_spec(config_path);
    if (!data_dir.empty()) spec.data_dir = data_dir;
    if (!output_dir.empty()) spec.output_dir = output_dir;
    DatasetBundle bundle = load_prepared(spec.data_dir);
    RunResult result = run(spec, bundle);
    std::cout << to_string(spec.method) << ": test NDCG@5 " << result.mean_ndcg5 << " +/- "
              << result.std_ndcg5 << " (best lr=" << result.best.lr
              << " wd=" << result.best.weight_decay << ")\n";
    return 0;
}

int cmd_evaluate(const std::string& model_path, const std::string& data_dir,
                 const std::string& out_csv) {
    FactorModel model = FactorModel::load(model_path);
    DatasetBundle bundle = load_prepared(data_dir);
    MetricsReport report = evaluate(model, bundle.test, {1, 3, 5, 10});
    std::cout << "nll " << report.nll << "\nauc " << report.auc << '\n';
    for (const auto& [k, v] : report.ndcg_at) std::cout << "ndcg@" << k << ' ' << v << '\n';
    if (!out_csv.empty()) report.save_csv(out_csv, "evaluate");
    return 0;
}

int cmd_sweep(const std::string& config_path, const std::string& data_dir,
              const std::string& ratios_csv, const std::string& out_csv) {
    ExperimentSpec spec = load_spec(config_path);
    if (!data_dir.empty()) spec.data_dir = data_dir;
    std::vector<double> ratios;
    std::istringstream ss(ratios_csv);
    std::string tok;
    while (std::getline(ss, tok, ',')) ratios.push_back(std::stod(tok));
    DatasetBundle bundle = load_prepared(spec.data_dir);
    auto points = uniform_ratio_sweep(spec, bundle, ratios);
    std::ofstream out(out_csv);
    out << "ratio,ndcg5_" << to_string(spec.method) << ",ndcg5_mf_biased\n";
    for (const auto& p : points) {
        out << p.ratio << ',' << p.ndcg5_method << ',' << p.ndcg5_biased << '\n';
        std::cout << "ratio " << p.ratio << ": " << to_string(spec.method) << ' '
                  << p.ndcg5_method << " vs mf_biased " << p.ndcg5_biased << '\n';
    }
    return 0;
}

int cmd_ablate(const std::string& config_path, const std::string& data_dir,
               const std::string& output_dir) {
    ExperimentSpec spec = load_spec(config_path);
    if (!data_dir.empty()) spec.data_dir = data_dir;
    if (!output_dir.empty()) spec.output_dir = output_dir;
    DatasetBundle bundle = load_prepared(spec.data_dir);
    std::filesystem::create_directories(spec.output_dir);
    std::ofstream out(spec.output_dir + "/ablation.csv");
    out << "method,mean_ndcg5,std_ndcg5\n";
    for (Method m : {Method::MfBiased, Method::AutoDebiasW1, Method::AutoDebiasW1m,
                     Method::AutoDebias}) {
        ExperimentSpec variant = spec;
        variant.method = m;
        variant.output_dir = spec.output_dir + "/" + to_string(m);
        RunResult r = run(variant, bundle);
        out << to_string(m) << ',' << r.mean_ndcg5 << ',' << r.std_ndcg5 << '\n';
        std::cout << to_string(m) << ": " << r.mean_ndcg5 << " +/- " << r.std_ndcg5 << '\n';
    }
    return 0;
}

int cmd_report(const std::string& run_dir) {
    for (const char* name : {"results.csv", "ablation.csv", "manifest.txt",
                             "popularity_slices.csv"}) {
        std::string path = run_dir + "/" + std::string(name);
        std::ifstream in(path);
        if (!in) continue;
        std::cout << "== " << name << " ==\n" << in.rdbuf() << '\n';
    }
    return 0;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"debiasing experiments for recommendation from biased feedback"};
    app.require_subcommand(1);

    std::string dataset = "simulation", biased, unbiased, out_dir = "data/prepared";
    std::uint64_t seed = 0;
    bool implicit = false;
    auto* prepare = app.add_subcommand("prepare", "generate or split a dataset");
    prepare->add_option("--dataset", dataset, "simulation | yahoo | coat | custom");
    prepare->add_option("--biased", biased, "biased feedback file (user item rating)");
    prepare->add_option("--unbiased", unbiased, "uniformly collected feedback file");
    prepare->add_option("--out", out_dir, "output directory");
    prepare->add_option("--seed", seed, "split / generator seed");
    prepare->add_flag("--implicit", implicit, "drop negative training rows");

    std::string config_path, data_dir, output_dir;
    auto* train = app.add_subcommand("train", "grid-search one method and write run artifacts");
    train->add_option("--config", config_path, "experiment config file")->required();
    train->add_option("--data", data_dir, "prepared data directory (overrides config)");
    train->add_option("--out", output_dir, "output directory (overrides config)");

    std::string model_path, out_csv;
    auto* evaluate = app.add_subcommand("evaluate", "score a saved model on the test split");
    evaluate->add_option("--model", model_path, "saved factor model")->required();
    evaluate->add_option("--data", data_dir, "prepared data directory")->required();
    evaluate->add_option("--csv", out_csv, "optional metrics CSV output");

    std::string ratios = "0.05,0.1,0.25,0.5,1.0", sweep_csv = "sweep.csv";
    auto* sweep = app.add_subcommand("sweep", "vary the uniform-data budget");
    sweep->add_option("--config", config_path, "experiment config file")->required();
    sweep->add_option("--data", data_dir, "prepared data directory (overrides config)");
    sweep->add_option("--ratios", ratios, "comma-separated fractions of the uniform split");
    sweep->add_option("--csv", sweep_csv, "output CSV");

    auto* ablate = app.add_subcommand("ablate", "run the learned-parameter ablation family");
    ablate->add_option("--config", config_path, "experiment config file")->required();
    ablate->add_option("--data", data_dir, "prepared data directory (overrides config)");
    ablate->add_option("--out", output_dir, "output directory (overrides config)");

    std::string run_dir;
    auto* report = app.add_subcommand("report", "print the artifacts of a finished run");
    report->add_option("--run", run_dir, "run output directory")->required();

    CLI11_PARSE(app, argc, argv);

    try {
        if (*prepare) return cmd_prepare(dataset, biased, unbiased, out_dir, seed, implicit);
        if (*train) return cmd_train(config_path, data_dir, output_dir);
        if (*evaluate) return cmd_evaluate(model_path, data_dir, out_csv);
        if (*sweep) return cmd_sweep(config_path, data_dir, ratios, sweep_csv);
        if (*ablate) return cmd_ablate(config_path, data_dir, output_dir);
        if (*report) return cmd_report(run_dir);
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << '\n';
        return 1;
    }
    return 0;
}
