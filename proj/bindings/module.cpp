#include <pybind11/functional.h>
#include <pybind11/pybind11.h>
#include <pybind11/stl.h>

#include "debiasrec/experiment.hpp"
#include "debiasrec/framework.hpp"
#include "debiasrec/meta.hpp"
#include "debiasrec/metrics.hpp"
#include "debiasrec/world.hpp"

namespace py = pybind11;
using namespace debiasrec;

PYBIND11_MODULE(_core, mod) {
    mod.doc() = "debiased training and evaluation for recommendation from biased feedback";

    py::class_<Interaction>(mod, "Interaction")
        .def(py::init([](int user, int item, int label, int position) {
                 return Interaction{user, item, label, position};
             }),
             py::arg("user"), py::arg("item"), py::arg("label"), py::arg("position") = 0)
        .def_readwrite("user", &Interaction::user)
        .def_readwrite("item", &Interaction::item)
        .def_readwrite("label", &Interaction::label)
        .def_readwrite("position", &Interaction::position)
        .def("__repr__", [](const Interaction& x) {
            return "Interaction(user=" + std::to_string(x.user) + ", item=" +
                   std::to_string(x.item) + ", label=" + std::to_string(x.label) +
                   ", position=" + std::to_string(x.position) + ")";
        });

    py::enum_<FeedbackKind>(mod, "FeedbackKind")
        .value("EXPLICIT", FeedbackKind::Explicit)
        .value("IMPLICIT", FeedbackKind::Implicit)
        .value("LIST", FeedbackKind::List);

    py::class_<DatasetBundle>(mod, "DatasetBundle")
        .def(py::init<>())
        .def_readwrite("train", &DatasetBundle::train)
        .def_readwrite("uniform", &DatasetBundle::uniform)
        .def_readwrite("validation", &DatasetBundle::validation)
        .def_readwrite("test", &DatasetBundle::test)
        .def_readwrite("n_users", &DatasetBundle::n_users)
        .def_readwrite("n_items", &DatasetBundle::n_items)
        .def_readwrite("feedback_kind", &DatasetBundle::feedback_kind)
        .def_readwrite("seed", &DatasetBundle::seed)
        .def("check", &DatasetBundle::check);

    mod.def("binarize", &binarize, py::arg("rating"));
    mod.def("load_bundle", &load_bundle, py::arg("dir"));
    mod.def("save_bundle", &save_bundle, py::arg("bundle"), py::arg("dir"));

    py::enum_<LossKind>(mod, "LossKind")
        .value("SQUARED", LossKind::Squared)
        .value("LOGISTIC", LossKind::Logistic);

    mod.def("loss_value", &loss_value, py::arg("kind"), py::arg("f"), py::arg("r"));

    py::class_<FactorModel>(mod, "FactorModel")
        .def_static("init", &FactorModel::init, py::arg("n_users"), py::arg("n_items"),
                    py::arg("dim"), py::arg("seed"))
        .def_readonly("n_users", &FactorModel::n_users)
        .def_readonly("n_items", &FactorModel::n_items)
        .def_readonly("dim", &FactorModel::dim)
        .def("predict", &FactorModel::predict, py::arg("user"), py::arg("item"))
        .def("save", &FactorModel::save, py::arg("path"))
        .def_static("load", &FactorModel::load, py::arg("path"));

    py::class_<SgdOptions>(mod, "SgdOptions")
        .def(py::init<>())
        .def_readwrite("lr", &SgdOptions::lr)
        .def_readwrite("weight_decay", &SgdOptions::weight_decay)
        .def_readwrite("epochs", &SgdOptions::epochs)
        .def_readwrite("batch_size", &SgdOptions::batch_size)
        .def_readwrite("seed", &SgdOptions::seed);

    mod.def(
        "sgd_fit",
        [](const FactorModel& model, const std::vector<Interaction>& data, LossKind loss,
           const SgdOptions& opt) { return sgd_fit(model, data, loss, opt); },
        py::arg("model"), py::arg("data"), py::arg("loss"), py::arg("options"));
    mod.def("empirical_risk", &empirical_risk, py::arg("model"), py::arg("data"),
            py::arg("loss"));

    py::class_<MetricsReport>(mod, "MetricsReport")
        .def_readonly("nll", &MetricsReport::nll)
        .def_readonly("auc", &MetricsReport::auc)
        .def_readonly("ndcg_at", &MetricsReport::ndcg_at);

    mod.def("evaluate", &evaluate, py::arg("model"), py::arg("test"),
            py::arg("ndcg_ks") = std::vector<int>{5});
    mod.def("ndcg_at_k", &ndcg_at_k, py::arg("model"), py::arg("test"), py::arg("k"));
    mod.def("auc", &auc, py::arg("model"), py::arg("test"));
    mod.def("nll", &nll, py::arg("model"), py::arg("test"));
    mod.def("rank_correlation", &rank_correlation, py::arg("a"), py::arg("b"));

    py::class_<PropensityTable>(mod, "PropensityTable")
        .def_readonly("q_positive", &PropensityTable::q_positive)
        .def_readonly("q_negative", &PropensityTable::q_negative)
        .def_readonly("method", &PropensityTable::method);
    mod.def("estimate_propensity_naive_bayes", &estimate_propensity_naive_bayes,
            py::arg("train"), py::arg("uniform"), py::arg("n_users"), py::arg("n_items"));

    py::class_<SimulationSpec>(mod, "SimulationSpec")
        .def(py::init<>())
        .def_readwrite("n_users", &SimulationSpec::n_users)
        .def_readwrite("n_items", &SimulationSpec::n_items)
        .def_readwrite("latent_dim", &SimulationSpec::latent_dim)
        .def_readwrite("score_sharpness", &SimulationSpec::score_sharpness)
        .def_readwrite("score_offset", &SimulationSpec::score_offset)
        .def_readwrite("warm_epochs", &SimulationSpec::warm_epochs)
        .def_readwrite("warm_dim", &SimulationSpec::warm_dim)
        .def_readwrite("seed", &SimulationSpec::seed);
    py::class_<SimulationResult>(mod, "SimulationResult")
        .def_readonly("bundle", &SimulationResult::bundle)
        .def_readonly("true_scores", &SimulationResult::true_scores);
    mod.def("generate_simulation", &generate_simulation, py::arg("spec"));

    py::enum_<AblationKind>(mod, "AblationKind")
        .value("FULL", AblationKind::Full)
        .value("W1", AblationKind::W1)
        .value("W1M", AblationKind::W1M)
        .value("FROZEN", AblationKind::Frozen);

    py::class_<TrainerConfig>(mod, "TrainerConfig")
        .def(py::init<>())
        .def_readwrite("lr_base", &TrainerConfig::lr_base)
        .def_readwrite("lr_meta", &TrainerConfig::lr_meta)
        .def_readwrite("weight_decay", &TrainerConfig::weight_decay)
        .def_readwrite("batch_train", &TrainerConfig::batch_train)
        .def_readwrite("batch_pairs", &TrainerConfig::batch_pairs)
        .def_readwrite("batch_uniform", &TrainerConfig::batch_uniform)
        .def_readwrite("epochs", &TrainerConfig::epochs)
        .def_readwrite("dim", &TrainerConfig::dim)
        .def_readwrite("loss", &TrainerConfig::loss)
        .def_readwrite("ablation", &TrainerConfig::ablation)
        .def_readwrite("seed", &TrainerConfig::seed)
        .def_readwrite("w1m_pair_weight", &TrainerConfig::w1m_pair_weight)
        .def_readwrite("meta_weight_decay", &TrainerConfig::meta_weight_decay)
        .def_readwrite("meta_warmup_epochs", &TrainerConfig::meta_warmup_epochs)
        .def_readwrite("lr_meta_decay_epochs", &TrainerConfig::lr_meta_decay_epochs);

    py::class_<MetaModel>(mod, "MetaModel")
        .def("w1", &MetaModel::w1, py::arg("user"), py::arg("item"), py::arg("label"),
             py::arg("position") = 0)
        .def("w2", &MetaModel::w2, py::arg("user"), py::arg("item"), py::arg("observed"))
        .def("m", &MetaModel::m, py::arg("label"), py::arg("observed"))
        .def("item_factor", &MetaModel::item_factor, py::arg("item"))
        .def("user_factor", &MetaModel::user_factor, py::arg("user"))
        .def("label_factor", &MetaModel::label_factor, py::arg("label"));

    py::class_<TrainEpochRow>(mod, "TrainEpochRow")
        .def_readonly("epoch", &TrainEpochRow::epoch)
        .def_readonly("train_risk", &TrainEpochRow::train_risk)
        .def_readonly("uniform_risk", &TrainEpochRow::uniform_risk)
        .def_readonly("val_ndcg5", &TrainEpochRow::val_ndcg5);

    py::class_<AutoDebiasResult>(mod, "AutoDebiasResult")
        .def_readonly("model", &AutoDebiasResult::model)
        .def_readonly("meta", &AutoDebiasResult::meta)
        .def_readonly("trace", &AutoDebiasResult::trace)
        .def_readonly("best_epoch", &AutoDebiasResult::best_epoch);

    mod.def(
        "train_autodebias",
        [](const DatasetBundle& bundle, const TrainerConfig& cfg) {
            return train_autodebias(bundle, cfg);
        },
        py::arg("bundle"), py::arg("config"));

    py::enum_<Method>(mod, "Method")
        .value("MF_BIASED", Method::MfBiased)
        .value("MF_UNIFORM", Method::MfUniform)
        .value("MF_COMBINE", Method::MfCombine)
        .value("IPS", Method::Ips)
        .value("DR", Method::Dr)
        .value("IMPUTATION", Method::Imputation)
        .value("NEG_WEIGHT", Method::NegWeight)
        .value("IPS_VARIANT", Method::IpsVariant)
        .value("POS_IPS", Method::PosIps)
        .value("AUTODEBIAS", Method::AutoDebias)
        .value("AUTODEBIAS_W1", Method::AutoDebiasW1)
        .value("AUTODEBIAS_W1M", Method::AutoDebiasW1m);

    mod.def("train_and_evaluate",
            [](const DatasetBundle& bundle, Method method, double lr, double wd,
               std::uint64_t seed, int dim, int epochs, int batch_size, LossKind loss) {
                RunRow row = train_and_evaluate(bundle, method, lr, wd, seed, dim, epochs,
                                                batch_size, loss);
                py::dict out;
                out["val_ndcg5"] = row.val_ndcg5;
                out["nll"] = row.test.nll;
                out["auc"] = row.test.auc;
                out["ndcg5"] = row.test.ndcg_at.at(5);
                return out;
            },
            py::arg("bundle"), py::arg("method"), py::arg("lr"), py::arg("weight_decay"),
            py::arg("seed"), py::arg("dim") = 10, py::arg("epochs") = 20,
            py::arg("batch_size") = 128, py::arg("loss") = LossKind::Squared);

    mod.def("fingerprint", &fingerprint, py::arg("bundle"));
}
