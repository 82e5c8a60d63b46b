#include <pybind11/functional.h>
#include <pybind11/pybind11.h>
#include <pybind11/stl.h>

#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include "probcast/aggregate.hpp"
#include "probcast/commands.hpp"
#include "probcast/data.hpp"
#include "probcast/decision.hpp"
#include "probcast/errors.hpp"
#include "probcast/experiment.hpp"
#include "probcast/kvconfig.hpp"
#include "probcast/mathutil.hpp"
#include "probcast/metrics.hpp"
#include "probcast/uncertainty.hpp"

namespace py = pybind11;
using namespace probcast;

namespace {

ExperimentConfig config_from_path_and_overrides(const std::string& config_path,
                                                const py::dict& overrides) {
    KvConfig kv;
    if (!config_path.empty()) kv = KvConfig::load(config_path);
    for (auto item : overrides)
        kv.set(py::cast<std::string>(item.first), py::cast<std::string>(py::str(item.second)));
    return config_from_kv(kv);
}

std::string run_command(const std::string& verb, const std::string& config_path,
                        const py::dict& overrides) {
    ExperimentConfig cfg = config_from_path_and_overrides(config_path, overrides);
    std::ostringstream log;
    if (verb == "prepare")
        cmd::cmd_prepare(cfg, log);
    else if (verb == "train")
        cmd::cmd_train(cfg, log);
    else if (verb == "evaluate")
        cmd::cmd_evaluate(cfg, log);
    else if (verb == "forecast")
        cmd::cmd_forecast(cfg, cfg.anchor, log);
    else
        throw ConfigError("unknown verb '" + verb + "' (prepare|train|evaluate|forecast)");
    return log.str();
}

}  // namespace

PYBIND11_MODULE(_core, m) {
    m.doc() = "probabilistic air-pollutant forecasting core";

    py::register_exception<ConfigError>(m, "ConfigError", PyExc_ValueError);
    py::register_exception<DataError>(m, "DataError", PyExc_ValueError);
    py::register_exception<ShapeError>(m, "ShapeError", PyExc_ValueError);
    py::register_exception<DomainError>(m, "DomainError", PyExc_ValueError);
    py::register_exception<ContractError>(m, "ContractError", PyExc_ValueError);
    py::register_exception<NumericError>(m, "NumericError", PyExc_ArithmeticError);

    // --- normal-distribution helpers ---------------------------------------
    m.def("norm_cdf", &norm_cdf, py::arg("z"));
    m.def("norm_quantile", &norm_quantile, py::arg("p"));
    m.def("empirical_quantile", &empirical_quantile, py::arg("sorted_values"), py::arg("q"));

    // --- CAQI bands and exceedance labels -----------------------------------
    m.def(
        "caqi_classify",
        [](double value, const std::string& pollutant) {
            return data::caqi_classify(value, data::pollutant_from_name(pollutant));
        },
        py::arg("value"), py::arg("pollutant"));
    m.def(
        "exceedance_label",
        [](double value, const std::string& pollutant) {
            return data::exceedance_label(value, data::pollutant_from_name(pollutant));
        },
        py::arg("value"), py::arg("pollutant"));
    m.def(
        "very_low_upper_bound",
        [](const std::string& pollutant) {
            return data::very_low_upper_bound(data::pollutant_from_name(pollutant));
        },
        py::arg("pollutant"));

    // --- mixture aggregation -------------------------------------------------
    py::class_<agg::PredictiveMixture>(m, "PredictiveMixture")
        .def_readonly("mean", &agg::PredictiveMixture::mean)
        .def_readonly("variance", &agg::PredictiveMixture::variance)
        .def_readonly("epistemic_variance", &agg::PredictiveMixture::epistemic_variance)
        .def_readonly("aleatoric_variance", &agg::PredictiveMixture::aleatoric_variance)
        .def_readonly("lower", &agg::PredictiveMixture::lower)
        .def_readonly("upper", &agg::PredictiveMixture::upper)
        .def_readonly("count", &agg::PredictiveMixture::count);
    m.def(
        "mix_moments",
        [](const std::vector<double>& means, const std::vector<double>& variances, double level) {
            auto mix = agg::mix_moments(means, variances);
            agg::prediction_interval(mix, level);
            return mix;
        },
        py::arg("means"), py::arg("variances"), py::arg("level") = 0.95);
    m.def("interval_z", &agg::interval_z, py::arg("level"));
    m.def(
        "average_probabilities",
        [](const std::vector<double>& samples) {
            auto fc = agg::average_probabilities(samples);
            return py::make_tuple(fc.probability, fc.confidence);
        },
        py::arg("samples"));
    m.def("classification_confidence", &agg::classification_confidence, py::arg("samples"));
    m.def("regression_confidence", &agg::regression_confidence, py::arg("epistemic_stds"));

    // --- KL divergence --------------------------------------------------------
    m.def(
        "kl_gaussian",
        [](const std::vector<double>& mu_q, const std::vector<double>& sigma_q, double mu_p,
           double sigma_p) { return uq::kl_gaussian_closed(mu_q, sigma_q, mu_p, sigma_p); },
        py::arg("mu_q"), py::arg("sigma_q"), py::arg("mu_p") = 0.0, py::arg("sigma_p") = 1.0);

    // --- metrics ---------------------------------------------------------------
    m.def("rmse", &metrics::rmse, py::arg("y"), py::arg("yhat"));
    m.def("picp", &metrics::picp, py::arg("y"), py::arg("lower"), py::arg("upper"));
    m.def("mpiw", &metrics::mpiw, py::arg("lower"), py::arg("upper"));
    m.def("crps_gaussian", &metrics::crps_gaussian, py::arg("mu"), py::arg("sigma"), py::arg("y"));
    m.def("crps_samples", &metrics::crps_samples, py::arg("samples"), py::arg("y"));
    m.def("brier", &metrics::brier, py::arg("labels"), py::arg("probs"));
    m.def("cross_entropy", &metrics::cross_entropy, py::arg("labels"), py::arg("probs"));
    m.def("nll", &metrics::nll_metric, py::arg("y"), py::arg("means"), py::arg("variances"));
    m.def(
        "precision_recall_f1",
        [](const std::vector<double>& labels, const std::vector<double>& probs, double cut) {
            auto prf = metrics::precision_recall_f1(metrics::confusion(labels, probs, cut));
            return py::make_tuple(prf.precision, prf.recall, prf.f1);
        },
        py::arg("labels"), py::arg("probs"), py::arg("cut") = 0.5);

    // --- decision analysis -------------------------------------------------------
    py::class_<decision::ReliabilityCurve>(m, "ReliabilityCurve")
        .def_readonly("thresholds", &decision::ReliabilityCurve::thresholds)
        .def_readonly("retained", &decision::ReliabilityCurve::retained)
        .def_readonly("loss", &decision::ReliabilityCurve::loss);
    m.def(
        "reliability_curve",
        [](const std::vector<double>& predictions, const std::vector<double>& confidences,
           const std::vector<double>& truths, const std::string& task,
           const std::vector<double>& thresholds) {
            auto kind = task == "regression" ? decision::TaskKind::Regression
                                             : decision::TaskKind::Classification;
            return decision::reliability_curve(predictions, confidences, truths, kind, thresholds);
        },
        py::arg("predictions"), py::arg("confidences"), py::arg("truths"), py::arg("task"),
        py::arg("thresholds"));
    py::class_<decision::DecisionSurface>(m, "DecisionSurface")
        .def_readonly("tau1", &decision::DecisionSurface::tau1)
        .def_readonly("tau2", &decision::DecisionSurface::tau2)
        .def_readonly("f1", &decision::DecisionSurface::f1)
        .def_readonly("precision", &decision::DecisionSurface::precision)
        .def_readonly("recall", &decision::DecisionSurface::recall)
        .def_readonly("best_f1", &decision::DecisionSurface::best_f1);
    m.def("decision_surface", &decision::decision_surface, py::arg("probs"),
          py::arg("confidences"), py::arg("truths"), py::arg("tau1_grid"), py::arg("tau2_grid"));
    m.def(
        "best_operating_point",
        [](const decision::DecisionSurface& surface) {
            auto best = decision::best_operating_point(surface);
            return py::make_tuple(best.tau1, best.tau2, best.f1);
        },
        py::arg("surface"));
    m.def("uniform_grid", &decision::uniform_grid, py::arg("n") = 51);

    // --- experiment pipeline --------------------------------------------------------
    m.def("run", &run_command, py::arg("verb"), py::arg("config_path") = std::string(),
          py::arg("overrides") = py::dict(),
          "Run one pipeline stage (prepare|train|evaluate|forecast); returns the log text.");
}
