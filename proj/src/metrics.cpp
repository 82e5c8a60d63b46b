#include "probcast/metrics.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <sstream>

#include "json.hpp"
#include "probcast/errors.hpp"
#include "probcast/mathutil.hpp"

namespace probcast::metrics {

using nlohmann::json;

namespace {

void check_same_size(std::size_t a, std::size_t b, const char* what) {
    if (a != b) throw ContractError(std::string(what) + ": size mismatch");
    if (a == 0) throw ContractError(std::string(what) + ": empty inputs");
}

}  // namespace

double rmse(const std::vector<double>& y, const std::vector<double>& yhat) {
    check_same_size(y.size(), yhat.size(), "rmse");
    double sq = 0.0;
    for (std::size_t i = 0; i < y.size(); ++i) {
        double d = y[i] - yhat[i];
        sq += d * d;
    }
    return std::sqrt(sq / static_cast<double>(y.size()));
}

double picp(const std::vector<double>& y, const std::vector<double>& lower,
            const std::vector<double>& upper) {
    check_same_size(y.size(), lower.size(), "picp");
    check_same_size(y.size(), upper.size(), "picp");
    std::size_t covered = 0;
    for (std::size_t i = 0; i < y.size(); ++i) {
        if (lower[i] > upper[i]) throw ContractError("picp: crossed interval bounds");
        if (y[i] >= lower[i] && y[i] <= upper[i]) ++covered;
    }
    return static_cast<double>(covered) / static_cast<double>(y.size());
}

double mpiw(const std::vector<double>& lower, const std::vector<double>& upper) {
    check_same_size(lower.size(), upper.size(), "mpiw");
    double total = 0.0;
    for (std::size_t i = 0; i < lower.size(); ++i) {
        if (lower[i] > upper[i]) throw ContractError("mpiw: crossed interval bounds");
        total += upper[i] - lower[i];
    }
    return total / static_cast<double>(lower.size());
}

double crps_gaussian(double mu, double sigma, double y) {
    if (!(sigma > 0.0)) throw DomainError("crps_gaussian: scale must be positive");
    double z = (y - mu) / sigma;
    constexpr double inv_sqrt_pi = 0.5641895835477562869;
    return sigma * (z * (2.0 * norm_cdf(z) - 1.0) + 2.0 * norm_pdf(z) - inv_sqrt_pi);
}

double crps_samples(const std::vector<double>& samples, double y) {
    if (samples.empty()) throw ContractError("crps_samples: needs at least one sample");
    double m = static_cast<double>(samples.size());
    double term1 = 0.0;
    for (double x : samples) term1 += std::abs(x - y);
    term1 /= m;
    std::vector<double> sorted = samples;
    std::sort(sorted.begin(), sorted.end());
    // sum_ij |x_i - x_j| = 2 * sum_j x_(j) * (2j - M + 1) over sorted 0-based j
    double pair_sum = 0.0;
    for (std::size_t j = 0; j < sorted.size(); ++j)
        pair_sum += sorted[j] * (2.0 * static_cast<double>(j) - m + 1.0);
    double term2 = pair_sum / (m * m);
    return term1 - term2;
}

double brier(const std::vector<double>& labels, const std::vector<double>& probs) {
    check_same_size(labels.size(), probs.size(), "brier");
    double sq = 0.0;
    for (std::size_t i = 0; i < labels.size(); ++i) {
        double d = probs[i] - labels[i];
        sq += d * d;
    }
    return sq / static_cast<double>(labels.size());
}

double cross_entropy(const std::vector<double>& labels, const std::vector<double>& probs) {
    check_same_size(labels.size(), probs.size(), "cross_entropy");
    constexpr double eps = 1e-7;
    double total = 0.0;
    for (std::size_t i = 0; i < labels.size(); ++i) {
        double p = std::clamp(probs[i], eps, 1.0 - eps);
        total += -(labels[i] * std::log(p) + (1.0 - labels[i]) * std::log(1.0 - p));
    }
    return total / static_cast<double>(labels.size());
}

Confusion confusion(const std::vector<double>& labels, const std::vector<double>& probs,
                    double cut) {
    check_same_size(labels.size(), probs.size(), "confusion");
    Confusion c;
    for (std::size_t i = 0; i < labels.size(); ++i) {
        bool actual = labels[i] > 0.5;
        bool predicted = probs[i] >= cut;
        if (predicted && actual) ++c.tp;
        else if (predicted && !actual) ++c.fp;
        else if (!predicted && actual) ++c.fn;
        else ++c.tn;
    }
    return c;
}

Prf precision_recall_f1(const Confusion& c) {
    Prf out;
    double tp = static_cast<double>(c.tp);
    double fp = static_cast<double>(c.fp);
    double fn = static_cast<double>(c.fn);
    if (tp + fp > 0.0) {
        out.precision = tp / (tp + fp);
    } else {
        out.precision = 0.0;
        out.precision_defined = false;
    }
    if (tp + fn > 0.0) {
        out.recall = tp / (tp + fn);
    } else {
        out.recall = 0.0;
        out.recall_defined = false;
    }
    double f1_den = tp + 0.5 * (fp + fn);
    if (f1_den > 0.0) {
        out.f1 = tp / f1_den;
    } else {
        out.f1 = 0.0;
        out.f1_defined = false;
    }
    return out;
}

double nll_metric(const std::vector<double>& y, const std::vector<double>& means,
                  const std::vector<double>& variances) {
    check_same_size(y.size(), means.size(), "nll_metric");
    check_same_size(y.size(), variances.size(), "nll_metric");
    constexpr double log_2pi = 1.8378770664093454836;
    double total = 0.0;
    for (std::size_t i = 0; i < y.size(); ++i) {
        if (!(variances[i] > 0.0)) throw DomainError("nll_metric: non-positive variance");
        double d = y[i] - means[i];
        total += 0.5 * (log_2pi + std::log(variances[i]) + d * d / variances[i]);
    }
    return total / static_cast<double>(y.size());
}

// ---------------------------------------------------------------------------
// reports
// ---------------------------------------------------------------------------

MetricReport assemble_report(const std::string& station, const std::string& pollutant,
                             const std::string& method,
                             const std::optional<RegressionEval>& regression,
                             const std::optional<ClassificationEval>& classification) {
    MetricReport r;
    r.station = station;
    r.pollutant = pollutant;
    r.method = method;
    if (regression.has_value()) {
        const auto& reg = *regression;
        r.count = reg.y.size();
        r.rmse = rmse(reg.y, reg.mean);
        r.picp = picp(reg.y, reg.lower, reg.upper);
        r.mpiw = mpiw(reg.lower, reg.upper);
        if (!reg.variance.empty()) {
            double crps_sum = 0.0;
            for (std::size_t i = 0; i < reg.y.size(); ++i)
                crps_sum += crps_gaussian(reg.mean[i], std::sqrt(reg.variance[i]), reg.y[i]);
            r.crps = crps_sum / static_cast<double>(reg.y.size());
            r.nll = nll_metric(reg.y, reg.mean, reg.variance);
        }
    }
    if (classification.has_value()) {
        const auto& cls = *classification;
        if (r.count == 0) r.count = cls.labels.size();
        for (double o : cls.labels)
            if (o > 0.5) ++r.exceedances;
        r.brier = brier(cls.labels, cls.probs);
        r.cross_entropy = cross_entropy(cls.labels, cls.probs);
        Prf prf = precision_recall_f1(confusion(cls.labels, cls.probs));
        r.precision = prf.precision;
        r.recall = prf.recall;
        r.f1 = prf.f1;
        r.precision_defined = prf.precision_defined;
        r.recall_defined = prf.recall_defined;
        r.f1_defined = prf.f1_defined;
    }
    return r;
}

namespace {

json optional_to_json(const std::optional<double>& v) {
    if (!v.has_value()) return nullptr;
    return *v;
}

std::optional<double> optional_from_json(const json& j, const char* key) {
    if (!j.contains(key) || j[key].is_null()) return std::nullopt;
    return j[key].get<double>();
}

json report_to_json(const MetricReport& r) {
    json j;
    j["station"] = r.station;
    j["pollutant"] = r.pollutant;
    j["method"] = r.method;
    j["count"] = r.count;
    j["exceedances"] = r.exceedances;
    j["rmse"] = optional_to_json(r.rmse);
    j["picp"] = optional_to_json(r.picp);
    j["mpiw"] = optional_to_json(r.mpiw);
    j["crps"] = optional_to_json(r.crps);
    j["nll"] = optional_to_json(r.nll);
    j["brier"] = optional_to_json(r.brier);
    j["precision"] = optional_to_json(r.precision);
    j["recall"] = optional_to_json(r.recall);
    j["f1"] = optional_to_json(r.f1);
    j["ce"] = optional_to_json(r.cross_entropy);
    j["precision_defined"] = r.precision_defined;
    j["recall_defined"] = r.recall_defined;
    j["f1_defined"] = r.f1_defined;
    return j;
}

MetricReport report_from_json(const json& j) {
    MetricReport r;
    r.station = j.at("station").get<std::string>();
    r.pollutant = j.at("pollutant").get<std::string>();
    r.method = j.value("method", std::string());
    r.count = j.at("count").get<std::size_t>();
    r.exceedances = j.at("exceedances").get<std::size_t>();
    r.rmse = optional_from_json(j, "rmse");
    r.picp = optional_from_json(j, "picp");
    r.mpiw = optional_from_json(j, "mpiw");
    r.crps = optional_from_json(j, "crps");
    r.nll = optional_from_json(j, "nll");
    r.brier = optional_from_json(j, "brier");
    r.precision = optional_from_json(j, "precision");
    r.recall = optional_from_json(j, "recall");
    r.f1 = optional_from_json(j, "f1");
    r.cross_entropy = optional_from_json(j, "ce");
    r.precision_defined = j.value("precision_defined", true);
    r.recall_defined = j.value("recall_defined", true);
    r.f1_defined = j.value("f1_defined", true);
    return r;
}

std::string cell(const std::optional<double>& v) {
    if (!v.has_value()) return "";
    return csv::format_double(*v);
}

}  // namespace

std::string reports_to_json(const std::vector<MetricReport>& reports) {
    json j = json::array();
    for (const auto& r : reports) j.push_back(report_to_json(r));
    json root;
    root["format"] = "probcast-metrics";
    root["version"] = 1;
    root["reports"] = std::move(j);
    return root.dump(2);
}

std::vector<MetricReport> reports_from_json(const std::string& text) {
    json root;
    try {
        root = json::parse(text);
    } catch (const std::exception& e) {
        throw DataError(std::string("metric report is not valid JSON: ") + e.what());
    }
    if (!root.contains("format") || root["format"] != "probcast-metrics")
        throw DataError("not a metric report file (missing format tag)");
    std::vector<MetricReport> reports;
    for (const auto& j : root.at("reports")) reports.push_back(report_from_json(j));
    return reports;
}

csv::Table reports_table(const std::vector<MetricReport>& reports) {
    csv::Table table;
    table.header = {"station",   "pollutant",  "method",  "count", "exceedances",
                    "RMSE↓",     "PICP↑",      "MPIW↓",   "CRPS↓", "NLL↓",
                    "Brier↓",    "Precision↑", "Recall↑", "F1↑",   "CE↓"};
    for (const auto& r : reports) {
        table.rows.push_back({r.station, r.pollutant, r.method,
                              csv::format_int(static_cast<long long>(r.count)),
                              csv::format_int(static_cast<long long>(r.exceedances)), cell(r.rmse),
                              cell(r.picp), cell(r.mpiw), cell(r.crps), cell(r.nll), cell(r.brier),
                              cell(r.precision), cell(r.recall), cell(r.f1),
                              cell(r.cross_entropy)});
    }
    return table;
}

void save_reports(const std::vector<MetricReport>& reports, const std::string& json_path,
                  const std::string& csv_path) {
    std::ofstream out(json_path, std::ios::binary);
    if (!out) throw DataError("cannot open report file for writing: " + json_path);
    out << reports_to_json(reports) << '\n';
    if (!out) throw DataError("failed writing report: " + json_path);
    csv::write_file(csv_path, reports_table(reports));
}

std::vector<MetricReport> load_reports(const std::string& json_path) {
    std::ifstream in(json_path, std::ios::binary);
    if (!in) throw DataError("cannot open report file: " + json_path);
    std::ostringstream buf;
    buf << in.rdbuf();
    return reports_from_json(buf.str());
}

}  // namespace probcast::metrics
