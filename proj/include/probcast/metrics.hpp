#pragma once

#include <cstddef>
#include <optional>
#include <string>
#include <vector>

#include "probcast/csv.hpp"

namespace probcast::metrics {

double rmse(const std::vector<double>& y, const std::vector<double>& yhat);

// Coverage with boundary observations counted as covered.
double picp(const std::vector<double>& y, const std::vector<double>& lower,
            const std::vector<double>& upper);
double mpiw(const std::vector<double>& lower, const std::vector<double>& upper);

// Closed form for a Gaussian forecast: sigma*(z*(2*Phi(z)-1) + 2*phi(z) - 1/sqrt(pi)).
double crps_gaussian(double mu, double sigma, double y);
// (1/M) sum |X_i - y| - (1/(2M^2)) sum_ij |X_i - X_j|, computed in O(M log M).
double crps_samples(const std::vector<double>& samples, double y);

double brier(const std::vector<double>& labels, const std::vector<double>& probs);
// Clamped two-term binary cross-entropy.
double cross_entropy(const std::vector<double>& labels, const std::vector<double>& probs);

struct Confusion {
    std::size_t tp = 0, fp = 0, fn = 0, tn = 0;
};
Confusion confusion(const std::vector<double>& labels, const std::vector<double>& probs,
                    double cut = 0.5);

struct Prf {
    double precision = 0.0, recall = 0.0, f1 = 0.0;
    // false when the corresponding denominator was zero and 0 was substituted
    bool precision_defined = true, recall_defined = true, f1_defined = true;
};
Prf precision_recall_f1(const Confusion& c);

// Mean Gaussian NLL of observations under per-step (mean, variance) summaries.
double nll_metric(const std::vector<double>& y, const std::vector<double>& means,
                  const std::vector<double>& variances);

// ---------------------------------------------------------------------------
// reports
// ---------------------------------------------------------------------------

struct RegressionEval {
    std::vector<double> y, mean, variance, lower, upper;
};
struct ClassificationEval {
    std::vector<double> labels, probs;
};

struct MetricReport {
    std::string station;
    std::string pollutant;
    std::string method;
    std::size_t count = 0;
    std::size_t exceedances = 0;
    std::optional<double> rmse, picp, mpiw, crps, nll;
    std::optional<double> brier, precision, recall, f1, cross_entropy;
    bool precision_defined = true, recall_defined = true, f1_defined = true;
};

// Either block may be absent; the report carries explicit empty fields then.
MetricReport assemble_report(const std::string& station, const std::string& pollutant,
                             const std::string& method,
                             const std::optional<RegressionEval>& regression,
                             const std::optional<ClassificationEval>& classification);

std::string reports_to_json(const std::vector<MetricReport>& reports);
std::vector<MetricReport> reports_from_json(const std::string& text);
// One row per report; metric columns in fixed order with direction arrows.
csv::Table reports_table(const std::vector<MetricReport>& reports);
void save_reports(const std::vector<MetricReport>& reports, const std::string& json_path,
                  const std::string& csv_path);
std::vector<MetricReport> load_reports(const std::string& json_path);

}  // namespace probcast::metrics
