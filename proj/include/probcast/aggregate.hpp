#pragma once

#include <cstddef>
#include <vector>

namespace probcast::agg {

struct PredictiveMixture {
    double mean = 0.0;
    double variance = 0.0;            // total: epistemic + aleatoric
    double epistemic_variance = 0.0;  // variance of component means
    double aleatoric_variance = 0.0;  // mean of component variances
    double lower = 0.0;               // 95% bounds, filled by prediction_interval
    double upper = 0.0;
    std::size_t count = 0;
};

struct ExceedanceForecast {
    double probability = 0.0;  // mean of per-sample probabilities
    std::vector<double> samples;
    double confidence = 0.0;
};

// Uniform Gaussian mixture moments from per-sample (mean, variance) pairs.
PredictiveMixture mix_moments(const std::vector<double>& means,
                              const std::vector<double>& variances);

// Quantile z for a central interval at `level`, e.g. 1.96 for 0.95.
double interval_z(double level);

// Fills lower/upper with mean -/+ z*sqrt(variance).
void prediction_interval(PredictiveMixture& mixture, double level = 0.95);

ExceedanceForecast average_probabilities(const std::vector<double>& samples);

// 1 - width of the central 95% empirical interval of sampled probabilities.
double classification_confidence(const std::vector<double>& samples);

// Min-max normalized 1 - spread over a test set; constant spread maps to all 1.
std::vector<double> regression_confidence(const std::vector<double>& epistemic_stds);

}  // namespace probcast::agg
