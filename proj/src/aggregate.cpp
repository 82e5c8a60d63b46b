#include "probcast/aggregate.hpp"

#include <algorithm>
#include <cmath>

#include "probcast/errors.hpp"
#include "probcast/mathutil.hpp"

namespace probcast::agg {

PredictiveMixture mix_moments(const std::vector<double>& means,
                              const std::vector<double>& variances) {
    if (means.empty()) throw ContractError("mix_moments: empty component list");
    if (means.size() != variances.size())
        throw ContractError("mix_moments: mean/variance count mismatch");
    double m = static_cast<double>(means.size());
    double mean_sum = 0.0, var_sum = 0.0, sq_sum = 0.0;
    for (std::size_t i = 0; i < means.size(); ++i) {
        if (!(variances[i] > 0.0))
            throw DomainError("mix_moments: component variance must be positive");
        mean_sum += means[i];
        var_sum += variances[i];
        sq_sum += means[i] * means[i];
    }
    PredictiveMixture mix;
    mix.count = means.size();
    mix.mean = mean_sum / m;
    mix.aleatoric_variance = var_sum / m;
    mix.epistemic_variance = std::max(0.0, sq_sum / m - mix.mean * mix.mean);
    mix.variance = mix.aleatoric_variance + mix.epistemic_variance;
    mix.lower = mix.mean;
    mix.upper = mix.mean;
    return mix;
}

double interval_z(double level) {
    if (!(level > 0.0 && level < 1.0))
        throw DomainError("interval level must lie in (0, 1)");
    return norm_quantile(0.5 * (1.0 + level));
}

void prediction_interval(PredictiveMixture& mixture, double level) {
    double z = interval_z(level);
    double sd = std::sqrt(mixture.variance);
    mixture.lower = mixture.mean - z * sd;
    mixture.upper = mixture.mean + z * sd;
}

ExceedanceForecast average_probabilities(const std::vector<double>& samples) {
    if (samples.empty()) throw ContractError("average_probabilities: empty sample list");
    double sum = 0.0;
    for (double p : samples) {
        if (!(p >= 0.0 && p <= 1.0))
            throw ContractError("average_probabilities: probability outside [0, 1]");
        sum += p;
    }
    ExceedanceForecast fc;
    fc.samples = samples;
    fc.probability = sum / static_cast<double>(samples.size());
    fc.confidence = samples.size() >= 2 ? classification_confidence(samples) : 1.0;
    return fc;
}

double classification_confidence(const std::vector<double>& samples) {
    if (samples.size() < 2)
        throw ContractError("classification_confidence: needs at least 2 samples");
    std::vector<double> sorted = samples;
    std::sort(sorted.begin(), sorted.end());
    double lo = empirical_quantile(sorted, 0.025);
    double hi = empirical_quantile(sorted, 0.975);
    double conf = 1.0 - (hi - lo);
    return std::clamp(conf, 0.0, 1.0);
}

std::vector<double> regression_confidence(const std::vector<double>& epistemic_stds) {
    if (epistemic_stds.empty()) return {};
    auto [lo_it, hi_it] = std::minmax_element(epistemic_stds.begin(), epistemic_stds.end());
    double lo = *lo_it, hi = *hi_it;
    std::vector<double> conf(epistemic_stds.size(), 1.0);
    if (hi - lo <= 0.0) return conf;
    for (std::size_t i = 0; i < conf.size(); ++i)
        conf[i] = 1.0 - (epistemic_stds[i] - lo) / (hi - lo);
    return conf;
}

}  // namespace probcast::agg
