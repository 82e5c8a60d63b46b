#include "probcast/baselines.hpp"

#include <algorithm>

#include "probcast/errors.hpp"
#include "probcast/metrics.hpp"

namespace probcast::baselines {

std::optional<double> persistence_forecast(const data::TimeSeriesFrame& frame,
                                           const std::string& column, std::int64_t when) {
    std::size_t col = frame.column_index(column);
    if (frame.timestamps.empty()) return std::nullopt;
    std::int64_t source_time = when - 24 * data::kHour;
    std::int64_t first = frame.timestamps.front();
    if (source_time < first) return std::nullopt;
    auto offset = (source_time - first) / data::kHour;
    auto row = static_cast<std::size_t>(offset);
    if ((source_time - first) % data::kHour != 0 || row >= frame.num_rows()) return std::nullopt;
    if (frame.missing[col][row]) return std::nullopt;
    return frame.values[col][row];
}

double pinball_loss(const std::vector<double>& y, const std::vector<double>& qhat, double q) {
    if (y.size() != qhat.size()) throw ContractError("pinball_loss: size mismatch");
    if (y.empty()) throw ContractError("pinball_loss: empty inputs");
    if (!(q > 0.0 && q < 1.0)) throw DomainError("pinball_loss: quantile must lie in (0, 1)");
    double total = 0.0;
    for (std::size_t i = 0; i < y.size(); ++i) {
        double d = y[i] - qhat[i];
        total += d >= 0.0 ? q * d : (1.0 - q) * -d;
    }
    return total / static_cast<double>(y.size());
}

void repair_crossing(QuantileForecast& forecast) {
    if (forecast.lower.size() != forecast.upper.size())
        throw ContractError("repair_crossing: bound length mismatch");
    for (std::size_t i = 0; i < forecast.lower.size(); ++i)
        if (forecast.lower[i] > forecast.upper[i]) std::swap(forecast.lower[i], forecast.upper[i]);
}

std::pair<double, double> quantile_interval_eval(const QuantileForecast& forecast,
                                                 const std::vector<double>& y) {
    return {metrics::picp(y, forecast.lower, forecast.upper),
            metrics::mpiw(forecast.lower, forecast.upper)};
}

}  // namespace probcast::baselines
