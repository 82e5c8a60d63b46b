#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <utility>
#include <vector>

#include "probcast/data.hpp"

namespace probcast::baselines {

// Value observed 24 hours before `when`; nullopt when out of range or missing.
std::optional<double> persistence_forecast(const data::TimeSeriesFrame& frame,
                                           const std::string& column, std::int64_t when);

// mean of q*(y-qhat)+ + (1-q)*(qhat-y)+ over aligned vectors
double pinball_loss(const std::vector<double>& y, const std::vector<double>& qhat, double q);

struct QuantileForecast {
    std::vector<double> lower;  // q = 0.05
    std::vector<double> upper;  // q = 0.95
};

// Swaps crossed bounds in place; preserves the multiset of values per step.
void repair_crossing(QuantileForecast& forecast);

// (PICP, MPIW) of repaired bounds against observations.
std::pair<double, double> quantile_interval_eval(const QuantileForecast& forecast,
                                                 const std::vector<double>& y);

}  // namespace probcast::baselines
