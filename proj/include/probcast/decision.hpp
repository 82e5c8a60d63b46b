#pragma once

#include <cstddef>
#include <string>
#include <vector>

#include "probcast/csv.hpp"

namespace probcast::decision {

enum class TaskKind { Regression, Classification };

struct ReliabilityCurve {
    std::vector<double> thresholds;
    std::vector<std::size_t> retained;  // non-increasing in the threshold
    std::vector<double> loss;           // misclassifications or summed squared error
};

// For each threshold keep points with confidence >= tau. Classification loss
// counts wrong calls at probability cut 0.5; regression loss sums squared
// errors. An empty retained set records loss 0.
ReliabilityCurve reliability_curve(const std::vector<double>& predictions,
                                   const std::vector<double>& confidences,
                                   const std::vector<double>& truths, TaskKind task,
                                   const std::vector<double>& thresholds);

struct DecisionSurface {
    std::vector<double> tau1;  // exceedance-probability thresholds
    std::vector<double> tau2;  // epistemic-confidence thresholds
    // row-major [i2 * tau1.size() + i1]
    std::vector<double> f1, precision, recall;
    std::size_t best_i1 = 0, best_i2 = 0;
    double best_f1 = 0.0;
};

// Predict positive iff prob >= tau1 and confidence >= tau2; gated-out events
// count as negative predictions.
DecisionSurface decision_surface(const std::vector<double>& probs,
                                 const std::vector<double>& confidences,
                                 const std::vector<double>& truths,
                                 const std::vector<double>& tau1_grid,
                                 const std::vector<double>& tau2_grid);

struct OperatingPoint {
    double tau1 = 0.0, tau2 = 0.0, f1 = 0.0;
};

// Argmax over cells; ties prefer smaller tau2, then smaller tau1.
OperatingPoint best_operating_point(const DecisionSurface& surface);

// n evenly spaced values covering [0, 1].
std::vector<double> uniform_grid(std::size_t n = 51);

csv::Table curve_table(const ReliabilityCurve& curve);
csv::Table surface_table(const DecisionSurface& surface);
void save_curve(const ReliabilityCurve& curve, const std::string& path);
void save_surface(const DecisionSurface& surface, const std::string& path);

}  // namespace probcast::decision
