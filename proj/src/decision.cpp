#include "probcast/decision.hpp"

#include "probcast/errors.hpp"
#include "probcast/metrics.hpp"

namespace probcast::decision {

ReliabilityCurve reliability_curve(const std::vector<double>& predictions,
                                   const std::vector<double>& confidences,
                                   const std::vector<double>& truths, TaskKind task,
                                   const std::vector<double>& thresholds) {
    if (predictions.size() != confidences.size() || predictions.size() != truths.size())
        throw ContractError("reliability_curve: input size mismatch");
    for (double c : confidences)
        if (!(c >= 0.0 && c <= 1.0))
            throw ContractError("reliability_curve: confidence outside [0, 1]");
    ReliabilityCurve curve;
    curve.thresholds = thresholds;
    curve.retained.resize(thresholds.size(), 0);
    curve.loss.resize(thresholds.size(), 0.0);
    for (std::size_t t = 0; t < thresholds.size(); ++t) {
        double tau = thresholds[t];
        std::size_t kept = 0;
        double loss = 0.0;
        for (std::size_t i = 0; i < predictions.size(); ++i) {
            if (confidences[i] < tau) continue;
            ++kept;
            if (task == TaskKind::Classification) {
                bool predicted = predictions[i] >= 0.5;
                bool actual = truths[i] > 0.5;
                if (predicted != actual) loss += 1.0;
            } else {
                double d = predictions[i] - truths[i];
                loss += d * d;
            }
        }
        curve.retained[t] = kept;
        curve.loss[t] = loss;
    }
    return curve;
}

DecisionSurface decision_surface(const std::vector<double>& probs,
                                 const std::vector<double>& confidences,
                                 const std::vector<double>& truths,
                                 const std::vector<double>& tau1_grid,
                                 const std::vector<double>& tau2_grid) {
    if (tau1_grid.empty() || tau2_grid.empty())
        throw ContractError("decision_surface: threshold grids must be non-empty");
    if (probs.size() != confidences.size() || probs.size() != truths.size())
        throw ContractError("decision_surface: input size mismatch");
    DecisionSurface surface;
    surface.tau1 = tau1_grid;
    surface.tau2 = tau2_grid;
    std::size_t cells = tau1_grid.size() * tau2_grid.size();
    surface.f1.resize(cells, 0.0);
    surface.precision.resize(cells, 0.0);
    surface.recall.resize(cells, 0.0);
    for (std::size_t i2 = 0; i2 < tau2_grid.size(); ++i2) {
        for (std::size_t i1 = 0; i1 < tau1_grid.size(); ++i1) {
            metrics::Confusion c;
            for (std::size_t k = 0; k < probs.size(); ++k) {
                bool predicted = probs[k] >= tau1_grid[i1] && confidences[k] >= tau2_grid[i2];
                bool actual = truths[k] > 0.5;
                if (predicted && actual) ++c.tp;
                else if (predicted && !actual) ++c.fp;
                else if (!predicted && actual) ++c.fn;
                else ++c.tn;
            }
            metrics::Prf prf = metrics::precision_recall_f1(c);
            std::size_t cell = i2 * tau1_grid.size() + i1;
            surface.f1[cell] = prf.f1;
            surface.precision[cell] = prf.precision;
            surface.recall[cell] = prf.recall;
        }
    }
    OperatingPoint best;
    bool first = true;
    for (std::size_t i2 = 0; i2 < tau2_grid.size(); ++i2) {
        for (std::size_t i1 = 0; i1 < tau1_grid.size(); ++i1) {
            double f1 = surface.f1[i2 * tau1_grid.size() + i1];
            if (first || f1 > best.f1) {
                first = false;
                best.f1 = f1;
                surface.best_i1 = i1;
                surface.best_i2 = i2;
            }
        }
    }
    surface.best_f1 = best.f1;
    return surface;
}

OperatingPoint best_operating_point(const DecisionSurface& surface) {
    OperatingPoint best;
    best.tau1 = surface.tau1[surface.best_i1];
    best.tau2 = surface.tau2[surface.best_i2];
    best.f1 = surface.best_f1;
    return best;
}

std::vector<double> uniform_grid(std::size_t n) {
    if (n < 2) throw ContractError("uniform_grid: needs at least 2 points");
    std::vector<double> grid(n);
    for (std::size_t i = 0; i < n; ++i)
        grid[i] = static_cast<double>(i) / static_cast<double>(n - 1);
    return grid;
}

csv::Table curve_table(const ReliabilityCurve& curve) {
    csv::Table table;
    table.header = {"tau", "loss", "count"};
    for (std::size_t i = 0; i < curve.thresholds.size(); ++i)
        table.rows.push_back({csv::format_double(curve.thresholds[i]),
                              csv::format_double(curve.loss[i]),
                              csv::format_int(static_cast<long long>(curve.retained[i]))});
    return table;
}

csv::Table surface_table(const DecisionSurface& surface) {
    csv::Table table;
    table.header = {"tau1", "tau2", "f1", "precision", "recall"};
    for (std::size_t i2 = 0; i2 < surface.tau2.size(); ++i2) {
        for (std::size_t i1 = 0; i1 < surface.tau1.size(); ++i1) {
            std::size_t cell = i2 * surface.tau1.size() + i1;
            table.rows.push_back({csv::format_double(surface.tau1[i1]),
                                  csv::format_double(surface.tau2[i2]),
                                  csv::format_double(surface.f1[cell]),
                                  csv::format_double(surface.precision[cell]),
                                  csv::format_double(surface.recall[cell])});
        }
    }
    return table;
}

void save_curve(const ReliabilityCurve& curve, const std::string& path) {
    csv::write_file(path, curve_table(curve));
}

void save_surface(const DecisionSurface& surface, const std::string& path) {
    csv::write_file(path, surface_table(surface));
}

}  // namespace probcast::decision
