#pragma once

#include <cstddef>
#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "probcast/data.hpp"
#include "probcast/layers.hpp"
#include "probcast/models.hpp"
#include "probcast/tensor.hpp"
#include "probcast/uncertainty.hpp"

namespace probcast::train {

struct TrainConfig {
    std::size_t epochs = 60;
    std::size_t batch_size = 32;
    double learning_rate = 1e-3;
    double decay = 0.99;  // per-epoch exponential learning-rate factor
    double beta1 = 0.9;
    double beta2 = 0.999;
    double adam_eps = 1e-8;
    double clip_norm = 5.0;
    std::uint64_t seed = 1;

    bool variational = false;  // optimize the ELBO (data term + scaled KL)

    bool adversarial = false;
    double epsilon = 0.01;    // max-norm perturbation radius, normalized units
    std::size_t replay = 4;   // gradient replays per minibatch

    bool collect_swag = false;
    double swag_start_fraction = 0.75;
    std::size_t swag_rank = 20;
    std::size_t swag_cadence = 1;  // epochs between weight snapshots

    double quantile_low = 0.05;
    double quantile_high = 0.95;
};

struct CurvePoint {
    std::size_t epoch = 0;
    double data_loss = 0.0;  // epoch mean per target element
    double kl_loss = 0.0;    // epoch total of the weighted KL term
    double learning_rate = 0.0;
};

struct TrainResult {
    std::vector<CurvePoint> curve;
    std::optional<uq::SwagState> swag;
};

// ---------------------------------------------------------------------------
// scalar losses (metric-grade, no autodiff)
// ---------------------------------------------------------------------------

// 0.5*(log(2*pi*var) + (y-mu)^2/var), averaged over all elements.
double gaussian_nll(const std::vector<double>& y, const std::vector<double>& mu,
                    const std::vector<double>& var);
// Two-term binary cross-entropy, probabilities clamped to [1e-7, 1-1e-7].
double binary_cross_entropy(const std::vector<double>& labels, const std::vector<double>& probs);
// max(tau*(y-q), (tau-1)*(y-q))
double pinball_loss(double y, double q, double tau);

// Differentiable pinball loss, mean over elements.
ad::Tensor pinball(const ad::Tensor& y, const ad::Tensor& q, double tau);

// ---------------------------------------------------------------------------
// optimizer
// ---------------------------------------------------------------------------

struct Adam {
    double beta1 = 0.9;
    double beta2 = 0.999;
    double eps = 1e-8;
    std::size_t step_count = 0;
    std::vector<std::vector<double>> first_moment;
    std::vector<std::vector<double>> second_moment;

    void init(const std::vector<nn::NamedParam>& params);
};

// Scales all gradients by clip_norm/norm when the global norm exceeds clip_norm.
double clip_gradients(std::vector<nn::NamedParam>& params, double clip_norm);

// Adaptive-moment update with bias correction; aborts on non-finite gradients
// naming the offending parameter.
void optimizer_step(std::vector<nn::NamedParam>& params, Adam& opt, double learning_rate);

// ---------------------------------------------------------------------------
// training loops
// ---------------------------------------------------------------------------

TrainResult train(model::Forecaster& net, const data::WindowedDataset& ds, const TrainConfig& cfg);

// Free adversarial training: each minibatch replayed cfg.replay times, weights
// and the shared perturbation updated every replay, outer epochs = epochs/replay.
TrainResult free_adversarial_train(model::Forecaster& net, const data::WindowedDataset& ds,
                                   const TrainConfig& cfg);

void save_curve_csv(const std::vector<CurvePoint>& curve, const std::string& path);

}  // namespace probcast::train
