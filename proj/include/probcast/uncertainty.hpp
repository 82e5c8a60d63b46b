#pragma once

#include <cstddef>
#include <functional>
#include <memory>
#include <optional>
#include <string>
#include <vector>

#include "probcast/data.hpp"
#include "probcast/models.hpp"
#include "probcast/rng.hpp"
#include "probcast/tensor.hpp"

namespace probcast::uq {

// ---------------------------------------------------------------------------
// KL divergence estimators
// ---------------------------------------------------------------------------

// Closed-form KL(N(mu_q, sigma_q^2) || N(mu_p, sigma_p^2)) summed over weights.
double kl_gaussian_closed(const std::vector<double>& mu_q, const std::vector<double>& sigma_q,
                          double mu_p, double sigma_p);
double kl_gaussian_closed(double mu_q, double sigma_q, double mu_p, double sigma_p);

// Monte Carlo KL estimate (1/M) sum_i [log q(w_i) - log p(w_i)] over the given
// weight samples. `context` names the layer in numeric errors.
double kl_mc_estimate(const std::vector<std::vector<double>>& samples,
                      const std::function<double(const std::vector<double>&)>& log_q,
                      const std::function<double(const std::vector<double>&)>& log_p,
                      const std::string& context);

// Negative ELBO for a variational forecaster on one minibatch: data NLL/CE
// summed over the batch plus kl_weight times the model KL.
ad::Tensor elbo_loss(const model::Forecaster& net, const ad::Tensor& x,
                     const std::vector<double>& targets, double kl_weight, RngStream& rng);

// ---------------------------------------------------------------------------
// SWAG moment collection and sampling
// ---------------------------------------------------------------------------

struct SwagState {
    std::vector<double> mean;           // running weight mean
    std::vector<double> second_moment;  // running mean of elementwise squares
    std::vector<std::vector<double>> deviations;  // ring of snapshot - mean, oldest first
    std::size_t count = 0;
    std::size_t rank = 20;
    std::size_t cadence = 1;  // snapshots every `cadence` epochs
};

void swag_collect(SwagState& state, const std::vector<double>& weights);
// Diagonal variance estimate max(0, second_moment - mean^2).
std::vector<double> swag_diag_variance(const SwagState& state);
// Draws mean + (1/sqrt 2) diag^{1/2} z1 + D z2 / sqrt(2(k-1)) with k stored
// deviation columns; the low-rank term is skipped when k < 2.
std::vector<double> swag_sample(const SwagState& state, RngStream& rng);

// ---------------------------------------------------------------------------
// Stochastic prediction
// ---------------------------------------------------------------------------

// One stochastic forward pass over a batch, in physical units.
struct SamplePrediction {
    std::vector<double> mean;      // regression: row-major [rows x horizon]
    std::vector<double> variance;  // regression aleatoric variance, same layout
    std::vector<double> prob;      // classification exceedance probabilities
};

// M stochastic passes over the dataset rows selected by `indices`. Each sample
// m uses its own derived RngStream, so results are independent of thread
// scheduling and bitwise reproducible for a fixed seed.
std::vector<SamplePrediction> mc_sample_predict(const model::Forecaster& net,
                                                const data::WindowedDataset& ds,
                                                const std::vector<std::size_t>& indices,
                                                std::size_t num_samples, std::uint64_t seed,
                                                bool stochastic, std::size_t threads = 0);

// SWAG predictive sampling: per sample draws a weight vector from `state`,
// loads it into a scratch copy of the network, and runs a deterministic pass.
std::vector<SamplePrediction> swag_sample_predict(const model::Topology& topology,
                                                  const SwagState& state,
                                                  const data::WindowedDataset& ds,
                                                  const std::vector<std::size_t>& indices,
                                                  std::size_t num_samples, std::uint64_t seed,
                                                  std::size_t threads = 0);

// ---------------------------------------------------------------------------
// Deep ensembles
// ---------------------------------------------------------------------------

struct EnsembleHandle {
    std::vector<std::unique_ptr<model::Forecaster>> members;
    std::vector<std::uint64_t> seeds;  // pairwise distinct
    bool trained = false;

    void validate() const;
};

// One deterministic forward pass per member, in member order.
std::vector<SamplePrediction> ensemble_predict(const EnsembleHandle& handle,
                                               const data::WindowedDataset& ds,
                                               const std::vector<std::size_t>& indices,
                                               std::size_t threads = 0);

// ---------------------------------------------------------------------------
// Checkpoints
// ---------------------------------------------------------------------------

struct Checkpoint {
    std::string method;  // bnn, mc-dropout, ensemble, swag, lstm-mc, gnn-mc, quantile, persistence
    std::uint64_t seed = 1;
    model::Topology topology;
    std::vector<std::vector<double>> member_params;
    std::vector<std::uint64_t> member_seeds;
    std::optional<SwagState> swag;
    std::string source_column;  // persistence baseline only
};

std::string checkpoint_to_json(const Checkpoint& ckpt);
Checkpoint checkpoint_from_json(const std::string& text);
void save_checkpoint(const Checkpoint& ckpt, const std::string& path);
Checkpoint load_checkpoint(const std::string& path);

// Rebuilds the member forecasters recorded in a checkpoint.
EnsembleHandle restore_members(const Checkpoint& ckpt);

}  // namespace probcast::uq
