#pragma once

#include <string>
#include <vector>

#include "probcast/rng.hpp"
#include "probcast/tensor.hpp"

namespace probcast::nn {

using ad::Tensor;

struct NamedParam {
    std::string name;
    Tensor tensor;
};

// Glorot-uniform initialized matrix, shape [out, in].
Tensor glorot_init(std::size_t out, std::size_t in, RngStream& rng, const std::string& name);

class Dense {
public:
    Dense() = default;
    Dense(std::size_t in, std::size_t out, RngStream& rng, const std::string& name);

    Tensor forward(const Tensor& x) const;  // x [B,in] -> [B,out]
    void params(std::vector<NamedParam>& out) const;

    std::size_t in_dim = 0;
    std::size_t out_dim = 0;
    Tensor weight;  // [out, in]
    Tensor bias;    // [1, out]
    std::string name;
};

enum class DropoutMode { Stochastic, Deterministic };

// Inverted dropout: keep with prob 1-rate, scale kept units by 1/(1-rate).
Tensor dropout(const Tensor& x, double rate, DropoutMode mode, RngStream& rng);

// Bernoulli mask tensor usable across several applications (variational dropout).
Tensor dropout_mask(const ad::Shape& shape, double rate, RngStream& rng);

struct PriorSpec {
    enum class Family { Gaussian, Laplace };
    Family family = Family::Gaussian;
    double location = 0.0;
    double scale = 0.1;
};

enum class VariationalMode { WeightSample, LocalReparam };

class VariationalDense {
public:
    VariationalDense() = default;
    VariationalDense(std::size_t in, std::size_t out, PriorSpec prior, RngStream& rng,
                     const std::string& name);

    Tensor forward(const Tensor& x, RngStream& rng, VariationalMode mode) const;
    Tensor forward_mean(const Tensor& x) const;  // posterior means, no sampling

    // KL(q || prior), summed over weights and biases. Closed form for a
    // Gaussian prior, reparameterized Monte Carlo otherwise.
    Tensor kl(RngStream& rng, std::size_t mc_samples) const;

    void params(std::vector<NamedParam>& out) const;

    std::size_t in_dim = 0;
    std::size_t out_dim = 0;
    Tensor mu_w;   // [out, in]
    Tensor rho_w;  // [out, in], sigma = softplus(rho)
    Tensor mu_b;   // [1, out]
    Tensor rho_b;  // [1, out]
    PriorSpec prior;
    std::string name;
};

Tensor posterior_sigma(const Tensor& rho);

struct LstmMasks {
    Tensor input;      // [B, in]
    Tensor recurrent;  // [B, units]
    Tensor output;     // [B, units]
};

class LstmCell {
public:
    LstmCell() = default;
    LstmCell(std::size_t input_dim, std::size_t units, RngStream& rng, const std::string& name);

    struct State {
        Tensor h;
        Tensor c;
    };

    State initial_state(std::size_t batch) const;

    // Masks are sampled once per sequence and reused at every step.
    LstmMasks make_masks(std::size_t batch, double rate, DropoutMode mode, RngStream& rng) const;

    // Applies input/recurrent masks, advances the state, returns the
    // output-masked hidden vector.
    Tensor step(State& state, const Tensor& x, const LstmMasks& masks) const;

    void params(std::vector<NamedParam>& out) const;

    std::size_t input_dim = 0;
    std::size_t units = 0;
    Tensor w_input, w_forget, w_cand, w_output;  // [units, input_dim + units]
    Tensor b_input, b_forget, b_cand, b_output;  // [1, units]
    std::string name;
};

class Glu {
public:
    Glu() = default;
    Glu(std::size_t in, std::size_t out, RngStream& rng, const std::string& name);

    Tensor forward(const Tensor& x) const;  // (xW^T + b) * sigmoid(xV^T + c)
    void params(std::vector<NamedParam>& out) const;

    std::size_t in_dim = 0;
    std::size_t out_dim = 0;
    Tensor linear_w, linear_b;
    Tensor gate_w, gate_b;
    std::string name;
};

// A = row_softmax(relu(E E^T)); rows are non-negative and sum to 1.
Tensor learned_adjacency(const Tensor& embeddings);

// relu(A H W); A must be row-stochastic.
Tensor graph_conv(const Tensor& adjacency, const Tensor& h, const Tensor& w);

class HeteroscedasticHead {
public:
    static constexpr double kVarianceFloor = 1e-6;

    HeteroscedasticHead() = default;
    HeteroscedasticHead(std::size_t in, std::size_t out, RngStream& rng, const std::string& name);

    struct Output {
        Tensor mean;      // [B, out]
        Tensor variance;  // [B, out], >= kVarianceFloor
    };

    Output forward(const Tensor& features) const;
    void params(std::vector<NamedParam>& out) const;

    Dense mean_head;
    Dense var_head;
};

}  // namespace probcast::nn
