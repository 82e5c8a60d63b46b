#include "probcast/layers.hpp"

#include <cmath>

#include "probcast/errors.hpp"
#include "probcast/mathutil.hpp"

namespace probcast::nn {

using ad::Shape;

Tensor glorot_init(std::size_t out, std::size_t in, RngStream& rng, const std::string& name) {
    double limit = std::sqrt(6.0 / static_cast<double>(in + out));
    std::vector<double> vals(out * in);
    for (double& v : vals) v = (2.0 * rng.uniform() - 1.0) * limit;
    return Tensor::from_values({out, in}, std::move(vals), true, name);
}

// ---------------------------------------------------------------------------
// Dense

Dense::Dense(std::size_t in, std::size_t out, RngStream& rng, const std::string& layer_name)
    : in_dim(in), out_dim(out), name(layer_name) {
    weight = glorot_init(out, in, rng, layer_name + ".weight");
    bias = Tensor::zeros({1, out}, true, layer_name + ".bias");
}

Tensor Dense::forward(const Tensor& x) const {
    if (x.cols() != in_dim)
        throw ShapeError(name + ": input width " + std::to_string(x.cols()) + ", expected " +
                         std::to_string(in_dim));
    return ad::matmul(x, ad::transpose(weight)) + bias;
}

void Dense::params(std::vector<NamedParam>& out) const {
    out.push_back({weight.name(), weight});
    out.push_back({bias.name(), bias});
}

// ---------------------------------------------------------------------------
// dropout

Tensor dropout_mask(const Shape& shape, double rate, RngStream& rng) {
    if (rate < 0.0 || rate >= 1.0)
        throw ContractError("dropout rate must lie in [0,1), got " + std::to_string(rate));
    std::size_t n = ad::shape_numel(shape);
    std::vector<double> vals(n);
    double keep = 1.0 - rate;
    for (double& v : vals) v = rng.uniform() < keep ? 1.0 / keep : 0.0;
    return Tensor::from_values(shape, std::move(vals));
}

Tensor dropout(const Tensor& x, double rate, DropoutMode mode, RngStream& rng) {
    if (rate < 0.0 || rate >= 1.0)
        throw ContractError("dropout rate must lie in [0,1), got " + std::to_string(rate));
    if (mode == DropoutMode::Deterministic || rate == 0.0) return x;
    return x * dropout_mask(x.shape(), rate, rng);
}

// ---------------------------------------------------------------------------
// VariationalDense

Tensor posterior_sigma(const Tensor& rho) {
    // softplus underflows to exactly 0 for very negative inputs; the tiny
    // floor keeps log-densities finite without bending the parameterization.
    return ad::add_scalar(ad::softplus(rho), 1e-12);
}

VariationalDense::VariationalDense(std::size_t in, std::size_t out, PriorSpec prior_spec,
                                   RngStream& rng, const std::string& layer_name)
    : in_dim(in), out_dim(out), prior(prior_spec), name(layer_name) {
    mu_w = glorot_init(out, in, rng, layer_name + ".mu_w");
    rho_w = Tensor::from_values({out, in}, std::vector<double>(out * in, -5.0), true,
                                layer_name + ".rho_w");
    mu_b = Tensor::zeros({1, out}, true, layer_name + ".mu_b");
    rho_b = Tensor::from_values({1, out}, std::vector<double>(out, -5.0), true,
                                layer_name + ".rho_b");
}

Tensor VariationalDense::forward(const Tensor& x, RngStream& rng, VariationalMode mode) const {
    if (x.cols() != in_dim)
        throw ShapeError(name + ": input width " + std::to_string(x.cols()) + ", expected " +
                         std::to_string(in_dim));
    if (mode == VariationalMode::WeightSample) {
        Tensor eps_w = Tensor::from_values({out_dim, in_dim}, rng.normals(out_dim * in_dim));
        Tensor eps_b = Tensor::from_values({1, out_dim}, rng.normals(out_dim));
        Tensor w = mu_w + posterior_sigma(rho_w) * eps_w;
        Tensor b = mu_b + posterior_sigma(rho_b) * eps_b;
        return ad::matmul(x, ad::transpose(w)) + b;
    }
    // local reparameterization: sample the activations directly
    Tensor act_mean = ad::matmul(x, ad::transpose(mu_w)) + mu_b;
    Tensor act_var = ad::matmul(ad::square(x), ad::transpose(ad::square(posterior_sigma(rho_w)))) +
                     ad::square(posterior_sigma(rho_b));
    Tensor eps = Tensor::from_values({x.rows(), out_dim}, rng.normals(x.rows() * out_dim));
    return act_mean + ad::sqrt(act_var) * eps;
}

Tensor VariationalDense::forward_mean(const Tensor& x) const {
    return ad::matmul(x, ad::transpose(mu_w)) + mu_b;
}

namespace {

Tensor gaussian_kl_term(const Tensor& mu_q, const Tensor& rho_q, double mu_p, double sigma_p) {
    Tensor sigma_q = posterior_sigma(rho_q);
    Tensor var_ratio = ad::mul_scalar(ad::square(sigma_q), 1.0 / (sigma_p * sigma_p));
    Tensor mean_gap =
        ad::mul_scalar(ad::square(ad::add_scalar(mu_q, -mu_p)), 1.0 / (sigma_p * sigma_p));
    Tensor log_ratio = ad::add_scalar(ad::neg(ad::log(sigma_q)), std::log(sigma_p));
    return ad::sum(ad::add_scalar(log_ratio + ad::mul_scalar(var_ratio + mean_gap, 0.5), -0.5));
}

Tensor laplace_logpdf_sum(const Tensor& w, double loc, double scale) {
    Tensor z = ad::mul_scalar(ad::abs(ad::add_scalar(w, -loc)), -1.0 / scale);
    return ad::add_scalar(ad::sum(z),
                          -std::log(2.0 * scale) * static_cast<double>(w.numel()));
}

Tensor gaussian_logpdf_sum(const Tensor& w, const Tensor& mu, const Tensor& sigma) {
    constexpr double half_log_2pi = 0.91893853320467274178;
    Tensor z = ad::square((w - mu) / sigma);
    return ad::add_scalar(ad::sum(ad::mul_scalar(z, -0.5) - ad::log(sigma)),
                          -half_log_2pi * static_cast<double>(w.numel()));
}

}  // namespace

Tensor VariationalDense::kl(RngStream& rng, std::size_t mc_samples) const {
    if (prior.family == PriorSpec::Family::Gaussian) {
        return gaussian_kl_term(mu_w, rho_w, prior.location, prior.scale) +
               gaussian_kl_term(mu_b, rho_b, prior.location, prior.scale);
    }
    if (mc_samples < 1) throw ContractError("kl needs at least one Monte Carlo sample");
    Tensor total;
    for (std::size_t s = 0; s < mc_samples; ++s) {
        Tensor term;
        for (const auto& [mu, rho] : {std::pair{mu_w, rho_w}, std::pair{mu_b, rho_b}}) {
            Tensor sigma = posterior_sigma(rho);
            Tensor eps = Tensor::from_values(mu.shape(), rng.normals(mu.numel()));
            Tensor w = mu + sigma * eps;
            Tensor diff = gaussian_logpdf_sum(w, mu, sigma) -
                          laplace_logpdf_sum(w, prior.location, prior.scale);
            term = term.defined() ? term + diff : diff;
        }
        total = total.defined() ? total + term : term;
    }
    Tensor kl = ad::mul_scalar(total, 1.0 / static_cast<double>(mc_samples));
    if (!std::isfinite(kl.item()))
        throw NumericError(name + ": non-finite Monte Carlo KL");
    return kl;
}

void VariationalDense::params(std::vector<NamedParam>& out) const {
    out.push_back({mu_w.name(), mu_w});
    out.push_back({rho_w.name(), rho_w});
    out.push_back({mu_b.name(), mu_b});
    out.push_back({rho_b.name(), rho_b});
}

// ---------------------------------------------------------------------------
// LSTM

LstmCell::LstmCell(std::size_t in, std::size_t n_units, RngStream& rng,
                   const std::string& layer_name)
    : input_dim(in), units(n_units), name(layer_name) {
    auto gate = [&](const char* g) { return glorot_init(units, in + n_units, rng, layer_name + "." + g); };
    w_input = gate("w_input");
    w_forget = gate("w_forget");
    w_cand = gate("w_cand");
    w_output = gate("w_output");
    b_input = Tensor::zeros({1, units}, true, layer_name + ".b_input");
    // forget gate biased open so early training can carry state
    b_forget = Tensor::from_values({1, units}, std::vector<double>(units, 1.0), true,
                                   layer_name + ".b_forget");
    b_cand = Tensor::zeros({1, units}, true, layer_name + ".b_cand");
    b_output = Tensor::zeros({1, units}, true, layer_name + ".b_output");
}

LstmCell::State LstmCell::initial_state(std::size_t batch) const {
    return {Tensor::zeros({batch, units}), Tensor::zeros({batch, units})};
}

LstmMasks LstmCell::make_masks(std::size_t batch, double rate, DropoutMode mode,
                               RngStream& rng) const {
    if (mode == DropoutMode::Deterministic || rate == 0.0) {
        return {Tensor::full({batch, input_dim}, 1.0), Tensor::full({batch, units}, 1.0),
                Tensor::full({batch, units}, 1.0)};
    }
    return {dropout_mask({batch, input_dim}, rate, rng), dropout_mask({batch, units}, rate, rng),
            dropout_mask({batch, units}, rate, rng)};
}

Tensor LstmCell::step(State& state, const Tensor& x, const LstmMasks& masks) const {
    if (x.cols() != input_dim)
        throw ShapeError(name + ": input width " + std::to_string(x.cols()) + ", expected " +
                         std::to_string(input_dim));
    Tensor z = ad::concat_cols(x * masks.input, state.h * masks.recurrent);
    Tensor i = ad::sigmoid(ad::matmul(z, ad::transpose(w_input)) + b_input);
    Tensor f = ad::sigmoid(ad::matmul(z, ad::transpose(w_forget)) + b_forget);
    Tensor g = ad::tanh(ad::matmul(z, ad::transpose(w_cand)) + b_cand);
    Tensor o = ad::sigmoid(ad::matmul(z, ad::transpose(w_output)) + b_output);
    state.c = f * state.c + i * g;
    state.h = o * ad::tanh(state.c);
    return state.h * masks.output;
}

void LstmCell::params(std::vector<NamedParam>& out) const {
    for (const Tensor* t : {&w_input, &w_forget, &w_cand, &w_output, &b_input, &b_forget, &b_cand,
                            &b_output})
        out.push_back({t->name(), *t});
}

// ---------------------------------------------------------------------------
// GLU

Glu::Glu(std::size_t in, std::size_t out, RngStream& rng, const std::string& layer_name)
    : in_dim(in), out_dim(out), name(layer_name) {
    linear_w = glorot_init(out, in, rng, layer_name + ".linear_w");
    linear_b = Tensor::zeros({1, out}, true, layer_name + ".linear_b");
    gate_w = glorot_init(out, in, rng, layer_name + ".gate_w");
    gate_b = Tensor::zeros({1, out}, true, layer_name + ".gate_b");
}

Tensor Glu::forward(const Tensor& x) const {
    if (x.cols() != in_dim)
        throw ShapeError(name + ": input width " + std::to_string(x.cols()) + ", expected " +
                         std::to_string(in_dim));
    Tensor linear = ad::matmul(x, ad::transpose(linear_w)) + linear_b;
    Tensor gate = ad::sigmoid(ad::matmul(x, ad::transpose(gate_w)) + gate_b);
    return linear * gate;
}

void Glu::params(std::vector<NamedParam>& out) const {
    out.push_back({linear_w.name(), linear_w});
    out.push_back({linear_b.name(), linear_b});
    out.push_back({gate_w.name(), gate_w});
    out.push_back({gate_b.name(), gate_b});
}

// ---------------------------------------------------------------------------
// graph pieces

Tensor learned_adjacency(const Tensor& embeddings) {
    if (embeddings.rank() != 2 || embeddings.cols() < 1)
        throw ShapeError("learned_adjacency expects [nodes, d] embeddings");
    Tensor scores = ad::relu(ad::matmul(embeddings, ad::transpose(embeddings)));
    return ad::row_softmax(scores);
}

Tensor graph_conv(const Tensor& adjacency, const Tensor& h, const Tensor& w) {
    if (adjacency.rank() != 2 || adjacency.rows() != adjacency.cols())
        throw ShapeError("graph_conv adjacency must be square");
    const auto& a = adjacency.values();
    std::size_t n = adjacency.rows();
    for (std::size_t r = 0; r < n; ++r) {
        double row_sum = 0.0;
        for (std::size_t c = 0; c < n; ++c) {
            double v = a[r * n + c];
            if (v < -1e-12) throw ContractError("graph_conv adjacency has negative entries");
            row_sum += v;
        }
        if (std::abs(row_sum - 1.0) > 1e-6)
            throw ContractError("graph_conv adjacency rows must sum to 1");
    }
    return ad::relu(ad::matmul(ad::matmul(adjacency, h), w));
}

// ---------------------------------------------------------------------------
// heteroscedastic head

HeteroscedasticHead::HeteroscedasticHead(std::size_t in, std::size_t out, RngStream& rng,
                                         const std::string& name)
    : mean_head(in, out, rng, name + ".mean"), var_head(in, out, rng, name + ".var") {}

HeteroscedasticHead::Output HeteroscedasticHead::forward(const Tensor& features) const {
    Tensor mean = mean_head.forward(features);
    Tensor variance = ad::add_scalar(ad::softplus(var_head.forward(features)), kVarianceFloor);
    return {mean, variance};
}

void HeteroscedasticHead::params(std::vector<NamedParam>& out) const {
    mean_head.params(out);
    var_head.params(out);
}

}  // namespace probcast::nn
