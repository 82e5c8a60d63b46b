#include "probcast/training.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <numeric>

#include "probcast/csv.hpp"
#include "probcast/errors.hpp"

namespace probcast::train {

// ---------------------------------------------------------------------------
// scalar losses
// ---------------------------------------------------------------------------

double gaussian_nll(const std::vector<double>& y, const std::vector<double>& mu,
                    const std::vector<double>& var) {
    if (y.size() != mu.size() || y.size() != var.size())
        throw ContractError("gaussian_nll: size mismatch");
    if (y.empty()) throw ContractError("gaussian_nll: empty inputs");
    constexpr double log_2pi = 1.8378770664093454836;
    double total = 0.0;
    for (std::size_t i = 0; i < y.size(); ++i) {
        if (!(var[i] > 0.0)) throw DomainError("gaussian_nll: non-positive variance");
        double d = y[i] - mu[i];
        total += 0.5 * (log_2pi + std::log(var[i]) + d * d / var[i]);
    }
    return total / static_cast<double>(y.size());
}

double binary_cross_entropy(const std::vector<double>& labels, const std::vector<double>& probs) {
    if (labels.size() != probs.size()) throw ContractError("binary_cross_entropy: size mismatch");
    if (labels.empty()) throw ContractError("binary_cross_entropy: empty inputs");
    constexpr double eps = 1e-7;
    double total = 0.0;
    for (std::size_t i = 0; i < labels.size(); ++i) {
        double p = std::clamp(probs[i], eps, 1.0 - eps);
        total += -(labels[i] * std::log(p) + (1.0 - labels[i]) * std::log(1.0 - p));
    }
    return total / static_cast<double>(labels.size());
}

double pinball_loss(double y, double q, double tau) {
    double d = y - q;
    return std::max(tau * d, (tau - 1.0) * d);
}

ad::Tensor pinball(const ad::Tensor& y, const ad::Tensor& q, double tau) {
    ad::Tensor d = y - q;
    return ad::mean(ad::mul_scalar(d, tau) + ad::relu(ad::neg(d)));
}

// ---------------------------------------------------------------------------
// optimizer
// ---------------------------------------------------------------------------

void Adam::init(const std::vector<nn::NamedParam>& params) {
    first_moment.clear();
    second_moment.clear();
    for (const auto& p : params) {
        first_moment.emplace_back(p.tensor.numel(), 0.0);
        second_moment.emplace_back(p.tensor.numel(), 0.0);
    }
    step_count = 0;
}

double clip_gradients(std::vector<nn::NamedParam>& params, double clip_norm) {
    double sq = 0.0;
    for (const auto& p : params)
        for (double g : p.tensor.grad()) sq += g * g;
    double norm = std::sqrt(sq);
    if (std::isfinite(norm) && clip_norm > 0.0 && norm > clip_norm) {
        double scale = clip_norm / norm;
        for (auto& p : params) {
            auto& t = p.tensor;
            const auto& g = t.grad();
            std::vector<double> scaled(g.size());
            for (std::size_t i = 0; i < g.size(); ++i) scaled[i] = g[i] * scale;
            t.zero_grad();
            t.node()->ensure_grad();
            t.node()->grad = std::move(scaled);
        }
    }
    return norm;
}

void optimizer_step(std::vector<nn::NamedParam>& params, Adam& opt, double learning_rate) {
    if (opt.first_moment.size() != params.size())
        throw ContractError("optimizer_step: optimizer state does not match parameter list");
    opt.step_count += 1;
    double t = static_cast<double>(opt.step_count);
    double corr1 = 1.0 - std::pow(opt.beta1, t);
    double corr2 = 1.0 - std::pow(opt.beta2, t);
    for (std::size_t i = 0; i < params.size(); ++i) {
        auto& tensor = params[i].tensor;
        const auto& grad = tensor.grad();
        auto& values = tensor.values_mut();
        auto& m = opt.first_moment[i];
        auto& v = opt.second_moment[i];
        for (std::size_t k = 0; k < values.size(); ++k) {
            double g = grad[k];
            if (!std::isfinite(g))
                throw NumericError("optimizer_step: non-finite gradient in " + params[i].name);
            m[k] = opt.beta1 * m[k] + (1.0 - opt.beta1) * g;
            v[k] = opt.beta2 * v[k] + (1.0 - opt.beta2) * g * g;
            double m_hat = m[k] / corr1;
            double v_hat = v[k] / corr2;
            values[k] -= learning_rate * m_hat / (std::sqrt(v_hat) + opt.eps);
        }
    }
}

// ---------------------------------------------------------------------------
// training loops
// ---------------------------------------------------------------------------

namespace {

constexpr std::uint64_t kShuffleStreamBase = 100;
constexpr std::uint64_t kModelStreamBase = 50000;

struct BatchStats {
    double data_sum = 0.0;   // unweighted data-term total over elements
    double kl_term = 0.0;    // weighted KL contribution of this pass
    std::size_t elements = 0;
};

// Builds the objective for one forward pass and reports its pieces.
ad::Tensor objective(const model::Forecaster& net, const ad::Tensor& x,
                     const std::vector<double>& targets, const TrainConfig& cfg, double kl_weight,
                     RngStream& rng, BatchStats& stats) {
    std::size_t horizon = net.topo.horizon;
    ad::Tensor y = ad::Tensor::from_values({x.rows(), horizon}, targets);
    std::size_t elements = x.rows() * horizon;
    auto out = net.forward(x, rng, true);
    ad::Tensor loss;
    if (cfg.variational) {
        ad::Tensor data_term;
        if (net.topo.task == model::Task::Regression)
            data_term = ad::gaussian_nll(out.mean, out.variance, y, ad::Reduction::Sum);
        else
            data_term = ad::binary_cross_entropy_with_logits(out.logits, y, ad::Reduction::Sum);
        ad::Tensor kl = net.kl(rng);
        loss = data_term + ad::mul_scalar(kl, kl_weight);
        stats.data_sum = data_term.item();
        stats.kl_term = kl_weight * kl.item();
    } else if (net.topo.kind == "quantile") {
        loss = pinball(y, out.lower, cfg.quantile_low) + pinball(y, out.upper, cfg.quantile_high);
        stats.data_sum = loss.item() * static_cast<double>(elements);
    } else if (net.topo.task == model::Task::Regression) {
        loss = ad::gaussian_nll(out.mean, out.variance, y, ad::Reduction::Mean);
        stats.data_sum = loss.item() * static_cast<double>(elements);
    } else {
        loss = ad::binary_cross_entropy_with_logits(out.logits, y, ad::Reduction::Mean);
        stats.data_sum = loss.item() * static_cast<double>(elements);
    }
    stats.elements = elements;
    return loss;
}

TrainResult run_loop(model::Forecaster& net, const data::WindowedDataset& ds,
                     const TrainConfig& cfg, bool adversarial) {
    std::size_t n = ds.samples.size();
    if (n == 0) throw ContractError("train: dataset has no windows");
    if (cfg.batch_size == 0) throw ConfigError("train: batch size must be positive");
    if (!(cfg.decay > 0.0 && cfg.decay <= 1.0))
        throw ConfigError("train: decay factor must lie in (0, 1]");
    if (adversarial && cfg.replay == 0) throw ConfigError("train: replay count must be >= 1");
    if (cfg.epsilon < 0.0) throw ConfigError("train: perturbation radius must be >= 0");

    auto params = net.named_params();
    Adam opt{cfg.beta1, cfg.beta2, cfg.adam_eps, 0, {}, {}};
    opt.init(params);

    std::size_t num_batches = (n + cfg.batch_size - 1) / cfg.batch_size;
    double kl_weight = cfg.variational ? 1.0 / static_cast<double>(num_batches) : 0.0;
    std::size_t replays = adversarial ? cfg.replay : 1;
    std::size_t outer_epochs = adversarial ? std::max<std::size_t>(1, cfg.epochs / replays)
                                           : cfg.epochs;
    if (adversarial && cfg.epochs == 0) outer_epochs = 0;

    std::size_t swag_start = static_cast<std::size_t>(
        std::floor(static_cast<double>(outer_epochs) * cfg.swag_start_fraction));
    uq::SwagState swag;
    swag.rank = cfg.swag_rank;
    swag.cadence = cfg.swag_cadence;

    std::size_t width = net.topo.input_width();
    std::size_t max_rows = std::min(cfg.batch_size, n) * net.topo.rows_per_sample();
    std::vector<double> delta(adversarial ? max_rows * width : 0, 0.0);

    std::vector<std::size_t> order(n);
    std::iota(order.begin(), order.end(), 0);

    TrainResult result;
    for (std::size_t epoch = 0; epoch < outer_epochs; ++epoch) {
        double lr = cfg.learning_rate * std::pow(cfg.decay, static_cast<double>(epoch));
        if (cfg.collect_swag && epoch >= swag_start)
            lr = cfg.learning_rate * std::pow(cfg.decay, static_cast<double>(swag_start));

        RngStream shuffle_rng(cfg.seed, kShuffleStreamBase + epoch);
        shuffle_rng.shuffle(order);
        RngStream model_rng(cfg.seed, kModelStreamBase + epoch);

        double epoch_data = 0.0;
        double epoch_kl = 0.0;
        std::size_t epoch_elements = 0;

        for (std::size_t start = 0; start < n; start += cfg.batch_size) {
            std::size_t end = std::min(n, start + cfg.batch_size);
            std::vector<std::size_t> idx(order.begin() + static_cast<std::ptrdiff_t>(start),
                                         order.begin() + static_cast<std::ptrdiff_t>(end));
            ad::Tensor x = net.make_input(ds, idx, adversarial);
            std::vector<double> targets = net.topo.task == model::Task::Exceedance
                                              ? net.make_labels(ds, idx)
                                              : net.make_targets_std(ds, idx);
            std::size_t rows = x.rows();
            for (std::size_t r = 0; r < replays; ++r) {
                ad::Tensor input = x;
                if (adversarial) {
                    std::vector<double> d(delta.begin(),
                                          delta.begin() + static_cast<std::ptrdiff_t>(rows * width));
                    input = x + ad::Tensor::from_values({rows, width}, std::move(d));
                }
                BatchStats stats;
                ad::Tensor loss = objective(net, input, targets, cfg, kl_weight, model_rng, stats);
                if (!std::isfinite(loss.item()))
                    throw NumericError("training diverged at epoch " + std::to_string(epoch));
                for (auto& p : params) p.tensor.zero_grad();
                if (adversarial) x.zero_grad();
                loss.backward();
                clip_gradients(params, cfg.clip_norm);
                optimizer_step(params, opt, lr);
                if (adversarial && cfg.epsilon > 0.0) {
                    const auto& g = x.grad();
                    for (std::size_t i = 0; i < rows * width; ++i) {
                        double s = g[i] > 0.0 ? 1.0 : (g[i] < 0.0 ? -1.0 : 0.0);
                        delta[i] = std::clamp(delta[i] + cfg.epsilon * s, -cfg.epsilon, cfg.epsilon);
                    }
                }
                epoch_data += stats.data_sum;
                epoch_kl += stats.kl_term;
                epoch_elements += stats.elements;
            }
        }

        CurvePoint point;
        point.epoch = epoch;
        point.data_loss = epoch_elements > 0 ? epoch_data / static_cast<double>(epoch_elements) : 0.0;
        point.kl_loss = epoch_kl;
        point.learning_rate = lr;
        result.curve.push_back(point);

        if (cfg.collect_swag && epoch >= swag_start &&
            (epoch - swag_start) % std::max<std::size_t>(1, cfg.swag_cadence) == 0)
            uq::swag_collect(swag, model::flat_params(net));
    }

    if (cfg.collect_swag && swag.count > 0) result.swag = std::move(swag);
    return result;
}

}  // namespace

TrainResult train(model::Forecaster& net, const data::WindowedDataset& ds, const TrainConfig& cfg) {
    return run_loop(net, ds, cfg, false);
}

TrainResult free_adversarial_train(model::Forecaster& net, const data::WindowedDataset& ds,
                                   const TrainConfig& cfg) {
    return run_loop(net, ds, cfg, true);
}

void save_curve_csv(const std::vector<CurvePoint>& curve, const std::string& path) {
    csv::Table table;
    table.header = {"epoch", "data_loss", "kl_loss", "learning_rate"};
    for (const auto& p : curve)
        table.rows.push_back({csv::format_int(static_cast<long long>(p.epoch)),
                              csv::format_double(p.data_loss), csv::format_double(p.kl_loss),
                              csv::format_double(p.learning_rate)});
    csv::write_file(path, table);
}

}  // namespace probcast::train
