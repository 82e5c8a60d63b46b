#include "probcast/uncertainty.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <set>
#include <sstream>

#include "json.hpp"
#include "probcast/errors.hpp"
#include "probcast/parallel.hpp"

namespace probcast::uq {

using nlohmann::json;

// ---------------------------------------------------------------------------
// KL estimators
// ---------------------------------------------------------------------------

double kl_gaussian_closed(const std::vector<double>& mu_q, const std::vector<double>& sigma_q,
                          double mu_p, double sigma_p) {
    if (mu_q.size() != sigma_q.size())
        throw ContractError("kl_gaussian_closed: mu/sigma size mismatch");
    if (!(sigma_p > 0.0)) throw DomainError("kl_gaussian_closed: prior scale must be positive");
    double total = 0.0;
    for (std::size_t i = 0; i < mu_q.size(); ++i) {
        if (!(sigma_q[i] > 0.0))
            throw DomainError("kl_gaussian_closed: posterior scale must be positive");
        double d = mu_q[i] - mu_p;
        total += std::log(sigma_p / sigma_q[i]) +
                 (sigma_q[i] * sigma_q[i] + d * d) / (2.0 * sigma_p * sigma_p) - 0.5;
    }
    return total;
}

double kl_gaussian_closed(double mu_q, double sigma_q, double mu_p, double sigma_p) {
    return kl_gaussian_closed(std::vector<double>{mu_q}, std::vector<double>{sigma_q}, mu_p,
                              sigma_p);
}

double kl_mc_estimate(const std::vector<std::vector<double>>& samples,
                      const std::function<double(const std::vector<double>&)>& log_q,
                      const std::function<double(const std::vector<double>&)>& log_p,
                      const std::string& context) {
    if (samples.empty()) throw ContractError("kl_mc_estimate: needs at least one weight sample");
    double total = 0.0;
    for (const auto& w : samples) {
        double lq = log_q(w);
        double lp = log_p(w);
        if (!std::isfinite(lq) || !std::isfinite(lp))
            throw NumericError("kl_mc_estimate: non-finite log-density in " + context);
        total += lq - lp;
    }
    return total / static_cast<double>(samples.size());
}

ad::Tensor elbo_loss(const model::Forecaster& net, const ad::Tensor& x,
                     const std::vector<double>& targets, double kl_weight, RngStream& rng) {
    if (x.rows() == 0) throw ContractError("elbo_loss: empty minibatch");
    if (!(kl_weight > 0.0)) throw DomainError("elbo_loss: kl weight must be positive");
    auto out = net.forward(x, rng, true);
    std::size_t horizon = net.topo.horizon;
    ad::Tensor y = ad::Tensor::from_values({x.rows(), horizon}, targets);
    ad::Tensor data_term;
    if (net.topo.task == model::Task::Regression) {
        data_term = ad::gaussian_nll(out.mean, out.variance, y, ad::Reduction::Sum);
    } else {
        data_term = ad::binary_cross_entropy_with_logits(out.logits, y, ad::Reduction::Sum);
    }
    ad::Tensor kl = net.kl(rng);
    return data_term + ad::mul_scalar(kl, kl_weight);
}

// ---------------------------------------------------------------------------
// SWAG
// ---------------------------------------------------------------------------

void swag_collect(SwagState& state, const std::vector<double>& weights) {
    if (state.count == 0) {
        state.mean.assign(weights.size(), 0.0);
        state.second_moment.assign(weights.size(), 0.0);
    }
    if (weights.size() != state.mean.size())
        throw ShapeError("swag_collect: weight vector size changed between snapshots");
    state.count += 1;
    double inv = 1.0 / static_cast<double>(state.count);
    for (std::size_t i = 0; i < weights.size(); ++i) {
        state.mean[i] += (weights[i] - state.mean[i]) * inv;
        state.second_moment[i] += (weights[i] * weights[i] - state.second_moment[i]) * inv;
    }
    std::vector<double> dev(weights.size());
    for (std::size_t i = 0; i < weights.size(); ++i) dev[i] = weights[i] - state.mean[i];
    state.deviations.push_back(std::move(dev));
    if (state.deviations.size() > state.rank)
        state.deviations.erase(state.deviations.begin(),
                               state.deviations.begin() +
                                   static_cast<std::ptrdiff_t>(state.deviations.size() - state.rank));
}

std::vector<double> swag_diag_variance(const SwagState& state) {
    if (state.count == 0) throw ContractError("swag_diag_variance: no snapshots collected");
    std::vector<double> var(state.mean.size());
    for (std::size_t i = 0; i < var.size(); ++i)
        var[i] = std::max(0.0, state.second_moment[i] - state.mean[i] * state.mean[i]);
    return var;
}

std::vector<double> swag_sample(const SwagState& state, RngStream& rng) {
    if (state.count < 2)
        throw ContractError("swag_sample: needs at least 2 snapshots, have " +
                            std::to_string(state.count));
    std::vector<double> theta = state.mean;
    std::vector<double> var = swag_diag_variance(state);
    const double inv_sqrt2 = 1.0 / std::sqrt(2.0);
    for (std::size_t i = 0; i < theta.size(); ++i)
        theta[i] += inv_sqrt2 * std::sqrt(var[i]) * rng.normal();
    std::size_t k = state.deviations.size();
    if (k >= 2) {
        double scale = 1.0 / std::sqrt(2.0 * static_cast<double>(k - 1));
        for (std::size_t j = 0; j < k; ++j) {
            double z = rng.normal() * scale;
            const auto& col = state.deviations[j];
            for (std::size_t i = 0; i < theta.size(); ++i) theta[i] += col[i] * z;
        }
    }
    return theta;
}

// ---------------------------------------------------------------------------
// Stochastic prediction
// ---------------------------------------------------------------------------

namespace {

constexpr std::uint64_t kPredictStreamBase = 7000;
constexpr std::uint64_t kSwagStreamBase = 70000;

SamplePrediction extract_prediction(const model::Forecaster& net, const model::ModelOutput& out,
                                    std::size_t batch) {
    SamplePrediction pred;
    if (net.topo.task == model::Task::Regression) {
        pred.mean = out.mean.values();
        pred.variance = out.variance.values();
        net.destandardize(pred.mean, &pred.variance, batch);
    } else {
        const auto& z = out.logits.values();
        pred.prob.resize(z.size());
        for (std::size_t i = 0; i < z.size(); ++i) {
            double v = z[i];
            pred.prob[i] = v >= 0.0 ? 1.0 / (1.0 + std::exp(-v))
                                    : std::exp(v) / (1.0 + std::exp(v));
        }
    }
    return pred;
}

}  // namespace

std::vector<SamplePrediction> mc_sample_predict(const model::Forecaster& net,
                                                const data::WindowedDataset& ds,
                                                const std::vector<std::size_t>& indices,
                                                std::size_t num_samples, std::uint64_t seed,
                                                bool stochastic, std::size_t threads) {
    if (num_samples == 0) throw ContractError("mc_sample_predict: needs at least one sample");
    ad::Tensor x = net.make_input(ds, indices);
    std::vector<SamplePrediction> result(num_samples);
    parallel_for(num_samples, threads, [&](std::size_t m) {
        ad::NoGradGuard guard;
        RngStream rng(seed, kPredictStreamBase + m);
        auto out = net.forward(x, rng, stochastic);
        result[m] = extract_prediction(net, out, indices.size());
    });
    return result;
}

std::vector<SamplePrediction> swag_sample_predict(const model::Topology& topology,
                                                  const SwagState& state,
                                                  const data::WindowedDataset& ds,
                                                  const std::vector<std::size_t>& indices,
                                                  std::size_t num_samples, std::uint64_t seed,
                                                  std::size_t threads) {
    if (num_samples == 0) throw ContractError("swag_sample_predict: needs at least one sample");
    if (state.count < 2)
        throw ContractError("swag_sample_predict: needs at least 2 snapshots, have " +
                            std::to_string(state.count));
    std::vector<SamplePrediction> result(num_samples);
    parallel_for(num_samples, threads, [&](std::size_t m) {
        ad::NoGradGuard guard;
        RngStream rng(seed, kSwagStreamBase + m);
        std::vector<double> theta = swag_sample(state, rng);
        auto net = model::build_forecaster(topology, 0);
        model::set_flat_params(*net, theta);
        ad::Tensor x = net->make_input(ds, indices);
        auto out = net->forward(x, rng, false);
        result[m] = extract_prediction(*net, out, indices.size());
    });
    return result;
}

// ---------------------------------------------------------------------------
// Ensembles
// ---------------------------------------------------------------------------

void EnsembleHandle::validate() const {
    if (members.empty()) throw ContractError("ensemble has no members");
    if (seeds.size() != members.size())
        throw ContractError("ensemble seed list does not match member count");
    std::set<std::uint64_t> unique(seeds.begin(), seeds.end());
    if (unique.size() != seeds.size())
        throw ContractError("ensemble member seeds must be pairwise distinct");
    if (!trained) throw ContractError("ensemble members are not trained");
}

std::vector<SamplePrediction> ensemble_predict(const EnsembleHandle& handle,
                                               const data::WindowedDataset& ds,
                                               const std::vector<std::size_t>& indices,
                                               std::size_t threads) {
    handle.validate();
    std::vector<SamplePrediction> result(handle.members.size());
    parallel_for(handle.members.size(), threads, [&](std::size_t m) {
        ad::NoGradGuard guard;
        const auto& net = *handle.members[m];
        ad::Tensor x = net.make_input(ds, indices);
        RngStream rng(handle.seeds[m], 0);
        auto out = net.forward(x, rng, false);
        result[m] = extract_prediction(net, out, indices.size());
    });
    return result;
}

// ---------------------------------------------------------------------------
// Checkpoints
// ---------------------------------------------------------------------------

namespace {

json swag_to_json(const SwagState& s) {
    json j;
    j["mean"] = s.mean;
    j["second_moment"] = s.second_moment;
    j["deviations"] = s.deviations;
    j["count"] = s.count;
    j["rank"] = s.rank;
    j["cadence"] = s.cadence;
    return j;
}

SwagState swag_from_json(const json& j) {
    SwagState s;
    s.mean = j.at("mean").get<std::vector<double>>();
    s.second_moment = j.at("second_moment").get<std::vector<double>>();
    s.deviations = j.at("deviations").get<std::vector<std::vector<double>>>();
    s.count = j.at("count").get<std::size_t>();
    s.rank = j.at("rank").get<std::size_t>();
    s.cadence = j.at("cadence").get<std::size_t>();
    return s;
}

}  // namespace

std::string checkpoint_to_json(const Checkpoint& ckpt) {
    json j;
    j["format"] = "probcast-checkpoint";
    j["version"] = 1;
    j["method"] = ckpt.method;
    j["seed"] = ckpt.seed;
    if (ckpt.method != "persistence") j["topology"] = json::parse(model::topology_to_json(ckpt.topology));
    json members = json::array();
    for (std::size_t i = 0; i < ckpt.member_params.size(); ++i) {
        json m;
        m["seed"] = i < ckpt.member_seeds.size() ? ckpt.member_seeds[i] : ckpt.seed;
        m["values"] = ckpt.member_params[i];
        members.push_back(std::move(m));
    }
    j["members"] = std::move(members);
    if (ckpt.swag.has_value()) j["swag"] = swag_to_json(*ckpt.swag);
    if (!ckpt.source_column.empty()) j["source_column"] = ckpt.source_column;
    return j.dump(2);
}

Checkpoint checkpoint_from_json(const std::string& text) {
    json j;
    try {
        j = json::parse(text);
    } catch (const std::exception& e) {
        throw DataError(std::string("checkpoint is not valid JSON: ") + e.what());
    }
    if (!j.contains("format") || j["format"] != "probcast-checkpoint")
        throw DataError("not a forecaster checkpoint (missing format tag)");
    if (j.at("version").get<int>() != 1)
        throw DataError("unsupported checkpoint version " + j["version"].dump());
    Checkpoint ckpt;
    ckpt.method = j.at("method").get<std::string>();
    ckpt.seed = j.at("seed").get<std::uint64_t>();
    if (j.contains("topology")) ckpt.topology = model::topology_from_json(j["topology"].dump());
    for (const auto& m : j.at("members")) {
        ckpt.member_seeds.push_back(m.at("seed").get<std::uint64_t>());
        ckpt.member_params.push_back(m.at("values").get<std::vector<double>>());
    }
    if (j.contains("swag")) ckpt.swag = swag_from_json(j["swag"]);
    if (j.contains("source_column")) ckpt.source_column = j["source_column"].get<std::string>();
    return ckpt;
}

void save_checkpoint(const Checkpoint& ckpt, const std::string& path) {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw DataError("cannot open checkpoint file for writing: " + path);
    out << checkpoint_to_json(ckpt) << '\n';
    if (!out) throw DataError("failed writing checkpoint: " + path);
}

Checkpoint load_checkpoint(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw DataError("cannot open checkpoint file: " + path);
    std::ostringstream buf;
    buf << in.rdbuf();
    return checkpoint_from_json(buf.str());
}

EnsembleHandle restore_members(const Checkpoint& ckpt) {
    if (ckpt.member_params.empty())
        throw ContractError("checkpoint has no network members to restore");
    EnsembleHandle handle;
    for (std::size_t i = 0; i < ckpt.member_params.size(); ++i) {
        auto net = model::build_forecaster(ckpt.topology, ckpt.member_seeds[i]);
        model::set_flat_params(*net, ckpt.member_params[i]);
        handle.members.push_back(std::move(net));
        handle.seeds.push_back(ckpt.member_seeds[i]);
    }
    handle.trained = true;
    return handle;
}

}  // namespace probcast::uq
