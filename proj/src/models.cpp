#include "probcast/models.hpp"

#include <algorithm>
#include <cmath>

#include <json.hpp>

#include "probcast/errors.hpp"

namespace probcast::model {

using ad::Tensor;
using nlohmann::json;

std::string task_name(Task t) { return t == Task::Regression ? "regression" : "exceedance"; }

Task task_from_name(const std::string& name) {
    if (name == "regression") return Task::Regression;
    if (name == "exceedance") return Task::Exceedance;
    throw ConfigError("unknown task '" + name + "'");
}

std::size_t Topology::input_width() const {
    if (kind == "gnn") {
        if (node_feature_index.empty()) throw ContractError("gnn topology lacks node features");
        return history * node_feature_index[0].size();
    }
    return history * features_per_hour;
}

ad::Tensor Forecaster::kl(RngStream&) const { return {}; }

// ---------------------------------------------------------------------------
// batch assembly

Tensor Forecaster::make_input(const data::WindowedDataset& ds, const std::vector<std::size_t>& idx,
                              bool requires_grad) const {
    std::size_t width = topo.input_width();
    if (topo.kind == "gnn") {
        std::size_t nodes = topo.nodes;
        std::size_t per_node = topo.node_feature_index[0].size();
        std::size_t f_total = ds.feature_names.size();
        std::vector<double> vals(nodes * idx.size() * width);
        for (std::size_t n = 0; n < nodes; ++n) {
            const auto& gather = topo.node_feature_index[n];
            for (std::size_t b = 0; b < idx.size(); ++b) {
                const auto& feat = ds.samples[idx[b]].features;
                double* row = vals.data() + (n * idx.size() + b) * width;
                for (std::size_t h = 0; h < topo.history; ++h)
                    for (std::size_t f = 0; f < per_node; ++f)
                        row[h * per_node + f] = feat[h * f_total + gather[f]];
            }
        }
        return Tensor::from_values({nodes * idx.size(), width}, std::move(vals), requires_grad,
                                   requires_grad ? "input" : "");
    }
    std::vector<double> vals(idx.size() * width);
    for (std::size_t b = 0; b < idx.size(); ++b) {
        const auto& feat = ds.samples[idx[b]].features;
        if (feat.size() != width)
            throw ShapeError("dataset feature width " + std::to_string(feat.size()) +
                             " does not match topology " + std::to_string(width));
        std::copy(feat.begin(), feat.end(), vals.begin() + b * width);
    }
    return Tensor::from_values({idx.size(), width}, std::move(vals), requires_grad,
                               requires_grad ? "input" : "");
}

namespace {

std::size_t target_position(const data::WindowedDataset& ds, const std::string& column) {
    for (std::size_t t = 0; t < ds.targets.size(); ++t)
        if (ds.targets[t].column == column) return t;
    throw DataError("dataset does not carry target '" + column + "'");
}

}  // namespace

std::vector<double> Forecaster::make_targets_raw(const data::WindowedDataset& ds,
                                                 const std::vector<std::size_t>& idx) const {
    std::size_t K = topo.horizon;
    std::vector<double> out(topo.target_columns.size() * idx.size() * K);
    for (std::size_t t = 0; t < topo.target_columns.size(); ++t) {
        std::size_t pos = target_position(ds, topo.target_columns[t]);
        for (std::size_t b = 0; b < idx.size(); ++b) {
            const auto& tg = ds.samples[idx[b]].targets;
            for (std::size_t k = 0; k < K; ++k)
                out[(t * idx.size() + b) * K + k] = tg[pos * K + k];
        }
    }
    return out;
}

std::vector<double> Forecaster::make_targets_std(const data::WindowedDataset& ds,
                                                 const std::vector<std::size_t>& idx) const {
    if (topo.target_mean.size() != topo.target_columns.size())
        throw ContractError("topology target stats not fitted");
    std::vector<double> out = make_targets_raw(ds, idx);
    std::size_t K = topo.horizon;
    for (std::size_t t = 0; t < topo.target_columns.size(); ++t) {
        double m = topo.target_mean[t], s = topo.target_std[t];
        for (std::size_t b = 0; b < idx.size(); ++b)
            for (std::size_t k = 0; k < K; ++k) {
                double& v = out[(t * idx.size() + b) * K + k];
                v = (v - m) / s;
            }
    }
    return out;
}

std::vector<double> Forecaster::make_labels(const data::WindowedDataset& ds,
                                            const std::vector<std::size_t>& idx) const {
    std::size_t K = topo.horizon;
    std::vector<double> out(topo.target_columns.size() * idx.size() * K);
    for (std::size_t t = 0; t < topo.target_columns.size(); ++t) {
        std::size_t pos = target_position(ds, topo.target_columns[t]);
        for (std::size_t b = 0; b < idx.size(); ++b) {
            const auto& lb = ds.samples[idx[b]].labels;
            for (std::size_t k = 0; k < K; ++k)
                out[(t * idx.size() + b) * K + k] = static_cast<double>(lb[pos * K + k]);
        }
    }
    return out;
}

void Forecaster::destandardize(std::vector<double>& mean, std::vector<double>* variance,
                               std::size_t batch) const {
    std::size_t K = topo.horizon;
    for (std::size_t t = 0; t < topo.target_columns.size(); ++t) {
        double m = topo.target_mean[t], s = topo.target_std[t];
        for (std::size_t b = 0; b < batch; ++b) {
            for (std::size_t k = 0; k < K; ++k) {
                std::size_t i = (t * batch + b) * K + k;
                mean[i] = m + s * mean[i];
                if (variance) (*variance)[i] *= s * s;
            }
        }
    }
}

std::vector<nn::NamedParam> Forecaster::named_params() const {
    std::vector<nn::NamedParam> out;
    params(out);
    return out;
}

// ---------------------------------------------------------------------------
// concrete forecasters

namespace {

class MlpForecaster : public Forecaster {
public:
    MlpForecaster(Topology t, unsigned long long seed) : Forecaster(std::move(t)) {
        RngStream rng(seed, 1);
        std::size_t in = topo.input_width();
        for (std::size_t i = 0; i < topo.hidden.size(); ++i) {
            trunk_.emplace_back(in, topo.hidden[i], rng, "dense" + std::to_string(i));
            in = topo.hidden[i];
        }
        if (topo.task == Task::Regression)
            head_ = nn::HeteroscedasticHead(in, topo.horizon, rng, "head");
        else
            logit_head_ = nn::Dense(in, topo.horizon, rng, "head.logits");
    }

    ModelOutput forward(const Tensor& x, RngStream& rng, bool stochastic) const override {
        Tensor a = x;
        auto mode = stochastic ? nn::DropoutMode::Stochastic : nn::DropoutMode::Deterministic;
        for (const auto& layer : trunk_)
            a = nn::dropout(ad::relu(layer.forward(a)), topo.dropout_rate, mode, rng);
        ModelOutput out;
        if (topo.task == Task::Regression) {
            auto h = head_.forward(a);
            out.mean = h.mean;
            out.variance = h.variance;
        } else {
            out.logits = logit_head_.forward(a);
        }
        return out;
    }

    void params(std::vector<nn::NamedParam>& out) const override {
        for (const auto& l : trunk_) l.params(out);
        if (topo.task == Task::Regression)
            head_.params(out);
        else
            logit_head_.params(out);
    }

private:
    std::vector<nn::Dense> trunk_;
    nn::HeteroscedasticHead head_;
    nn::Dense logit_head_;
};

class BnnForecaster : public Forecaster {
public:
    BnnForecaster(Topology t, unsigned long long seed) : Forecaster(std::move(t)) {
        RngStream rng(seed, 1);
        nn::PriorSpec prior;
        prior.family = topo.prior_family == "laplace" ? nn::PriorSpec::Family::Laplace
                                                      : nn::PriorSpec::Family::Gaussian;
        prior.scale = topo.prior_scale;
        std::size_t in = topo.input_width();
        for (std::size_t i = 0; i < topo.hidden.size(); ++i) {
            trunk_.emplace_back(in, topo.hidden[i], prior, rng, "vdense" + std::to_string(i));
            in = topo.hidden[i];
        }
        std::size_t out_width =
            topo.task == Task::Regression ? 2 * topo.horizon : topo.horizon;
        out_ = nn::VariationalDense(in, out_width, prior, rng, "vhead");
    }

    ModelOutput forward(const Tensor& x, RngStream& rng, bool stochastic) const override {
        auto mode = topo.task == Task::Regression ? nn::VariationalMode::WeightSample
                                                  : nn::VariationalMode::LocalReparam;
        Tensor a = x;
        for (const auto& layer : trunk_)
            a = ad::relu(stochastic ? layer.forward(a, rng, mode) : layer.forward_mean(a));
        Tensor z = stochastic ? out_.forward(a, rng, mode) : out_.forward_mean(a);
        ModelOutput out;
        if (topo.task == Task::Regression) {
            out.mean = ad::slice_cols(z, 0, topo.horizon);
            out.variance = ad::add_scalar(
                ad::softplus(ad::slice_cols(z, topo.horizon, 2 * topo.horizon)),
                nn::HeteroscedasticHead::kVarianceFloor);
        } else {
            out.logits = z;
        }
        return out;
    }

    ad::Tensor kl(RngStream& rng) const override {
        Tensor total;
        for (const auto& layer : trunk_) {
            Tensor term = layer.kl(rng, topo.kl_samples);
            total = total.defined() ? total + term : term;
        }
        Tensor term = out_.kl(rng, topo.kl_samples);
        return total.defined() ? total + term : term;
    }

    void params(std::vector<nn::NamedParam>& out) const override {
        for (const auto& l : trunk_) l.params(out);
        out_.params(out);
    }

private:
    std::vector<nn::VariationalDense> trunk_;
    nn::VariationalDense out_;
};

class LstmForecaster : public Forecaster {
public:
    LstmForecaster(Topology t, unsigned long long seed) : Forecaster(std::move(t)) {
        RngStream rng(seed, 1);
        std::size_t in = topo.features_per_hour;
        for (std::size_t i = 0; i < topo.lstm_layers; ++i) {
            cells_.emplace_back(in, topo.lstm_units, rng, "lstm" + std::to_string(i));
            in = topo.lstm_units;
        }
        if (topo.task == Task::Regression)
            head_ = nn::HeteroscedasticHead(in, topo.horizon, rng, "head");
        else
            logit_head_ = nn::Dense(in, topo.horizon, rng, "head.logits");
    }

    ModelOutput forward(const Tensor& x, RngStream& rng, bool stochastic) const override {
        std::size_t batch = x.rows();
        std::size_t F = topo.features_per_hour;
        if (x.cols() != topo.history * F)
            throw ShapeError("lstm input width mismatch");
        auto mode = stochastic ? nn::DropoutMode::Stochastic : nn::DropoutMode::Deterministic;

        // per-sequence variational masks: input+recurrent per layer, output
        // mask after the last layer only
        std::vector<nn::LstmMasks> masks;
        for (std::size_t i = 0; i < cells_.size(); ++i) {
            nn::LstmMasks m = cells_[i].make_masks(batch, topo.dropout_rate, mode, rng);
            if (i + 1 < cells_.size()) m.output = Tensor::full({batch, topo.lstm_units}, 1.0);
            masks.push_back(std::move(m));
        }

        std::vector<nn::LstmCell::State> states;
        for (const auto& cell : cells_) states.push_back(cell.initial_state(batch));

        Tensor h;
        for (std::size_t step = 0; step < topo.history; ++step) {
            Tensor in = ad::slice_cols(x, step * F, (step + 1) * F);
            for (std::size_t i = 0; i < cells_.size(); ++i)
                in = cells_[i].step(states[i], in, masks[i]);
            h = in;
        }

        ModelOutput out;
        if (topo.task == Task::Regression) {
            auto ho = head_.forward(h);
            out.mean = ho.mean;
            out.variance = ho.variance;
        } else {
            out.logits = logit_head_.forward(h);
        }
        return out;
    }

    void params(std::vector<nn::NamedParam>& out) const override {
        for (const auto& c : cells_) c.params(out);
        if (topo.task == Task::Regression)
            head_.params(out);
        else
            logit_head_.params(out);
    }

private:
    std::vector<nn::LstmCell> cells_;
    nn::HeteroscedasticHead head_;
    nn::Dense logit_head_;
};

class GnnForecaster : public Forecaster {
public:
    GnnForecaster(Topology t, unsigned long long seed) : Forecaster(std::move(t)) {
        RngStream rng(seed, 1);
        std::size_t C = topo.node_feature_index[0].size();
        std::size_t Cc = topo.conv_channels;
        embeddings_ = nn::glorot_init(topo.nodes, topo.embed_dim, rng, "embeddings");
        for (std::size_t j = 0; j < topo.conv_kernel; ++j)
            conv_taps_.push_back(nn::glorot_init(Cc, C, rng, "conv.w" + std::to_string(j)));
        conv_bias_ = Tensor::zeros({1, Cc}, true, "conv.bias");
        for (std::size_t g = 0; g < 3; ++g)
            glus_.emplace_back(Cc, Cc, rng, "glu" + std::to_string(g));
        std::size_t t_out = topo.history - topo.conv_kernel + 1;
        collapse_ = nn::Dense(t_out * Cc, topo.gnn_hidden, rng, "collapse");
        graph_w_ = nn::glorot_init(topo.gnn_hidden, topo.gnn_hidden, rng, "graph.w");
        shared_ = nn::Dense(topo.gnn_hidden, topo.gnn_hidden, rng, "shared");
        if (topo.task == Task::Regression)
            head_ = nn::HeteroscedasticHead(topo.gnn_hidden, topo.horizon, rng, "head");
        else
            logit_head_ = nn::Dense(topo.gnn_hidden, topo.horizon, rng, "head.logits");
    }

    ModelOutput forward(const Tensor& x, RngStream& rng, bool stochastic) const override {
        std::size_t N = topo.nodes;
        std::size_t R = x.rows();  // nodes * batch, node-major
        if (R % N != 0) throw ShapeError("gnn input rows must be a multiple of node count");
        std::size_t B = R / N;
        std::size_t C = topo.node_feature_index[0].size();
        std::size_t Cc = topo.conv_channels;
        std::size_t T = topo.history;
        std::size_t k = topo.conv_kernel;
        std::size_t To = T - k + 1;
        auto mode = stochastic ? nn::DropoutMode::Stochastic : nn::DropoutMode::Deterministic;

        // temporal convolution over the hour axis, computed as k shifted
        // time-distributed matmuls
        Tensor acc;
        for (std::size_t j = 0; j < k; ++j) {
            Tensor xs = ad::reshape(ad::slice_cols(x, j * C, (j + To) * C), {R * To, C});
            Tensor part = ad::matmul(xs, ad::transpose(conv_taps_[j]));
            acc = acc.defined() ? acc + part : part;
        }
        acc = acc + conv_bias_;  // [R*To, Cc]

        Tensor g = acc;
        for (const auto& glu : glus_)
            g = nn::dropout(glu.forward(g), topo.dropout_rate, mode, rng);

        Tensor ht = ad::relu(collapse_.forward(ad::reshape(g, {R, To * Cc})));
        ht = nn::dropout(ht, topo.dropout_rate, mode, rng);

        // graph mixing: per batch item H' = relu(A H W), batched through the
        // node-major layout
        Tensor adjacency = nn::learned_adjacency(embeddings_);
        Tensor hw = ad::matmul(ht, ad::transpose(graph_w_));
        Tensor mixed = ad::matmul(adjacency, ad::reshape(hw, {N, B * topo.gnn_hidden}));
        Tensor hg = ad::relu(ad::reshape(mixed, {R, topo.gnn_hidden}));
        hg = nn::dropout(hg, topo.dropout_rate, mode, rng);

        Tensor sd = ad::relu(shared_.forward(hg));
        sd = nn::dropout(sd, topo.dropout_rate, mode, rng);

        ModelOutput out;
        if (topo.task == Task::Regression) {
            auto ho = head_.forward(sd);
            out.mean = ho.mean;
            out.variance = ho.variance;
        } else {
            out.logits = logit_head_.forward(sd);
        }
        return out;
    }

    void params(std::vector<nn::NamedParam>& out) const override {
        out.push_back({embeddings_.name(), embeddings_});
        for (const auto& w : conv_taps_) out.push_back({w.name(), w});
        out.push_back({conv_bias_.name(), conv_bias_});
        for (const auto& g : glus_) g.params(out);
        collapse_.params(out);
        out.push_back({graph_w_.name(), graph_w_});
        shared_.params(out);
        if (topo.task == Task::Regression)
            head_.params(out);
        else
            logit_head_.params(out);
    }

private:
    Tensor embeddings_;
    std::vector<Tensor> conv_taps_;
    Tensor conv_bias_;
    std::vector<nn::Glu> glus_;
    nn::Dense collapse_;
    Tensor graph_w_;
    nn::Dense shared_;
    nn::HeteroscedasticHead head_;
    nn::Dense logit_head_;
};

class QuantileForecaster : public Forecaster {
public:
    QuantileForecaster(Topology t, unsigned long long seed) : Forecaster(std::move(t)) {
        RngStream rng(seed, 1);
        std::size_t in = topo.input_width();
        for (std::size_t i = 0; i < topo.hidden.size(); ++i) {
            trunk_.emplace_back(in, topo.hidden[i], rng, "dense" + std::to_string(i));
            in = topo.hidden[i];
        }
        out_ = nn::Dense(in, 2 * topo.horizon, rng, "head.quantiles");
    }

    ModelOutput forward(const Tensor& x, RngStream& rng, bool stochastic) const override {
        Tensor a = x;
        auto mode = stochastic ? nn::DropoutMode::Stochastic : nn::DropoutMode::Deterministic;
        for (const auto& layer : trunk_)
            a = nn::dropout(ad::relu(layer.forward(a)), topo.dropout_rate, mode, rng);
        Tensor z = out_.forward(a);
        ModelOutput out;
        out.lower = ad::slice_cols(z, 0, topo.horizon);
        out.upper = ad::slice_cols(z, topo.horizon, 2 * topo.horizon);
        return out;
    }

    void params(std::vector<nn::NamedParam>& out) const override {
        for (const auto& l : trunk_) l.params(out);
        out_.params(out);
    }

private:
    std::vector<nn::Dense> trunk_;
    nn::Dense out_;
};

}  // namespace

std::unique_ptr<Forecaster> build_forecaster(const Topology& topo, unsigned long long init_seed) {
    if (topo.kind == "mlp") return std::make_unique<MlpForecaster>(topo, init_seed);
    if (topo.kind == "bnn") return std::make_unique<BnnForecaster>(topo, init_seed);
    if (topo.kind == "lstm") return std::make_unique<LstmForecaster>(topo, init_seed);
    if (topo.kind == "gnn") return std::make_unique<GnnForecaster>(topo, init_seed);
    if (topo.kind == "quantile") return std::make_unique<QuantileForecaster>(topo, init_seed);
    throw ConfigError("unknown model kind '" + topo.kind + "'");
}

Topology make_topology(const std::string& kind, Task task, const data::WindowedDataset& train,
                       const std::vector<std::string>& target_columns) {
    if (kind != "mlp" && kind != "bnn" && kind != "lstm" && kind != "gnn" && kind != "quantile")
        throw ConfigError("unknown model kind '" + kind + "'");
    Topology topo;
    topo.kind = kind;
    topo.task = task;
    topo.history = train.history;
    topo.horizon = train.horizon;
    topo.features_per_hour = train.feature_names.size();
    topo.target_columns = target_columns;
    if (kind == "gnn") {
        topo.nodes = target_columns.size();
        std::vector<std::size_t> shared;
        for (std::size_t f = 0; f < train.feature_names.size(); ++f) {
            const std::string& name = train.feature_names[f];
            bool is_target = false;
            for (const auto& t : train.targets)
                if (t.column == name) is_target = true;
            if (!is_target) shared.push_back(f);
        }
        for (const auto& col : target_columns) {
            std::vector<std::size_t> gather;
            gather.push_back(train.feature_index(col));
            gather.insert(gather.end(), shared.begin(), shared.end());
            topo.node_feature_index.push_back(std::move(gather));
        }
    }
    fit_target_stats(topo, train);
    return topo;
}

void fit_target_stats(Topology& topo, const data::WindowedDataset& train) {
    topo.target_mean.assign(topo.target_columns.size(), 0.0);
    topo.target_std.assign(topo.target_columns.size(), 1.0);
    for (std::size_t t = 0; t < topo.target_columns.size(); ++t) {
        std::size_t pos = target_position(train, topo.target_columns[t]);
        double m = 0.0;
        std::size_t n = 0;
        for (const auto& s : train.samples)
            for (std::size_t k = 0; k < train.horizon; ++k) {
                m += s.targets[pos * train.horizon + k];
                ++n;
            }
        if (n == 0) throw DataError("no training targets for '" + topo.target_columns[t] + "'");
        m /= static_cast<double>(n);
        double var = 0.0;
        for (const auto& s : train.samples)
            for (std::size_t k = 0; k < train.horizon; ++k) {
                double d = s.targets[pos * train.horizon + k] - m;
                var += d * d;
            }
        var /= static_cast<double>(n);
        double sd = std::sqrt(var);
        topo.target_mean[t] = m;
        topo.target_std[t] = sd < 1e-12 ? 1.0 : sd;
    }
}

std::vector<double> flat_params(const Forecaster& model) {
    std::vector<double> out;
    for (const auto& p : model.named_params())
        out.insert(out.end(), p.tensor.values().begin(), p.tensor.values().end());
    return out;
}

void set_flat_params(Forecaster& model, const std::vector<double>& values) {
    std::size_t offset = 0;
    for (auto& p : model.named_params()) {
        std::size_t n = p.tensor.numel();
        if (offset + n > values.size())
            throw ShapeError("flat parameter vector too short for model");
        ad::Tensor t = p.tensor;
        std::copy(values.begin() + offset, values.begin() + offset + n,
                  t.values_mut().begin());
        offset += n;
    }
    if (offset != values.size())
        throw ShapeError("flat parameter vector length " + std::to_string(values.size()) +
                         ", model needs " + std::to_string(offset));
}

// ---------------------------------------------------------------------------
// topology (de)serialization

std::string topology_to_json(const Topology& t) {
    json j;
    j["kind"] = t.kind;
    j["task"] = task_name(t.task);
    j["history"] = t.history;
    j["features_per_hour"] = t.features_per_hour;
    j["horizon"] = t.horizon;
    j["hidden"] = t.hidden;
    j["dropout_rate"] = t.dropout_rate;
    j["prior_family"] = t.prior_family;
    j["prior_scale"] = t.prior_scale;
    j["kl_samples"] = t.kl_samples;
    j["lstm_units"] = t.lstm_units;
    j["lstm_layers"] = t.lstm_layers;
    j["nodes"] = t.nodes;
    j["embed_dim"] = t.embed_dim;
    j["conv_kernel"] = t.conv_kernel;
    j["conv_channels"] = t.conv_channels;
    j["gnn_hidden"] = t.gnn_hidden;
    j["node_feature_index"] = t.node_feature_index;
    j["target_columns"] = t.target_columns;
    j["target_mean"] = t.target_mean;
    j["target_std"] = t.target_std;
    return j.dump();
}

Topology topology_from_json(const std::string& text) {
    json j = json::parse(text);
    Topology t;
    t.kind = j.at("kind").get<std::string>();
    t.task = task_from_name(j.at("task").get<std::string>());
    t.history = j.at("history").get<std::size_t>();
    t.features_per_hour = j.at("features_per_hour").get<std::size_t>();
    t.horizon = j.at("horizon").get<std::size_t>();
    t.hidden = j.at("hidden").get<std::vector<std::size_t>>();
    t.dropout_rate = j.at("dropout_rate").get<double>();
    t.prior_family = j.at("prior_family").get<std::string>();
    t.prior_scale = j.at("prior_scale").get<double>();
    t.kl_samples = j.at("kl_samples").get<std::size_t>();
    t.lstm_units = j.at("lstm_units").get<std::size_t>();
    t.lstm_layers = j.at("lstm_layers").get<std::size_t>();
    t.nodes = j.at("nodes").get<std::size_t>();
    t.embed_dim = j.at("embed_dim").get<std::size_t>();
    t.conv_kernel = j.at("conv_kernel").get<std::size_t>();
    t.conv_channels = j.at("conv_channels").get<std::size_t>();
    t.gnn_hidden = j.at("gnn_hidden").get<std::size_t>();
    t.node_feature_index = j.at("node_feature_index").get<std::vector<std::vector<std::size_t>>>();
    t.target_columns = j.at("target_columns").get<std::vector<std::string>>();
    t.target_mean = j.at("target_mean").get<std::vector<double>>();
    t.target_std = j.at("target_std").get<std::vector<double>>();
    return t;
}

}  // namespace probcast::model
