#pragma once

#include <memory>
#include <string>
#include <vector>

#include "probcast/data.hpp"
#include "probcast/layers.hpp"
#include "probcast/rng.hpp"
#include "probcast/tensor.hpp"

namespace probcast::model {

enum class Task { Regression, Exceedance };

std::string task_name(Task t);
Task task_from_name(const std::string& name);

// Network blueprint; fully describes how to rebuild a forecaster.
struct Topology {
    std::string kind;  // mlp | bnn | lstm | gnn | quantile
    Task task = Task::Regression;

    std::size_t history = 24;
    std::size_t features_per_hour = 0;
    std::size_t horizon = 24;

    std::vector<std::size_t> hidden = {128, 128};
    double dropout_rate = 0.0;

    // variational nets
    std::string prior_family = "gaussian";  // gaussian | laplace
    double prior_scale = 0.1;
    std::size_t kl_samples = 1;

    // lstm
    std::size_t lstm_units = 64;
    std::size_t lstm_layers = 2;

    // gnn
    std::size_t nodes = 0;
    std::size_t embed_dim = 16;
    std::size_t conv_kernel = 3;
    std::size_t conv_channels = 16;
    std::size_t gnn_hidden = 64;
    std::vector<std::vector<std::size_t>> node_feature_index;  // per node, per-hour indices

    // predicted series, in row-block order (one entry unless gnn)
    std::vector<std::string> target_columns;
    std::vector<double> target_mean;  // standardization of y, per target column
    std::vector<double> target_std;

    std::size_t input_width() const;     // columns of the input matrix
    std::size_t rows_per_sample() const { return kind == "gnn" ? nodes : 1; }
};

struct ModelOutput {
    ad::Tensor mean;      // regression, standardized target space
    ad::Tensor variance;  // regression, standardized target space
    ad::Tensor logits;    // classification
    ad::Tensor lower;     // quantile baseline (q=0.05), standardized
    ad::Tensor upper;     // quantile baseline (q=0.95), standardized
};

class Forecaster {
public:
    explicit Forecaster(Topology topo) : topo(std::move(topo)) {}
    virtual ~Forecaster() = default;

    // One stochastic (or deterministic) pass. Row layout: plain batch for
    // single-series models; node-major [node*batch + b] for the graph model.
    virtual ModelOutput forward(const ad::Tensor& x, RngStream& rng, bool stochastic) const = 0;

    virtual void params(std::vector<nn::NamedParam>& out) const = 0;

    // KL(q||prior) of all variational layers; undefined tensor when the model
    // has none.
    virtual ad::Tensor kl(RngStream& rng) const;

    // batch assembly -------------------------------------------------------
    ad::Tensor make_input(const data::WindowedDataset& ds, const std::vector<std::size_t>& idx,
                          bool requires_grad = false) const;
    std::vector<double> make_targets_std(const data::WindowedDataset& ds,
                                         const std::vector<std::size_t>& idx) const;
    std::vector<double> make_targets_raw(const data::WindowedDataset& ds,
                                         const std::vector<std::size_t>& idx) const;
    std::vector<double> make_labels(const data::WindowedDataset& ds,
                                    const std::vector<std::size_t>& idx) const;

    // standardized -> physical units, row layout as produced by forward
    void destandardize(std::vector<double>& mean, std::vector<double>* variance,
                       std::size_t batch) const;

    std::vector<nn::NamedParam> named_params() const;

    Topology topo;
};

std::unique_ptr<Forecaster> build_forecaster(const Topology& topo, unsigned long long init_seed);

// Derives a topology from dataset layout and fits target standardization on
// the training split.
Topology make_topology(const std::string& kind, Task task, const data::WindowedDataset& train,
                       const std::vector<std::string>& target_columns);
void fit_target_stats(Topology& topo, const data::WindowedDataset& train);

std::vector<double> flat_params(const Forecaster& model);
void set_flat_params(Forecaster& model, const std::vector<double>& values);

std::string topology_to_json(const Topology& topo);
Topology topology_from_json(const std::string& text);

}  // namespace probcast::model
