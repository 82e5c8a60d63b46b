#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "probcast/data.hpp"
#include "probcast/kvconfig.hpp"
#include "probcast/training.hpp"

namespace probcast {

// One experiment: a method trained on one target selection of a prepared
// dataset, with all knobs in a flat key=value document.
struct ExperimentConfig {
    // paths
    std::string data_csv;     // raw input; empty means synthesize
    std::string dataset_dir = "out/dataset";
    std::string output_dir = "out/run";
    std::string checkpoint;   // defaults to <output_dir>/checkpoint.json

    // target selection
    std::string target = "auto";     // column for single-series methods
    std::string pollutant = "pm25";  // graph method: this pollutant across stations

    std::string method = "mc-dropout";  // bnn, mc-dropout, ensemble, swag,
                                        // lstm-mc, gnn-mc, quantile, persistence
    std::string task = "regression";    // regression | exceedance

    // model
    std::size_t history = 24;
    std::size_t horizon = 24;
    std::vector<std::size_t> hidden = {128, 128};
    double dropout = 0.5;
    double prior_scale = 0.1;
    std::size_t mc_samples = 1000;
    std::size_t ensemble_size = 10;
    double interval_level = 0.95;

    train::TrainConfig train;

    // evaluation / forecasting
    std::string anchor = "latest";  // first forecast hour, ISO timestamp or "latest"
    std::size_t eval_stride = 0;    // hours between scored anchors; 0 means horizon
    std::size_t grid_points = 51;
    std::uint64_t seed = 1;
    std::size_t threads = 0;  // 0 means automatic

    // split: explicit timestamps win, otherwise the last test_fraction of anchors
    std::string train_begin, train_end, test_begin, test_end;
    double test_fraction = 0.2;

    data::SynthConfig synth;
};

ExperimentConfig config_from_kv(const KvConfig& kv);
ExperimentConfig load_experiment_config(const std::string& path);
void validate_config(const ExperimentConfig& cfg);

// Maps a method name to the network kind it runs on; persistence has none.
std::string method_model_kind(const std::string& method);
bool method_is_stochastic(const std::string& method);
bool method_needs_training(const std::string& method);

}  // namespace probcast
