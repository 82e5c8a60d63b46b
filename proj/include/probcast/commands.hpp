#pragma once

#include <ostream>
#include <string>

#include "probcast/experiment.hpp"

namespace probcast::cmd {

// Synthesizes or loads the raw frame, windows it, and writes the dataset
// bundle plus the raw frame under cfg.dataset_dir.
void cmd_prepare(const ExperimentConfig& cfg, std::ostream& log);

// Trains the configured method and writes checkpoint.json and learning-curve
// CSVs under cfg.output_dir.
void cmd_train(const ExperimentConfig& cfg, std::ostream& log);

// Scores the checkpoint on the test split: metric reports, prediction dumps,
// reliability curves, and decision surfaces under cfg.output_dir.
void cmd_evaluate(const ExperimentConfig& cfg, std::ostream& log);

// Emits a single multi-step forecast from the end of the frame (or an explicit
// anchor, ISO timestamp or "latest").
void cmd_forecast(const ExperimentConfig& cfg, const std::string& anchor_spec, std::ostream& log);

}  // namespace probcast::cmd
