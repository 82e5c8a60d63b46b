#pragma once

#include <cstdint>
#include <limits>
#include <string>
#include <vector>

#include "probcast/kvconfig.hpp"

namespace probcast::data {

// --- timestamps (timezone-naive ISO-8601, hourly resolution) ---------------

long long parse_timestamp(const std::string& text);  // "2019-01-01T00:00:00" -> epoch seconds
std::string format_timestamp(long long epoch_seconds);
int hour_of_day(long long epoch_seconds);

constexpr long long kHour = 3600;

// --- CAQI bands -------------------------------------------------------------

enum class Pollutant { Pm25, Pm10 };

std::string pollutant_name(Pollutant p);
Pollutant pollutant_from_name(const std::string& name);  // "pm25" | "pm10"
Pollutant infer_pollutant(const std::string& column_name);

struct CaqiBand {
    std::string label;
    double lower;
    double upper;  // +inf on the last band
};

struct CaqiTable {
    std::vector<CaqiBand> pm25;
    std::vector<CaqiBand> pm10;

    static const CaqiTable& standard();
    const std::vector<CaqiBand>& bands(Pollutant p) const;
    void validate() const;  // contiguous, non-overlapping, five bands
};

// Band index 0..4; a value on a shared boundary belongs to the lower band.
int caqi_classify(double value, Pollutant p);

double very_low_upper_bound(Pollutant p);  // 15 for PM2.5, 25 for PM10

// 1 iff the value strictly exceeds the Very-Low upper bound.
int exceedance_label(double value, Pollutant p);

// --- frames -----------------------------------------------------------------

struct TimeSeriesFrame {
    std::vector<long long> timestamps;  // hourly, strictly increasing
    std::vector<std::string> columns;
    std::vector<std::vector<double>> values;    // [column][row]
    std::vector<std::vector<uint8_t>> missing;  // [column][row], 1 = missing

    std::size_t num_rows() const { return timestamps.size(); }
    std::size_t num_cols() const { return columns.size(); }
    std::size_t column_index(const std::string& name) const;
    bool has_column(const std::string& name) const;
};

struct TargetSpec {
    std::string column;
    Pollutant pollutant;
};

struct SchemaDescriptor {
    std::vector<TargetSpec> targets;
    std::vector<std::string> exogenous;

    std::vector<std::string> all_columns() const;  // targets then exogenous
};

TimeSeriesFrame load_csv(const std::string& path, const SchemaDescriptor& schema);
void save_frame_csv(const std::string& path, const TimeSeriesFrame& frame);

// --- windowed datasets --------------------------------------------------------

struct WindowSample {
    long long anchor;               // timestamp of the first forecast hour
    std::vector<double> features;   // normalized, hour-major [history x F]
    std::vector<double> targets;    // raw ug/m3, [target x horizon]
    std::vector<uint8_t> labels;    // exceedance, [target x horizon]
};

struct NormalizationStats {
    std::vector<double> mean;  // per per-hour feature
    std::vector<double> stdev;
};

struct WindowedDataset {
    std::size_t history = 24;
    std::size_t horizon = 24;
    std::vector<std::string> feature_names;  // per-hour layout, includes hour_sin/hour_cos
    std::vector<TargetSpec> targets;
    NormalizationStats stats;
    std::vector<WindowSample> samples;

    std::size_t feature_dim() const { return history * feature_names.size(); }
    std::size_t target_dim() const { return targets.size() * horizon; }
    std::size_t feature_index(const std::string& name) const;  // within one hour block
};

struct ImputationPolicy {
    // Rows at or after this timestamp never feed imputation means or
    // normalization stats; defaults to "use every row".
    long long train_end_exclusive = std::numeric_limits<long long>::max();
};

WindowedDataset build_windows(const TimeSeriesFrame& frame, const SchemaDescriptor& schema,
                              std::size_t history_hours, std::size_t horizon,
                              const ImputationPolicy& policy);

struct TimeRange {
    long long begin;  // inclusive
    long long end;    // exclusive
};

// Splits by anchor timestamp. Ranges must be disjoint.
void split_by_date(const WindowedDataset& dataset, const TimeRange& train_range,
                   const TimeRange& test_range, WindowedDataset& train_out,
                   WindowedDataset& test_out, std::vector<std::string>* warnings = nullptr);

// Assembles the normalized feature block whose first forecast hour is
// `anchor_time`, reusing previously fitted stats; targets and labels stay
// empty. Fails when the frame does not cover the full history.
WindowSample forecast_window(const TimeSeriesFrame& frame, const WindowedDataset& layout,
                             long long anchor_time);

// --- synthetic data -----------------------------------------------------------

struct SynthConfig {
    unsigned long long seed = 1;
    std::size_t stations = 4;
    std::size_t hours = 24 * 400;
    long long start_timestamp = 1546300800;  // 2019-01-01T00:00:00
    double seasonal_amplitude = 10.0;        // diurnal swing, ug/m3
    std::string noise_law = "gaussian";      // "gaussian" | "laplace"
    double noise_sigma = 2.0;                // standard deviation of the noise
    double exceedance_rate = 0.2;            // long-run fraction of exceedance hours
    bool exogenous = true;
    double missing_feature_rate = 0.0;       // per exogenous cell
    double missing_target_rate = 0.0;        // per pollutant cell
};

// Deterministic for a given config. Generative parameters (per-series base
// level, amplitude, phase, noise) are appended to `recorded` when given.
TimeSeriesFrame synthesize(const SynthConfig& config, KvConfig* recorded = nullptr);

SchemaDescriptor synth_schema(const SynthConfig& config);

// --- dataset persistence --------------------------------------------------------

struct DatasetBundle {
    WindowedDataset train;
    WindowedDataset test;
    KvConfig meta;  // stats, layout, generator parameters when synthetic
};

void save_bundle(const DatasetBundle& bundle, const std::string& directory);
DatasetBundle load_bundle(const std::string& directory);

}  // namespace probcast::data
