#include "probcast/commands.hpp"

#include <algorithm>
#include <cmath>
#include <filesystem>
#include <limits>
#include <optional>

#include "probcast/aggregate.hpp"
#include "probcast/baselines.hpp"
#include "probcast/csv.hpp"
#include "probcast/decision.hpp"
#include "probcast/errors.hpp"
#include "probcast/mathutil.hpp"
#include "probcast/metrics.hpp"
#include "probcast/models.hpp"
#include "probcast/parallel.hpp"
#include "probcast/training.hpp"
#include "probcast/uncertainty.hpp"

namespace probcast::cmd {

namespace {

namespace fs = std::filesystem;

std::string checkpoint_path(const ExperimentConfig& cfg) {
    if (!cfg.checkpoint.empty()) return cfg.checkpoint;
    return cfg.output_dir + "/checkpoint.json";
}

std::string frame_path(const ExperimentConfig& cfg) { return cfg.dataset_dir + "/frame.csv"; }

data::SchemaDescriptor schema_from_header(const std::vector<std::string>& header) {
    data::SchemaDescriptor schema;
    for (std::size_t i = 1; i < header.size(); ++i) {  // column 0 is the timestamp
        const std::string& name = header[i];
        if (name.find("pm25") != std::string::npos || name.find("pm2_5") != std::string::npos ||
            name.find("pm10") != std::string::npos)
            schema.targets.push_back({name, data::infer_pollutant(name)});
        else
            schema.exogenous.push_back(name);
    }
    if (schema.targets.empty())
        throw DataError("no pollutant columns found (expected *_pm25 or *_pm10 names)");
    return schema;
}

std::vector<std::string> choose_targets(const ExperimentConfig& cfg,
                                        const data::WindowedDataset& train) {
    data::Pollutant want = cfg.pollutant == "pm25" ? data::Pollutant::Pm25 : data::Pollutant::Pm10;
    std::vector<std::string> columns;
    if (cfg.method == "gnn-mc") {
        for (const auto& t : train.targets)
            if (t.pollutant == want) columns.push_back(t.column);
        if (columns.empty())
            throw ConfigError("no " + cfg.pollutant + " targets in the prepared dataset");
        return columns;
    }
    if (cfg.target != "auto") {
        for (const auto& t : train.targets)
            if (t.column == cfg.target) return {cfg.target};
        throw ConfigError("target column '" + cfg.target + "' is not in the prepared dataset");
    }
    for (const auto& t : train.targets)
        if (t.pollutant == want) return {t.column};
    throw ConfigError("no " + cfg.pollutant + " targets in the prepared dataset");
}

data::Pollutant column_pollutant(const data::WindowedDataset& ds, const std::string& column) {
    for (const auto& t : ds.targets)
        if (t.column == column) return t.pollutant;
    throw ContractError("column '" + column + "' is not a dataset target");
}

// Test anchors spaced at least `stride_hours` apart, so horizons do not overlap.
std::vector<std::size_t> stride_indices(const data::WindowedDataset& ds,
                                        std::size_t stride_hours) {
    std::vector<std::size_t> idx;
    long long next = std::numeric_limits<long long>::min();
    for (std::size_t i = 0; i < ds.samples.size(); ++i) {
        if (ds.samples[i].anchor >= next) {
            idx.push_back(i);
            next = ds.samples[i].anchor + static_cast<long long>(stride_hours) * data::kHour;
        }
    }
    return idx;
}

model::Topology build_topology(const ExperimentConfig& cfg, const data::WindowedDataset& train,
                               const std::vector<std::string>& targets) {
    if (train.history != cfg.history || train.horizon != cfg.horizon)
        throw ConfigError("config window (" + std::to_string(cfg.history) + "/" +
                          std::to_string(cfg.horizon) + ") does not match the prepared dataset (" +
                          std::to_string(train.history) + "/" + std::to_string(train.horizon) + ")");
    model::Task task = model::task_from_name(cfg.task);
    model::Topology topo =
        model::make_topology(method_model_kind(cfg.method), task, train, targets);
    topo.hidden = cfg.hidden;
    topo.dropout_rate = cfg.dropout;
    topo.prior_scale = cfg.prior_scale;
    topo.prior_family = task == model::Task::Regression ? "laplace" : "gaussian";
    return topo;
}

train::TrainConfig build_train_config(const ExperimentConfig& cfg, std::uint64_t seed) {
    train::TrainConfig tcfg = cfg.train;
    tcfg.seed = seed;
    tcfg.variational = cfg.method == "bnn";
    tcfg.collect_swag = cfg.method == "swag";
    return tcfg;
}

// --------------------------------------------------------------------------
// evaluation plumbing
// --------------------------------------------------------------------------

struct SeriesEval {
    std::string column;
    data::Pollutant pollutant = data::Pollutant::Pm25;
    std::vector<long long> times;
    std::vector<double> y, labels;
    bool has_regression = false;
    std::vector<double> mean, variance, sigma, lower, upper, epi_std, conf_reg;
    bool has_probs = false;
    std::vector<double> prob, conf_cls;
};

// Splits the M stochastic passes into per-column mixture series aligned with
// the forward row layout (t*B + b rows, horizon columns).
std::vector<SeriesEval> aggregate_predictions(const model::Forecaster& net,
                                              const data::WindowedDataset& ds,
                                              const std::vector<std::size_t>& idx,
                                              const std::vector<uq::SamplePrediction>& samples,
                                              double level) {
    if (samples.empty()) throw ContractError("aggregate_predictions: no samples");
    const auto& topo = net.topo;
    std::size_t B = idx.size();
    std::size_t K = topo.horizon;
    std::size_t M = samples.size();
    bool regression = topo.task == model::Task::Regression;

    std::vector<double> y = net.make_targets_raw(ds, idx);
    std::vector<double> labels = net.make_labels(ds, idx);

    std::vector<SeriesEval> series(topo.target_columns.size());
    for (std::size_t t = 0; t < topo.target_columns.size(); ++t) {
        SeriesEval& s = series[t];
        s.column = topo.target_columns[t];
        s.pollutant = column_pollutant(ds, s.column);
        double threshold = data::very_low_upper_bound(s.pollutant);
        std::size_t n = B * K;
        s.times.reserve(n);
        std::vector<double> means_m(M), vars_m(M), probs_m(M);
        for (std::size_t b = 0; b < B; ++b) {
            long long anchor = ds.samples[idx[b]].anchor;
            for (std::size_t k = 0; k < K; ++k) {
                std::size_t e = (t * B + b) * K + k;
                s.times.push_back(anchor + static_cast<long long>(k) * data::kHour);
                s.y.push_back(y[e]);
                s.labels.push_back(labels[e]);
                if (regression) {
                    for (std::size_t m = 0; m < M; ++m) {
                        means_m[m] = samples[m].mean[e];
                        vars_m[m] = samples[m].variance[e];
                        probs_m[m] =
                            1.0 - norm_cdf((threshold - means_m[m]) / std::sqrt(vars_m[m]));
                    }
                    agg::PredictiveMixture mix = agg::mix_moments(means_m, vars_m);
                    agg::prediction_interval(mix, level);
                    s.mean.push_back(mix.mean);
                    s.variance.push_back(mix.variance);
                    s.sigma.push_back(std::sqrt(mix.variance));
                    s.lower.push_back(mix.lower);
                    s.upper.push_back(mix.upper);
                    s.epi_std.push_back(std::sqrt(mix.epistemic_variance));
                    agg::ExceedanceForecast fc = agg::average_probabilities(probs_m);
                    s.prob.push_back(fc.probability);
                    s.conf_cls.push_back(fc.confidence);
                } else {
                    for (std::size_t m = 0; m < M; ++m) probs_m[m] = samples[m].prob[e];
                    agg::ExceedanceForecast fc = agg::average_probabilities(probs_m);
                    s.prob.push_back(fc.probability);
                    s.conf_cls.push_back(fc.confidence);
                }
            }
        }
        s.has_probs = true;
        if (regression) {
            s.has_regression = true;
            s.conf_reg = agg::regression_confidence(s.epi_std);
        }
    }
    return series;
}

std::string cell(double v) { return csv::format_double(v); }

void write_prediction_dump(const SeriesEval& s, const std::string& path) {
    csv::Table table;
    table.header = {"timestamp", "y_true", "mu", "sigma", "lower", "upper", "p_hat", "confidence"};
    for (std::size_t i = 0; i < s.times.size(); ++i) {
        std::vector<std::string> row(8);
        row[0] = data::format_timestamp(s.times[i]);
        row[1] = cell(s.y[i]);
        if (s.has_regression) {
            row[2] = cell(s.mean[i]);
            row[3] = cell(s.sigma[i]);
            row[4] = cell(s.lower[i]);
            row[5] = cell(s.upper[i]);
        }
        if (s.has_probs) row[6] = cell(s.prob[i]);
        if (s.has_regression)
            row[7] = cell(s.conf_reg[i]);
        else if (s.has_probs)
            row[7] = cell(s.conf_cls[i]);
        table.rows.push_back(std::move(row));
    }
    csv::write_file(path, table);
}

metrics::MetricReport series_report(const SeriesEval& s, const std::string& method) {
    std::optional<metrics::RegressionEval> reg;
    if (s.has_regression) reg = metrics::RegressionEval{s.y, s.mean, s.variance, s.lower, s.upper};
    std::optional<metrics::ClassificationEval> cls;
    if (s.has_probs) cls = metrics::ClassificationEval{s.labels, s.prob};
    return metrics::assemble_report(s.column, data::pollutant_name(s.pollutant), method, reg, cls);
}

void write_analysis(const ExperimentConfig& cfg, const SeriesEval& s, std::ostream& log) {
    auto grid = decision::uniform_grid(cfg.grid_points);
    if (s.has_regression) {
        auto curve = decision::reliability_curve(s.mean, s.conf_reg, s.y,
                                                 decision::TaskKind::Regression, grid);
        decision::save_curve(curve, cfg.output_dir + "/reliability_" + s.column + ".csv");
    } else if (s.has_probs) {
        auto curve = decision::reliability_curve(s.prob, s.conf_cls, s.labels,
                                                 decision::TaskKind::Classification, grid);
        decision::save_curve(curve, cfg.output_dir + "/reliability_" + s.column + ".csv");
    }
    if (s.has_probs) {
        auto surface = decision::decision_surface(s.prob, s.conf_cls, s.labels, grid, grid);
        decision::save_surface(surface, cfg.output_dir + "/surface_" + s.column + ".csv");
        auto best = decision::best_operating_point(surface);
        log << s.column << ": best operating point tau1=" << best.tau1 << " tau2=" << best.tau2
            << " f1=" << best.f1 << "\n";
    }
}

// --------------------------------------------------------------------------
// baseline evaluation paths
// --------------------------------------------------------------------------

void evaluate_persistence(const ExperimentConfig& cfg, const data::DatasetBundle& bundle,
                          const uq::Checkpoint& ckpt, std::ostream& log) {
    data::TimeSeriesFrame frame;
    {
        csv::Table table = csv::read_file(frame_path(cfg));
        frame = data::load_csv(frame_path(cfg), schema_from_header(table.header));
    }
    const auto& ds = bundle.test;
    std::string column = ckpt.source_column;
    data::Pollutant poll = column_pollutant(ds, column);
    std::size_t pos = 0;
    for (std::size_t t = 0; t < ds.targets.size(); ++t)
        if (ds.targets[t].column == column) pos = t;

    auto idx = stride_indices(ds, cfg.eval_stride ? cfg.eval_stride : ds.horizon);
    csv::Table dump;
    dump.header = {"timestamp", "y_true", "mu", "sigma", "lower", "upper", "p_hat", "confidence"};
    std::vector<double> y_avail, yhat_avail, labels_avail;
    std::size_t total = 0;
    for (std::size_t b : idx) {
        const auto& sample = ds.samples[b];
        for (std::size_t k = 0; k < ds.horizon; ++k) {
            long long when = sample.anchor + static_cast<long long>(k) * data::kHour;
            double truth = sample.targets[pos * ds.horizon + k];
            auto fc = baselines::persistence_forecast(frame, column, when);
            std::vector<std::string> row(8);
            row[0] = data::format_timestamp(when);
            row[1] = cell(truth);
            ++total;
            if (fc.has_value()) {
                row[2] = cell(*fc);
                y_avail.push_back(truth);
                yhat_avail.push_back(*fc);
                labels_avail.push_back(static_cast<double>(sample.labels[pos * ds.horizon + k]));
            }
            dump.rows.push_back(std::move(row));
        }
    }
    csv::write_file(cfg.output_dir + "/predictions_" + column + ".csv", dump);

    metrics::MetricReport report;
    report.station = column;
    report.pollutant = data::pollutant_name(poll);
    report.method = cfg.method;
    report.count = y_avail.size();
    for (double o : labels_avail)
        if (o > 0.5) ++report.exceedances;
    if (!y_avail.empty()) report.rmse = metrics::rmse(y_avail, yhat_avail);
    metrics::save_reports({report}, cfg.output_dir + "/report.json", cfg.output_dir + "/report.csv");
    log << "persistence: " << y_avail.size() << "/" << total << " steps scored, rmse="
        << (report.rmse ? csv::format_double(*report.rmse) : "n/a") << "\n";
}

void evaluate_quantile(const ExperimentConfig& cfg, const data::DatasetBundle& bundle,
                       const uq::Checkpoint& ckpt, std::ostream& log) {
    auto handle = uq::restore_members(ckpt);
    const auto& net = *handle.members[0];
    const auto& ds = bundle.test;
    auto idx = stride_indices(ds, cfg.eval_stride ? cfg.eval_stride : ds.horizon);
    if (idx.empty()) throw DataError("evaluate: test split has no windows");

    ad::NoGradGuard guard;
    ad::Tensor x = net.make_input(ds, idx);
    RngStream rng(cfg.seed, 0);
    auto out = net.forward(x, rng, false);
    baselines::QuantileForecast fc{out.lower.values(), out.upper.values()};
    net.destandardize(fc.lower, nullptr, idx.size());
    net.destandardize(fc.upper, nullptr, idx.size());
    baselines::repair_crossing(fc);

    std::vector<double> y = net.make_targets_raw(ds, idx);
    auto [cov, width] = baselines::quantile_interval_eval(fc, y);
    double pb = baselines::pinball_loss(y, fc.lower, cfg.train.quantile_low) +
                baselines::pinball_loss(y, fc.upper, cfg.train.quantile_high);

    const std::string& column = net.topo.target_columns[0];
    csv::Table dump;
    dump.header = {"timestamp", "y_true", "mu", "sigma", "lower", "upper", "p_hat", "confidence"};
    std::size_t K = ds.horizon;
    for (std::size_t b = 0; b < idx.size(); ++b) {
        long long anchor = ds.samples[idx[b]].anchor;
        for (std::size_t k = 0; k < K; ++k) {
            std::size_t e = b * K + k;
            std::vector<std::string> row(8);
            row[0] = data::format_timestamp(anchor + static_cast<long long>(k) * data::kHour);
            row[1] = cell(y[e]);
            row[4] = cell(fc.lower[e]);
            row[5] = cell(fc.upper[e]);
            dump.rows.push_back(std::move(row));
        }
    }
    csv::write_file(cfg.output_dir + "/predictions_" + column + ".csv", dump);

    metrics::MetricReport report;
    report.station = column;
    report.pollutant = data::pollutant_name(column_pollutant(ds, column));
    report.method = cfg.method;
    report.count = y.size();
    report.picp = cov;
    report.mpiw = width;
    metrics::save_reports({report}, cfg.output_dir + "/report.json", cfg.output_dir + "/report.csv");
    log << "quantile: picp=" << cov << " mpiw=" << width << " pinball=" << pb << "\n";
}

std::vector<uq::SamplePrediction> predict_for_method(const ExperimentConfig& cfg,
                                                     const uq::Checkpoint& ckpt,
                                                     const model::Forecaster& net,
                                                     const data::WindowedDataset& ds,
                                                     const std::vector<std::size_t>& idx) {
    if (cfg.method == "swag") {
        if (!ckpt.swag.has_value()) throw DataError("checkpoint carries no collected weight moments");
        return uq::swag_sample_predict(ckpt.topology, *ckpt.swag, ds, idx, cfg.mc_samples, cfg.seed,
                                       cfg.threads);
    }
    if (cfg.method == "ensemble") {
        auto handle = uq::restore_members(ckpt);
        return uq::ensemble_predict(handle, ds, idx, cfg.threads);
    }
    return uq::mc_sample_predict(net, ds, idx, cfg.mc_samples, cfg.seed,
                                 method_is_stochastic(cfg.method), cfg.threads);
}

}  // namespace

// ---------------------------------------------------------------------------
// prepare
// ---------------------------------------------------------------------------

void cmd_prepare(const ExperimentConfig& cfg, std::ostream& log) {
    data::TimeSeriesFrame frame;
    data::SchemaDescriptor schema;
    KvConfig meta;
    if (cfg.data_csv.empty()) {
        frame = data::synthesize(cfg.synth, &meta);
        schema = data::synth_schema(cfg.synth);
        meta.set("source", "synthetic");
    } else {
        csv::Table table = csv::read_file(cfg.data_csv);
        schema = schema_from_header(table.header);
        frame = data::load_csv(cfg.data_csv, schema);
        meta.set("source", cfg.data_csv);
    }

    std::size_t rows = frame.num_rows();
    if (rows < cfg.history + cfg.horizon)
        throw DataError("frame too short: " + std::to_string(rows) + " hours");

    long long train_end;
    data::TimeRange train_range{}, test_range{};
    if (!cfg.train_end.empty() || !cfg.test_begin.empty()) {
        if (cfg.train_begin.empty() || cfg.train_end.empty() || cfg.test_begin.empty() ||
            cfg.test_end.empty())
            throw ConfigError("explicit splits need all of train_begin/train_end/test_begin/test_end");
        train_range = {data::parse_timestamp(cfg.train_begin), data::parse_timestamp(cfg.train_end)};
        test_range = {data::parse_timestamp(cfg.test_begin), data::parse_timestamp(cfg.test_end)};
        train_end = train_range.end;
    } else {
        std::size_t anchors = rows - cfg.history - cfg.horizon + 1;
        auto cut = static_cast<std::size_t>(
            std::floor(static_cast<double>(anchors) * (1.0 - cfg.test_fraction)));
        cut = std::min(std::max<std::size_t>(cut, 1), anchors - 1);
        train_end = frame.timestamps[cfg.history + cut];
        train_range = {frame.timestamps.front(), train_end};
        test_range = {train_end, frame.timestamps.back() + data::kHour};
    }

    data::ImputationPolicy policy;
    policy.train_end_exclusive = train_end;
    data::WindowedDataset all = data::build_windows(frame, schema, cfg.history, cfg.horizon, policy);

    data::DatasetBundle bundle;
    std::vector<std::string> warnings;
    data::split_by_date(all, train_range, test_range, bundle.train, bundle.test, &warnings);
    for (const auto& w : warnings) log << "warning: " << w << "\n";

    meta.set("train_end", data::format_timestamp(train_end));
    bundle.meta = meta;

    fs::create_directories(cfg.dataset_dir);
    data::save_bundle(bundle, cfg.dataset_dir);
    data::save_frame_csv(frame_path(cfg), frame);

    log << "prepared " << all.samples.size() << " windows: train " << bundle.train.samples.size()
        << ", test " << bundle.test.samples.size() << "\n";
    for (std::size_t t = 0; t < all.targets.size(); ++t) {
        double rate = 0.0;
        std::size_t n = 0;
        for (const auto& s : bundle.train.samples)
            for (std::size_t k = 0; k < all.horizon; ++k) {
                rate += s.labels[t * all.horizon + k];
                ++n;
            }
        log << "  " << all.targets[t].column << ": exceedance rate "
            << (n ? rate / static_cast<double>(n) : 0.0) << "\n";
    }
}

// ---------------------------------------------------------------------------
// train
// ---------------------------------------------------------------------------

void cmd_train(const ExperimentConfig& cfg, std::ostream& log) {
    data::DatasetBundle bundle = data::load_bundle(cfg.dataset_dir);
    if (bundle.train.samples.empty()) throw DataError("train: training split has no windows");
    auto targets = choose_targets(cfg, bundle.train);
    fs::create_directories(cfg.output_dir);

    uq::Checkpoint ckpt;
    ckpt.method = cfg.method;
    ckpt.seed = cfg.seed;

    if (cfg.method == "persistence") {
        ckpt.source_column = targets[0];
        uq::save_checkpoint(ckpt, checkpoint_path(cfg));
        log << "persistence baseline registered for " << targets[0] << "\n";
        return;
    }

    model::Topology topo = build_topology(cfg, bundle.train, targets);
    ckpt.topology = topo;

    if (cfg.method == "ensemble") {
        std::size_t n = cfg.ensemble_size;
        ckpt.member_params.resize(n);
        ckpt.member_seeds.resize(n);
        std::vector<train::TrainResult> results(n);
        parallel_for(n, cfg.threads, [&](std::size_t i) {
            std::uint64_t member_seed = cfg.seed + i;
            auto net = model::build_forecaster(topo, member_seed);
            auto tcfg = build_train_config(cfg, member_seed);
            results[i] = tcfg.adversarial ? train::free_adversarial_train(*net, bundle.train, tcfg)
                                          : train::train(*net, bundle.train, tcfg);
            ckpt.member_params[i] = model::flat_params(*net);
            ckpt.member_seeds[i] = member_seed;
        });
        for (std::size_t i = 0; i < n; ++i)
            train::save_curve_csv(results[i].curve,
                                  cfg.output_dir + "/curve_member" + std::to_string(i) + ".csv");
        train::save_curve_csv(results[0].curve, cfg.output_dir + "/curve.csv");
        uq::save_checkpoint(ckpt, checkpoint_path(cfg));
        if (!results[0].curve.empty())
            log << "ensemble of " << n << " trained, member-0 final data loss "
                << results[0].curve.back().data_loss << "\n";
        return;
    }

    auto net = model::build_forecaster(topo, cfg.seed);
    auto tcfg = build_train_config(cfg, cfg.seed);
    train::TrainResult result = tcfg.adversarial
                                    ? train::free_adversarial_train(*net, bundle.train, tcfg)
                                    : train::train(*net, bundle.train, tcfg);
    ckpt.member_params = {model::flat_params(*net)};
    ckpt.member_seeds = {cfg.seed};
    if (result.swag.has_value()) ckpt.swag = result.swag;
    train::save_curve_csv(result.curve, cfg.output_dir + "/curve.csv");
    uq::save_checkpoint(ckpt, checkpoint_path(cfg));
    if (!result.curve.empty()) {
        const auto& last = result.curve.back();
        log << cfg.method << " trained for " << result.curve.size() << " epochs, final data loss "
            << last.data_loss;
        if (tcfg.variational) log << ", kl term " << last.kl_loss;
        log << "\n";
    }
}

// ---------------------------------------------------------------------------
// evaluate
// ---------------------------------------------------------------------------

void cmd_evaluate(const ExperimentConfig& cfg, std::ostream& log) {
    data::DatasetBundle bundle = data::load_bundle(cfg.dataset_dir);
    uq::Checkpoint ckpt = uq::load_checkpoint(checkpoint_path(cfg));
    if (ckpt.method != cfg.method)
        throw ConfigError("checkpoint was trained with method '" + ckpt.method +
                          "' but the config says '" + cfg.method + "'");
    fs::create_directories(cfg.output_dir);

    if (cfg.method == "persistence") {
        evaluate_persistence(cfg, bundle, ckpt, log);
        return;
    }
    if (cfg.method == "quantile") {
        evaluate_quantile(cfg, bundle, ckpt, log);
        return;
    }

    const auto& ds = bundle.test;
    auto idx = stride_indices(ds, cfg.eval_stride ? cfg.eval_stride : ds.horizon);
    if (idx.empty()) throw DataError("evaluate: test split has no windows");

    auto handle = uq::restore_members(ckpt);
    const auto& net = *handle.members[0];
    auto samples = predict_for_method(cfg, ckpt, net, ds, idx);
    auto series = aggregate_predictions(net, ds, idx, samples, cfg.interval_level);

    std::vector<metrics::MetricReport> reports;
    for (const auto& s : series) {
        write_prediction_dump(s, cfg.output_dir + "/predictions_" + s.column + ".csv");
        write_analysis(cfg, s, log);
        reports.push_back(series_report(s, cfg.method));
    }
    metrics::save_reports(reports, cfg.output_dir + "/report.json", cfg.output_dir + "/report.csv");

    log << "evaluated " << idx.size() << " test windows with " << samples.size() << " samples\n";
    for (const auto& r : reports) {
        log << "  " << r.station;
        if (r.rmse) log << " rmse=" << *r.rmse;
        if (r.picp) log << " picp=" << *r.picp;
        if (r.nll) log << " nll=" << *r.nll;
        if (r.f1) log << " f1=" << *r.f1;
        log << "\n";
    }
}

// ---------------------------------------------------------------------------
// forecast
// ---------------------------------------------------------------------------

void cmd_forecast(const ExperimentConfig& cfg, const std::string& anchor_spec, std::ostream& log) {
    data::DatasetBundle bundle = data::load_bundle(cfg.dataset_dir);
    uq::Checkpoint ckpt = uq::load_checkpoint(checkpoint_path(cfg));
    if (ckpt.method != cfg.method)
        throw ConfigError("checkpoint was trained with method '" + ckpt.method +
                          "' but the config says '" + cfg.method + "'");
    fs::create_directories(cfg.output_dir);

    data::TimeSeriesFrame frame;
    {
        csv::Table table = csv::read_file(frame_path(cfg));
        frame = data::load_csv(frame_path(cfg), schema_from_header(table.header));
    }
    long long anchor = anchor_spec.empty() || anchor_spec == "latest"
                           ? frame.timestamps.back() + data::kHour
                           : data::parse_timestamp(anchor_spec);

    std::size_t K = bundle.train.horizon;
    csv::Table out;
    out.header = {"timestamp", "target", "mu", "sigma", "lower", "upper", "p_hat", "confidence"};

    if (cfg.method == "persistence") {
        const std::string& column = ckpt.source_column;
        for (std::size_t k = 0; k < K; ++k) {
            long long when = anchor + static_cast<long long>(k) * data::kHour;
            auto fc = baselines::persistence_forecast(frame, column, when);
            std::vector<std::string> row(8);
            row[0] = data::format_timestamp(when);
            row[1] = column;
            if (fc.has_value()) row[2] = cell(*fc);
            out.rows.push_back(std::move(row));
        }
        csv::write_file(cfg.output_dir + "/forecast.csv", out);
        log << "persistence forecast from " << data::format_timestamp(anchor) << "\n";
        return;
    }

    // single-window dataset reusing the trained layout and stats
    data::WindowedDataset one;
    one.history = bundle.train.history;
    one.horizon = bundle.train.horizon;
    one.feature_names = bundle.train.feature_names;
    one.targets = bundle.train.targets;
    one.stats = bundle.train.stats;
    one.samples.push_back(data::forecast_window(frame, bundle.train, anchor));
    std::vector<std::size_t> idx{0};

    auto handle = uq::restore_members(ckpt);
    const auto& net = *handle.members[0];

    if (cfg.method == "quantile") {
        ad::NoGradGuard guard;
        ad::Tensor x = net.make_input(one, idx);
        RngStream rng(cfg.seed, 0);
        auto fwd = net.forward(x, rng, false);
        baselines::QuantileForecast fc{fwd.lower.values(), fwd.upper.values()};
        net.destandardize(fc.lower, nullptr, 1);
        net.destandardize(fc.upper, nullptr, 1);
        baselines::repair_crossing(fc);
        const std::string& column = net.topo.target_columns[0];
        for (std::size_t k = 0; k < K; ++k) {
            std::vector<std::string> row(8);
            row[0] = data::format_timestamp(anchor + static_cast<long long>(k) * data::kHour);
            row[1] = column;
            row[4] = cell(fc.lower[k]);
            row[5] = cell(fc.upper[k]);
            out.rows.push_back(std::move(row));
        }
        csv::write_file(cfg.output_dir + "/forecast.csv", out);
        log << "quantile forecast from " << data::format_timestamp(anchor) << "\n";
        return;
    }

    auto samples = predict_for_method(cfg, ckpt, net, one, idx);
    const auto& topo = net.topo;
    bool regression = topo.task == model::Task::Regression;
    std::size_t M = samples.size();
    std::vector<double> means_m(M), vars_m(M), probs_m(M);
    for (std::size_t t = 0; t < topo.target_columns.size(); ++t) {
        data::Pollutant poll = column_pollutant(one, topo.target_columns[t]);
        double threshold = data::very_low_upper_bound(poll);
        for (std::size_t k = 0; k < K; ++k) {
            std::size_t e = t * K + k;
            std::vector<std::string> row(8);
            row[0] = data::format_timestamp(anchor + static_cast<long long>(k) * data::kHour);
            row[1] = topo.target_columns[t];
            if (regression) {
                for (std::size_t m = 0; m < M; ++m) {
                    means_m[m] = samples[m].mean[e];
                    vars_m[m] = samples[m].variance[e];
                    probs_m[m] = 1.0 - norm_cdf((threshold - means_m[m]) / std::sqrt(vars_m[m]));
                }
                agg::PredictiveMixture mix = agg::mix_moments(means_m, vars_m);
                agg::prediction_interval(mix, cfg.interval_level);
                row[2] = cell(mix.mean);
                row[3] = cell(std::sqrt(mix.variance));
                row[4] = cell(mix.lower);
                row[5] = cell(mix.upper);
                agg::ExceedanceForecast fc = agg::average_probabilities(probs_m);
                row[6] = cell(fc.probability);
                row[7] = cell(fc.confidence);
            } else {
                for (std::size_t m = 0; m < M; ++m) probs_m[m] = samples[m].prob[e];
                agg::ExceedanceForecast fc = agg::average_probabilities(probs_m);
                row[6] = cell(fc.probability);
                row[7] = cell(fc.confidence);
            }
            out.rows.push_back(std::move(row));
        }
    }
    csv::write_file(cfg.output_dir + "/forecast.csv", out);
    log << "forecast from " << data::format_timestamp(anchor) << ": " << out.rows.size()
        << " rows\n";
}

}  // namespace probcast::cmd
