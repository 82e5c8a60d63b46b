#include <filesystem>
#include <fstream>
#include <sstream>
#include <string>
#include <vector>

#include "doctest.h"
#include "probcast/commands.hpp"
#include "probcast/csv.hpp"
#include "probcast/errors.hpp"
#include "probcast/experiment.hpp"
#include "probcast/metrics.hpp"
#include "probcast/uncertainty.hpp"

using namespace probcast;
namespace fs = std::filesystem;

namespace {

// tiny synthetic experiment, sized to finish in well under a second per stage
KvConfig tiny_kv(const std::string& root, const std::string& method) {
    KvConfig kv;
    kv.set("method", method);
    kv.set("dataset_dir", root + "/dataset");
    kv.set("output_dir", root + "/run");
    kv.set_int("history", 8);
    kv.set_int("horizon", 4);
    kv.set("hidden", "8");
    kv.set_int("epochs", 2);
    kv.set_int("batch_size", 32);
    kv.set_int("mc_samples", 4);
    kv.set_int("ensemble_size", 2);
    kv.set_int("grid_points", 5);
    kv.set_int("seed", 5);
    kv.set_int("synth_hours", 480);
    kv.set_int("synth_stations", 1);
    kv.set_bool("synth_exogenous", false);
    kv.set_int("threads", 1);
    return kv;
}

std::string fresh_dir(const std::string& name) {
    auto dir = (fs::temp_directory_path() / name).string();
    fs::remove_all(dir);
    fs::create_directories(dir);
    return dir;
}

void run_all(const ExperimentConfig& cfg) {
    std::ostringstream log;
    cmd::cmd_prepare(cfg, log);
    cmd::cmd_train(cfg, log);
    cmd::cmd_evaluate(cfg, log);
    cmd::cmd_forecast(cfg, "latest", log);
}

}  // namespace

TEST_CASE("experiment configs parse with defaults and overrides") {
    KvConfig kv;
    kv.set("method", "ensemble");
    kv.set("task", "exceedance");
    kv.set_int("epochs", 7);
    kv.set("hidden", "32;16");
    auto cfg = config_from_kv(kv);
    CHECK(cfg.method == "ensemble");
    CHECK(cfg.task == "exceedance");
    CHECK(cfg.train.epochs == 7);
    CHECK(cfg.hidden == std::vector<std::size_t>{32, 16});
    CHECK(cfg.history == 24);
    CHECK(cfg.eval_stride == 0);
    CHECK(cfg.train.seed == cfg.seed);
}

TEST_CASE("unknown configuration keys are rejected by name") {
    KvConfig kv;
    kv.set("method", "bnn");
    kv.set("leraning_rate", "0.01");
    try {
        config_from_kv(kv);
        FAIL("expected ConfigError");
    } catch (const ConfigError& e) {
        CHECK(std::string(e.what()).find("leraning_rate") != std::string::npos);
    }
}

TEST_CASE("config validation guards the obvious mistakes") {
    KvConfig kv;
    kv.set("method", "hyperloop");
    CHECK_THROWS_AS(config_from_kv(kv), ConfigError);

    KvConfig kv2;
    kv2.set("method", "bnn");
    kv2.set("task", "clustering");
    CHECK_THROWS_AS(config_from_kv(kv2), ConfigError);

    KvConfig kv3;
    kv3.set("method", "quantile");
    kv3.set("task", "exceedance");
    CHECK_THROWS_AS(config_from_kv(kv3), ConfigError);

    KvConfig kv4;
    kv4.set("method", "bnn");
    kv4.set_double("test_fraction", 1.5);
    CHECK_THROWS_AS(config_from_kv(kv4), ConfigError);

    KvConfig kv5;
    kv5.set("method", "bnn");
    kv5.set_int("horizon", 0);
    CHECK_THROWS_AS(config_from_kv(kv5), ConfigError);
}

TEST_CASE("methods map onto network kinds and stochasticity") {
    CHECK(method_model_kind("bnn") == "bnn");
    CHECK(method_model_kind("mc-dropout") == "mlp");
    CHECK(method_model_kind("ensemble") == "mlp");
    CHECK(method_model_kind("swag") == "mlp");
    CHECK(method_model_kind("lstm-mc") == "lstm");
    CHECK(method_model_kind("gnn-mc") == "gnn");
    CHECK(method_model_kind("quantile") == "quantile");
    CHECK(method_model_kind("persistence").empty());

    CHECK(method_is_stochastic("bnn"));
    CHECK(method_is_stochastic("mc-dropout"));
    CHECK_FALSE(method_is_stochastic("ensemble"));
    CHECK_FALSE(method_is_stochastic("persistence"));

    CHECK(method_needs_training("swag"));
    CHECK_FALSE(method_needs_training("persistence"));
}

TEST_CASE("prepare writes a reloadable bundle and raw frame") {
    auto root = fresh_dir("probcast_cli_prepare");
    auto cfg = config_from_kv(tiny_kv(root, "mc-dropout"));
    std::ostringstream log;
    cmd::cmd_prepare(cfg, log);

    CHECK(fs::exists(cfg.dataset_dir + "/frame.csv"));
    auto bundle = data::load_bundle(cfg.dataset_dir);
    CHECK(!bundle.train.samples.empty());
    CHECK(!bundle.test.samples.empty());
    CHECK(bundle.train.history == 8);
    CHECK(bundle.train.horizon == 4);
    // no anchor leakage across the split boundary
    long long max_train = 0;
    for (const auto& s : bundle.train.samples) max_train = std::max(max_train, s.anchor);
    for (const auto& s : bundle.test.samples) CHECK(s.anchor > max_train);
    CHECK(log.str().find("train") != std::string::npos);

    // idempotent: same config produces the identical bundle
    auto first = bundle.meta.to_string();
    cmd::cmd_prepare(cfg, log);
    auto again = data::load_bundle(cfg.dataset_dir);
    CHECK(again.meta.to_string() == first);
    CHECK(again.train.samples.size() == bundle.train.samples.size());
    fs::remove_all(root);
}

TEST_CASE("train emits a checkpoint with curves for each member") {
    auto root = fresh_dir("probcast_cli_train");
    auto cfg = config_from_kv(tiny_kv(root, "ensemble"));
    std::ostringstream log;
    cmd::cmd_prepare(cfg, log);
    cmd::cmd_train(cfg, log);

    auto ckpt = uq::load_checkpoint(cfg.output_dir + "/checkpoint.json");
    CHECK(ckpt.method == "ensemble");
    CHECK(ckpt.member_params.size() == 2);
    CHECK(ckpt.member_seeds == std::vector<std::uint64_t>{5, 6});
    CHECK(fs::exists(cfg.output_dir + "/curve_member0.csv"));
    CHECK(fs::exists(cfg.output_dir + "/curve_member1.csv"));
    fs::remove_all(root);
}

TEST_CASE("bnn curves carry a nonzero kl column") {
    auto root = fresh_dir("probcast_cli_bnn");
    auto cfg = config_from_kv(tiny_kv(root, "bnn"));
    std::ostringstream log;
    cmd::cmd_prepare(cfg, log);
    cmd::cmd_train(cfg, log);

    auto table = csv::read_file(cfg.output_dir + "/curve.csv");
    CHECK(table.header ==
          std::vector<std::string>{"epoch", "data_loss", "kl_loss", "learning_rate"});
    REQUIRE(table.rows.size() == 2);
    CHECK(csv::parse_double(table.rows[0][2], "kl") > 0.0);
    fs::remove_all(root);
}

TEST_CASE("evaluate refuses a checkpoint trained for another method") {
    auto root = fresh_dir("probcast_cli_mismatch");
    auto cfg = config_from_kv(tiny_kv(root, "mc-dropout"));
    std::ostringstream log;
    cmd::cmd_prepare(cfg, log);
    cmd::cmd_train(cfg, log);

    auto swapped = cfg;
    swapped.method = "swag";
    CHECK_THROWS_AS(cmd::cmd_evaluate(swapped, log), ConfigError);
    fs::remove_all(root);
}

TEST_CASE("the full pipeline round trips for a stochastic method") {
    auto root = fresh_dir("probcast_cli_roundtrip");
    auto cfg = config_from_kv(tiny_kv(root, "mc-dropout"));
    run_all(cfg);

    auto reports = metrics::load_reports(cfg.output_dir + "/report.json");
    REQUIRE(!reports.empty());
    CHECK(reports[0].method == "mc-dropout");
    CHECK(reports[0].count > 0);
    CHECK(reports[0].rmse.has_value());
    CHECK(reports[0].picp.has_value());
    CHECK(reports[0].crps.has_value());

    CHECK(fs::exists(cfg.output_dir + "/report.csv"));
    CHECK(fs::exists(cfg.output_dir + "/predictions_s1_pm25.csv"));
    CHECK(fs::exists(cfg.output_dir + "/reliability_s1_pm25.csv"));
    CHECK(fs::exists(cfg.output_dir + "/surface_s1_pm25.csv"));

    auto fc = csv::read_file(cfg.output_dir + "/forecast.csv");
    CHECK(fc.header == std::vector<std::string>{"timestamp", "target", "mu", "sigma",
                                                "lower", "upper", "p_hat", "confidence"});
    CHECK(fc.rows.size() == cfg.horizon);
    fs::remove_all(root);
}

TEST_CASE("persistence runs without training artifacts") {
    auto root = fresh_dir("probcast_cli_persistence");
    auto cfg = config_from_kv(tiny_kv(root, "persistence"));
    run_all(cfg);
    auto ckpt = uq::load_checkpoint(cfg.output_dir + "/checkpoint.json");
    CHECK(ckpt.method == "persistence");
    CHECK(ckpt.member_params.empty());
    CHECK(!ckpt.source_column.empty());
    auto reports = metrics::load_reports(cfg.output_dir + "/report.json");
    REQUIRE(!reports.empty());
    CHECK(reports[0].rmse.has_value());
    CHECK_FALSE(reports[0].crps.has_value());
    fs::remove_all(root);
}

TEST_CASE("quantile baseline reports interval quality only") {
    auto root = fresh_dir("probcast_cli_quantile");
    auto cfg = config_from_kv(tiny_kv(root, "quantile"));
    run_all(cfg);
    auto reports = metrics::load_reports(cfg.output_dir + "/report.json");
    REQUIRE(!reports.empty());
    CHECK(reports[0].picp.has_value());
    CHECK(reports[0].mpiw.has_value());
    CHECK_FALSE(reports[0].nll.has_value());
    fs::remove_all(root);
}

TEST_CASE("evaluation is deterministic for a fixed seed") {
    auto root = fresh_dir("probcast_cli_determinism");
    auto cfg = config_from_kv(tiny_kv(root, "mc-dropout"));
    std::ostringstream log;
    cmd::cmd_prepare(cfg, log);
    cmd::cmd_train(cfg, log);
    cmd::cmd_evaluate(cfg, log);
    std::ifstream in1(cfg.output_dir + "/report.json");
    std::stringstream buf1;
    buf1 << in1.rdbuf();
    cmd::cmd_evaluate(cfg, log);
    std::ifstream in2(cfg.output_dir + "/report.json");
    std::stringstream buf2;
    buf2 << in2.rdbuf();
    CHECK(buf1.str() == buf2.str());
    fs::remove_all(root);
}

TEST_CASE("an explicit forecast anchor is honored") {
    auto root = fresh_dir("probcast_cli_anchor");
    auto cfg = config_from_kv(tiny_kv(root, "mc-dropout"));
    std::ostringstream log;
    cmd::cmd_prepare(cfg, log);
    cmd::cmd_train(cfg, log);

    // anchor in the middle of the frame: first forecast row carries it
    std::string anchor = "2019-01-10T00:00:00";
    cmd::cmd_forecast(cfg, anchor, log);
    auto fc = csv::read_file(cfg.output_dir + "/forecast.csv");
    REQUIRE(!fc.rows.empty());
    CHECK(fc.rows[0][0] == anchor);

    CHECK_THROWS_AS(cmd::cmd_forecast(cfg, "2018-01-01T00:00:00", log), DataError);
    fs::remove_all(root);
}
