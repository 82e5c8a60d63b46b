#include <cstdlib>
#include <iostream>
#include <string>

#include "CLI11.hpp"
#include "probcast/commands.hpp"
#include "probcast/errors.hpp"
#include "probcast/experiment.hpp"
#include "probcast/kvconfig.hpp"

namespace {

struct Options {
    std::string config_path;
    std::string dataset_dir;
    std::string output_dir;
    std::string method;
    std::string target;
    std::string anchor;
    long long seed = -1;
    long long threads = -1;
};

probcast::ExperimentConfig resolve_config(const Options& opt) {
    probcast::KvConfig kv;
    if (!opt.config_path.empty()) kv = probcast::KvConfig::load(opt.config_path);
    if (const char* env = std::getenv("PROBCAST_OUTPUT_DIR")) kv.set("output_dir", env);
    if (!opt.dataset_dir.empty()) kv.set("dataset_dir", opt.dataset_dir);
    if (!opt.output_dir.empty()) kv.set("output_dir", opt.output_dir);
    if (!opt.method.empty()) kv.set("method", opt.method);
    if (!opt.target.empty()) kv.set("target", opt.target);
    if (!opt.anchor.empty()) kv.set("anchor", opt.anchor);
    if (opt.seed >= 0) kv.set_int("seed", opt.seed);
    if (opt.threads >= 0) kv.set_int("threads", opt.threads);
    return probcast::config_from_kv(kv);
}

void add_common(CLI::App* sub, Options& opt) {
    sub->add_option("-c,--config", opt.config_path, "experiment config file (key = value lines)");
    sub->add_option("--dataset-dir", opt.dataset_dir, "prepared dataset directory");
    sub->add_option("--output-dir", opt.output_dir, "artifact output directory");
    sub->add_option("--method", opt.method, "uncertainty method");
    sub->add_option("--target", opt.target, "target column");
    sub->add_option("--seed", opt.seed, "experiment seed");
    sub->add_option("--threads", opt.threads, "worker threads (0 = automatic)");
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"probabilistic air-pollutant forecasting with uncertainty"};
    app.require_subcommand(1);

    Options opt;
    CLI::App* prepare = app.add_subcommand("prepare", "build the windowed dataset");
    CLI::App* train = app.add_subcommand("train", "train the configured method");
    CLI::App* evaluate = app.add_subcommand("evaluate", "score a checkpoint on the test split");
    CLI::App* forecast = app.add_subcommand("forecast", "emit one multi-step forecast");
    for (CLI::App* sub : {prepare, train, evaluate, forecast}) add_common(sub, opt);
    forecast->add_option("--anchor", opt.anchor, "first forecast hour (ISO timestamp or 'latest')");

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        int code = app.exit(e);
        return code == 0 ? 0 : 2;
    }

    try {
        probcast::ExperimentConfig cfg = resolve_config(opt);
        if (prepare->parsed()) {
            probcast::cmd::cmd_prepare(cfg, std::cout);
        } else if (train->parsed()) {
            probcast::cmd::cmd_train(cfg, std::cout);
        } else if (evaluate->parsed()) {
            probcast::cmd::cmd_evaluate(cfg, std::cout);
        } else if (forecast->parsed()) {
            probcast::cmd::cmd_forecast(cfg, cfg.anchor, std::cout);
        }
        return 0;
    } catch (const probcast::ConfigError& e) {
        std::cerr << "config error: " << e.what() << "\n";
        return 2;
    } catch (const probcast::DataError& e) {
        std::cerr << "data error: " << e.what() << "\n";
        return 3;
    } catch (const probcast::NumericError& e) {
        std::cerr << "numeric error: " << e.what() << "\n";
        return 4;
    } catch (const probcast::DomainError& e) {
        std::cerr << "numeric error: " << e.what() << "\n";
        return 4;
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 1;
    }
}
