#include "probcast/experiment.hpp"

#include <algorithm>
#include <set>

#include "probcast/errors.hpp"

namespace probcast {

namespace {

const std::set<std::string> kMethods = {"bnn",     "mc-dropout", "ensemble",    "swag",
                                        "lstm-mc", "gnn-mc",     "persistence", "quantile"};

const std::set<std::string> kKnownKeys = {
    "data_csv",      "dataset_dir",     "output_dir",      "checkpoint",
    "target",        "pollutant",       "method",          "task",
    "history",       "horizon",         "hidden",          "dropout",
    "prior_scale",   "mc_samples",      "ensemble_size",   "interval_level",
    "epochs",        "batch_size",      "learning_rate",   "decay",
    "clip_norm",     "adversarial",     "epsilon",         "replay",
    "swag_rank",     "swag_start",      "swag_cadence",
    "eval_stride",   "grid_points",     "seed",            "threads",
    "train_begin",   "train_end",       "test_begin",      "test_end",
    "test_fraction", "anchor",
    "synth_seed",    "synth_stations",  "synth_hours",     "synth_start",
    "synth_amplitude", "synth_noise",   "synth_sigma",     "synth_rate",
    "synth_exogenous", "synth_missing_feature_rate",       "synth_missing_target_rate",
};

std::vector<std::size_t> parse_hidden(const KvConfig& kv) {
    std::vector<std::size_t> hidden;
    for (double v : kv.get_double_list("hidden")) {
        if (v < 1.0) throw ConfigError("hidden layer width must be at least 1");
        hidden.push_back(static_cast<std::size_t>(v));
    }
    if (hidden.empty()) throw ConfigError("hidden layer list is empty");
    return hidden;
}

}  // namespace

ExperimentConfig config_from_kv(const KvConfig& kv) {
    for (const auto& key : kv.keys())
        if (!kKnownKeys.count(key)) throw ConfigError("unknown config key: " + key);

    ExperimentConfig cfg;
    cfg.data_csv = kv.get_string("data_csv", cfg.data_csv);
    cfg.dataset_dir = kv.get_string("dataset_dir", cfg.dataset_dir);
    cfg.output_dir = kv.get_string("output_dir", cfg.output_dir);
    cfg.checkpoint = kv.get_string("checkpoint", cfg.checkpoint);
    cfg.target = kv.get_string("target", cfg.target);
    cfg.pollutant = kv.get_string("pollutant", cfg.pollutant);
    cfg.method = kv.get_string("method", cfg.method);
    cfg.task = kv.get_string("task", cfg.task);

    cfg.history = static_cast<std::size_t>(kv.get_int("history", static_cast<long long>(cfg.history)));
    cfg.horizon = static_cast<std::size_t>(kv.get_int("horizon", static_cast<long long>(cfg.horizon)));
    if (kv.has("hidden")) cfg.hidden = parse_hidden(kv);
    cfg.dropout = kv.get_double("dropout", cfg.dropout);
    cfg.prior_scale = kv.get_double("prior_scale", cfg.prior_scale);
    cfg.mc_samples = static_cast<std::size_t>(kv.get_int("mc_samples", static_cast<long long>(cfg.mc_samples)));
    cfg.ensemble_size = static_cast<std::size_t>(kv.get_int("ensemble_size", static_cast<long long>(cfg.ensemble_size)));
    cfg.interval_level = kv.get_double("interval_level", cfg.interval_level);

    cfg.train.epochs = static_cast<std::size_t>(kv.get_int("epochs", static_cast<long long>(cfg.train.epochs)));
    cfg.train.batch_size = static_cast<std::size_t>(kv.get_int("batch_size", static_cast<long long>(cfg.train.batch_size)));
    cfg.train.learning_rate = kv.get_double("learning_rate", cfg.train.learning_rate);
    cfg.train.decay = kv.get_double("decay", cfg.train.decay);
    cfg.train.clip_norm = kv.get_double("clip_norm", cfg.train.clip_norm);
    cfg.train.adversarial = kv.get_bool("adversarial", cfg.train.adversarial);
    cfg.train.epsilon = kv.get_double("epsilon", cfg.train.epsilon);
    cfg.train.replay = static_cast<std::size_t>(kv.get_int("replay", static_cast<long long>(cfg.train.replay)));
    cfg.train.swag_rank = static_cast<std::size_t>(kv.get_int("swag_rank", static_cast<long long>(cfg.train.swag_rank)));
    cfg.train.swag_start_fraction = kv.get_double("swag_start", cfg.train.swag_start_fraction);
    cfg.train.swag_cadence = static_cast<std::size_t>(kv.get_int("swag_cadence", static_cast<long long>(cfg.train.swag_cadence)));

    cfg.anchor = kv.get_string("anchor", cfg.anchor);
    cfg.eval_stride = static_cast<std::size_t>(kv.get_int("eval_stride", static_cast<long long>(cfg.eval_stride)));
    cfg.grid_points = static_cast<std::size_t>(kv.get_int("grid_points", static_cast<long long>(cfg.grid_points)));
    cfg.seed = static_cast<std::uint64_t>(kv.get_int("seed", static_cast<long long>(cfg.seed)));
    cfg.threads = static_cast<std::size_t>(kv.get_int("threads", static_cast<long long>(cfg.threads)));

    cfg.train_begin = kv.get_string("train_begin", "");
    cfg.train_end = kv.get_string("train_end", "");
    cfg.test_begin = kv.get_string("test_begin", "");
    cfg.test_end = kv.get_string("test_end", "");
    cfg.test_fraction = kv.get_double("test_fraction", cfg.test_fraction);

    cfg.synth.seed = static_cast<unsigned long long>(kv.get_int("synth_seed", static_cast<long long>(cfg.synth.seed)));
    cfg.synth.stations = static_cast<std::size_t>(kv.get_int("synth_stations", static_cast<long long>(cfg.synth.stations)));
    cfg.synth.hours = static_cast<std::size_t>(kv.get_int("synth_hours", static_cast<long long>(cfg.synth.hours)));
    cfg.synth.start_timestamp = kv.has("synth_start")
                                    ? data::parse_timestamp(kv.get_string("synth_start"))
                                    : cfg.synth.start_timestamp;
    cfg.synth.seasonal_amplitude = kv.get_double("synth_amplitude", cfg.synth.seasonal_amplitude);
    cfg.synth.noise_law = kv.get_string("synth_noise", cfg.synth.noise_law);
    cfg.synth.noise_sigma = kv.get_double("synth_sigma", cfg.synth.noise_sigma);
    cfg.synth.exceedance_rate = kv.get_double("synth_rate", cfg.synth.exceedance_rate);
    cfg.synth.exogenous = kv.get_bool("synth_exogenous", cfg.synth.exogenous);
    cfg.synth.missing_feature_rate = kv.get_double("synth_missing_feature_rate", cfg.synth.missing_feature_rate);
    cfg.synth.missing_target_rate = kv.get_double("synth_missing_target_rate", cfg.synth.missing_target_rate);

    cfg.train.seed = cfg.seed;
    validate_config(cfg);
    return cfg;
}

ExperimentConfig load_experiment_config(const std::string& path) {
    return config_from_kv(KvConfig::load(path));
}

void validate_config(const ExperimentConfig& cfg) {
    if (!kMethods.count(cfg.method)) throw ConfigError("unknown method: " + cfg.method);
    if (cfg.task != "regression" && cfg.task != "exceedance")
        throw ConfigError("unknown task: " + cfg.task + " (expected regression or exceedance)");
    if ((cfg.method == "persistence" || cfg.method == "quantile") && cfg.task != "regression")
        throw ConfigError(cfg.method + " supports the regression task only");
    if (cfg.pollutant != "pm25" && cfg.pollutant != "pm10")
        throw ConfigError("unknown pollutant: " + cfg.pollutant);
    if (cfg.mc_samples == 0) throw ConfigError("mc_samples must be at least 1");
    if (cfg.ensemble_size < 2 && cfg.method == "ensemble")
        throw ConfigError("ensemble_size must be at least 2");
    if (!(cfg.dropout >= 0.0 && cfg.dropout < 1.0))
        throw ConfigError("dropout must lie in [0, 1)");
    if (!(cfg.interval_level > 0.0 && cfg.interval_level < 1.0))
        throw ConfigError("interval_level must lie in (0, 1)");
    if (!(cfg.test_fraction > 0.0 && cfg.test_fraction < 1.0))
        throw ConfigError("test_fraction must lie in (0, 1)");
    if (cfg.grid_points < 2) throw ConfigError("grid_points must be at least 2");
    if (cfg.history == 0 || cfg.horizon == 0)
        throw ConfigError("history and horizon must be at least 1 hour");
    if (!(cfg.prior_scale > 0.0)) throw ConfigError("prior_scale must be positive");
    if (cfg.synth.noise_law != "gaussian" && cfg.synth.noise_law != "laplace")
        throw ConfigError("unknown synth_noise law: " + cfg.synth.noise_law);
}

std::string method_model_kind(const std::string& method) {
    if (method == "bnn") return "bnn";
    if (method == "mc-dropout" || method == "swag" || method == "ensemble") return "mlp";
    if (method == "lstm-mc") return "lstm";
    if (method == "gnn-mc") return "gnn";
    if (method == "quantile") return "quantile";
    if (method == "persistence") return "";
    throw ConfigError("unknown method: " + method);
}

bool method_is_stochastic(const std::string& method) {
    return method == "bnn" || method == "mc-dropout" || method == "lstm-mc" ||
           method == "gnn-mc";
}

bool method_needs_training(const std::string& method) {
    return method != "persistence";
}

}  // namespace probcast
