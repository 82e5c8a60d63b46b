#include "probcast/data.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <iostream>
#include <numbers>
#include <set>

#include "probcast/csv.hpp"
#include "probcast/errors.hpp"
#include "probcast/mathutil.hpp"
#include "probcast/rng.hpp"

namespace probcast::data {

namespace {

// days <-> civil date (Howard Hinnant's algorithms)
long long days_from_civil(int y, int m, int d) {
    y -= m <= 2;
    const long long era = (y >= 0 ? y : y - 399) / 400;
    const int yoe = static_cast<int>(y - era * 400);
    const int doy = (153 * (m + (m > 2 ? -3 : 9)) + 2) / 5 + d - 1;
    const int doe = yoe * 365 + yoe / 4 - yoe / 100 + doy;
    return era * 146097 + doe - 719468;
}

void civil_from_days(long long z, int& y, int& m, int& d) {
    z += 719468;
    const long long era = (z >= 0 ? z : z - 146096) / 146097;
    const int doe = static_cast<int>(z - era * 146097);
    const int yoe = (doe - doe / 1460 + doe / 36524 - doe / 146096) / 365;
    y = static_cast<int>(yoe + era * 400);
    const int doy = doe - (365 * yoe + yoe / 4 - yoe / 100);
    const int mp = (5 * doy + 2) / 153;
    d = doy - (153 * mp + 2) / 5 + 1;
    m = mp + (mp < 10 ? 3 : -9);
    y += m <= 2;
}

bool all_digits(const std::string& s, std::size_t b, std::size_t e) {
    for (std::size_t i = b; i < e; ++i)
        if (s[i] < '0' || s[i] > '9') return false;
    return true;
}

}  // namespace

long long parse_timestamp(const std::string& text) {
    // strict "YYYY-MM-DDTHH:MM:SS"
    if (text.size() != 19 || text[4] != '-' || text[7] != '-' || text[10] != 'T' ||
        text[13] != ':' || text[16] != ':' || !all_digits(text, 0, 4) ||
        !all_digits(text, 5, 7) || !all_digits(text, 8, 10) || !all_digits(text, 11, 13) ||
        !all_digits(text, 14, 16) || !all_digits(text, 17, 19))
        throw DataError("unparseable timestamp '" + text + "'");
    int y = std::stoi(text.substr(0, 4));
    int mo = std::stoi(text.substr(5, 2));
    int d = std::stoi(text.substr(8, 2));
    int h = std::stoi(text.substr(11, 2));
    int mi = std::stoi(text.substr(14, 2));
    int s = std::stoi(text.substr(17, 2));
    if (mo < 1 || mo > 12 || d < 1 || d > 31 || h > 23 || mi > 59 || s > 59)
        throw DataError("unparseable timestamp '" + text + "'");
    return days_from_civil(y, mo, d) * 86400LL + h * 3600LL + mi * 60LL + s;
}

std::string format_timestamp(long long t) {
    long long days = t / 86400;
    long long rem = t % 86400;
    if (rem < 0) {
        rem += 86400;
        days -= 1;
    }
    int y, mo, d;
    civil_from_days(days, y, mo, d);
    int h = static_cast<int>(rem / 3600);
    int mi = static_cast<int>((rem % 3600) / 60);
    int s = static_cast<int>(rem % 60);
    char buf[32];
    std::snprintf(buf, sizeof(buf), "%04d-%02d-%02dT%02d:%02d:%02d", y, mo, d, h, mi, s);
    return buf;
}

int hour_of_day(long long t) {
    long long rem = t % 86400;
    if (rem < 0) rem += 86400;
    return static_cast<int>(rem / 3600);
}

// ---------------------------------------------------------------------------
// CAQI

std::string pollutant_name(Pollutant p) { return p == Pollutant::Pm25 ? "pm25" : "pm10"; }

Pollutant pollutant_from_name(const std::string& name) {
    if (name == "pm25") return Pollutant::Pm25;
    if (name == "pm10") return Pollutant::Pm10;
    throw ConfigError("unknown pollutant '" + name + "'");
}

Pollutant infer_pollutant(const std::string& column_name) {
    if (column_name.find("pm25") != std::string::npos ||
        column_name.find("pm2_5") != std::string::npos)
        return Pollutant::Pm25;
    if (column_name.find("pm10") != std::string::npos) return Pollutant::Pm10;
    throw ConfigError("cannot infer pollutant from column '" + column_name + "'");
}

const CaqiTable& CaqiTable::standard() {
    static const double inf = std::numeric_limits<double>::infinity();
    static const CaqiTable table{
        {{"very_low", 0.0, 15.0},
         {"low", 15.0, 30.0},
         {"medium", 30.0, 55.0},
         {"high", 55.0, 110.0},
         {"very_high", 110.0, inf}},
        {{"very_low", 0.0, 25.0},
         {"low", 25.0, 50.0},
         {"medium", 50.0, 90.0},
         {"high", 90.0, 180.0},
         {"very_high", 180.0, inf}},
    };
    return table;
}

const std::vector<CaqiBand>& CaqiTable::bands(Pollutant p) const {
    return p == Pollutant::Pm25 ? pm25 : pm10;
}

void CaqiTable::validate() const {
    for (const auto* bands : {&pm25, &pm10}) {
        if (bands->size() != 5) throw ContractError("CAQI scale needs five bands");
        if ((*bands)[0].lower != 0.0) throw ContractError("CAQI bands must start at 0");
        for (std::size_t i = 0; i < bands->size(); ++i) {
            const auto& b = (*bands)[i];
            if (!(b.lower < b.upper)) throw ContractError("CAQI band '" + b.label + "' is empty");
            if (i + 1 < bands->size() && b.upper != (*bands)[i + 1].lower)
                throw ContractError("CAQI bands are not contiguous at '" + b.label + "'");
        }
        if (std::isfinite(bands->back().upper))
            throw ContractError("last CAQI band must be unbounded");
    }
}

int caqi_classify(double value, Pollutant p) {
    if (value < 0.0) throw DomainError("pollutant value must be non-negative");
    const auto& bands = CaqiTable::standard().bands(p);
    for (std::size_t i = 0; i < bands.size(); ++i)
        if (value <= bands[i].upper) return static_cast<int>(i);
    return static_cast<int>(bands.size() - 1);
}

double very_low_upper_bound(Pollutant p) { return CaqiTable::standard().bands(p)[0].upper; }

int exceedance_label(double value, Pollutant p) {
    if (value < 0.0) throw DomainError("pollutant value must be non-negative");
    return value > very_low_upper_bound(p) ? 1 : 0;
}

// ---------------------------------------------------------------------------
// frames

std::size_t TimeSeriesFrame::column_index(const std::string& name) const {
    for (std::size_t i = 0; i < columns.size(); ++i)
        if (columns[i] == name) return i;
    throw DataError("frame has no column '" + name + "'");
}

bool TimeSeriesFrame::has_column(const std::string& name) const {
    return std::find(columns.begin(), columns.end(), name) != columns.end();
}

std::vector<std::string> SchemaDescriptor::all_columns() const {
    std::vector<std::string> out;
    for (const auto& t : targets) out.push_back(t.column);
    for (const auto& e : exogenous) out.push_back(e);
    return out;
}

TimeSeriesFrame load_csv(const std::string& path, const SchemaDescriptor& schema) {
    csv::Table table = csv::read_file(path);
    if (table.header.empty() || table.header[0] != "timestamp")
        throw DataError("first column must be 'timestamp' in " + path);

    std::vector<std::string> expected = schema.all_columns();
    std::set<std::string> expected_set(expected.begin(), expected.end());
    std::set<std::string> present(table.header.begin() + 1, table.header.end());
    if (present != expected_set) {
        std::string msg = "column mismatch in " + path + ";";
        for (const auto& c : expected_set)
            if (!present.count(c)) msg += " missing '" + c + "'";
        for (const auto& c : present)
            if (!expected_set.count(c)) msg += " unexpected '" + c + "'";
        throw DataError(msg);
    }

    std::set<std::string> target_set;
    for (const auto& t : schema.targets) target_set.insert(t.column);

    TimeSeriesFrame frame;
    frame.columns.assign(table.header.begin() + 1, table.header.end());
    frame.values.assign(frame.columns.size(), {});
    frame.missing.assign(frame.columns.size(), {});

    std::vector<std::string> row_errors;
    for (std::size_t r = 0; r < table.rows.size(); ++r) {
        const auto& row = table.rows[r];
        std::size_t line = r + 2;  // header is line 1
        try {
            frame.timestamps.push_back(parse_timestamp(row[0]));
        } catch (const DataError& e) {
            row_errors.push_back("line " + std::to_string(line) + ": " + e.what());
            frame.timestamps.push_back(0);
        }
        for (std::size_t c = 0; c < frame.columns.size(); ++c) {
            const std::string& field = row[c + 1];
            if (field.empty()) {
                frame.values[c].push_back(0.0);
                frame.missing[c].push_back(1);
                continue;
            }
            double v;
            try {
                v = csv::parse_double(field, "line " + std::to_string(line));
            } catch (const DataError& e) {
                row_errors.push_back(std::string(e.what()));
                v = 0.0;
            }
            if (target_set.count(frame.columns[c]) && v < 0.0)
                row_errors.push_back("line " + std::to_string(line) + ": negative " +
                                     frame.columns[c] + " value " + csv::format_double(v));
            frame.values[c].push_back(v);
            frame.missing[c].push_back(0);
        }
    }
    if (!row_errors.empty()) {
        std::string msg = std::to_string(row_errors.size()) + " bad row(s) in " + path + ":";
        for (std::size_t i = 0; i < row_errors.size() && i < 8; ++i) msg += "\n  " + row_errors[i];
        if (row_errors.size() > 8) msg += "\n  ...";
        throw DataError(msg);
    }

    for (std::size_t r = 1; r < frame.timestamps.size(); ++r) {
        long long prev = frame.timestamps[r - 1], cur = frame.timestamps[r];
        if (cur == prev)
            throw DataError("duplicated timestamp " + format_timestamp(cur) + " in " + path);
        if (cur - prev != kHour)
            throw DataError("timestamps not hourly around " + format_timestamp(cur) + " in " +
                            path);
    }

    std::size_t rows = frame.num_rows();
    if (rows > 0) {
        for (const auto& t : schema.targets) {
            std::size_t c = frame.column_index(t.column);
            std::size_t miss = 0;
            for (uint8_t m : frame.missing[c]) miss += m;
            if (miss * 2 > rows)
                throw DataError("target column '" + t.column + "' is more than 50% missing");
        }
    }
    return frame;
}

void save_frame_csv(const std::string& path, const TimeSeriesFrame& frame) {
    csv::Table table;
    table.header.push_back("timestamp");
    for (const auto& c : frame.columns) table.header.push_back(c);
    for (std::size_t r = 0; r < frame.num_rows(); ++r) {
        std::vector<std::string> row;
        row.push_back(format_timestamp(frame.timestamps[r]));
        for (std::size_t c = 0; c < frame.num_cols(); ++c)
            row.push_back(frame.missing[c][r] ? std::string()
                                              : csv::format_double(frame.values[c][r]));
        table.rows.push_back(std::move(row));
    }
    csv::write_file(path, table);
}

// ---------------------------------------------------------------------------
// windows

std::size_t WindowedDataset::feature_index(const std::string& name) const {
    for (std::size_t i = 0; i < feature_names.size(); ++i)
        if (feature_names[i] == name) return i;
    throw DataError("dataset has no feature '" + name + "'");
}

WindowedDataset build_windows(const TimeSeriesFrame& frame, const SchemaDescriptor& schema,
                              std::size_t history_hours, std::size_t horizon,
                              const ImputationPolicy& policy) {
    if (history_hours < 1) throw ContractError("history must be at least one hour");
    if (horizon < 1) throw ContractError("horizon must be at least one hour");
    std::size_t rows = frame.num_rows();
    if (rows < history_hours + horizon)
        throw DataError("empty dataset: frame holds " + std::to_string(rows) +
                        " hours, need at least " + std::to_string(history_hours + horizon));

    std::vector<std::string> source_cols = schema.all_columns();
    std::size_t n_src = source_cols.size();

    std::size_t train_rows = 0;
    while (train_rows < rows && frame.timestamps[train_rows] < policy.train_end_exclusive)
        ++train_rows;
    if (train_rows == 0) throw DataError("imputation policy leaves no training rows");

    // impute: forward fill, leading gaps take the training-slice mean
    std::vector<std::vector<double>> imputed(n_src, std::vector<double>(rows));
    for (std::size_t c = 0; c < n_src; ++c) {
        std::size_t src = frame.column_index(source_cols[c]);
        const auto& vals = frame.values[src];
        const auto& miss = frame.missing[src];
        double mean = 0.0;
        std::size_t seen = 0;
        for (std::size_t r = 0; r < train_rows; ++r) {
            if (!miss[r]) {
                mean += vals[r];
                ++seen;
            }
        }
        mean = seen ? mean / static_cast<double>(seen) : 0.0;
        bool have_last = false;
        double last = 0.0;
        for (std::size_t r = 0; r < rows; ++r) {
            if (!miss[r]) {
                last = vals[r];
                have_last = true;
                imputed[c][r] = vals[r];
            } else {
                imputed[c][r] = have_last ? last : mean;
            }
        }
    }

    WindowedDataset ds;
    ds.history = history_hours;
    ds.horizon = horizon;
    ds.targets = schema.targets;
    ds.feature_names = source_cols;
    ds.feature_names.push_back("hour_sin");
    ds.feature_names.push_back("hour_cos");
    std::size_t n_feat = ds.feature_names.size();

    std::vector<std::vector<double>> feat(n_feat, std::vector<double>(rows));
    for (std::size_t c = 0; c < n_src; ++c) feat[c] = std::move(imputed[c]);
    for (std::size_t r = 0; r < rows; ++r) {
        double h = static_cast<double>(hour_of_day(frame.timestamps[r]));
        feat[n_src][r] = std::sin(2.0 * std::numbers::pi * h / 24.0);
        feat[n_src + 1][r] = std::cos(2.0 * std::numbers::pi * h / 24.0);
    }

    ds.stats.mean.assign(n_feat, 0.0);
    ds.stats.stdev.assign(n_feat, 1.0);
    for (std::size_t c = 0; c < n_feat; ++c) {
        double m = 0.0;
        for (std::size_t r = 0; r < train_rows; ++r) m += feat[c][r];
        m /= static_cast<double>(train_rows);
        double var = 0.0;
        for (std::size_t r = 0; r < train_rows; ++r) {
            double d = feat[c][r] - m;
            var += d * d;
        }
        var /= static_cast<double>(train_rows);
        double sd = std::sqrt(var);
        ds.stats.mean[c] = m;
        ds.stats.stdev[c] = sd < 1e-12 ? 1.0 : sd;
    }

    std::vector<std::size_t> target_cols;
    for (const auto& t : ds.targets) target_cols.push_back(frame.column_index(t.column));

    for (std::size_t a = history_hours; a + horizon <= rows; ++a) {
        bool usable = true;
        for (std::size_t tc : target_cols) {
            for (std::size_t k = 0; k < horizon && usable; ++k)
                if (frame.missing[tc][a + k]) usable = false;
            if (!usable) break;
        }
        if (!usable) continue;

        WindowSample s;
        s.anchor = frame.timestamps[a];
        s.features.reserve(history_hours * n_feat);
        for (std::size_t h = a - history_hours; h < a; ++h)
            for (std::size_t c = 0; c < n_feat; ++c)
                s.features.push_back((feat[c][h] - ds.stats.mean[c]) / ds.stats.stdev[c]);
        s.targets.reserve(ds.targets.size() * horizon);
        s.labels.reserve(ds.targets.size() * horizon);
        for (std::size_t t = 0; t < ds.targets.size(); ++t) {
            for (std::size_t k = 0; k < horizon; ++k) {
                double v = frame.values[target_cols[t]][a + k];
                s.targets.push_back(v);
                s.labels.push_back(static_cast<uint8_t>(
                    exceedance_label(std::max(0.0, v), ds.targets[t].pollutant)));
            }
        }
        ds.samples.push_back(std::move(s));
    }

    if (ds.samples.empty())
        throw DataError("empty dataset: every window overlaps missing target values");
    return ds;
}

void split_by_date(const WindowedDataset& dataset, const TimeRange& train_range,
                   const TimeRange& test_range, WindowedDataset& train_out,
                   WindowedDataset& test_out, std::vector<std::string>* warnings) {
    if (train_range.begin < test_range.end && test_range.begin < train_range.end)
        throw ContractError("train and test ranges overlap");

    auto copy_shell = [&dataset]() {
        WindowedDataset out;
        out.history = dataset.history;
        out.horizon = dataset.horizon;
        out.feature_names = dataset.feature_names;
        out.targets = dataset.targets;
        out.stats = dataset.stats;
        return out;
    };
    train_out = copy_shell();
    test_out = copy_shell();
    for (const auto& s : dataset.samples) {
        if (s.anchor >= train_range.begin && s.anchor < train_range.end)
            train_out.samples.push_back(s);
        else if (s.anchor >= test_range.begin && s.anchor < test_range.end)
            test_out.samples.push_back(s);
    }
    auto warn = [&warnings](const std::string& msg) {
        if (warnings)
            warnings->push_back(msg);
        else
            std::cerr << "warning: " << msg << "\n";
    };
    if (train_out.samples.empty()) warn("train split is empty");
    if (test_out.samples.empty()) warn("test split is empty");
}

WindowSample forecast_window(const TimeSeriesFrame& frame, const WindowedDataset& layout,
                             long long anchor_time) {
    if (frame.num_rows() == 0) throw DataError("forecast window: frame is empty");
    long long first = frame.timestamps.front();
    if ((anchor_time - first) % kHour != 0)
        throw DataError("forecast anchor " + format_timestamp(anchor_time) +
                        " is not aligned to the hourly grid");
    long long offset = (anchor_time - first) / kHour;
    long long history = static_cast<long long>(layout.history);
    if (offset < history)
        throw DataError("insufficient history before " + format_timestamp(anchor_time) + ": need " +
                        std::to_string(layout.history) + " hours");
    if (offset > static_cast<long long>(frame.num_rows()))
        throw DataError("forecast anchor " + format_timestamp(anchor_time) +
                        " lies beyond the frame");

    std::size_t n_feat = layout.feature_names.size();
    if (layout.stats.mean.size() != n_feat || layout.stats.stdev.size() != n_feat)
        throw ContractError("forecast window: stats do not match the feature layout");

    WindowSample s;
    s.anchor = anchor_time;
    s.features.reserve(layout.history * n_feat);
    std::size_t begin = static_cast<std::size_t>(offset - history);
    for (std::size_t h = begin; h < static_cast<std::size_t>(offset); ++h) {
        for (std::size_t c = 0; c < n_feat; ++c) {
            const std::string& name = layout.feature_names[c];
            double raw;
            if (name == "hour_sin") {
                raw = std::sin(2.0 * std::numbers::pi * hour_of_day(frame.timestamps[h]) / 24.0);
            } else if (name == "hour_cos") {
                raw = std::cos(2.0 * std::numbers::pi * hour_of_day(frame.timestamps[h]) / 24.0);
            } else {
                std::size_t col = frame.column_index(name);
                if (frame.missing[col][h]) {
                    // forward fill from the most recent observation; fall back
                    // to the training mean when the column never appeared
                    raw = layout.stats.mean[c];
                    for (std::size_t r = h + 1; r-- > 0;) {
                        if (!frame.missing[col][r]) {
                            raw = frame.values[col][r];
                            break;
                        }
                    }
                } else {
                    raw = frame.values[col][h];
                }
            }
            s.features.push_back((raw - layout.stats.mean[c]) / layout.stats.stdev[c]);
        }
    }
    return s;
}

// ---------------------------------------------------------------------------
// synthetic generator

namespace {

double tail_prob(double excess, double sigma, bool laplace) {
    // P(noise > excess)
    if (sigma <= 0.0) return excess < 0.0 ? 1.0 : 0.0;
    if (!laplace) return norm_cdf(-excess / sigma);
    double b = sigma / std::numbers::sqrt2;
    if (excess >= 0.0) return 0.5 * std::exp(-excess / b);
    return 1.0 - 0.5 * std::exp(excess / b);
}

double hourly_exceedance_rate(double base, double amp, double sigma, bool laplace,
                              double threshold) {
    double rate = 0.0;
    for (int h = 0; h < 24; ++h) {
        double s = std::sin(2.0 * std::numbers::pi * h / 24.0);
        rate += tail_prob(threshold - base - amp * s, sigma, laplace);
    }
    return rate / 24.0;
}

double solve_base_level(double target_rate, double amp, double sigma, bool laplace,
                        double threshold) {
    if (target_rate <= 0.0) return threshold - amp - 25.0 * std::max(sigma, 1.0);
    if (target_rate >= 1.0) return threshold + amp + 25.0 * std::max(sigma, 1.0);
    double lo = threshold - amp - 25.0 * std::max(sigma, 1.0) - 10.0;
    double hi = threshold + amp + 25.0 * std::max(sigma, 1.0) + 10.0;
    for (int it = 0; it < 200; ++it) {
        double mid = 0.5 * (lo + hi);
        if (hourly_exceedance_rate(mid, amp, sigma, laplace, threshold) < target_rate)
            lo = mid;
        else
            hi = mid;
    }
    return 0.5 * (lo + hi);
}

}  // namespace

SchemaDescriptor synth_schema(const SynthConfig& config) {
    SchemaDescriptor schema;
    for (std::size_t s = 0; s < config.stations; ++s) {
        std::string st = "s" + std::to_string(s + 1);
        schema.targets.push_back({st + "_pm25", Pollutant::Pm25});
        schema.targets.push_back({st + "_pm10", Pollutant::Pm10});
    }
    if (config.exogenous)
        schema.exogenous = {"temperature_c",  "humidity_pct", "precipitation_mm",
                            "pressure_hpa",   "wind_speed_ms", "wind_direction_deg",
                            "snow_cm",        "sunshine_min",  "traffic_count",
                            "street_cleaning"};
    return schema;
}

TimeSeriesFrame synthesize(const SynthConfig& config, KvConfig* recorded) {
    if (config.noise_law != "gaussian" && config.noise_law != "laplace")
        throw ConfigError("noise law must be 'gaussian' or 'laplace', got '" + config.noise_law +
                          "'");
    bool laplace = config.noise_law == "laplace";
    SchemaDescriptor schema = synth_schema(config);

    TimeSeriesFrame frame;
    frame.timestamps.resize(config.hours);
    for (std::size_t r = 0; r < config.hours; ++r)
        frame.timestamps[r] = config.start_timestamp + static_cast<long long>(r) * kHour;
    frame.columns = schema.all_columns();
    frame.values.assign(frame.columns.size(), std::vector<double>(config.hours, 0.0));
    frame.missing.assign(frame.columns.size(), std::vector<uint8_t>(config.hours, 0));

    if (recorded) {
        recorded->set("generator.noise_law", config.noise_law);
        recorded->set_double("generator.noise_sigma", config.noise_sigma);
        recorded->set_double("generator.seasonal_amplitude", config.seasonal_amplitude);
        recorded->set_double("generator.exceedance_rate", config.exceedance_rate);
        recorded->set_int("generator.seed", static_cast<long long>(config.seed));
        recorded->set_int("generator.stations", static_cast<long long>(config.stations));
        recorded->set_int("generator.hours", static_cast<long long>(config.hours));
    }

    std::size_t col = 0;
    for (std::size_t s = 0; s < config.stations; ++s) {
        for (Pollutant p : {Pollutant::Pm25, Pollutant::Pm10}) {
            double amp = p == Pollutant::Pm10 ? config.seasonal_amplitude
                                              : 0.6 * config.seasonal_amplitude;
            double threshold = very_low_upper_bound(p);
            double base = solve_base_level(config.exceedance_rate, amp, config.noise_sigma,
                                           laplace, threshold);
            double phase = 3.0 * static_cast<double>(s);
            RngStream noise(config.seed, 16 * s + (p == Pollutant::Pm10 ? 1 : 0));
            RngStream dropout(config.seed, 16 * s + 8 + (p == Pollutant::Pm10 ? 1 : 0));
            auto& vals = frame.values[col];
            auto& miss = frame.missing[col];
            for (std::size_t r = 0; r < config.hours; ++r) {
                double h = static_cast<double>(hour_of_day(frame.timestamps[r]));
                double clean =
                    base + amp * std::sin(2.0 * std::numbers::pi * (h + phase) / 24.0);
                double eps = 0.0;
                if (config.noise_sigma > 0.0) {
                    eps = laplace ? [&] {
                        double u = noise.uniform_open() - 0.5;
                        double b = config.noise_sigma / std::numbers::sqrt2;
                        return -b * (u < 0 ? -1.0 : 1.0) * std::log(1.0 - 2.0 * std::abs(u));
                    }()
                                  : config.noise_sigma * noise.normal();
                }
                vals[r] = std::max(0.0, clean + eps);
                if (config.missing_target_rate > 0.0 &&
                    dropout.uniform() < config.missing_target_rate)
                    miss[r] = 1;
            }
            if (recorded) {
                std::string key = "generator." + frame.columns[col];
                recorded->set_double(key + ".base", base);
                recorded->set_double(key + ".amplitude", amp);
                recorded->set_double(key + ".phase_hours", phase);
                recorded->set_double(key + ".threshold", threshold);
            }
            ++col;
        }
    }

    if (config.exogenous) {
        for (std::size_t e = 0; e < schema.exogenous.size(); ++e, ++col) {
            const std::string& name = schema.exogenous[e];
            RngStream rng(config.seed, 1000 + e);
            RngStream dropout(config.seed, 2000 + e);
            auto& vals = frame.values[col];
            auto& miss = frame.missing[col];
            for (std::size_t r = 0; r < config.hours; ++r) {
                double h = static_cast<double>(hour_of_day(frame.timestamps[r]));
                long long day = frame.timestamps[r] / 86400;
                double doy = static_cast<double>(day % 365);
                double v = 0.0;
                if (name == "temperature_c") {
                    v = 5.0 + 8.0 * std::sin(2.0 * std::numbers::pi * (h - 14.0) / 24.0) +
                        10.0 * std::sin(2.0 * std::numbers::pi * doy / 365.0) +
                        0.5 * rng.normal();
                } else if (name == "humidity_pct") {
                    v = std::clamp(70.0 -
                                       20.0 * std::sin(2.0 * std::numbers::pi * (h - 14.0) / 24.0) +
                                       2.0 * rng.normal(),
                                   5.0, 100.0);
                } else if (name == "precipitation_mm") {
                    v = rng.uniform() < 0.1 ? 2.0 * std::abs(rng.normal()) : 0.0;
                } else if (name == "pressure_hpa") {
                    v = 1013.0 + 6.0 * std::sin(2.0 * std::numbers::pi * doy / 11.0) +
                        0.5 * rng.normal();
                } else if (name == "wind_speed_ms") {
                    v = std::abs(2.0 + 1.5 * rng.normal());
                } else if (name == "wind_direction_deg") {
                    v = 360.0 * rng.uniform();
                } else if (name == "snow_cm") {
                    v = (doy < 60.0 || doy > 330.0) ? std::max(0.0, 5.0 + 3.0 * rng.normal())
                                                    : 0.0;
                } else if (name == "sunshine_min") {
                    v = (h >= 6.0 && h <= 18.0)
                            ? std::max(0.0, 40.0 * std::sin(std::numbers::pi * (h - 6.0) / 12.0) +
                                                5.0 * rng.normal())
                            : 0.0;
                } else if (name == "traffic_count") {
                    double rush = std::exp(-(h - 8.0) * (h - 8.0) / 8.0) +
                                  std::exp(-(h - 17.0) * (h - 17.0) / 8.0);
                    v = 100.0 + 400.0 * rush + 20.0 * rng.normal();
                } else if (name == "street_cleaning") {
                    v = rng.uniform() < 0.02 ? 1.0 : 0.0;
                }
                vals[r] = v;
                if (config.missing_feature_rate > 0.0 &&
                    dropout.uniform() < config.missing_feature_rate)
                    miss[r] = 1;
            }
        }
    }
    return frame;
}

// ---------------------------------------------------------------------------
// bundle persistence

namespace {

std::string join_list(const std::vector<std::string>& items) {
    std::string out;
    for (std::size_t i = 0; i < items.size(); ++i) {
        if (i) out += ";";
        out += items[i];
    }
    return out;
}

std::string join_doubles(const std::vector<double>& items) {
    std::string out;
    for (std::size_t i = 0; i < items.size(); ++i) {
        if (i) out += ";";
        out += csv::format_double(items[i]);
    }
    return out;
}

csv::Table windows_to_table(const WindowedDataset& ds) {
    csv::Table t;
    t.header.push_back("anchor");
    std::size_t fd = ds.feature_dim(), td = ds.target_dim();
    for (std::size_t i = 0; i < fd; ++i) t.header.push_back("x" + std::to_string(i));
    for (std::size_t i = 0; i < td; ++i) t.header.push_back("y" + std::to_string(i));
    for (std::size_t i = 0; i < td; ++i) t.header.push_back("o" + std::to_string(i));
    for (const auto& s : ds.samples) {
        std::vector<std::string> row;
        row.reserve(1 + fd + 2 * td);
        row.push_back(format_timestamp(s.anchor));
        for (double v : s.features) row.push_back(csv::format_double(v));
        for (double v : s.targets) row.push_back(csv::format_double(v));
        for (uint8_t v : s.labels) row.push_back(v ? "1" : "0");
        t.rows.push_back(std::move(row));
    }
    return t;
}

void table_to_windows(const csv::Table& t, WindowedDataset& ds) {
    std::size_t fd = ds.feature_dim(), td = ds.target_dim();
    if (t.header.size() != 1 + fd + 2 * td)
        throw DataError("window file width does not match dataset layout");
    ds.samples.clear();
    for (const auto& row : t.rows) {
        WindowSample s;
        s.anchor = parse_timestamp(row[0]);
        s.features.reserve(fd);
        for (std::size_t i = 0; i < fd; ++i)
            s.features.push_back(csv::parse_double(row[1 + i], "window features"));
        s.targets.reserve(td);
        for (std::size_t i = 0; i < td; ++i)
            s.targets.push_back(csv::parse_double(row[1 + fd + i], "window targets"));
        s.labels.reserve(td);
        for (std::size_t i = 0; i < td; ++i)
            s.labels.push_back(
                static_cast<uint8_t>(csv::parse_int(row[1 + fd + td + i], "window labels")));
        ds.samples.push_back(std::move(s));
    }
}

}  // namespace

void save_bundle(const DatasetBundle& bundle, const std::string& directory) {
    std::filesystem::create_directories(directory);
    KvConfig meta;
    const WindowedDataset& d = bundle.train;
    meta.set_int("history", static_cast<long long>(d.history));
    meta.set_int("horizon", static_cast<long long>(d.horizon));
    meta.set("features", join_list(d.feature_names));
    std::vector<std::string> tspecs;
    for (const auto& t : d.targets) tspecs.push_back(t.column + ":" + pollutant_name(t.pollutant));
    meta.set("targets", join_list(tspecs));
    meta.set("stats.mean", join_doubles(d.stats.mean));
    meta.set("stats.std", join_doubles(d.stats.stdev));
    for (const auto& key : bundle.meta.keys())
        if (!meta.has(key)) meta.set(key, bundle.meta.get_string(key));
    meta.save(directory + "/dataset.kv");
    csv::write_file(directory + "/train_windows.csv", windows_to_table(bundle.train));
    csv::write_file(directory + "/test_windows.csv", windows_to_table(bundle.test));
}

DatasetBundle load_bundle(const std::string& directory) {
    DatasetBundle bundle;
    bundle.meta = KvConfig::load(directory + "/dataset.kv");
    auto shell = [&bundle]() {
        WindowedDataset d;
        d.history = static_cast<std::size_t>(bundle.meta.get_int("history"));
        d.horizon = static_cast<std::size_t>(bundle.meta.get_int("horizon"));
        d.feature_names = bundle.meta.get_list("features");
        for (const auto& spec : bundle.meta.get_list("targets")) {
            std::size_t colon = spec.rfind(':');
            if (colon == std::string::npos)
                throw DataError("bad target spec '" + spec + "' in dataset.kv");
            d.targets.push_back(
                {spec.substr(0, colon), pollutant_from_name(spec.substr(colon + 1))});
        }
        d.stats.mean = bundle.meta.get_double_list("stats.mean");
        d.stats.stdev = bundle.meta.get_double_list("stats.std");
        if (d.stats.mean.size() != d.feature_names.size() ||
            d.stats.stdev.size() != d.feature_names.size())
            throw DataError("normalization stats do not match feature layout");
        return d;
    };
    bundle.train = shell();
    bundle.test = shell();
    table_to_windows(csv::read_file(directory + "/train_windows.csv"), bundle.train);
    table_to_windows(csv::read_file(directory + "/test_windows.csv"), bundle.test);
    return bundle;
}

}  // namespace probcast::data
