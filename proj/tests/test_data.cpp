#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <string>
#include <vector>

#include "doctest.h"
#include "probcast/data.hpp"
#include "probcast/errors.hpp"

using namespace probcast;
namespace fs = std::filesystem;

namespace {

std::string write_temp(const std::string& name, const std::string& text) {
    auto path = (fs::temp_directory_path() / name).string();
    std::ofstream out(path);
    out << text;
    return path;
}

data::SchemaDescriptor two_pollutant_schema() {
    data::SchemaDescriptor schema;
    schema.targets = {{"pm25", data::Pollutant::Pm25}, {"pm10", data::Pollutant::Pm10}};
    return schema;
}

}  // namespace

TEST_CASE("timestamps parse and format as hourly iso strings") {
    long long t = data::parse_timestamp("2019-01-01T00:00:00");
    CHECK(t == 1546300800);
    CHECK(data::format_timestamp(t) == "2019-01-01T00:00:00");
    CHECK(data::hour_of_day(t) == 0);
    CHECK(data::hour_of_day(t + 5 * data::kHour) == 5);
    CHECK_THROWS_AS(data::parse_timestamp("01/02/2019"), DataError);
}

TEST_CASE("three row file loads into a three row frame") {
    auto path = write_temp("probcast_three.csv",
                           "timestamp,pm25,pm10\n"
                           "2019-01-01T00:00:00,10,20\n"
                           "2019-01-01T01:00:00,11,\n"
                           "2019-01-01T02:00:00,12,22\n");
    auto frame = data::load_csv(path, two_pollutant_schema());
    CHECK(frame.num_rows() == 3);
    CHECK(frame.num_cols() == 2);
    CHECK(frame.values[0] == std::vector<double>{10, 11, 12});

    // the empty pm10 cell is flagged missing, not zero-filled
    CHECK(frame.missing[1][0] == 0);
    CHECK(frame.missing[1][1] == 1);
    CHECK(frame.missing[1][2] == 0);
    std::remove(path.c_str());
}

TEST_CASE("duplicated timestamps are rejected by name") {
    auto path = write_temp("probcast_dup.csv",
                           "timestamp,pm25,pm10\n"
                           "2019-01-01T00:00:00,10,20\n"
                           "2019-01-01T00:00:00,11,21\n");
    try {
        data::load_csv(path, two_pollutant_schema());
        FAIL("expected DataError");
    } catch (const DataError& e) {
        CHECK(std::string(e.what()).find("2019-01-01T00:00:00") != std::string::npos);
    }
    std::remove(path.c_str());
}

TEST_CASE("a target more than half missing is a hard error") {
    std::string text = "timestamp,pm25,pm10\n";
    for (int r = 0; r < 10; ++r) {
        text += "2019-01-01T0" + std::to_string(r) + ":00:00,";
        text += (r < 6 ? "" : "9");
        text += ",20\n";
    }
    auto path = write_temp("probcast_gappy.csv", text);
    CHECK_THROWS_AS(data::load_csv(path, two_pollutant_schema()), DataError);
    std::remove(path.c_str());
}

TEST_CASE("caqi bands are contiguous and classify boundary values downward") {
    data::CaqiTable::standard().validate();
    CHECK(data::caqi_classify(10.0, data::Pollutant::Pm10) == 0);
    CHECK(data::caqi_classify(40.0, data::Pollutant::Pm25) == 2);
    CHECK(data::caqi_classify(25.0, data::Pollutant::Pm10) == 0);
    CHECK(data::caqi_classify(15.0, data::Pollutant::Pm25) == 0);
    CHECK(data::caqi_classify(1000.0, data::Pollutant::Pm25) == 4);
    CHECK_THROWS_AS(data::caqi_classify(-1.0, data::Pollutant::Pm25), DomainError);
}

TEST_CASE("exceedance labels are strict threshold crossings") {
    CHECK(data::very_low_upper_bound(data::Pollutant::Pm25) == 15.0);
    CHECK(data::very_low_upper_bound(data::Pollutant::Pm10) == 25.0);
    CHECK(data::exceedance_label(30.0, data::Pollutant::Pm25) == 1);
    CHECK(data::exceedance_label(15.0, data::Pollutant::Pm25) == 0);
    CHECK(data::exceedance_label(0.0, data::Pollutant::Pm25) == 0);
    CHECK(data::exceedance_label(25.0, data::Pollutant::Pm10) == 0);
    CHECK(data::exceedance_label(25.5, data::Pollutant::Pm10) == 1);
}

TEST_CASE("exceedance equals a nonzero caqi band away from the boundary") {
    for (double v : {0.0, 3.7, 14.9, 15.5, 22.0, 80.0, 250.0}) {
        bool above = data::caqi_classify(v, data::Pollutant::Pm25) > 0;
        CHECK(data::exceedance_label(v, data::Pollutant::Pm25) == (above ? 1 : 0));
    }
}

TEST_CASE("pollutant inference reads column names") {
    CHECK(data::infer_pollutant("s1_pm25") == data::Pollutant::Pm25);
    CHECK(data::infer_pollutant("station_pm10") == data::Pollutant::Pm10);
    CHECK_THROWS_AS(data::infer_pollutant("temperature_c"), ConfigError);
}

TEST_CASE("one hundred rows with day long windows yield fifty three samples") {
    data::SynthConfig sc;
    sc.hours = 100;
    sc.stations = 1;
    sc.exogenous = false;
    auto frame = data::synthesize(sc);
    auto ds = data::build_windows(frame, data::synth_schema(sc), 24, 24, {});
    CHECK(ds.samples.size() == 53);
    CHECK(ds.history == 24);
    CHECK(ds.horizon == 24);
    CHECK(ds.feature_dim() == 24 * ds.feature_names.size());
    CHECK(ds.target_dim() == 2 * 24);

    // anchors advance hourly starting after the first full history block
    CHECK(ds.samples[0].anchor == frame.timestamps[24]);
    CHECK(ds.samples[1].anchor - ds.samples[0].anchor == data::kHour);
}

TEST_CASE("an entirely missing target leaves no usable windows") {
    data::SynthConfig sc;
    sc.hours = 80;
    sc.stations = 1;
    sc.exogenous = false;
    auto frame = data::synthesize(sc);
    for (auto& m : frame.missing[0]) m = 1;
    try {
        data::build_windows(frame, data::synth_schema(sc), 24, 24, {});
        FAIL("expected DataError");
    } catch (const DataError& e) {
        CHECK(std::string(e.what()).find("empty dataset") != std::string::npos);
    }
}

TEST_CASE("constant feature columns get unit scale instead of zero division") {
    data::SynthConfig sc;
    sc.hours = 80;
    sc.stations = 1;
    sc.exogenous = false;
    sc.noise_sigma = 0.0;
    sc.seasonal_amplitude = 0.0;  // perfectly flat series
    auto frame = data::synthesize(sc);
    auto ds = data::build_windows(frame, data::synth_schema(sc), 24, 24, {});
    for (std::size_t c = 0; c < ds.feature_names.size(); ++c) {
        const auto& name = ds.feature_names[c];
        if (name == "hour_sin" || name == "hour_cos") continue;
        CHECK(ds.stats.stdev[c] == 1.0);
    }
    for (const auto& s : ds.samples) {
        for (double f : s.features) CHECK(std::isfinite(f));
    }
}

TEST_CASE("date splits are disjoint and warn when a side is empty") {
    data::SynthConfig sc;
    sc.hours = 24 * 20;
    sc.stations = 1;
    sc.exogenous = false;
    auto frame = data::synthesize(sc);
    auto ds = data::build_windows(frame, data::synth_schema(sc), 24, 24, {});

    long long mid = frame.timestamps[24 * 14];
    long long end = frame.timestamps.back() + data::kHour;
    data::WindowedDataset train, test;
    std::vector<std::string> warnings;
    data::split_by_date(ds, {frame.timestamps.front(), mid}, {mid, end}, train, test, &warnings);
    CHECK(warnings.empty());
    CHECK(train.samples.size() + test.samples.size() == ds.samples.size());
    for (const auto& s : train.samples) CHECK(s.anchor < mid);
    for (const auto& s : test.samples) CHECK(s.anchor >= mid);

    // overlap is a contract violation
    data::WindowedDataset a, b;
    CHECK_THROWS_AS(
        data::split_by_date(ds, {0, mid}, {mid - data::kHour, end}, a, b, &warnings),
        ContractError);

    // an empty side is legal but reported
    warnings.clear();
    data::split_by_date(ds, {frame.timestamps.front(), end}, {end, end + data::kHour}, train,
                        test, &warnings);
    REQUIRE(warnings.size() == 1);
    CHECK(warnings[0].find("test") != std::string::npos);
}

TEST_CASE("the generator is deterministic and honors a zero exceedance rate") {
    data::SynthConfig sc;
    sc.hours = 24 * 10;
    sc.stations = 2;
    auto f1 = data::synthesize(sc);
    auto f2 = data::synthesize(sc);
    CHECK(f1.values == f2.values);
    CHECK(f1.missing == f2.missing);

    sc.exceedance_rate = 0.0;
    auto f0 = data::synthesize(sc);
    for (std::size_t c = 0; c < 4; ++c) {
        auto p = data::infer_pollutant(f0.columns[c]);
        for (double v : f0.values[c]) CHECK(data::exceedance_label(v, p) == 0);
    }
}

TEST_CASE("a noise free generator repeats every twenty four hours") {
    data::SynthConfig sc;
    sc.hours = 24 * 6;
    sc.stations = 1;
    sc.exogenous = false;
    sc.noise_sigma = 0.0;
    auto frame = data::synthesize(sc);
    double sq = 0.0;
    std::size_t n = 0;
    for (std::size_t r = 24; r < frame.num_rows(); ++r) {
        double d = frame.values[0][r] - frame.values[0][r - 24];
        sq += d * d;
        ++n;
    }
    CHECK(std::sqrt(sq / double(n)) == doctest::Approx(0.0).epsilon(1e-12));
}

TEST_CASE("generator parameters are recorded for later reference") {
    data::SynthConfig sc;
    sc.hours = 48;
    sc.stations = 1;
    sc.exogenous = false;
    KvConfig recorded;
    auto frame = data::synthesize(sc, &recorded);
    CHECK(recorded.get_double("generator.noise_sigma") == doctest::Approx(2.0));
    CHECK(recorded.get_string("generator.noise_law") == "gaussian");
    CHECK(recorded.has("generator.s1_pm25.base"));
    CHECK(recorded.get_double("generator.s1_pm25.threshold") == doctest::Approx(15.0));
    CHECK(frame.num_rows() == 48);
}

TEST_CASE("frames round trip through csv preserving missing cells") {
    data::SynthConfig sc;
    sc.hours = 60;
    sc.stations = 1;
    sc.exogenous = false;
    sc.missing_target_rate = 0.2;
    auto frame = data::synthesize(sc);
    auto path = (fs::temp_directory_path() / "probcast_frame_rt.csv").string();
    data::save_frame_csv(path, frame);
    auto back = data::load_csv(path, data::synth_schema(sc));
    CHECK(back.timestamps == frame.timestamps);
    CHECK(back.missing == frame.missing);
    for (std::size_t c = 0; c < frame.num_cols(); ++c) {
        for (std::size_t r = 0; r < frame.num_rows(); ++r) {
            if (frame.missing[c][r]) continue;
            CHECK(back.values[c][r] == frame.values[c][r]);
        }
    }
    std::remove(path.c_str());
}

TEST_CASE("normalization stats ignore rows past the training cutoff") {
    data::SynthConfig sc;
    sc.hours = 24 * 12;
    sc.stations = 1;
    sc.exogenous = false;
    auto frame = data::synthesize(sc);
    data::ImputationPolicy policy;
    policy.train_end_exclusive = frame.timestamps[24 * 8];

    auto ds1 = data::build_windows(frame, data::synth_schema(sc), 24, 24, policy);
    auto tampered = frame;
    for (std::size_t r = 24 * 8; r < tampered.num_rows(); ++r) {
        tampered.values[0][r] += 500.0;
        tampered.values[1][r] += 500.0;
    }
    auto ds2 = data::build_windows(tampered, data::synth_schema(sc), 24, 24, policy);
    CHECK(ds1.stats.mean == ds2.stats.mean);
    CHECK(ds1.stats.stdev == ds2.stats.stdev);
}

TEST_CASE("window samples carry strict exceedance labels for their targets") {
    data::SynthConfig sc;
    sc.hours = 24 * 8;
    sc.stations = 1;
    sc.exogenous = false;
    sc.exceedance_rate = 0.4;
    auto frame = data::synthesize(sc);
    auto ds = data::build_windows(frame, data::synth_schema(sc), 24, 24, {});
    for (const auto& s : ds.samples) {
        for (std::size_t t = 0; t < ds.targets.size(); ++t) {
            for (std::size_t h = 0; h < ds.horizon; ++h) {
                double y = s.targets[t * ds.horizon + h];
                int expect = data::exceedance_label(y, ds.targets[t].pollutant);
                CHECK(int(s.labels[t * ds.horizon + h]) == expect);
            }
        }
    }
}

TEST_CASE("dataset bundles round trip through a directory") {
    data::SynthConfig sc;
    sc.hours = 24 * 10;
    sc.stations = 1;
    sc.exogenous = false;
    auto frame = data::synthesize(sc);
    auto ds = data::build_windows(frame, data::synth_schema(sc), 24, 24, {});
    long long mid = frame.timestamps[24 * 7];
    long long end = frame.timestamps.back() + data::kHour;

    data::DatasetBundle bundle;
    data::split_by_date(ds, {frame.timestamps.front(), mid}, {mid, end}, bundle.train,
                        bundle.test);
    bundle.meta.set("note", "fixture");

    auto dir = (fs::temp_directory_path() / "probcast_bundle_rt").string();
    fs::remove_all(dir);
    data::save_bundle(bundle, dir);
    auto back = data::load_bundle(dir);
    CHECK(back.train.samples.size() == bundle.train.samples.size());
    CHECK(back.test.samples.size() == bundle.test.samples.size());
    CHECK(back.train.feature_names == bundle.train.feature_names);
    CHECK(back.train.stats.mean == bundle.train.stats.mean);
    REQUIRE(!back.test.samples.empty());
    CHECK(back.test.samples[0].features == bundle.test.samples[0].features);
    CHECK(back.test.samples[0].targets == bundle.test.samples[0].targets);
    CHECK(back.test.samples[0].labels == bundle.test.samples[0].labels);
    CHECK(back.meta.get_string("note") == "fixture");
    fs::remove_all(dir);
}

TEST_CASE("forecast windows rebuild training features from raw history") {
    data::SynthConfig sc;
    sc.hours = 24 * 10;
    sc.stations = 1;
    sc.exogenous = false;
    auto frame = data::synthesize(sc);
    auto ds = data::build_windows(frame, data::synth_schema(sc), 24, 24, {});

    const auto& sample = ds.samples[5];
    auto rebuilt = data::forecast_window(frame, ds, sample.anchor);
    REQUIRE(rebuilt.features.size() == sample.features.size());
    for (std::size_t i = 0; i < sample.features.size(); ++i) {
        CHECK(rebuilt.features[i] == doctest::Approx(sample.features[i]).epsilon(1e-12));
    }

    // one hour past the frame is the furthest legal anchor
    long long next = frame.timestamps.back() + data::kHour;
    auto ahead = data::forecast_window(frame, ds, next);
    CHECK(ahead.features.size() == ds.feature_dim());
    CHECK_THROWS_AS(data::forecast_window(frame, ds, next + data::kHour), DataError);
    CHECK_THROWS_AS(data::forecast_window(frame, ds, frame.timestamps[3]), DataError);
    CHECK_THROWS_AS(data::forecast_window(frame, ds, next + 1800), DataError);
}
