#include <algorithm>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <vector>

#include "doctest.h"
#include "probcast/decision.hpp"
#include "probcast/errors.hpp"
#include "probcast/rng.hpp"

using namespace probcast;

namespace {

// brute-force f1 for the gated rule, used as an oracle
double gated_f1(const std::vector<double>& probs, const std::vector<double>& confs,
                const std::vector<double>& truths, double t1, double t2) {
    std::size_t tp = 0, fp = 0, fn = 0;
    for (std::size_t i = 0; i < probs.size(); ++i) {
        bool positive = probs[i] >= t1 && confs[i] >= t2;
        bool truth = truths[i] >= 0.5;
        if (positive && truth) ++tp;
        else if (positive && !truth) ++fp;
        else if (!positive && truth) ++fn;
    }
    double den = double(tp) + 0.5 * double(fp + fn);
    return den == 0.0 ? 0.0 : double(tp) / den;
}

}  // namespace

TEST_CASE("zero threshold keeps everything and beyond one keeps nothing") {
    std::vector<double> preds{0.9, 0.1, 0.8};
    std::vector<double> confs{0.5, 0.6, 0.7};
    std::vector<double> truths{1, 0, 1};
    auto curve = decision::reliability_curve(preds, confs, truths,
                                             decision::TaskKind::Classification, {0.0, 1.01});
    REQUIRE(curve.retained.size() == 2);
    CHECK(curve.retained[0] == 3);
    CHECK(curve.retained[1] == 0);
    CHECK(curve.loss[1] == 0.0);
}

TEST_CASE("retained counts never increase along the threshold grid") {
    RngStream rng(61, 0);
    std::vector<double> preds(200), confs(200), truths(200);
    for (int i = 0; i < 200; ++i) {
        preds[i] = rng.uniform();
        confs[i] = rng.uniform();
        truths[i] = rng.bernoulli(0.4) ? 1.0 : 0.0;
    }
    auto grid = decision::uniform_grid(51);
    auto curve = decision::reliability_curve(preds, confs, truths,
                                             decision::TaskKind::Classification, grid);
    for (std::size_t i = 1; i < curve.retained.size(); ++i)
        CHECK(curve.retained[i] <= curve.retained[i - 1]);
}

TEST_CASE("an oracle confidence model reaches zero loss past any positive threshold") {
    // confidence 1 exactly on correct calls, 0 on wrong ones
    std::vector<double> preds{0.9, 0.2, 0.8, 0.3};
    std::vector<double> truths{1, 0, 0, 1};
    std::vector<double> confs;
    for (std::size_t i = 0; i < preds.size(); ++i) {
        bool correct = (preds[i] >= 0.5) == (truths[i] >= 0.5);
        confs.push_back(correct ? 1.0 : 0.0);
    }
    auto curve = decision::reliability_curve(preds, confs, truths,
                                             decision::TaskKind::Classification,
                                             {0.0, 0.01, 0.5, 0.99});
    CHECK(curve.loss[0] == 2.0);
    for (std::size_t i = 1; i < curve.loss.size(); ++i) CHECK(curve.loss[i] == 0.0);
}

TEST_CASE("regression reliability sums squared errors of retained points") {
    std::vector<double> preds{1.0, 2.0, 3.0};
    std::vector<double> truths{1.5, 2.0, 5.0};
    std::vector<double> confs{0.9, 0.5, 0.1};
    auto curve = decision::reliability_curve(preds, confs, truths,
                                             decision::TaskKind::Regression, {0.0, 0.4, 0.8});
    CHECK(curve.loss[0] == doctest::Approx(0.25 + 0.0 + 4.0));
    CHECK(curve.loss[1] == doctest::Approx(0.25 + 0.0));
    CHECK(curve.loss[2] == doctest::Approx(0.25));
    CHECK(curve.retained == std::vector<std::size_t>{3, 2, 1});
}

TEST_CASE("reliability input sizes must agree and confidences stay in range") {
    CHECK_THROWS_AS(decision::reliability_curve({0.5}, {0.5, 0.6}, {1.0},
                                                decision::TaskKind::Classification, {0.0}),
                    ContractError);
    CHECK_THROWS_AS(decision::reliability_curve({0.5}, {1.5}, {1.0},
                                                decision::TaskKind::Classification, {0.0}),
                    ContractError);
}

TEST_CASE("the four event fixture lands on one half at the quoted cell") {
    std::vector<double> probs{0.9, 0.6, 0.4, 0.8};
    std::vector<double> confs{0.9, 0.2, 0.9, 0.8};
    std::vector<double> truths{1, 1, 0, 0};

    auto surface = decision::decision_surface(probs, confs, truths, {0.7}, {0.5});
    REQUIRE(surface.f1.size() == 1);
    CHECK(surface.f1[0] == doctest::Approx(0.5).epsilon(1e-12));
    CHECK(surface.precision[0] == doctest::Approx(0.5).epsilon(1e-12));
    CHECK(surface.recall[0] == doctest::Approx(0.5).epsilon(1e-12));
}

TEST_CASE("the degenerate gate reproduces the plain classifier") {
    std::vector<double> probs{0.9, 0.6, 0.4, 0.8, 0.3};
    std::vector<double> confs{0.9, 0.2, 0.9, 0.8, 0.4};
    std::vector<double> truths{1, 1, 0, 0, 1};
    auto surface = decision::decision_surface(probs, confs, truths, {0.5}, {0.0});
    CHECK(surface.f1[0] == doctest::Approx(gated_f1(probs, confs, truths, 0.5, 0.0)));
}

TEST_CASE("surface cells match the brute force oracle everywhere") {
    RngStream rng(67, 2);
    std::vector<double> probs(60), confs(60), truths(60);
    for (int i = 0; i < 60; ++i) {
        probs[i] = rng.uniform();
        confs[i] = rng.uniform();
        truths[i] = rng.bernoulli(0.35) ? 1.0 : 0.0;
    }
    auto t1 = decision::uniform_grid(11);
    auto t2 = decision::uniform_grid(11);
    auto surface = decision::decision_surface(probs, confs, truths, t1, t2);
    REQUIRE(surface.f1.size() == 121);
    for (std::size_t i2 = 0; i2 < t2.size(); ++i2) {
        for (std::size_t i1 = 0; i1 < t1.size(); ++i1) {
            double expect = gated_f1(probs, confs, truths, t1[i1], t2[i2]);
            CHECK(surface.f1[i2 * t1.size() + i1] == doctest::Approx(expect).epsilon(1e-12));
        }
    }

    // best cell agrees with an exhaustive scan using the same tie-break
    auto best = decision::best_operating_point(surface);
    double best_f1 = -1.0;
    std::size_t bi1 = 0, bi2 = 0;
    for (std::size_t i2 = 0; i2 < t2.size(); ++i2)
        for (std::size_t i1 = 0; i1 < t1.size(); ++i1)
            if (surface.f1[i2 * t1.size() + i1] > best_f1) {
                best_f1 = surface.f1[i2 * t1.size() + i1];
                bi1 = i1;
                bi2 = i2;
            }
    CHECK(best.f1 == doctest::Approx(best_f1));
    CHECK(best.tau1 == doctest::Approx(t1[bi1]));
    CHECK(best.tau2 == doctest::Approx(t2[bi2]));
}

TEST_CASE("constant surfaces break ties toward the smallest thresholds") {
    // no positives at any cell: f1 is 0 everywhere
    std::vector<double> probs{0.1, 0.2};
    std::vector<double> confs{0.5, 0.5};
    std::vector<double> truths{0, 0};
    auto t1 = decision::uniform_grid(5);
    auto t2 = decision::uniform_grid(5);
    auto surface = decision::decision_surface(probs, confs, truths, t1, t2);
    auto best = decision::best_operating_point(surface);
    CHECK(best.tau1 == 0.0);
    CHECK(best.tau2 == 0.0);
    CHECK(best.f1 == 0.0);
}

TEST_CASE("the zero gate slice is bitwise identical to the aleatoric analysis") {
    RngStream rng(71, 3);
    std::vector<double> probs(40), confs(40), truths(40);
    for (int i = 0; i < 40; ++i) {
        probs[i] = rng.uniform();
        confs[i] = rng.uniform();
        truths[i] = rng.bernoulli(0.5) ? 1.0 : 0.0;
    }
    auto t1 = decision::uniform_grid(21);
    auto gated = decision::decision_surface(probs, confs, truths, t1, decision::uniform_grid(21));
    auto aleatoric = decision::decision_surface(probs, confs, truths, t1, {0.0});
    for (std::size_t i1 = 0; i1 < t1.size(); ++i1) {
        CHECK(gated.f1[i1] == aleatoric.f1[i1]);
        CHECK(gated.precision[i1] == aleatoric.precision[i1]);
        CHECK(gated.recall[i1] == aleatoric.recall[i1]);
    }
}

TEST_CASE("the gated optimum dominates the aleatoric only optimum") {
    RngStream rng(73, 4);
    for (int trial = 0; trial < 10; ++trial) {
        std::size_t n = 30 + rng.uniform_index(50);
        std::vector<double> probs(n), confs(n), truths(n);
        for (std::size_t i = 0; i < n; ++i) {
            probs[i] = rng.uniform();
            confs[i] = rng.uniform();
            truths[i] = rng.bernoulli(0.3) ? 1.0 : 0.0;
        }
        auto t1 = decision::uniform_grid(21);
        auto t2 = decision::uniform_grid(21);
        auto surface = decision::decision_surface(probs, confs, truths, t1, t2);
        auto best = decision::best_operating_point(surface);
        double best_slice = 0.0;
        for (std::size_t i1 = 0; i1 < t1.size(); ++i1)
            best_slice = std::max(best_slice, surface.f1[i1]);  // row i2=0 is tau2=0
        CHECK(best.f1 >= best_slice);
    }
}

TEST_CASE("uniform grids span the unit interval inclusively") {
    auto grid = decision::uniform_grid(51);
    REQUIRE(grid.size() == 51);
    CHECK(grid.front() == 0.0);
    CHECK(grid.back() == 1.0);
    CHECK(grid[25] == doctest::Approx(0.5));
    for (std::size_t i = 1; i < grid.size(); ++i)
        CHECK(grid[i] - grid[i - 1] == doctest::Approx(0.02).epsilon(1e-9));
    CHECK_THROWS_AS(decision::uniform_grid(1), ContractError);
}

TEST_CASE("curve and surface tables carry their documented columns") {
    std::vector<double> preds{0.9, 0.1};
    std::vector<double> confs{0.8, 0.6};
    std::vector<double> truths{1, 0};
    auto curve = decision::reliability_curve(preds, confs, truths,
                                             decision::TaskKind::Classification,
                                             decision::uniform_grid(5));
    auto ct = decision::curve_table(curve);
    CHECK(ct.header == std::vector<std::string>{"tau", "loss", "count"});
    CHECK(ct.rows.size() == 5);

    auto surface =
        decision::decision_surface(preds, confs, truths, decision::uniform_grid(3),
                                   decision::uniform_grid(4));
    auto st = decision::surface_table(surface);
    CHECK(st.header == std::vector<std::string>{"tau1", "tau2", "f1", "precision", "recall"});
    CHECK(st.rows.size() == 12);

    auto dir = std::filesystem::temp_directory_path();
    auto cpath = (dir / "probcast_curve_out.csv").string();
    auto spath = (dir / "probcast_surface_out.csv").string();
    decision::save_curve(curve, cpath);
    decision::save_surface(surface, spath);
    CHECK(csv::read_file(cpath).rows.size() == 5);
    CHECK(csv::read_file(spath).rows.size() == 12);
    std::remove(cpath.c_str());
    std::remove(spath.c_str());
}
