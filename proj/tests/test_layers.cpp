#include <cmath>
#include <vector>

#include "doctest.h"
#include "probcast/errors.hpp"
#include "probcast/layers.hpp"
#include "probcast/mathutil.hpp"
#include "probcast/rng.hpp"
#include "probcast/tensor.hpp"
#include "probcast/uncertainty.hpp"
#include "testutil.hpp"

using namespace probcast;
using ad::Tensor;
using probcast::testutil::grad_check;

TEST_CASE("dense layer maps shapes and differentiates") {
    RngStream rng(1, 0);
    nn::Dense layer(4, 3, rng, "d");
    auto x = Tensor::from_values({2, 4}, {0.1, -0.2, 0.3, 0.4, -0.5, 0.6, 0.7, -0.8}, true);
    auto out = layer.forward(x);
    CHECK(out.shape() == ad::Shape{2, 3});

    std::vector<Tensor> leaves{layer.weight, layer.bias, x};
    auto res = grad_check(leaves, [&] { return ad::sum(ad::square(layer.forward(x))); });
    CHECK(res.pass_fraction() == 1.0);
}

TEST_CASE("zero rate dropout is the identity in both modes") {
    RngStream rng(2, 0);
    auto x = Tensor::from_values({3, 3}, {1, 2, 3, 4, 5, 6, 7, 8, 9});
    auto a = nn::dropout(x, 0.0, nn::DropoutMode::Stochastic, rng);
    auto b = nn::dropout(x, 0.0, nn::DropoutMode::Deterministic, rng);
    CHECK(a.values() == x.values());
    CHECK(b.values() == x.values());
}

TEST_CASE("deterministic dropout never masks") {
    RngStream rng(2, 1);
    auto x = Tensor::full({4, 4}, 1.0);
    auto out = nn::dropout(x, 0.7, nn::DropoutMode::Deterministic, rng);
    CHECK(out.values() == x.values());
}

TEST_CASE("stochastic dropout keeps expectation and scales survivors") {
    const double rate = 0.4;
    const std::size_t n = 20000;
    RngStream rng(3, 5);
    auto x = Tensor::full({1, n}, 1.0);
    auto out = nn::dropout(x, rate, nn::DropoutMode::Stochastic, rng);
    std::size_t kept = 0;
    double sum = 0.0;
    for (double v : out.values()) {
        if (v != 0.0) {
            ++kept;
            CHECK(v == doctest::Approx(1.0 / (1.0 - rate)).epsilon(1e-12));
        }
        sum += v;
    }
    CHECK(std::abs(double(kept) / n - (1.0 - rate)) < 0.02);
    CHECK(sum / double(n) == doctest::Approx(1.0).epsilon(0.05));
}

TEST_CASE("dropout mask draws are reproducible per stream") {
    RngStream a(9, 7), b(9, 7);
    auto m1 = nn::dropout_mask({2, 8}, 0.5, a);
    auto m2 = nn::dropout_mask({2, 8}, 0.5, b);
    CHECK(m1.values() == m2.values());
}

TEST_CASE("dropout rejects rates at or above one") {
    RngStream rng(1, 1);
    auto x = Tensor::full({2, 2}, 1.0);
    CHECK_THROWS_AS(nn::dropout(x, 1.0, nn::DropoutMode::Stochastic, rng), ContractError);
    CHECK_THROWS_AS(nn::dropout(x, -0.1, nn::DropoutMode::Stochastic, rng), ContractError);
}

TEST_CASE("variational dense closed form kl matches monte carlo") {
    RngStream rng(4, 0);
    nn::PriorSpec prior;
    prior.scale = 0.1;
    nn::VariationalDense layer(3, 2, prior, rng, "v");

    RngStream kl_rng(4, 1);
    double closed = layer.kl(kl_rng, 0).item();

    // estimate the same divergence by sampling weights from the posterior
    RngStream mc(4, 2);
    const int draws = 200000;
    double acc = 0.0;
    auto accumulate = [&](const Tensor& mu_t, const Tensor& rho_t) {
        auto sigma = nn::posterior_sigma(rho_t);
        const auto& mu = mu_t.values();
        const auto& sd = sigma.values();
        for (std::size_t i = 0; i < mu.size(); ++i) {
            double local = 0.0;
            for (int d = 0; d < draws / 1000; ++d) {
                double w = mu[i] + sd[i] * mc.normal();
                local += gaussian_logpdf(w, mu[i], sd[i]) -
                         gaussian_logpdf(w, prior.location, prior.scale);
            }
            acc += local / double(draws / 1000);
        }
    };
    accumulate(layer.mu_w, layer.rho_w);
    accumulate(layer.mu_b, layer.rho_b);
    CHECK(acc == doctest::Approx(closed).epsilon(0.02));
}

TEST_CASE("variational dense laplace prior kl matches quadrature") {
    RngStream rng(5, 0);
    nn::PriorSpec prior;
    prior.family = nn::PriorSpec::Family::Laplace;
    prior.scale = 0.1;
    nn::VariationalDense layer(2, 2, prior, rng, "vl");

    RngStream kl_rng(5, 1);
    double mc_kl = layer.kl(kl_rng, 4000).item();

    auto sigma_w = nn::posterior_sigma(layer.rho_w);
    auto sigma_b = nn::posterior_sigma(layer.rho_b);
    double quad = 0.0;
    auto add_quad = [&](const std::vector<double>& mu, const std::vector<double>& sd) {
        for (std::size_t i = 0; i < mu.size(); ++i) {
            double m = mu[i], s = sd[i];
            quad += adaptive_simpson(
                [&](double w) {
                    double logq = gaussian_logpdf(w, m, s);
                    double logp = laplace_logpdf(w, prior.location, prior.scale);
                    return std::exp(logq) * (logq - logp);
                },
                m - 12.0 * s, m + 12.0 * s, 1e-10);
        }
    };
    add_quad(layer.mu_w.values(), sigma_w.values());
    add_quad(layer.mu_b.values(), sigma_b.values());
    CHECK(mc_kl == doctest::Approx(quad).epsilon(0.05));
}

TEST_CASE("variational forward modes agree in expectation") {
    RngStream rng(6, 0);
    nn::PriorSpec prior;
    nn::VariationalDense layer(3, 2, prior, rng, "vm");
    auto x = Tensor::from_values({1, 3}, {0.5, -0.3, 0.8});

    auto mean_out = layer.forward_mean(x).values();
    const int draws = 20000;
    std::vector<double> acc_ws(2, 0.0), acc_lr(2, 0.0);
    RngStream s1(6, 1), s2(6, 2);
    for (int d = 0; d < draws; ++d) {
        ad::NoGradGuard guard;
        auto ws = layer.forward(x, s1, nn::VariationalMode::WeightSample).values();
        auto lr = layer.forward(x, s2, nn::VariationalMode::LocalReparam).values();
        for (int j = 0; j < 2; ++j) {
            acc_ws[j] += ws[j];
            acc_lr[j] += lr[j];
        }
    }
    for (int j = 0; j < 2; ++j) {
        CHECK(acc_ws[j] / draws == doctest::Approx(mean_out[j]).epsilon(0.05));
        CHECK(acc_lr[j] / draws == doctest::Approx(mean_out[j]).epsilon(0.05));
    }
}

TEST_CASE("variational dense gradients flow through both modes") {
    RngStream rng(7, 0);
    nn::PriorSpec prior;
    nn::VariationalDense layer(2, 2, prior, rng, "vg");
    auto x = Tensor::from_values({2, 2}, {0.3, -0.4, 0.1, 0.9});
    std::vector<Tensor> leaves{layer.mu_w, layer.rho_w, layer.mu_b, layer.rho_b};

    for (auto mode : {nn::VariationalMode::WeightSample, nn::VariationalMode::LocalReparam}) {
        auto res = grad_check(leaves, [&] {
            RngStream fixed(7, 99);  // identical draws on every forward rebuild
            return ad::sum(ad::square(layer.forward(x, fixed, mode)));
        });
        CHECK(res.pass_fraction() >= 0.99);
    }

    auto res_kl = grad_check(leaves, [&] {
        RngStream fixed(7, 100);
        return layer.kl(fixed, 0);
    });
    CHECK(res_kl.pass_fraction() == 1.0);
}

TEST_CASE("lstm cell advances state and keeps one mask per sequence") {
    RngStream rng(8, 0);
    nn::LstmCell cell(3, 5, rng, "lstm");
    auto state = cell.initial_state(2);
    CHECK(state.h.shape() == ad::Shape{2, 5});
    CHECK(state.c.shape() == ad::Shape{2, 5});

    RngStream mask_rng(8, 1);
    auto masks = cell.make_masks(2, 0.0, nn::DropoutMode::Deterministic, mask_rng);
    auto x0 = Tensor::from_values({2, 3}, {0.1, 0.2, 0.3, -0.1, -0.2, -0.3});
    auto h1 = cell.step(state, x0, masks);
    CHECK(h1.shape() == ad::Shape{2, 5});
    auto h2 = cell.step(state, x0, masks);
    // the state advanced, so identical input gives a different hidden vector
    bool changed = h1.values() != h2.values();
    CHECK(changed);

    for (double v : state.h.values()) CHECK(std::abs(v) <= 1.0);
}

TEST_CASE("lstm step gradients match finite differences") {
    RngStream rng(8, 5);
    nn::LstmCell cell(2, 3, rng, "lg");
    auto x0 = Tensor::from_values({1, 2}, {0.4, -0.6});
    auto x1 = Tensor::from_values({1, 2}, {-0.2, 0.5});
    std::vector<Tensor> leaves;
    std::vector<nn::NamedParam> params;
    cell.params(params);
    for (auto& p : params) leaves.push_back(p.tensor);

    auto res = grad_check(leaves, [&] {
        RngStream mask_rng(8, 6);
        auto masks = cell.make_masks(1, 0.0, nn::DropoutMode::Deterministic, mask_rng);
        auto state = cell.initial_state(1);
        cell.step(state, x0, masks);
        auto out = cell.step(state, x1, masks);
        return ad::sum(ad::square(out));
    });
    CHECK(res.pass_fraction() >= 0.99);
}

TEST_CASE("glu gates its linear path") {
    RngStream rng(9, 0);
    nn::Glu glu(3, 4, rng, "glu");
    auto x = Tensor::from_values({2, 3}, {0.2, -0.5, 0.8, 1.0, 0.0, -1.0}, true);
    auto out = glu.forward(x);
    CHECK(out.shape() == ad::Shape{2, 4});

    // gate in (0,1): output magnitude is bounded by the linear path
    auto linear = ad::add(ad::matmul(x, ad::transpose(glu.linear_w)), glu.linear_b);
    for (std::size_t i = 0; i < out.numel(); ++i) {
        CHECK(std::abs(out.values()[i]) <= std::abs(linear.values()[i]) + 1e-12);
    }

    std::vector<Tensor> leaves{glu.linear_w, glu.linear_b, glu.gate_w, glu.gate_b, x};
    auto res = grad_check(leaves, [&] { return ad::sum(ad::square(glu.forward(x))); });
    CHECK(res.pass_fraction() == 1.0);
}

TEST_CASE("learned adjacency is row stochastic and non-negative") {
    RngStream rng(10, 0);
    auto emb = nn::glorot_init(4, 3, rng, "emb");
    auto adj = nn::learned_adjacency(emb);
    CHECK(adj.shape() == ad::Shape{4, 4});
    for (std::size_t r = 0; r < 4; ++r) {
        double row = 0.0;
        for (std::size_t c = 0; c < 4; ++c) {
            double v = adj.values()[r * 4 + c];
            CHECK(v >= 0.0);
            row += v;
        }
        CHECK(row == doctest::Approx(1.0).epsilon(1e-12));
    }
}

TEST_CASE("graph conv mixes neighbors and differentiates") {
    auto adj = Tensor::from_values({2, 2}, {1.0, 0.0, 0.5, 0.5});
    auto h = Tensor::from_values({2, 3}, {1, 2, 3, 5, 6, 7}, true);
    RngStream rng(10, 1);
    auto w = nn::glorot_init(3, 3, rng, "gw");
    auto out = nn::graph_conv(adj, h, w);
    CHECK(out.shape() == ad::Shape{2, 3});

    std::vector<Tensor> leaves{h, w};
    auto emb = Tensor::from_values({2, 2}, {0.3, -0.2, 0.7, 0.1}, true);
    leaves.push_back(emb);
    auto res = grad_check(leaves, [&] {
        auto a = nn::learned_adjacency(emb);
        return ad::sum(ad::square(nn::graph_conv(a, h, w)));
    });
    CHECK(res.pass_fraction() >= 0.99);
}

TEST_CASE("heteroscedastic head variance respects its floor") {
    RngStream rng(11, 0);
    nn::HeteroscedasticHead head(4, 2, rng, "head");
    // drive the variance path strongly negative: softplus output still > floor
    auto x = Tensor::from_values({1, 4}, {-50.0, -50.0, -50.0, -50.0});
    auto out = head.forward(x);
    CHECK(out.mean.shape() == ad::Shape{1, 2});
    CHECK(out.variance.shape() == ad::Shape{1, 2});
    for (double v : out.variance.values()) CHECK(v >= nn::HeteroscedasticHead::kVarianceFloor);

    std::vector<Tensor> leaves;
    std::vector<nn::NamedParam> params;
    head.params(params);
    for (auto& p : params) leaves.push_back(p.tensor);
    auto input = Tensor::from_values({2, 4}, {0.1, 0.5, -0.3, 0.2, 0.7, -0.9, 0.4, 0.0});
    auto target = Tensor::from_values({2, 2}, {0.2, -0.4, 0.9, 0.3});
    auto res = grad_check(leaves, [&] {
        auto o = head.forward(input);
        return ad::gaussian_nll(o.mean, o.variance, target, ad::Reduction::Mean);
    });
    CHECK(res.pass_fraction() >= 0.99);
}
