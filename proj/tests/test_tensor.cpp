#include <cmath>
#include <random>
#include <vector>

#include "doctest.h"
#include "probcast/errors.hpp"
#include "probcast/tensor.hpp"
#include "testutil.hpp"

using namespace probcast;
using ad::Tensor;
using probcast::testutil::grad_check;

TEST_CASE("matmul identity leaves the operand unchanged") {
    auto eye = Tensor::from_values({2, 2}, {1, 0, 0, 1});
    auto a = Tensor::from_values({2, 2}, {1, 2, 3, 4});
    auto out = ad::matmul(eye, a);
    CHECK(out.values() == std::vector<double>{1, 2, 3, 4});
}

TEST_CASE("matmul of orthogonal vectors is zero") {
    auto row = Tensor::from_values({1, 2}, {1, 0});
    auto col = Tensor::from_values({2, 1}, {0, 1});
    auto out = ad::matmul(row, col);
    CHECK(out.numel() == 1);
    CHECK(out.item() == 0.0);
}

TEST_CASE("matmul shape mismatch names both operand shapes") {
    auto a = Tensor::from_values({2, 3}, {1, 2, 3, 4, 5, 6});
    auto b = Tensor::from_values({2, 2}, {1, 2, 3, 4});
    try {
        ad::matmul(a, b);
        FAIL("expected ShapeError");
    } catch (const ShapeError& e) {
        std::string msg = e.what();
        CHECK(msg.find("[2,3]") != std::string::npos);
        CHECK(msg.find("[2,2]") != std::string::npos);
    }
}

TEST_CASE("matmul gradient matches central finite differences") {
    std::mt19937_64 gen(7);
    std::normal_distribution<double> dist(0.0, 1.0);
    std::vector<double> av(6), bv(12);
    for (auto& v : av) v = dist(gen);
    for (auto& v : bv) v = dist(gen);
    auto a = Tensor::from_values({2, 3}, av, true, "a");
    auto b = Tensor::from_values({3, 4}, bv, true, "b");
    std::vector<Tensor> leaves{a, b};
    auto res = grad_check(leaves, [&] { return ad::sum(ad::matmul(a, b)); });
    CHECK(res.pass_fraction() == 1.0);
    CHECK(res.worst_rel < 1e-4);
}

TEST_CASE("softplus at zero gives ln 2 with derivative one half") {
    auto x = Tensor::from_values({1}, {0.0}, true);
    auto y = ad::softplus(x);
    CHECK(y.item() == doctest::Approx(std::log(2.0)).epsilon(1e-12));
    y.backward();
    CHECK(x.grad()[0] == doctest::Approx(0.5).epsilon(1e-12));
}

TEST_CASE("sigmoid at zero gives one half") {
    auto x = Tensor::from_values({1}, {0.0});
    CHECK(ad::sigmoid(x).item() == doctest::Approx(0.5).epsilon(1e-15));
}

TEST_CASE("derivative of x squared at three is six") {
    auto x = Tensor::from_values({1}, {3.0}, true);
    auto y = ad::square(x);
    y.backward();
    CHECK(x.grad()[0] == doctest::Approx(6.0).epsilon(1e-12));
}

TEST_CASE("log rejects non-positive input") {
    auto x = Tensor::from_values({2}, {1.0, 0.0});
    CHECK_THROWS_AS(ad::log(x), DomainError);
    auto neg = Tensor::from_values({1}, {-1.0});
    CHECK_THROWS_AS(ad::log(neg), DomainError);
}

TEST_CASE("sqrt rejects negative input") {
    auto x = Tensor::from_values({1}, {-4.0});
    CHECK_THROWS_AS(ad::sqrt(x), DomainError);
}

TEST_CASE("broadcast add sums gradients back to the smaller operand") {
    auto a = Tensor::from_values({2, 3}, {1, 2, 3, 4, 5, 6}, true, "a");
    auto b = Tensor::from_values({3}, {10, 20, 30}, true, "b");
    auto out = ad::add(a, b);
    CHECK(out.values() == std::vector<double>{11, 22, 33, 14, 25, 36});
    ad::sum(out).backward();
    CHECK(a.grad() == std::vector<double>(6, 1.0));
    CHECK(b.grad() == std::vector<double>(3, 2.0));

    std::vector<Tensor> leaves{a, b};
    auto res = grad_check(leaves, [&] { return ad::sum(ad::mul(a, b)); });
    CHECK(res.pass_fraction() == 1.0);
}

TEST_CASE("incompatible broadcast raises a shape error") {
    auto a = Tensor::from_values({2, 3}, {1, 2, 3, 4, 5, 6});
    auto b = Tensor::from_values({2}, {1, 2});
    CHECK_THROWS_AS(ad::add(a, b), ShapeError);
}

TEST_CASE("backward demands a scalar root") {
    auto x = Tensor::from_values({2}, {1.0, 2.0}, true);
    auto y = ad::mul_scalar(x, 2.0);
    CHECK_THROWS_AS(y.backward(), ContractError);
}

TEST_CASE("linear and quadratic single-variable gradients") {
    auto x = Tensor::from_values({1}, {2.0}, true);
    auto y = ad::mul_scalar(x, 3.0);
    y.backward();
    CHECK(x.grad()[0] == doctest::Approx(3.0));

    x.zero_grad();
    auto z = ad::mul(x, x);
    z.backward();
    CHECK(x.grad()[0] == doctest::Approx(4.0));
}

TEST_CASE("repeated backward accumulates and zero_grad resets") {
    auto x = Tensor::from_values({1}, {2.0}, true);
    auto y = ad::mul(x, x);
    y.backward();
    y.backward();
    CHECK(x.grad()[0] == doctest::Approx(8.0));
    x.zero_grad();
    y.backward();
    CHECK(x.grad()[0] == doctest::Approx(4.0));
}

TEST_CASE("backward twice with reset reproduces identical gradients") {
    std::mt19937_64 gen(11);
    std::normal_distribution<double> dist(0.0, 1.0);
    std::vector<double> wv(9), xv(3);
    for (auto& v : wv) v = dist(gen);
    for (auto& v : xv) v = dist(gen);
    auto w = Tensor::from_values({3, 3}, wv, true);
    auto x = Tensor::from_values({1, 3}, xv, true);
    auto loss = [&] { return ad::sum(ad::tanh(ad::matmul(x, w))); };

    loss().backward();
    auto first = w.grad();
    w.zero_grad();
    x.zero_grad();
    loss().backward();
    CHECK(w.grad() == first);
}

TEST_CASE("three layer network gradients match finite differences") {
    std::mt19937_64 gen(23);
    std::normal_distribution<double> dist(0.0, 0.5);
    auto rand_tensor = [&](ad::Shape shape, const std::string& name) {
        std::vector<double> v(ad::shape_numel(shape));
        for (auto& e : v) e = dist(gen);
        return Tensor::from_values(std::move(shape), std::move(v), true, name);
    };
    auto x = Tensor::from_values({2, 4}, {0.3, -1.2, 0.7, 0.1, -0.4, 0.9, -0.8, 0.2});
    auto w1 = rand_tensor({4, 5}, "w1");
    auto b1 = rand_tensor({5}, "b1");
    auto w2 = rand_tensor({5, 5}, "w2");
    auto b2 = rand_tensor({5}, "b2");
    auto w3 = rand_tensor({5, 1}, "w3");
    auto b3 = rand_tensor({1}, "b3");
    std::vector<Tensor> leaves{w1, b1, w2, b2, w3, b3};

    auto loss = [&] {
        auto h1 = ad::tanh(ad::add(ad::matmul(x, w1), b1));
        auto h2 = ad::relu(ad::add(ad::matmul(h1, w2), b2));
        auto out = ad::add(ad::matmul(h2, w3), b3);
        return ad::mean(ad::square(out));
    };
    auto res = grad_check(leaves, loss);
    CHECK(res.worst_rel < 1e-4);
    CHECK(res.pass_fraction() >= 0.99);
}

TEST_CASE("diamond shaped graph accumulates through both branches") {
    auto x = Tensor::from_values({1}, {1.5}, true);
    auto a = ad::mul(x, x);       // x^2
    auto b = ad::mul_scalar(x, 3);  // 3x
    auto y = ad::mul(a, b);       // 3x^3, dy/dx = 9x^2
    y.backward();
    CHECK(x.grad()[0] == doctest::Approx(9.0 * 1.5 * 1.5).epsilon(1e-12));
}

TEST_CASE("row softmax rows sum to one and gradients check") {
    auto x = Tensor::from_values({2, 3}, {1.0, 2.0, 3.0, -1.0, 0.0, 1.0}, true);
    auto s = ad::row_softmax(x);
    const auto& v = s.values();
    CHECK(v[0] + v[1] + v[2] == doctest::Approx(1.0).epsilon(1e-12));
    CHECK(v[3] + v[4] + v[5] == doctest::Approx(1.0).epsilon(1e-12));

    std::vector<Tensor> leaves{x};
    auto weights = Tensor::from_values({2, 3}, {0.3, -0.7, 1.1, 0.5, 0.2, -0.9});
    auto res = grad_check(leaves, [&] { return ad::sum(ad::mul(ad::row_softmax(x), weights)); });
    CHECK(res.pass_fraction() == 1.0);
}

TEST_CASE("gaussian nll matches the closed form at unit variance") {
    auto mu = Tensor::from_values({1}, {0.0});
    auto var = Tensor::from_values({1}, {1.0});
    auto y = Tensor::from_values({1}, {0.0});
    auto nll = ad::gaussian_nll(mu, var, y, ad::Reduction::Mean);
    CHECK(nll.item() == doctest::Approx(0.9189385332046727).epsilon(1e-14));

    auto y1 = Tensor::from_values({1}, {1.0});
    auto nll1 = ad::gaussian_nll(mu, var, y1, ad::Reduction::Mean);
    CHECK(nll1.item() == doctest::Approx(1.4189385332046727).epsilon(1e-14));
}

TEST_CASE("gaussian nll over a batch is minimized at variance equal to squared residual") {
    const double resid = 1.7;
    auto mu = Tensor::from_values({1}, {0.0});
    auto y = Tensor::from_values({1}, {resid});
    double best_var = -1.0, best_nll = 1e300;
    for (double v = 0.5; v <= 6.0; v += 1e-3) {
        auto var = Tensor::from_values({1}, {v});
        double nll = ad::gaussian_nll(mu, var, y, ad::Reduction::Mean).item();
        if (nll < best_nll) {
            best_nll = nll;
            best_var = v;
        }
    }
    CHECK(best_var == doctest::Approx(resid * resid).epsilon(1e-2));
}

TEST_CASE("gaussian nll gradients match finite differences in both reductions") {
    auto mu = Tensor::from_values({2, 2}, {0.1, -0.3, 0.8, 0.0}, true);
    auto raw = Tensor::from_values({2, 2}, {0.2, -0.1, 0.4, 0.9}, true);
    auto y = Tensor::from_values({2, 2}, {0.0, 0.5, 1.0, -0.5});
    std::vector<Tensor> leaves{mu, raw};
    for (auto reduction : {ad::Reduction::Sum, ad::Reduction::Mean}) {
        auto res = grad_check(leaves, [&] {
            auto var = ad::add_scalar(ad::softplus(raw), 1e-6);
            return ad::gaussian_nll(mu, var, y, reduction);
        });
        CHECK(res.pass_fraction() == 1.0);
    }
}

TEST_CASE("binary cross entropy with zero logit is ln 2") {
    auto logits = Tensor::from_values({1}, {0.0});
    auto target = Tensor::from_values({1}, {1.0});
    auto loss = ad::binary_cross_entropy_with_logits(logits, target, ad::Reduction::Mean);
    CHECK(loss.item() == doctest::Approx(std::log(2.0)).epsilon(1e-14));
}

TEST_CASE("binary cross entropy stays finite at extreme logits") {
    auto logits = Tensor::from_values({2}, {40.0, -40.0});
    auto target = Tensor::from_values({2}, {0.0, 1.0});
    auto loss = ad::binary_cross_entropy_with_logits(logits, target, ad::Reduction::Sum);
    CHECK(std::isfinite(loss.item()));
    CHECK(loss.item() == doctest::Approx(80.0).epsilon(1e-6));
}

TEST_CASE("binary cross entropy gradients match finite differences") {
    auto logits = Tensor::from_values({2, 2}, {0.3, -1.5, 2.0, 0.0}, true);
    auto target = Tensor::from_values({2, 2}, {1.0, 0.0, 1.0, 0.0});
    std::vector<Tensor> leaves{logits};
    for (auto reduction : {ad::Reduction::Sum, ad::Reduction::Mean}) {
        auto res = grad_check(
            leaves, [&] { return ad::binary_cross_entropy_with_logits(logits, target, reduction); });
        CHECK(res.pass_fraction() == 1.0);
    }
}

TEST_CASE("structure ops round trip and differentiate") {
    auto x = Tensor::from_values({2, 4}, {1, 2, 3, 4, 5, 6, 7, 8}, true);
    auto t = ad::transpose(x);
    CHECK(t.shape() == ad::Shape{4, 2});
    CHECK(t.values() == std::vector<double>{1, 5, 2, 6, 3, 7, 4, 8});

    auto left = ad::slice_cols(x, 0, 2);
    auto right = ad::slice_cols(x, 2, 4);
    auto glued = ad::concat_cols(left, right);
    CHECK(glued.values() == x.values());

    std::vector<Tensor> leaves{x};
    auto res = grad_check(leaves, [&] {
        auto a = ad::slice_cols(x, 1, 3);
        auto b = ad::transpose(a);
        return ad::sum(ad::square(b));
    });
    CHECK(res.pass_fraction() == 1.0);
}

TEST_CASE("no-grad guard suppresses graph recording") {
    auto x = Tensor::from_values({1}, {2.0}, true);
    {
        ad::NoGradGuard guard;
        auto y = ad::mul(x, x);
        CHECK_FALSE(y.requires_grad());
    }
    auto z = ad::mul(x, x);
    CHECK(z.requires_grad());
}
