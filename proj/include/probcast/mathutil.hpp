#pragma once

#include <cmath>
#include <vector>

namespace probcast {

/// Standard normal density.
double norm_pdf(double z);

/// Standard normal CDF, evaluated via erfc for full double accuracy.
double norm_cdf(double z);

/// Inverse standard normal CDF (Acklam's rational approximation polished
/// with one Newton step); |error| < 1e-13 over (0, 1).
double norm_quantile(double p);

/// log N(x | mu, sigma), sigma > 0.
double gaussian_logpdf(double x, double mu, double sigma);

/// log Laplace(x | loc, scale), scale > 0.
double laplace_logpdf(double x, double loc, double scale);

/// Empirical quantile with linear interpolation between closest ranks
/// (the "type 7" convention). `sorted` must be ascending and non-empty.
double empirical_quantile(const std::vector<double>& sorted, double q);

/// Adaptive Simpson integration of f over [a, b] to the given tolerance.
template <typename F>
double adaptive_simpson(F&& f, double a, double b, double tol, int max_depth = 40);

namespace detail {

template <typename F>
double simpson(F& f, double a, double fa, double b, double fb, double m, double fm) {
    return (b - a) / 6.0 * (fa + 4.0 * fm + fb);
}

template <typename F>
double adaptive_simpson_rec(F& f, double a, double fa, double b, double fb, double m, double fm,
                            double whole, double tol, int depth) {
    double lm = 0.5 * (a + m);
    double rm = 0.5 * (m + b);
    double flm = f(lm);
    double frm = f(rm);
    double left = simpson(f, a, fa, m, fm, lm, flm);
    double right = simpson(f, m, fm, b, fb, rm, frm);
    double delta = left + right - whole;
    if (depth <= 0 || std::abs(delta) <= 15.0 * tol) {
        return left + right + delta / 15.0;
    }
    return adaptive_simpson_rec(f, a, fa, m, fm, lm, flm, left, 0.5 * tol, depth - 1) +
           adaptive_simpson_rec(f, m, fm, b, fb, rm, frm, right, 0.5 * tol, depth - 1);
}

}  // namespace detail

template <typename F>
double adaptive_simpson(F&& f, double a, double b, double tol, int max_depth) {
    double fa = f(a);
    double fb = f(b);
    double m = 0.5 * (a + b);
    double fm = f(m);
    double whole = detail::simpson(f, a, fa, b, fb, m, fm);
    return detail::adaptive_simpson_rec(f, a, fa, b, fb, m, fm, whole, tol, max_depth);
}

}  // namespace probcast
