#include "probcast/mathutil.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>

#include "probcast/errors.hpp"

namespace probcast {

double norm_pdf(double z) {
    return std::exp(-0.5 * z * z) / std::sqrt(2.0 * std::numbers::pi);
}

double norm_cdf(double z) {
    return 0.5 * std::erfc(-z * std::numbers::sqrt2 / 2.0);
}

double norm_quantile(double p) {
    if (!(p > 0.0 && p < 1.0)) throw DomainError("norm_quantile requires p in (0,1)");

    // Acklam's rational approximation.
    static const double a[] = {-3.969683028665376e+01, 2.209460984245205e+02,
                               -2.759285104469687e+02, 1.383577518672690e+02,
                               -3.066479806614716e+01, 2.506628277459239e+00};
    static const double b[] = {-5.447609879822406e+01, 1.615858368580409e+02,
                               -1.556989798598866e+02, 6.680131188771972e+01,
                               -1.328068155288572e+01};
    static const double c[] = {-7.784894002430293e-03, -3.223964580411365e-01,
                               -2.400758277161838e+00, -2.549732539343734e+00,
                               4.374664141464968e+00,  2.938163982698783e+00};
    static const double d[] = {7.784695709041462e-03, 3.224671290700398e-01,
                               2.445134137142996e+00, 3.754408661907416e+00};
    const double plow = 0.02425;
    double x;
    if (p < plow) {
        double q = std::sqrt(-2.0 * std::log(p));
        x = (((((c[0] * q + c[1]) * q + c[2]) * q + c[3]) * q + c[4]) * q + c[5]) /
            ((((d[0] * q + d[1]) * q + d[2]) * q + d[3]) * q + 1.0);
    } else if (p <= 1.0 - plow) {
        double q = p - 0.5;
        double r = q * q;
        x = (((((a[0] * r + a[1]) * r + a[2]) * r + a[3]) * r + a[4]) * r + a[5]) * q /
            (((((b[0] * r + b[1]) * r + b[2]) * r + b[3]) * r + b[4]) * r + 1.0);
    } else {
        double q = std::sqrt(-2.0 * std::log(1.0 - p));
        x = -(((((c[0] * q + c[1]) * q + c[2]) * q + c[3]) * q + c[4]) * q + c[5]) /
            ((((d[0] * q + d[1]) * q + d[2]) * q + d[3]) * q + 1.0);
    }
    // one Newton step against the exact CDF
    double e = norm_cdf(x) - p;
    x -= e / norm_pdf(x);
    return x;
}

double gaussian_logpdf(double x, double mu, double sigma) {
    if (!(sigma > 0.0)) throw DomainError("gaussian_logpdf requires sigma > 0");
    double z = (x - mu) / sigma;
    return -0.5 * z * z - std::log(sigma) - 0.5 * std::log(2.0 * std::numbers::pi);
}

double laplace_logpdf(double x, double loc, double scale) {
    if (!(scale > 0.0)) throw DomainError("laplace_logpdf requires scale > 0");
    return -std::abs(x - loc) / scale - std::log(2.0 * scale);
}

double empirical_quantile(const std::vector<double>& sorted, double q) {
    if (sorted.empty()) throw ContractError("empirical_quantile on empty sample");
    if (q <= 0.0) return sorted.front();
    if (q >= 1.0) return sorted.back();
    double pos = q * static_cast<double>(sorted.size() - 1);
    std::size_t lo = static_cast<std::size_t>(pos);
    double frac = pos - static_cast<double>(lo);
    if (lo + 1 >= sorted.size()) return sorted.back();
    return sorted[lo] * (1.0 - frac) + sorted[lo + 1] * frac;
}

}  // namespace probcast
