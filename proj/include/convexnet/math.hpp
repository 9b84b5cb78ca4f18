#pragma once

#include <cmath>
#include <span>

#include "convexnet/common.hpp"

namespace convexnet {

inline constexpr double pi_v = 3.141592653589793238462643383279502884;

/// Standard normal CDF via the complementary error function (abs error ~1e-16).
inline double norm_cdf(double x) {
    return 0.5 * std::erfc(-x / std::sqrt(2.0));
}

inline double norm_pdf(double x) {
    return std::exp(-0.5 * x * x) / std::sqrt(2.0 * pi_v);
}

/// Inverse standard normal CDF. Acklam's rational approximation
/// (|rel err| < 1.15e-9) followed by one Halley refinement against erfc,
/// which brings it to near machine precision while staying monotone.
inline double norm_inv(double p) {
    require(p > 0.0 && p < 1.0, "norm_inv: p must be in (0,1)");

    static constexpr double a[] = {-3.969683028665376e+01, 2.209460984245205e+02,
                                   -2.759285104469687e+02, 1.383577518672690e+02,
                                   -3.066479806614716e+01, 2.506628277459239e+00};
    static constexpr double b[] = {-5.447609879822406e+01, 1.615858368580409e+02,
                                   -1.556989798598866e+02, 6.680131188771972e+01,
                                   -1.328068155288572e+01};
    static constexpr double c[] = {-7.784894002430293e-03, -3.223964580411365e-01,
                                   -2.400758277161838e+00, -2.549732539343734e+00,
                                   4.374664141464968e+00,  2.938163982698783e+00};
    static constexpr double d[] = {7.784695709041462e-03, 3.224671290700398e-01,
                                   2.445134137142996e+00, 3.754408661907416e+00};
    constexpr double plow = 0.02425;
    constexpr double phigh = 1.0 - plow;

    double x;
    if (p < plow) {
        const double q = std::sqrt(-2.0 * std::log(p));
        x = (((((c[0] * q + c[1]) * q + c[2]) * q + c[3]) * q + c[4]) * q + c[5]) /
            ((((d[0] * q + d[1]) * q + d[2]) * q + d[3]) * q + 1.0);
    } else if (p <= phigh) {
        const double q = p - 0.5;
        const double r = q * q;
        x = (((((a[0] * r + a[1]) * r + a[2]) * r + a[3]) * r + a[4]) * r + a[5]) * q /
            (((((b[0] * r + b[1]) * r + b[2]) * r + b[3]) * r + b[4]) * r + 1.0);
    } else {
        const double q = std::sqrt(-2.0 * std::log(1.0 - p));
        x = -(((((c[0] * q + c[1]) * q + c[2]) * q + c[3]) * q + c[4]) * q + c[5]) /
            ((((d[0] * q + d[1]) * q + d[2]) * q + d[3]) * q + 1.0);
    }

    // Halley step on F(x) - p = 0.
    const double e = norm_cdf(x) - p;
    const double u = e / norm_pdf(x);
    x -= u / (1.0 + 0.5 * x * u);
    return x;
}

/// Numerically stable (1/lambda) * log(sum_i exp(lambda * y_i)).
/// Shifted by the max so it is overflow-free for any lambda > 0.
inline double logsumexp(std::span<const double> y, double lambda) {
    require(!y.empty(), "logsumexp: empty input");
    require(lambda > 0.0, "logsumexp: lambda must be positive");
    double m = y[0];
    for (double v : y)
        if (v > m) m = v;
    if (!std::isfinite(m)) throw numeric_error("logsumexp: non-finite input");
    double s = 0.0;
    for (double v : y) s += std::exp(lambda * (v - m));
    return m + std::log(s) / lambda;
}

/// Black-Scholes call with continuous dividend yield. Used by the market
/// module for reference values; the heavy lifting elsewhere is Monte Carlo.
inline double black_scholes_call(double s0, double strike, double r, double delta, double sigma,
                                 double maturity) {
    require(s0 > 0.0 && strike > 0.0, "black_scholes_call: s0 and strike must be positive");
    if (maturity <= 0.0 || sigma <= 0.0) {
        const double fwd = s0 * std::exp((r - delta) * maturity);
        const double intrinsic = fwd - strike;
        return std::exp(-r * maturity) * (intrinsic > 0.0 ? intrinsic : 0.0);
    }
    const double vol = sigma * std::sqrt(maturity);
    const double d1 = (std::log(s0 / strike) + (r - delta + 0.5 * sigma * sigma) * maturity) / vol;
    const double d2 = d1 - vol;
    return s0 * std::exp(-delta * maturity) * norm_cdf(d1) -
           strike * std::exp(-r * maturity) * norm_cdf(d2);
}

} // namespace convexnet
