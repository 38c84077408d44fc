#pragma once

#include <cmath>
#include <limits>
#include <stdexcept>

// Small set of special functions needed by the distributions and the
// goodness-of-fit machinery: regularized incomplete gamma (series +
// Lentz continued fraction), chi-square tail, Kolmogorov distribution
// survival function, normal tail for z-scores.

namespace cmj {

namespace detail {

inline double gamma_p_series(double a, double x) {
    double ap = a;
    double sum = 1.0 / a;
    double del = sum;
    for (int i = 0; i < 1000; ++i) {
        ap += 1.0;
        del *= x / ap;
        sum += del;
        if (std::fabs(del) < std::fabs(sum) * 1e-16) break;
    }
    return sum * std::exp(-x + a * std::log(x) - std::lgamma(a));
}

inline double gamma_q_contfrac(double a, double x) {
    constexpr double fpmin = 1e-300;
    double b = x + 1.0 - a;
    double c = 1.0 / fpmin;
    double d = 1.0 / b;
    double h = d;
    for (int i = 1; i < 1000; ++i) {
        const double an = -static_cast<double>(i) * (i - a);
        b += 2.0;
        d = an * d + b;
        if (std::fabs(d) < fpmin) d = fpmin;
        c = b + an / c;
        if (std::fabs(c) < fpmin) c = fpmin;
        d = 1.0 / d;
        const double del = d * c;
        h *= del;
        if (std::fabs(del - 1.0) < 1e-16) break;
    }
    return std::exp(-x + a * std::log(x) - std::lgamma(a)) * h;
}

}  // namespace detail

// Regularized lower incomplete gamma P(a, x) = gamma(a, x) / Gamma(a).
inline double gamma_p(double a, double x) {
    if (!(a > 0.0) || x < 0.0) throw std::domain_error("gamma_p: a > 0 and x >= 0 required");
    if (x == 0.0) return 0.0;
    if (x < a + 1.0) return detail::gamma_p_series(a, x);
    return 1.0 - detail::gamma_q_contfrac(a, x);
}

// Regularized upper incomplete gamma Q(a, x) = 1 - P(a, x).
inline double gamma_q(double a, double x) {
    if (!(a > 0.0) || x < 0.0) throw std::domain_error("gamma_q: a > 0 and x >= 0 required");
    if (x == 0.0) return 1.0;
    if (x < a + 1.0) return 1.0 - detail::gamma_p_series(a, x);
    return detail::gamma_q_contfrac(a, x);
}

// P(chi2_dof > x).
inline double chi_square_sf(double x, double dof) {
    if (x <= 0.0) return 1.0;
    return gamma_q(0.5 * dof, 0.5 * x);
}

// Survival function of the Kolmogorov distribution,
//   Q(x) = 2 sum_{k>=1} (-1)^{k-1} exp(-2 k^2 x^2).
// For small x the dual (Jacobi theta) form converges much faster.
inline double kolmogorov_sf(double x) {
    if (x <= 0.0) return 1.0;
    if (x < 1.18) {
        const double pi = 3.14159265358979323846;
        const double t = std::exp(-pi * pi / (8.0 * x * x));
        const double cdf = std::sqrt(2.0 * pi) / x *
                           (t + std::pow(t, 9.0) + std::pow(t, 25.0) + std::pow(t, 49.0));
        return std::min(1.0, std::max(0.0, 1.0 - cdf));
    }
    double sum = 0.0;
    double sign = 1.0;
    for (int k = 1; k <= 100; ++k) {
        const double term = std::exp(-2.0 * k * k * x * x);
        sum += sign * term;
        if (term < 1e-18) break;
        sign = -sign;
    }
    return std::min(1.0, std::max(0.0, 2.0 * sum));
}

// Two-sided normal p-value for a z-score.
inline double normal_two_sided_p(double z) {
    return std::erfc(std::fabs(z) / std::sqrt(2.0));
}

}  // namespace cmj
