#pragma once

#include <cmath>
#include <functional>
#include <vector>

// Test-side numerical oracles, kept independent of the library's own
// computation paths: adaptive Simpson quadrature and a plain bisection
// root finder.

namespace testutil {

inline double simpson_rec(const std::function<double(double)>& f, double a, double b,
                          double fa, double fm, double fb, double tol, int depth) {
    const double m = 0.5 * (a + b);
    const double lm = 0.5 * (a + m), rm = 0.5 * (m + b);
    const double flm = f(lm), frm = f(rm);
    const double whole = (b - a) / 6.0 * (fa + 4.0 * fm + fb);
    const double left = (m - a) / 6.0 * (fa + 4.0 * flm + fm);
    const double right = (b - m) / 6.0 * (fm + 4.0 * frm + fb);
    if (depth <= 0 || std::fabs(left + right - whole) < 15.0 * tol)
        return left + right + (left + right - whole) / 15.0;
    return simpson_rec(f, a, m, fa, flm, fm, 0.5 * tol, depth - 1) +
           simpson_rec(f, m, b, fm, frm, fb, 0.5 * tol, depth - 1);
}

inline double integrate(const std::function<double(double)>& f, double a, double b,
                        double tol = 1e-12) {
    if (!(b > a)) return 0.0;
    const double m = 0.5 * (a + b);
    return simpson_rec(f, a, b, f(a), f(m), f(b), tol, 50);
}

inline double integrate_segments(const std::function<double(double)>& f,
                                 const std::vector<double>& cuts, double tol = 1e-12) {
    double acc = 0.0;
    for (std::size_t i = 1; i < cuts.size(); ++i)
        acc += integrate(f, cuts[i - 1], cuts[i], tol);
    return acc;
}

inline double bisect(const std::function<double(double)>& f, double lo, double hi,
                     int iters = 200) {
    for (int i = 0; i < iters; ++i) {
        const double mid = 0.5 * (lo + hi);
        (f(mid) < 0.0 ? lo : hi) = mid;
    }
    return 0.5 * (lo + hi);
}

inline double pearson_corr(const std::vector<double>& x, const std::vector<double>& y) {
    const auto n = static_cast<double>(x.size());
    double mx = 0, my = 0;
    for (std::size_t i = 0; i < x.size(); ++i) {
        mx += x[i];
        my += y[i];
    }
    mx /= n;
    my /= n;
    double sxy = 0, sxx = 0, syy = 0;
    for (std::size_t i = 0; i < x.size(); ++i) {
        sxy += (x[i] - mx) * (y[i] - my);
        sxx += (x[i] - mx) * (x[i] - mx);
        syy += (y[i] - my) * (y[i] - my);
    }
    return sxy / std::sqrt(sxx * syy);
}

}  // namespace testutil
