#pragma once

#include <algorithm>
#include <cmath>
#include <vector>

#include "cmj/errors.hpp"
#include "cmj/scale.hpp"

// Law of the residual lifetimes O_i (i >= 2) of the individuals alive at
// level u:
//
//   density(x) = int_0^u  W(u-y)/(W(u)-1) * b * f_V(x+y) dy
//
// for lifetime laws with a density, and for Deterministic(v0)
//
//   density(x) = b W(u-v0+x) / (W(u)-1)   on (max(0, v0-u), v0).
//
// Ratios of W are evaluated through the tilted table values, so nothing
// exponentially large is ever formed.  As u -> inf the density converges to
// the tilted Upsilon density b e^{ax} E[e^{-aV} 1_{V>x}], which covers the
// deterministic case as well.

namespace cmj {

inline double overshoot_limit_density(const LevyModel& m, double x) {
    if (m.lifespan().is_infinite())
        throw UnsupportedLifespan("overshoot law undefined for infinite lifetimes");
    if (x <= 0.0) return 0.0;
    return upsilon_tilted_density(m, x);
}

// quad_step <= 0 selects the table step.
inline double overshoot_density(const LevyModel& m, const ScaleTable& tbl, double u, double x,
                                double quad_step = 0.0) {
    const auto& dist = m.lifespan();
    if (dist.is_infinite())
        throw UnsupportedLifespan("overshoot law undefined for infinite lifetimes");
    if (!(u > 0.0)) throw ConfigError("overshoot density: u must be > 0");
    if (u > tbl.t_max() * (1.0 + 1e-12))
        throw std::out_of_range("overshoot density: table horizon below u");
    if (x <= 0.0) return 0.0;

    const double a = m.alpha();
    // W(u) - 1 in tilted form.
    const double denom = tbl.tilted_w(u) - std::exp(-a * u);

    if (dist.kind() == LifespanDistribution::Kind::Deterministic) {
        const double v0 = dist.param_a();
        if (x >= v0 || x <= v0 - u) return 0.0;
        const double arg = u - v0 + x;
        return m.b() * std::exp(a * (x - v0)) * tbl.tilted_w(arg) / denom;
    }

    // Integrand vanishes once x+y leaves the lifetime support.
    const double y_max = std::min(u, dist.upper_point(1e-18) - x);
    if (y_max <= 0.0) return 0.0;
    const double h = quad_step > 0.0 ? quad_step : tbl.step();
    const auto n = std::max<std::size_t>(1, static_cast<std::size_t>(std::ceil(y_max / h - 1e-9)));
    const double w = y_max / static_cast<double>(n);
    // ratio(y) = W(u-y)/(W(u)-1) = e^{-ay} u~(u-y) / denom
    double acc = 0.0;
    for (std::size_t k = 0; k <= n; ++k) {
        const double y = w * static_cast<double>(k);
        double term = std::exp(-a * y) * tbl.tilted_w(u - y) * dist.density(x + y);
        if (k == 0 || k == n) term *= 0.5;
        acc += term;
    }
    return m.b() * w * acc / denom;
}

// Tabulated inverse-CDF sampler for the level-u overshoot law; used as the
// root-lifespan override in the subtree experiments.
class OvershootSampler {
public:
    OvershootSampler(const LevyModel& m, const ScaleTable& tbl, double u,
                     std::size_t grid = 4096)
        : alpha_(m.alpha()) {
        const auto& dist = m.lifespan();
        if (dist.is_infinite())
            throw UnsupportedLifespan("overshoot sampler undefined for infinite lifetimes");
        x_lo_ = 0.0;
        double x_hi = dist.upper_point(1e-13);
        if (dist.kind() == LifespanDistribution::Kind::Deterministic) {
            const double v0 = dist.param_a();
            x_lo_ = std::max(0.0, v0 - u);
            x_hi = v0;
        }
        const double quad_step = std::max(tbl.step(), u / 4000.0);
        x_.resize(grid + 1);
        cdf_.resize(grid + 1);
        const double dx = (x_hi - x_lo_) / static_cast<double>(grid);
        // Midpoint cell masses: the density jumps at the support
        // endpoints (open interval), so node evaluation would lose
        // O(dx) mass there.
        cdf_[0] = 0.0;
        x_[0] = x_lo_;
        for (std::size_t j = 1; j <= grid; ++j) {
            x_[j] = x_lo_ + dx * static_cast<double>(j);
            const double xm = x_lo_ + dx * (static_cast<double>(j) - 0.5);
            cdf_[j] = cdf_[j - 1] + dx * overshoot_density(m, tbl, u, xm, quad_step);
        }
        total_mass_ = cdf_.back();
        for (auto& c : cdf_) c /= total_mass_;
    }

    // Trapezoidal mass of the tabulated density before normalization;
    // should sit near 1 (diagnostic).
    double total_mass() const { return total_mass_; }

    double sample(Rng& rng) const {
        const double p = rng.uniform();
        const auto it = std::upper_bound(cdf_.begin(), cdf_.end(), p);
        const auto j = static_cast<std::size_t>(
            std::max<std::ptrdiff_t>(1, it - cdf_.begin()));
        const auto k = std::min(j, cdf_.size() - 1);
        const double c0 = cdf_[k - 1], c1 = cdf_[k];
        const double f = c1 > c0 ? (p - c0) / (c1 - c0) : 0.0;
        return x_[k - 1] + f * (x_[k] - x_[k - 1]);
    }

    double survival(double s) const {
        if (s <= x_.front()) return 1.0;
        if (s >= x_.back()) return 0.0;
        const auto it = std::upper_bound(x_.begin(), x_.end(), s);
        const auto k = static_cast<std::size_t>(it - x_.begin());
        const double f = (s - x_[k - 1]) / (x_[k] - x_[k - 1]);
        return 1.0 - (cdf_[k - 1] * (1.0 - f) + cdf_[k] * f);
    }

    // b * int_0^inf e^{-as} P(O > s) ds, the Lemma-type weight entering the
    // subtree variance limit (approaches b psi'(a)/a as u grows).
    double exp_weighted_survival_integral(double b) const {
        double acc = (1.0 - std::exp(-alpha_ * x_.front())) / alpha_;  // survival == 1 below x_lo
        for (std::size_t j = 1; j < x_.size(); ++j) {
            const double s0 = x_[j - 1], s1 = x_[j];
            const double g0 = std::exp(-alpha_ * s0) * (1.0 - cdf_[j - 1]);
            const double g1 = std::exp(-alpha_ * s1) * (1.0 - cdf_[j]);
            acc += 0.5 * (s1 - s0) * (g0 + g1);
        }
        return b * acc;
    }

private:
    double alpha_;
    double x_lo_ = 0.0;
    double total_mass_ = 0.0;
    std::vector<double> x_;
    std::vector<double> cdf_;
};

}  // namespace cmj
