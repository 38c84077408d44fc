#pragma once

#include <cmath>
#include <stdexcept>

#include "cmj/errors.hpp"
#include "cmj/lifespan.hpp"

// Analytic core: the Laplace exponent of the contour process,
//
//   psi(x) = x - b (1 - E[e^{-xV}]),
//
// its derivative psi'(x) = 1 - b E[V e^{-xV}], and the Malthusian
// parameter alpha, the unique positive root of psi (supercritical case
// b E[V] > 1).  psi is convex with psi(0) = 0 and psi'(0+) < 0, so the
// root is found by doubling a bracket and bisecting; no derivative needed.

namespace cmj {

class LevyModel {
public:
    LevyModel(double birth_rate, LifespanDistribution lifespan)
        : b_(birth_rate), dist_(lifespan) {
        if (!(b_ > 0.0)) throw ConfigError("birth rate must be > 0");
        if (!(b_ * dist_.mean() > 1.0))
            throw SubcriticalModel("b*E[V] <= 1: no positive Malthusian parameter");
        alpha_ = solve_alpha();
        // alpha must satisfy E[e^{-alpha V}] = 1 - alpha/b.
        const double res = dist_.laplace(alpha_) - (1.0 - alpha_ / b_);
        if (std::fabs(res) > 1e-10)
            throw std::logic_error("Malthusian root check failed");
        psi_prime_alpha_ = psi_prime(alpha_);
    }

    double b() const { return b_; }
    const LifespanDistribution& lifespan() const { return dist_; }
    double alpha() const { return alpha_; }
    double psi_prime_alpha() const { return psi_prime_alpha_; }

    double psi(double x) const {
        if (x == 0.0) return 0.0;
        return x - b_ * dist_.one_minus_laplace(x);
    }

    double psi_prime(double x) const {
        return 1.0 - b_ * dist_.laplace_v(x);
    }

    // E[e^{-lambda V}] - (1 + (psi(lambda) - lambda)/b); identically zero.
    double laplace_identity_residual(double lambda) const {
        return dist_.laplace(lambda) - (1.0 + (psi(lambda) - lambda) / b_);
    }

private:
    double solve_alpha() const {
        double lo = 1e-9;
        if (psi(lo) >= 0.0) throw std::logic_error("psi not negative near 0");
        double hi = 1.0;
        int guard = 0;
        while (psi(hi) <= 0.0) {
            hi *= 2.0;
            if (++guard > 200) throw std::logic_error("failed to bracket Malthusian root");
        }
        for (int i = 0; i < 200 && (hi - lo) > 1e-15 * std::max(1.0, hi); ++i) {
            const double mid = 0.5 * (lo + hi);
            (psi(mid) < 0.0 ? lo : hi) = mid;
        }
        return 0.5 * (lo + hi);
    }

    double b_;
    LifespanDistribution dist_;
    double alpha_;
    double psi_prime_alpha_;
};

}  // namespace cmj
