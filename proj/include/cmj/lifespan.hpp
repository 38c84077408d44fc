#pragma once

#include <charconv>
#include <cmath>
#include <cstdio>
#include <limits>
#include <string>
#include <string_view>

#include "cmj/errors.hpp"
#include "cmj/rng.hpp"
#include "cmj/special.hpp"

// Law of an individual lifetime V.  Everything downstream needs from it:
// survival function, (partial) Laplace transforms, mean, sampling, and
// where it exists a density.  Immutable after construction and freely
// shareable across threads; sampling takes a caller-owned stream.
//
// The never-dying case is represented by the Infinite variant; its draws
// return +inf, which every comparison treats as an infinite lifetime.

namespace cmj {

constexpr double kInfiniteLifetime = std::numeric_limits<double>::infinity();

class LifespanDistribution {
public:
    enum class Kind { Exponential, Deterministic, Uniform, Gamma, Infinite };

    static LifespanDistribution exponential(double rate) {
        if (!(rate > 0.0)) throw ConfigError("exponential lifespan: rate must be > 0");
        return LifespanDistribution(Kind::Exponential, rate, 0.0);
    }
    static LifespanDistribution deterministic(double v0) {
        if (!(v0 > 0.0)) throw ConfigError("deterministic lifespan: value must be > 0");
        return LifespanDistribution(Kind::Deterministic, v0, 0.0);
    }
    static LifespanDistribution uniform(double lo, double hi) {
        if (!(lo >= 0.0) || !(hi > lo)) throw ConfigError("uniform lifespan: need 0 <= lo < hi");
        return LifespanDistribution(Kind::Uniform, lo, hi);
    }
    static LifespanDistribution gamma(double shape, double scale) {
        if (!(shape > 0.0) || !(scale > 0.0))
            throw ConfigError("gamma lifespan: shape and scale must be > 0");
        return LifespanDistribution(Kind::Gamma, shape, scale);
    }
    static LifespanDistribution infinite() {
        return LifespanDistribution(Kind::Infinite, 0.0, 0.0);
    }

    Kind kind() const { return kind_; }
    bool is_infinite() const { return kind_ == Kind::Infinite; }

    // P(V > s), s >= 0.
    double survival(double s) const {
        switch (kind_) {
            case Kind::Exponential: return std::exp(-a_ * s);
            case Kind::Deterministic: return s < a_ ? 1.0 : 0.0;
            case Kind::Uniform:
                if (s < a_) return 1.0;
                if (s >= b_) return 0.0;
                return (b_ - s) / (b_ - a_);
            case Kind::Gamma: return s <= 0.0 ? 1.0 : gamma_q(a_, s / b_);
            case Kind::Infinite: return 1.0;
        }
        return 0.0;
    }

    double cdf(double s) const { return s <= 0.0 ? 0.0 : 1.0 - survival(s); }

    // E[V]; +inf for the Infinite variant.
    double mean() const {
        switch (kind_) {
            case Kind::Exponential: return 1.0 / a_;
            case Kind::Deterministic: return a_;
            case Kind::Uniform: return 0.5 * (a_ + b_);
            case Kind::Gamma: return a_ * b_;
            case Kind::Infinite: return kInfiniteLifetime;
        }
        return 0.0;
    }

    // E[e^{-lambda V}], lambda >= 0.
    double laplace(double lambda) const {
        if (lambda == 0.0) return kind_ == Kind::Infinite ? 0.0 : 1.0;
        switch (kind_) {
            case Kind::Exponential: return a_ / (lambda + a_);
            case Kind::Deterministic: return std::exp(-lambda * a_);
            case Kind::Uniform:
                return std::exp(-lambda * a_) * h1(lambda * (b_ - a_));
            case Kind::Gamma: return std::pow(1.0 + lambda * b_, -a_);
            case Kind::Infinite: return 0.0;
        }
        return 0.0;
    }

    // 1 - E[e^{-lambda V}], free of cancellation for small lambda (the
    // root bracketing of psi evaluates this at lambda ~ 1e-9).
    double one_minus_laplace(double lambda) const {
        if (lambda == 0.0) return kind_ == Kind::Infinite ? 1.0 : 0.0;
        switch (kind_) {
            case Kind::Exponential: return lambda / (lambda + a_);
            case Kind::Deterministic: return -std::expm1(-lambda * a_);
            case Kind::Uniform: {
                const double xlo = lambda * a_;
                const double xw = lambda * (b_ - a_);
                return xlo * h1(xlo) + std::exp(-xlo) * h1c(xw);
            }
            case Kind::Gamma: return -std::expm1(-a_ * std::log1p(lambda * b_));
            case Kind::Infinite: return 1.0;
        }
        return 0.0;
    }

    // E[e^{-lambda V} 1_{V > r}], the kernel behind the ladder-height
    // (Upsilon) density.  Non-increasing in both arguments.
    double partial_laplace(double lambda, double r) const {
        if (r <= 0.0) return laplace(lambda);
        switch (kind_) {
            case Kind::Exponential:
                return a_ / (lambda + a_) * std::exp(-(lambda + a_) * r);
            case Kind::Deterministic:
                return a_ > r ? std::exp(-lambda * a_) : 0.0;
            case Kind::Uniform: {
                if (r >= b_) return 0.0;
                const double c = std::max(r, a_);
                return std::exp(-lambda * c) * h1(lambda * (b_ - c)) * (b_ - c) / (b_ - a_);
            }
            case Kind::Gamma:
                return std::pow(1.0 + lambda * b_, -a_) * gamma_q(a_, r * (lambda + 1.0 / b_));
            case Kind::Infinite: return 0.0;
        }
        return 0.0;
    }

    // E[V e^{-lambda V}] = -d/dlambda laplace(lambda).
    double laplace_v(double lambda) const {
        switch (kind_) {
            case Kind::Exponential: {
                const double q = lambda + a_;
                return a_ / (q * q);
            }
            case Kind::Deterministic: return a_ * std::exp(-lambda * a_);
            case Kind::Uniform: return uniform_v_segment(lambda, a_, b_);
            case Kind::Gamma:
                return a_ * b_ * std::pow(1.0 + lambda * b_, -(a_ + 1.0));
            case Kind::Infinite: return 0.0;
        }
        return 0.0;
    }

    // E[V e^{-lambda V} 1_{V > r}].
    double laplace_v_tail(double lambda, double r) const {
        if (r <= 0.0) return laplace_v(lambda);
        switch (kind_) {
            case Kind::Exponential: {
                const double q = lambda + a_;
                return a_ * std::exp(-q * r) * (r / q + 1.0 / (q * q));
            }
            case Kind::Deterministic:
                return a_ > r ? a_ * std::exp(-lambda * a_) : 0.0;
            case Kind::Uniform: {
                if (r >= b_) return 0.0;
                return uniform_v_segment(lambda, std::max(r, a_), b_);
            }
            case Kind::Gamma:
                return a_ * b_ * std::pow(1.0 + lambda * b_, -(a_ + 1.0)) *
                       gamma_q(a_ + 1.0, r * (lambda + 1.0 / b_));
            case Kind::Infinite: return 0.0;
        }
        return 0.0;
    }

    bool has_density() const {
        return kind_ == Kind::Exponential || kind_ == Kind::Uniform || kind_ == Kind::Gamma;
    }

    double density(double x) const {
        switch (kind_) {
            case Kind::Exponential: return x < 0.0 ? 0.0 : a_ * std::exp(-a_ * x);
            case Kind::Uniform: return (x >= a_ && x <= b_) ? 1.0 / (b_ - a_) : 0.0;
            case Kind::Gamma:
                if (x < 0.0) return 0.0;
                if (x == 0.0) {
                    if (a_ > 1.0) return 0.0;
                    if (a_ == 1.0) return 1.0 / b_;
                    return std::numeric_limits<double>::infinity();
                }
                return std::exp((a_ - 1.0) * std::log(x) - x / b_ -
                                std::lgamma(a_) - a_ * std::log(b_));
            default:
                throw UnsupportedLifespan("lifespan variant has no density");
        }
    }

    double sample(Rng& rng) const {
        switch (kind_) {
            case Kind::Exponential: return rng.exponential(a_);
            case Kind::Deterministic: return a_;
            case Kind::Uniform: return a_ + (b_ - a_) * rng.uniform();
            case Kind::Gamma: return sample_gamma(rng, a_) * b_;
            case Kind::Infinite: return kInfiniteLifetime;
        }
        return 0.0;
    }

    // Smallest s (up to doubling granularity) with P(V > s) <= eps; used to
    // bound quadrature and tabulation domains.  Throws for Infinite.
    double upper_point(double eps) const {
        switch (kind_) {
            case Kind::Exponential: return -std::log(eps) / a_;
            case Kind::Deterministic: return a_;
            case Kind::Uniform: return b_;
            case Kind::Gamma: {
                double s = a_ * b_ + b_;
                while (survival(s) > eps && s < 1e12) s *= 2.0;
                return s;
            }
            case Kind::Infinite:
                throw UnsupportedLifespan("infinite lifespan has no finite upper point");
        }
        return 0.0;
    }

    std::string spec_string() const {
        switch (kind_) {
            case Kind::Exponential: return "exp:" + fmt(a_);
            case Kind::Deterministic: return "det:" + fmt(a_);
            case Kind::Uniform: return "unif:" + fmt(a_) + "," + fmt(b_);
            case Kind::Gamma: return "gamma:" + fmt(a_) + "," + fmt(b_);
            case Kind::Infinite: return "inf";
        }
        return "";
    }

    // Variant parameters, meaning depends on kind (rate / v0 / lo / shape, hi / scale).
    double param_a() const { return a_; }
    double param_b() const { return b_; }

private:
    LifespanDistribution(Kind k, double a, double b) : kind_(k), a_(a), b_(b) {}

    // (1 - e^{-x})/x, its complement 1 - h1(x), and (1 - (1+x)e^{-x})/x^2,
    // with short series for small arguments.
    static double h1(double x) {
        if (x < 1e-4) return 1.0 - x / 2.0 + x * x / 6.0 - x * x * x / 24.0;
        return -std::expm1(-x) / x;
    }
    static double h1c(double x) {
        if (x < 1e-4) return x / 2.0 - x * x / 6.0 + x * x * x / 24.0;
        return 1.0 + std::expm1(-x) / x;
    }
    static double h2(double x) {
        if (x < 1e-3) return 0.5 - x / 3.0 + x * x / 8.0 - x * x * x / 30.0;
        return (1.0 - (1.0 + x) * std::exp(-x)) / (x * x);
    }

    // Integral of v e^{-lambda v} / (b_ - a_) over [lo, hi].
    double uniform_v_segment(double lambda, double lo, double hi) const {
        const double w = hi - lo;
        const double xw = lambda * w;
        return std::exp(-lambda * lo) * (lo * w * h1(xw) + w * w * h2(xw)) / (b_ - a_);
    }

    // Marsaglia-Tsang, with the usual shape boost for k < 1.
    static double sample_gamma(Rng& rng, double k) {
        if (k < 1.0) {
            const double u = rng.uniform_pos();
            return sample_gamma(rng, k + 1.0) * std::pow(u, 1.0 / k);
        }
        const double d = k - 1.0 / 3.0;
        const double c = 1.0 / (3.0 * std::sqrt(d));
        for (;;) {
            double x, v;
            do {
                x = rng.standard_normal();
                v = 1.0 + c * x;
            } while (v <= 0.0);
            v = v * v * v;
            const double u = rng.uniform_pos();
            if (u < 1.0 - 0.0331 * x * x * x * x) return d * v;
            if (std::log(u) < 0.5 * x * x + d * (1.0 - v + std::log(v))) return d * v;
        }
    }

    static std::string fmt(double x) {
        char buf[32];
        std::snprintf(buf, sizeof(buf), "%.12g", x);
        return buf;
    }

    Kind kind_;
    double a_;
    double b_;
};

namespace detail {

inline double parse_number(std::string_view s, const std::string& ctx) {
    double value = 0.0;
    const char* first = s.data();
    const char* last = s.data() + s.size();
    auto [ptr, ec] = std::from_chars(first, last, value);
    if (ec != std::errc() || ptr != last || s.empty())
        throw ConfigError("invalid number '" + std::string(s) + "' in lifespan spec '" + ctx + "'");
    return value;
}

}  // namespace detail

// Spec strings: exp:<d>  det:<v0>  unif:<lo>,<hi>  gamma:<k>,<theta>  inf
inline LifespanDistribution parse_lifespan(const std::string& spec) {
    if (spec == "inf") return LifespanDistribution::infinite();
    const auto colon = spec.find(':');
    if (colon == std::string::npos)
        throw ConfigError("malformed lifespan spec '" + spec + "'");
    const std::string tag = spec.substr(0, colon);
    const std::string args = spec.substr(colon + 1);
    const auto comma = args.find(',');
    if (tag == "exp" || tag == "det") {
        if (comma != std::string::npos)
            throw ConfigError("lifespan spec '" + spec + "' takes one parameter");
        const double v = detail::parse_number(args, spec);
        return tag == "exp" ? LifespanDistribution::exponential(v)
                            : LifespanDistribution::deterministic(v);
    }
    if (tag == "unif" || tag == "gamma") {
        if (comma == std::string::npos)
            throw ConfigError("lifespan spec '" + spec + "' takes two parameters");
        const double p = detail::parse_number(args.substr(0, comma), spec);
        const double q = detail::parse_number(args.substr(comma + 1), spec);
        return tag == "unif" ? LifespanDistribution::uniform(p, q)
                             : LifespanDistribution::gamma(p, q);
    }
    throw ConfigError("unknown lifespan variant '" + tag + "'");
}

}  // namespace cmj
