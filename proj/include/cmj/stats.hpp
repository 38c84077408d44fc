#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <vector>

#include "cmj/errors.hpp"
#include "cmj/rng.hpp"
#include "cmj/special.hpp"

// Goodness-of-fit statistics for the verification harness: two-sided
// Kolmogorov-Smirnov tests (one- and two-sample, asymptotic p-values),
// chi-square against a geometric law with tail bins pooled to expected
// count >= 5, and the Laplace limit law L(0, sigma^2) with characteristic
// function 1/(1 + sigma^2 lambda^2 / 2).

namespace cmj {

struct KsResult {
    double statistic = 0.0;
    double p_value = 1.0;
    std::size_t n = 0;
};

template <class Cdf>
KsResult ks_test(std::vector<double> samples, Cdf&& cdf) {
    if (samples.size() < 10) throw TooFewSamples("ks_test: need at least 10 samples");
    std::sort(samples.begin(), samples.end());
    const auto n = samples.size();
    const double dn = static_cast<double>(n);
    double d = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
        const double f = cdf(samples[i]);
        d = std::max(d, std::max(f - static_cast<double>(i) / dn,
                                 static_cast<double>(i + 1) / dn - f));
    }
    return {d, kolmogorov_sf(std::sqrt(dn) * d), n};
}

inline KsResult ks_test_two_sample(std::vector<double> a, std::vector<double> b) {
    if (a.size() < 10 || b.size() < 10)
        throw TooFewSamples("ks_test_two_sample: need at least 10 samples per side");
    std::sort(a.begin(), a.end());
    std::sort(b.begin(), b.end());
    const double na = static_cast<double>(a.size());
    const double nb = static_cast<double>(b.size());
    std::size_t ia = 0, ib = 0;
    double d = 0.0;
    while (ia < a.size() && ib < b.size()) {
        const double v = std::min(a[ia], b[ib]);
        while (ia < a.size() && a[ia] <= v) ++ia;
        while (ib < b.size() && b[ib] <= v) ++ib;
        d = std::max(d, std::fabs(static_cast<double>(ia) / na -
                                  static_cast<double>(ib) / nb));
    }
    const double ne = na * nb / (na + nb);
    return {d, kolmogorov_sf(std::sqrt(ne) * d), a.size() + b.size()};
}

struct Chi2Result {
    double statistic = 0.0;
    double p_value = 1.0;
    std::size_t bins = 0;
};

// Pearson chi-square of a conditional sample (values >= 1) against
// Geometric(success_p), pmf p(1-p)^{k-1}.  The geometric tail is pooled
// into the last bin so that every expected count is >= 5.
inline Chi2Result chi_square_geometric(const std::vector<std::uint64_t>& sample,
                                       double success_p) {
    if (!(success_p > 0.0) || !(success_p < 1.0))
        throw std::domain_error("chi_square_geometric: success probability in (0,1) required");
    const double n = static_cast<double>(sample.size());
    const double q = 1.0 - success_p;
    std::size_t nbins = 1;  // grows while individual bins keep expected >= 5
    while (n * success_p * std::pow(q, static_cast<double>(nbins - 1)) >= 5.0 &&
           nbins < 1000000)
        ++nbins;
    if (nbins < 3) throw TooFewSamples("chi_square_geometric: sample too small to bin");
    // bins: {1}, ..., {nbins-1}, [nbins, inf)
    std::vector<double> observed(nbins, 0.0);
    for (const auto k : sample) {
        if (k == 0) throw std::domain_error("chi_square_geometric: conditional sample has a zero");
        const std::size_t bin = k < nbins ? static_cast<std::size_t>(k - 1) : nbins - 1;
        observed[bin] += 1.0;
    }
    double stat = 0.0;
    for (std::size_t i = 0; i < nbins; ++i) {
        const double expected = i + 1 < nbins
                                    ? n * success_p * std::pow(q, static_cast<double>(i))
                                    : n * std::pow(q, static_cast<double>(nbins - 1));
        const double delta = observed[i] - expected;
        stat += delta * delta / expected;
    }
    const auto dof = static_cast<double>(nbins - 1);
    return {stat, chi_square_sf(stat, dof), nbins};
}

// Laplace law L(0, sigma^2); variance parameter convention fixed by the
// characteristic function 1/(1 + sigma^2 lambda^2/2), density
// (1/(2s)) e^{-|x|/s} with s = sqrt(sigma^2/2).
class LaplaceLaw {
public:
    explicit LaplaceLaw(double sigma2) : sigma2_(sigma2) {
        if (!(sigma2 > 0.0)) throw ConfigError("Laplace law: variance must be > 0");
        scale_ = std::sqrt(0.5 * sigma2);
    }

    double variance() const { return sigma2_; }
    double scale() const { return scale_; }

    double cdf(double x) const {
        return x < 0.0 ? 0.5 * std::exp(x / scale_) : 1.0 - 0.5 * std::exp(-x / scale_);
    }

    double density(double x) const {
        return 0.5 / scale_ * std::exp(-std::fabs(x) / scale_);
    }

    // sqrt(E) G with E ~ Exp(1) and G ~ N(0, sigma^2).
    double sample(Rng& rng) const {
        return std::sqrt(rng.exponential(1.0)) * rng.gaussian(0.0, std::sqrt(sigma2_));
    }

private:
    double sigma2_;
    double scale_;
};

// Plain sample moments.
inline double sample_mean(const std::vector<double>& v) {
    double s = 0.0;
    for (double x : v) s += x;
    return s / static_cast<double>(v.size());
}

inline double sample_variance(const std::vector<double>& v) {
    const double m = sample_mean(v);
    double s = 0.0;
    for (double x : v) s += (x - m) * (x - m);
    return s / static_cast<double>(v.size() - 1);
}

inline double sample_abs_moment(const std::vector<double>& v, double p) {
    double s = 0.0;
    for (double x : v) s += std::pow(std::fabs(x), p);
    return s / static_cast<double>(v.size());
}

inline double sample_central_moment(const std::vector<double>& v, double p) {
    const double m = sample_mean(v);
    double s = 0.0;
    for (double x : v) s += std::pow(x - m, p);
    return s / static_cast<double>(v.size());
}

}  // namespace cmj
