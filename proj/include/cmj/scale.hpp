#pragma once

#include <algorithm>
#include <atomic>
#include <cmath>
#include <cstdio>
#include <vector>

#include "cmj/errors.hpp"
#include "cmj/levy.hpp"
#include "cmj/renewal.hpp"

// Numerical scale-function machinery.
//
// W is the increasing function with Laplace transform 1/psi.  It decomposes
// as W(t) = e^{at}/psi'(a) - e^{at} F(t) with F(t) = U(t, inf) the tail of
// the potential measure of the ladder-height subordinator, whose Levy
// measure has the density
//
//   Upsilon(r) = b E[e^{-aV} 1_{V>r}],   total mass 1 - psi'(a),
//
// and F solves the defective renewal equation F = F * Upsilon + Ubar/psi'(a)
// with Ubar(t) = int_t^inf Upsilon.  Tilting by e^{at} turns the kernel into
// a proper probability density (int e^{ar} Upsilon(r) dr = 1), so we march
// the tilted equation for G(t) := e^{at} F(t) directly.  That is what makes
// large-t quantities well conditioned: W, survival probabilities and the
// correction term e^{at}F(t) all come out of O(1)-sized arrays instead of
// differences of exponentially large ones.
//
// The marching itself is the trapezoidal solver from renewal.hpp, run at h
// and h/2 and Richardson-combined (the plain h^2 error term, which grows
// linearly in t for a proper kernel, would not meet the 1e-6 budgets at
// t ~ 20 with h = 1e-3).
//
// Internally arrays are stored in tilted form:
//   u[k]     = e^{-a t_k} W(t_k)          (potential-measure values U[0,t])
//   uconv[k] = e^{-a t_k} (W * P_V)(t_k)
//   g[k]     = e^{a t_k} F(t_k)

namespace cmj {

// Density of the Upsilon measure at r >= 0.
inline double upsilon_density(const LevyModel& m, double r) {
    return m.b() * m.lifespan().partial_laplace(m.alpha(), r);
}

// Exponentially tilted Upsilon density e^{ar} Upsilon(r); a probability
// density on [0, inf).  Also the limit law of the residual lifetimes
// O_i^{(u)} as u -> inf.
inline double upsilon_tilted_density(const LevyModel& m, double r) {
    return std::exp(m.alpha() * r) * upsilon_density(m, r);
}

// lim e^{at} F(t): 1/(b E[V] - 1) for integrable lifetimes, else 0.
inline double asymptotic_mu(const LevyModel& m) {
    const double mv = m.lifespan().mean();
    if (!std::isfinite(mv)) return 0.0;
    return 1.0 / (m.b() * mv - 1.0);
}

// Variance of the Laplace limit law in the CLT: 2 - psi'(a) >= 1.
inline double clt_variance(const LevyModel& m) { return 2.0 - m.psi_prime_alpha(); }

// Limit of e^{-at} E[(psi'(a) N_t - e^{at} E)^2]: (a/b)(2 - psi'(a)).
inline double quadratic_error_limit(const LevyModel& m) {
    return m.alpha() / m.b() * clt_variance(m);
}

class ScaleTable {
public:
    ScaleTable(LevyModel model, double t_max, double h,
               std::vector<double> u, std::vector<double> uconv, std::vector<double> g)
        : model_(std::move(model)), t_max_(t_max), h_(h),
          u_(std::move(u)), uconv_(std::move(uconv)), g_(std::move(g)) {}

    const LevyModel& model() const { return model_; }
    double t_max() const { return t_max_; }
    double step() const { return h_; }
    std::size_t size() const { return u_.size(); }
    double grid_time(std::size_t k) const { return static_cast<double>(k) * h_; }

    // Tilted values on the grid (exact lattice accessors for tests).
    double u_at(std::size_t k) const { return u_[k]; }
    double uconv_at(std::size_t k) const { return uconv_[k]; }
    double exp_alpha_f_at(std::size_t k) const { return g_[k]; }

    // e^{-at} W(t) by interpolation; the potential-measure value U[0, t].
    double tilted_w(double t) const {
        require_in_range(t);
        return interp(u_, t);
    }

    // W(t).  Beyond t_max the Proposition-5.1 shape
    // e^{at}/psi'(a) - mu is used and a warning is emitted once.
    double w(double t) const {
        if (t < 0.0) throw std::out_of_range("scale table queried at negative time");
        const double a = model_.alpha();
        if (t > t_max_ * (1.0 + 1e-12)) {
            warn_extrapolation(t);
            return std::exp(a * t) / model_.psi_prime_alpha() - asymptotic_mu(model_);
        }
        return std::exp(a * t) * interp(u_, t);
    }

    // (W * P_V)(t) = int_{[0,t]} W(t-s) P_V(ds).
    double w_star_pv(double t) const {
        require_in_range(t);
        return std::exp(model_.alpha() * t) * interp(uconv_, t);
    }

    // E[N_t] = W(t) - (W * P_V)(t).
    double mean_nt(double t) const {
        require_in_range(t);
        return std::exp(model_.alpha() * t) * (interp(u_, t) - interp(uconv_, t));
    }

    // P(N_t > 0) = 1 - (W * P_V)(t)/W(t); the tilt cancels exactly.
    double survival_prob(double t) const {
        require_in_range(t);
        return 1.0 - interp(uconv_, t) / interp(u_, t);
    }

    // E[N_t E] = (1 + a/b - e^{-at}) W(t) - (1 - e^{-at}) (W * P_V)(t).
    double joint_moment_ne(double t) const {
        require_in_range(t);
        const double a = model_.alpha();
        const double eat = std::exp(-a * t);
        return std::exp(a * t) * ((1.0 + a / model_.b() - eat) * interp(u_, t) -
                                  (1.0 - eat) * interp(uconv_, t));
    }

    // F(t) = 1/psi'(a) - e^{-at} W(t), and e^{at} F(t) directly.
    double f_correction(double t) const {
        require_in_range(t);
        return std::exp(-model_.alpha() * t) * interp(g_, t);
    }
    double exp_alpha_f(double t) const {
        require_in_range(t);
        return interp(g_, t);
    }

    bool extrapolation_used() const { return warned_.load(); }

private:
    void require_in_range(double t) const {
        if (t < 0.0 || t > t_max_ * (1.0 + 1e-12))
            throw std::out_of_range("scale table queried beyond horizon");
    }

    void warn_extrapolation(double t) const {
        if (!warned_.exchange(true))
            std::fprintf(stderr,
                         "warning: W(t) extrapolated beyond table horizon (t=%g > t_max=%g)\n",
                         t, t_max_);
    }

    double interp(const std::vector<double>& a, double t) const {
        const double x = t / h_;
        const auto k = static_cast<std::size_t>(x);
        if (k + 1 >= a.size()) return a.back();
        const double w1 = x - static_cast<double>(k);
        return a[k] * (1.0 - w1) + a[k + 1] * w1;
    }

    LevyModel model_;
    double t_max_;
    double h_;
    std::vector<double> u_;
    std::vector<double> uconv_;
    std::vector<double> g_;
    mutable std::atomic<bool> warned_{false};
};

namespace detail {

// Deterministic lifespans make E[e^{-aV} 1_{V>r}] (and P(V>r)) jump at
// r = v0.  Trapezoidal grids keep second order across an aligned jump only
// if the node on the jump carries the midpoint of the two one-sided limits.
inline bool on_atom(const LifespanDistribution& d, double r, double h) {
    return d.kind() == LifespanDistribution::Kind::Deterministic &&
           std::fabs(r - d.param_a()) < 0.25 * h;
}

inline double node_partial_laplace(const LifespanDistribution& d, double lam, double r,
                                   double h) {
    if (on_atom(d, r, h)) return 0.5 * std::exp(-lam * d.param_a());
    return d.partial_laplace(lam, r);
}

inline double node_laplace_v_tail(const LifespanDistribution& d, double lam, double r,
                                  double h) {
    if (on_atom(d, r, h)) return 0.5 * d.param_a() * std::exp(-lam * d.param_a());
    return d.laplace_v_tail(lam, r);
}

inline double node_survival(const LifespanDistribution& d, double s, double h) {
    if (on_atom(d, s, h)) return 0.5;
    return d.survival(s);
}

// Tilted kernel and forcing of the renewal equation for G = e^{at}F(t):
//   G = G * (e^{ar} Upsilon) + e^{at} Ubar(t) / psi'(a),
// Ubar(t) = int_t^inf Upsilon = b E[(V-t) e^{-aV} 1_{V>t}].
inline RenewalProblem tilted_scale_problem(const LevyModel& m, std::size_t n, double h) {
    const double a = m.alpha();
    const double ppa = m.psi_prime_alpha();
    const auto& d = m.lifespan();
    RenewalProblem p;
    p.step = h;
    p.kernel.resize(n + 1);
    p.forcing.resize(n + 1);
    for (std::size_t k = 0; k <= n; ++k) {
        const double r = static_cast<double>(k) * h;
        const double tilt = std::exp(a * r);
        const double pl = node_partial_laplace(d, a, r, h);
        p.kernel[k] = m.b() * tilt * pl;
        p.forcing[k] = m.b() * tilt * (node_laplace_v_tail(d, a, r, h) - r * pl) / ppa;
    }
    return p;
}

// e^{-at}(W * P_V)(t) on the grid from the tilted W values:
//   uconv(t) = E[e^{-aV} U(t - V) 1_{V <= t}].
// Deterministic lifetimes are a single shifted lookup; density variants are
// integrated with the trapezoidal rule against e^{-as} f_V(s).
inline std::vector<double> tilted_wconv(const LevyModel& m, const std::vector<double>& u,
                                        double h) {
    const std::size_t n = u.size() - 1;
    const auto& d = m.lifespan();
    const double a = m.alpha();
    std::vector<double> c(n + 1, 0.0);
    if (d.is_infinite()) return c;
    if (d.kind() == LifespanDistribution::Kind::Deterministic) {
        const double v0 = d.param_a();
        const double w0 = std::exp(-a * v0);
        for (std::size_t k = 0; k <= n; ++k) {
            const double t = static_cast<double>(k) * h;
            if (t < v0) continue;
            const double x = (t - v0) / h;
            const auto j = std::min(static_cast<std::size_t>(x), n - 1);
            const double w1 = x - static_cast<double>(j);
            c[k] = w0 * (u[j] * (1.0 - w1) + u[j + 1] * w1);
        }
        return c;
    }
    std::vector<double> z(n + 1);
    for (std::size_t j = 0; j <= n; ++j) {
        const double s = static_cast<double>(j) * h;
        z[j] = std::exp(-a * s) * d.density(s);
    }
    // Gamma with shape < 1 has an integrable density singularity at 0;
    // replace the node value with the half-cell average.
    if (!std::isfinite(z[0])) z[0] = (1.0 - d.survival(0.5 * h)) / (0.5 * h);
    for (std::size_t k = 1; k <= n; ++k) {
        double acc = 0.5 * (z[0] * u[k] + z[k] * u[0]);
        for (std::size_t j = 1; j < k; ++j) acc += z[j] * u[k - j];
        c[k] = h * acc;
    }
    return c;
}

}  // namespace detail

inline ScaleTable build_scale_table(const LevyModel& m, double t_max, double h) {
    if (!(h > 0.0) || !(t_max >= h)) throw ConfigError("scale table: need 0 < h <= t_max");
    if (t_max / h > 1e8) throw GridTooFine("scale table: t_max/h exceeds 1e8 grid points");
    const auto n = static_cast<std::size_t>(std::llround(t_max / h));
    const double a = m.alpha();
    const double ppa = m.psi_prime_alpha();

    const auto g_h = solve_renewal(detail::tilted_scale_problem(m, n, h));
    const auto g_h2 = solve_renewal(detail::tilted_scale_problem(m, 2 * n, 0.5 * h));

    std::vector<double> g(n + 1), u(n + 1);
    for (std::size_t k = 0; k <= n; ++k) {
        g[k] = (4.0 * g_h2[2 * k] - g_h[k]) / 3.0;
        u[k] = 1.0 / ppa - std::exp(-a * static_cast<double>(k) * h) * g[k];
    }

    std::vector<double> uconv;
    if (m.lifespan().has_density()) {
        std::vector<double> u_fine(2 * n + 1);
        for (std::size_t k = 0; k <= 2 * n; ++k)
            u_fine[k] = 1.0 / ppa - std::exp(-a * static_cast<double>(k) * 0.5 * h) * g_h2[k];
        const auto c_coarse = detail::tilted_wconv(m, u, h);
        const auto c_fine = detail::tilted_wconv(m, u_fine, 0.5 * h);
        uconv.resize(n + 1);
        for (std::size_t k = 0; k <= n; ++k)
            uconv[k] = (4.0 * c_fine[2 * k] - c_coarse[k]) / 3.0;
    } else {
        uconv = detail::tilted_wconv(m, u, h);
    }

    return ScaleTable(m, static_cast<double>(n) * h, h,
                      std::move(u), std::move(uconv), std::move(g));
}

// Numerical solution of the renewal equation satisfied by t -> E[N_t E]
// (kernel b e^{-au} P(V>u) du, which has total mass exactly 1, plus the two
// forcing terms zeta1, zeta2), on [0, t_max].  Marched at h and h/2 with a
// Richardson combine; serves as the independent cross-check of the closed
// form returned by ScaleTable::joint_moment_ne.
//
//   zeta2(t) = P(V > t) - E[e^{-aV} 1_{V>t}]
//   zeta1(t) = b (E[N_.] * zeta2)(t)
inline std::vector<double> solve_joint_moment_renewal(const LevyModel& m, double t_max,
                                                      double h) {
    const auto n = static_cast<std::size_t>(std::llround(t_max / h));
    const ScaleTable fine_tbl = build_scale_table(m, t_max, 0.5 * h);
    const double a = m.alpha();
    const auto& d = m.lifespan();

    auto solve_at = [&](double step, std::size_t count) {
        RenewalProblem p;
        p.step = step;
        p.kernel.resize(count + 1);
        std::vector<double> zeta2(count + 1), mean_n(count + 1);
        for (std::size_t k = 0; k <= count; ++k) {
            const double t = static_cast<double>(k) * step;
            const double sv = detail::node_survival(d, t, step);
            p.kernel[k] = m.b() * std::exp(-a * t) * sv;
            zeta2[k] = sv - detail::node_partial_laplace(d, a, t, step);
            mean_n[k] = fine_tbl.mean_nt(t);
        }
        p.forcing.resize(count + 1);
        for (std::size_t k = 0; k <= count; ++k) {
            double acc = 0.0;
            if (k > 0) {
                acc = 0.5 * (mean_n[0] * zeta2[k] + mean_n[k] * zeta2[0]);
                for (std::size_t j = 1; j < k; ++j) acc += mean_n[j] * zeta2[k - j];
                acc *= step;
            }
            p.forcing[k] = m.b() * acc + zeta2[k];
        }
        return solve_renewal(p);
    };

    const auto f_h = solve_at(h, n);
    const auto f_h2 = solve_at(0.5 * h, 2 * n);
    std::vector<double> f(n + 1);
    for (std::size_t k = 0; k <= n; ++k) f[k] = (4.0 * f_h2[2 * k] - f_h[k]) / 3.0;
    return f;
}

}  // namespace cmj
