#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <functional>
#include <optional>
#include <vector>

#include "cmj/errors.hpp"
#include "cmj/levy.hpp"
#include "cmj/rng.hpp"

// Exact stochastic simulation of splitting trees.
//
// The tree is walked depth-first with an explicit stack.  Each frame is one
// individual; its birth events are Poisson(b) times generated over
// [birth, min(death, horizon)) when the frame is created, and its children
// are then explored latest-born first.  That exploration order is exactly
// the contour order (the contour runs down a life interval from the death
// point, so it meets births latest-first and descends into each child's
// subtree before continuing), which is what the residual-lifetime
// extraction relies on.  Memory is O(sum of unexplored births along the
// active path); no recursion.
//
// The independent contour simulator draws N_t from the jump chain of the
// reflected-and-killed spectrally positive path and is used as a
// distributional oracle against the tree simulator.

namespace cmj {

struct TreeSimConfig {
    LevyModel model;
    double horizon = 0.0;                   // T
    std::vector<double> checkpoints;        // ascending, within [0, T]
    // Root-lifespan override: exact value, or a per-replicate sampler
    // (at most one of the two may be set).
    std::optional<double> root_lifespan;
    std::function<double(Rng&)> root_lifespan_sampler;
    std::uint64_t max_individuals = 100'000'000;
};

struct PopulationSample {
    std::vector<std::uint64_t> counts;      // one per checkpoint
    std::uint64_t alive_at_horizon = 0;     // N_T
    std::uint64_t total_individuals = 0;    // ever born (root included)
    bool truncated = false;                 // individual cap hit
    double horizon = 0.0;
};

struct OvershootSample {
    double level = 0.0;                       // u
    std::vector<double> residuals;            // death - u, contour order; +inf possible
    std::size_t n_u() const { return residuals.size(); }
};

class TreeSimulator {
public:
    explicit TreeSimulator(TreeSimConfig cfg) : cfg_(std::move(cfg)) {
        if (!(cfg_.horizon >= 0.0)) throw ConfigError("tree simulation: horizon must be >= 0");
        if (cfg_.max_individuals == 0) throw ConfigError("tree simulation: cap must be positive");
        if (cfg_.root_lifespan && cfg_.root_lifespan_sampler)
            throw ConfigError("tree simulation: exact and sampled root overrides both set");
        double prev = 0.0;
        for (double c : cfg_.checkpoints) {
            if (c < prev || c > cfg_.horizon)
                throw ConfigError("tree simulation: checkpoints must be ascending within [0, T]");
            prev = c;
        }
        inv_b_ = 1.0 / cfg_.model.b();
        frames_.reserve(256);
        kids_.reserve(1024);
        sample_.counts.resize(cfg_.checkpoints.size());
    }

    const TreeSimConfig& config() const { return cfg_; }

    const PopulationSample& run(Rng& rng) {
        auto& s = sample_;
        std::fill(s.counts.begin(), s.counts.end(), 0);
        s.alive_at_horizon = 0;
        s.total_individuals = 0;
        s.truncated = false;
        s.horizon = cfg_.horizon;
        const auto* cp = cfg_.checkpoints.data();
        const std::size_t ncp = cfg_.checkpoints.size();
        const double T = cfg_.horizon;
        walk(rng, [&](double birth, double death) {
            for (std::size_t i = 0; i < ncp; ++i)
                s.counts[i] += (cp[i] >= birth) & (cp[i] < death);
            s.alive_at_horizon += (death > T);
        });
        s.total_individuals = total_;
        s.truncated = truncated_;
        return s;
    }

    // Residual lifetimes at the horizon, in contour visit order.
    OvershootSample run_residuals(Rng& rng) {
        OvershootSample out;
        const double u = cfg_.horizon;
        out.level = u;
        walk(rng, [&](double birth, double death) {
            (void)birth;
            if (death > u) out.residuals.push_back(death - u);
        });
        if (truncated_) throw CapExceeded("residual extraction hit the individual cap");
        return out;
    }

private:
    // Calls visit(birth, death) for every individual, in contour order.
    template <class Visit>
    void walk(Rng& rng, Visit&& visit) {
        const auto& dist = cfg_.model.lifespan();
        const double T = cfg_.horizon;
        const std::uint64_t cap = cfg_.max_individuals;
        frames_.clear();
        kids_.clear();
        total_ = 0;
        truncated_ = false;

        const double root_v = cfg_.root_lifespan      ? *cfg_.root_lifespan
                              : cfg_.root_lifespan_sampler ? cfg_.root_lifespan_sampler(rng)
                                                           : dist.sample(rng);

        auto spawn = [&](double birth, double death) {
            if (total_ == cap) {
                truncated_ = true;
                return false;
            }
            ++total_;
            visit(birth, death);
            const auto kids_begin = static_cast<std::uint32_t>(kids_.size());
            const double end = std::min(death, T);
            double s = birth;
            for (;;) {
                s += -std::log(rng.uniform_pos()) * inv_b_;
                if (s >= end) break;
                kids_.push_back(s);
            }
            frames_.push_back(kids_begin);
            return true;
        };

        if (!spawn(0.0, root_v)) return;
        while (!frames_.empty()) {
            const std::uint32_t kb = frames_.back();
            if (kids_.size() > kb) {
                const double birth = kids_.back();
                kids_.pop_back();
                if (!spawn(birth, birth + dist.sample(rng))) return;
            } else {
                frames_.pop_back();
            }
        }
    }

    TreeSimConfig cfg_;
    double inv_b_ = 0.0;
    std::vector<std::uint32_t> frames_;
    std::vector<double> kids_;
    std::uint64_t total_ = 0;
    bool truncated_ = false;
    PopulationSample sample_;
};

inline PopulationSample simulate_population(const TreeSimConfig& cfg, Rng& rng) {
    TreeSimulator sim(cfg);
    return sim.run(rng);
}

// Independent draw of N_t from the contour's jump chain: start at
// min(V, t) (one hit if V >= t), descend at unit slope for an Exp(b)
// duration, absorb at 0, jump up by a fresh lifetime, count a hit and
// reflect whenever the jump reaches level t.
inline std::uint64_t simulate_contour_nt(const LevyModel& m, double t, Rng& rng) {
    if (!(t > 0.0)) throw ConfigError("contour simulation: t must be > 0");
    const auto& dist = m.lifespan();
    const double inv_b = 1.0 / m.b();
    const double v = dist.sample(rng);
    std::uint64_t hits = v >= t ? 1 : 0;
    double x = std::min(v, t);
    for (;;) {
        x -= -std::log(rng.uniform_pos()) * inv_b;
        if (x <= 0.0) break;
        const double up = x + dist.sample(rng);
        if (up >= t) {
            ++hits;
            x = t;
        } else {
            x = up;
        }
    }
    return hits;
}

inline OvershootSample extract_residual_lifetimes(const LevyModel& m, double u, Rng& rng,
                                                  std::uint64_t cap = 100'000'000) {
    if (!(u > 0.0)) throw ConfigError("residual extraction: u must be > 0");
    TreeSimConfig cfg{.model = m, .horizon = u, .max_individuals = cap};
    TreeSimulator sim(std::move(cfg));
    return sim.run_residuals(rng);
}

// Finite-horizon proxy for the almost-sure limit:
// E_hat = psi'(a) e^{-aT} N_T; zero exactly on extinction by T.
inline double estimate_E(const PopulationSample& s, const LevyModel& m) {
    if (s.truncated) throw CapExceeded("estimate_E: sample was truncated");
    return m.psi_prime_alpha() * std::exp(-m.alpha() * s.horizon) *
           static_cast<double>(s.alive_at_horizon);
}

}  // namespace cmj
