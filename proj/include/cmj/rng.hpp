#pragma once

#include <cmath>
#include <cstdint>

// Random streams for the Monte Carlo engine.  Each replicate owns a
// private xoshiro256++ stream whose state is derived from
// (master seed, replicate index) through the splitmix64 finalizer, so
// results do not depend on how replicates are scheduled across threads.

namespace cmj {

// splitmix64 finalizer (Steele, Lea, Flood / Vigna).
inline std::uint64_t mix64(std::uint64_t z) {
    z += 0x9E3779B97F4A7C15ULL;
    z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ULL;
    z = (z ^ (z >> 27)) * 0x94D049BB133111EBULL;
    return z ^ (z >> 31);
}

inline std::uint64_t substream_seed(std::uint64_t master, std::uint64_t index) {
    return mix64(master ^ mix64(index + 0x632BE59BD9B4E019ULL));
}

class Rng {
public:
    explicit Rng(std::uint64_t seed) {
        // Expand the seed with splitmix64, as recommended for xoshiro.
        std::uint64_t sm = seed;
        for (auto& w : s_) {
            sm += 0x9E3779B97F4A7C15ULL;
            std::uint64_t z = sm;
            z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ULL;
            z = (z ^ (z >> 27)) * 0x94D049BB133111EBULL;
            w = z ^ (z >> 31);
        }
    }

    static Rng substream(std::uint64_t master, std::uint64_t index) {
        return Rng(substream_seed(master, index));
    }

    // xoshiro256++
    std::uint64_t next() {
        const std::uint64_t result = rotl(s_[0] + s_[3], 23) + s_[0];
        const std::uint64_t t = s_[1] << 17;
        s_[2] ^= s_[0];
        s_[3] ^= s_[1];
        s_[1] ^= s_[2];
        s_[0] ^= s_[3];
        s_[2] ^= t;
        s_[3] = rotl(s_[3], 45);
        return result;
    }

    // Uniform on [0, 1).
    double uniform() { return static_cast<double>(next() >> 11) * 0x1.0p-53; }

    // Uniform on (0, 1]; safe to feed to log().
    double uniform_pos() {
        return (static_cast<double>(next() >> 11) + 1.0) * 0x1.0p-53;
    }

    double exponential(double rate) { return -std::log(uniform_pos()) / rate; }

    // Marsaglia polar method.
    double standard_normal() {
        double u, v, s;
        do {
            u = 2.0 * uniform() - 1.0;
            v = 2.0 * uniform() - 1.0;
            s = u * u + v * v;
        } while (s >= 1.0 || s == 0.0);
        return u * std::sqrt(-2.0 * std::log(s) / s);
    }

    double gaussian(double mean, double sd) { return mean + sd * standard_normal(); }

private:
    static std::uint64_t rotl(std::uint64_t x, int k) {
        return (x << k) | (x >> (64 - k));
    }

    std::uint64_t s_[4];
};

}  // namespace cmj
