#pragma once

#include <cmath>
#include <cstddef>
#include <stdexcept>
#include <vector>

// Generic renewal-equation solver on a uniform grid,
//
//   F(t) = int_0^t F(t-s) gamma(s) ds + h(t),
//
// with gamma a kernel density (possibly defective, total mass <= 1) and h
// a forcing term.  Discretization: trapezoidal convolution, solved by
// forward marching -- F at grid point k uses only points < k plus the
// diagonal term, which is moved to the left-hand side.  O(n^2) total,
// second-order accurate, unconditionally stable for the step sizes used
// here (the diagonal factor 1 - h*gamma(0)/2 stays close to 1).

namespace cmj {

struct RenewalProblem {
    std::vector<double> kernel;   // gamma at grid nodes k*step
    std::vector<double> forcing;  // h at grid nodes
    double step = 0.0;
};

inline std::vector<double> solve_renewal(const RenewalProblem& p) {
    const std::size_t n = p.kernel.size();
    if (n == 0 || p.forcing.size() != n)
        throw std::invalid_argument("solve_renewal: kernel/forcing grids differ");
    if (!(p.step > 0.0)) throw std::invalid_argument("solve_renewal: step must be > 0");
    for (double g : p.kernel)
        if (g < 0.0) throw std::invalid_argument("solve_renewal: kernel must be non-negative");

    const double h = p.step;
    const double diag = 1.0 - 0.5 * h * p.kernel[0];
    if (!(diag > 0.0)) throw std::invalid_argument("solve_renewal: step too large for kernel");

    std::vector<double> f(n);
    f[0] = p.forcing[0];
    const double* g = p.kernel.data();
    for (std::size_t k = 1; k < n; ++k) {
        double acc = 0.5 * g[k] * f[0];
        for (std::size_t j = 1; j < k; ++j) acc += g[j] * f[k - j];
        f[k] = (p.forcing[k] + h * acc) / diag;
    }
    return f;
}

}  // namespace cmj
