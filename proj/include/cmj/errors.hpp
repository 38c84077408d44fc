#pragma once

#include <stdexcept>
#include <string>

namespace cmj {

// b*E[V] <= 1: psi has no positive root, the model has no Malthusian parameter.
struct SubcriticalModel : std::runtime_error {
    using std::runtime_error::runtime_error;
};

// Malformed CLI flag, config-file entry or distribution spec string.
struct ConfigError : std::runtime_error {
    using std::runtime_error::runtime_error;
};

// Requested scale-table grid exceeds the memory bound (t_max/h > 1e8).
struct GridTooFine : std::runtime_error {
    using std::runtime_error::runtime_error;
};

// Too many replicates hit the per-tree individual cap to trust the statistics.
struct CapExceeded : std::runtime_error {
    using std::runtime_error::runtime_error;
};

// Operation needs a lifetime density (or atom) that the variant does not have.
struct UnsupportedLifespan : std::runtime_error {
    using std::runtime_error::runtime_error;
};

struct TooFewSamples : std::runtime_error {
    using std::runtime_error::runtime_error;
};

}  // namespace cmj
