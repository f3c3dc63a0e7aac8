#pragma once

#include <cstdint>
#include <random>

namespace scenesmith {

/// Seeded generator with a platform-independent output sequence.
///
/// The engine is std::mt19937_64, whose sequence is fixed by the standard. The
/// standard distributions are implementation-defined, so conversions to reals are
/// done here: uniform() takes the top 53 bits, normal() uses Box-Muller.
class Rng {
public:
    explicit Rng(std::uint64_t seed) : engine_(seed) {}

    std::uint64_t next_u64() { return engine_(); }

    /// Uniform double in [0, 1).
    double uniform() { return static_cast<double>(engine_() >> 11) * 0x1.0p-53; }

    double uniform(double lo, double hi) { return lo + (hi - lo) * uniform(); }

    /// Uniform integer in [0, n).
    std::uint64_t below(std::uint64_t n) { return static_cast<std::uint64_t>(uniform() * static_cast<double>(n)); }

    double normal();

private:
    std::mt19937_64 engine_;
    bool has_spare_ = false;
    double spare_ = 0.0;
};

} // namespace scenesmith
