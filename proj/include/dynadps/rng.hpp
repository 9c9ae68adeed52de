// Seeded random number generation. All stochastic operations in the library
// draw from a GaussianSampler constructed from an explicit 64-bit seed, so a
// fixed (seed, shape) pair always yields the same stream. Stream seeds for
// sub-tasks are derived with a splitmix64-style mixer rather than by offsets,
// keeping independent consumers decorrelated.

#pragma once

#include "dynadps/image.hpp"

#include <cmath>
#include <cstdint>
#include <numbers>
#include <random>

namespace dynadps {

/// splitmix64 finalizer; good avalanche for seed derivation.
inline std::uint64_t mix64(std::uint64_t x) {
    x += 0x9e3779b97f4a7c15ull;
    x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ull;
    x = (x ^ (x >> 27)) * 0x94d049bb133111ebull;
    return x ^ (x >> 31);
}

inline std::uint64_t derive_seed(std::uint64_t base, std::uint64_t tag, std::uint64_t index = 0) {
    return mix64(mix64(base ^ mix64(tag)) ^ index);
}

// Stream tags for seed derivation (arbitrary distinct constants).
namespace seed_tag {
inline constexpr std::uint64_t measurement_noise = 0x6d65617329u;
inline constexpr std::uint64_t truth_draw = 0x7472757468u;
inline constexpr std::uint64_t forward_noise = 0x666f7277u;
inline constexpr std::uint64_t ancestral = 0x616e6365u;
inline constexpr std::uint64_t bank_draw = 0x62616e6bu;
inline constexpr std::uint64_t init_noise = 0x696e6974u;
inline constexpr std::uint64_t sample = 0x73616d70u;
inline constexpr std::uint64_t template_geometry = 0x67656f6du;
}  // namespace seed_tag

/// mt19937_64 + Box-Muller N(0,1) stream. The transform is spelled out here
/// instead of using std::normal_distribution, whose output sequence is
/// implementation-defined; this keeps streams identical across standard
/// libraries.
class GaussianSampler {
  public:
    explicit GaussianSampler(std::uint64_t seed) : engine_(seed) {}

    /// Uniform double in [0, 1), 53-bit resolution.
    double uniform() {
        return static_cast<double>(engine_() >> 11) * 0x1.0p-53;
    }

    /// Standard normal draw.
    double normal() {
        if (has_spare_) {
            has_spare_ = false;
            return spare_;
        }
        const double u1 = 1.0 - uniform();  // (0, 1], keeps log finite
        const double u2 = uniform();
        const double r = std::sqrt(-2.0 * std::log(u1));
        const double theta = 2.0 * std::numbers::pi * u2;
        spare_ = r * std::sin(theta);
        has_spare_ = true;
        return r * std::cos(theta);
    }

    /// Image of i.i.d. N(0,1) draws, filled in row-major order.
    Image normal_image(Eigen::Index rows, Eigen::Index cols) {
        Image out(rows, cols);
        for (Eigen::Index r = 0; r < rows; ++r) {
            for (Eigen::Index c = 0; c < cols; ++c) {
                out(r, c) = normal();
            }
        }
        return out;
    }

    /// Integer in [0, n).
    std::uint64_t below(std::uint64_t n) {
        return static_cast<std::uint64_t>(uniform() * static_cast<double>(n)) % n;
    }

  private:
    std::mt19937_64 engine_;
    double spare_ = 0.0;
    bool has_spare_ = false;
};

}  // namespace dynadps
