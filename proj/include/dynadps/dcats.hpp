// Data-consistency-aware time selection. A memory bank records, for a grid of
// diffusion times, the average log-likelihood that Tweedie denoisings of noised
// reference images assign to their own measurements. At solve time the
// conditional prediction's own log-likelihood is matched against that table to
// pick the shortest reverse trajectory that is still honest about how much the
// prediction can be trusted.

#pragma once

#include "dynadps/degradation.hpp"
#include "dynadps/diffusion.hpp"
#include "dynadps/image.hpp"

#include <cstdint>
#include <utility>
#include <vector>

namespace dynadps {

struct BankMeta {
    int n_refs = 0;
    int n_draws = 0;
    double noise_sigma = 0.0;
    std::uint64_t fingerprint = 0;  // degradation fingerprint of the build config
    std::int64_t op_count = 0;      // (time, ref, draw) evaluations spent building the bank
};

struct MemoryBank {
    std::vector<int> t_grid;         // strictly increasing, each in [1, T)
    std::vector<double> avg_loglik;  // mean reference log-likelihood per grid time
    std::vector<double> se;          // standard error of that mean (0 when < 2 samples)
    BankMeta meta;

    /// Throws std::invalid_argument on inconsistent members.
    void validate() const;
};

struct DcatsParams {
    double tau = 0.4;       // temperature applied to the conditional log-likelihood
    int t_grid_stride = 0;  // 0 derives max(1, T/40) from the schedule

    /// Throws ConfigError on out-of-range values.
    void validate() const;
};

/// Per-pixel-normalized Gaussian log-likelihood of the measurement given a
/// clean estimate: -|y - A(x0_hat)|^2 / (2 sigma_n^2 M) with M the pixel count
/// of y, A the noise-free forward operator, and additive constants dropped.
/// Throws ConfigError when noise_sigma == 0.
double measurement_loglik(const Image& y, const Image& x0_hat, const DegradationConfig& cfg);

/// {stride, 2*stride, ...} strictly below t_total; stride 0 means
/// max(1, t_total / 40).
std::vector<int> default_t_grid(int t_total, int stride = 0);

/// For each grid time and each (x_ref, y_ref) pair, draw n_draws forward
/// noisings of x_ref, Tweedie-denoise each, and average
/// measurement_loglik(y_ref, x_hat). Accumulation order is fixed (refs outer,
/// draws inner) so the result is bit-reproducible per seed.
MemoryBank build_memory_bank(const std::vector<std::pair<Image, Image>>& refs,
                             const GaussianMixturePrior& prior, const DiffusionSchedule& sched,
                             const DegradationConfig& cfg, const DcatsParams& params, int n_draws,
                             std::uint64_t seed);

/// argmin over the grid of |tau * measurement_loglik(y, x_cond) - avg_loglik|,
/// ties broken toward the smaller time.
int select_time(const MemoryBank& bank, const Image& y, const Image& x_cond,
                const DegradationConfig& cfg, const DcatsParams& params);

}  // namespace dynadps
