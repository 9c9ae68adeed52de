// Variance-preserving diffusion machinery: the noise schedule, forward
// noising, the exact score of a Gaussian-mixture prior (standing in for a
// learned score network), Tweedie denoising, and the stochastic ancestral
// reverse step. The mixture score is exact, so everything downstream can be
// checked against closed forms instead of hoping a network behaves.

#pragma once

#include "dynadps/image.hpp"

#include <Eigen/Dense>

#include <cstdint>
#include <vector>

namespace dynadps {

struct DiffusionSchedule {
    int T = 0;
    Eigen::ArrayXd beta;       // beta[t] in (0,1), non-decreasing
    Eigen::ArrayXd alpha;      // 1 - beta[t]
    Eigen::ArrayXd alpha_bar;  // running product of alpha, strictly decreasing
};

/// Linear beta schedule from beta_min to beta_max over T steps; alpha_bar
/// accumulated in extended precision. Requires 0 < beta_min < beta_max < 1
/// and T >= 2.
DiffusionSchedule make_schedule(int T, double beta_min = 1e-4, double beta_max = 0.02);

struct GaussianMixturePrior {
    std::vector<Image> templates;  // component means
    Eigen::ArrayXd weights;        // positive, sums to 1
    double sigma_p = 0.05;         // per-component isotropic std

    /// Throws std::invalid_argument on inconsistent members.
    void validate() const;
};

/// sqrt(alpha_bar[t]) * x0 + sqrt(1 - alpha_bar[t]) * eps with seeded
/// eps ~ N(0, I). Requires 0 <= t < T.
Image forward_noise(const Image& x0, int t, const DiffusionSchedule& sched, std::uint64_t seed);

/// Marginal variance of one mixture component at time t:
/// v_t = alpha_bar[t] * sigma_p^2 + (1 - alpha_bar[t]).
double marginal_variance(const GaussianMixturePrior& prior, int t,
                         const DiffusionSchedule& sched);

/// Exact score of the mixture marginal p_t = sum_k w_k N(sqrt(ab) mu_k, v_t I):
/// sum_k r_k(x) (sqrt(ab) mu_k - x) / v_t with log-sum-exp responsibilities.
Image gmm_score(const GaussianMixturePrior& prior, const Image& x, int t,
                const DiffusionSchedule& sched);

/// Tweedie estimate of the clean image:
/// x0_hat = (x_t + (1 - alpha_bar[t]) * score) / sqrt(alpha_bar[t]).
Image tweedie_denoise(const Image& x_t, int t, const GaussianMixturePrior& prior,
                      const DiffusionSchedule& sched);

/// One reverse transition x_t -> x_{t-1}:
/// (1/sqrt(alpha_t)) (x_t + beta_t * score) + sqrt(beta_tilde_t) * z with
/// beta_tilde_t = beta_t (1 - alpha_bar[t-1]) / (1 - alpha_bar[t]); z = 0 at
/// t = 1. Requires 1 <= t < T; deterministic per seed.
Image ancestral_step(const Image& x_t, int t, const GaussianMixturePrior& prior,
                     const DiffusionSchedule& sched, std::uint64_t seed);

}  // namespace dynadps
