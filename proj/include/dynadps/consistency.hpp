// Composite data-consistency loss and its analytic gradient. The loss
// compares the measurement y against the degraded prediction A(x0_hat) with
// three terms: a plain squared-L2 residual (summed over pixels), a Sobel
// edge-map mismatch (mean squared), and an SSIM mismatch (mean squared
// 1 - local SSIM). Edge and SSIM terms live in measurement space. The
// gradient chains analytically through both terms' nonlinearities and through
// the degradation operator; the score Jacobian of the denoiser is frozen to
// (1/sqrt(alpha_bar)) I, the standard DPS practice.

#pragma once

#include "dynadps/degradation.hpp"
#include "dynadps/diffusion.hpp"
#include "dynadps/image.hpp"

namespace dynadps {

struct ConsistencyWeights {
    double lambda1 = 0.5;  // edge term weight
    double lambda2 = 0.1;  // SSIM term weight
    int ssim_window = 11;  // odd, >= 3
    double ssim_k1 = 0.01;
    double ssim_k2 = 0.03;
    double peak = 1.0;  // dynamic range for the SSIM constants

    void validate() const;
};

/// Smoothed Sobel gradient magnitude sqrt(Gx^2 + Gy^2 + eps^2) with the
/// standard 3x3 kernels and reflective padding. Requires dims >= 3x3.
Image sobel_magnitude(const Image& img);

/// Per-pixel local SSIM between a and b using a Gaussian window of std
/// window/6. Requires equal dims >= window in both directions.
Image ssim_map(const Image& a, const Image& b, const ConsistencyWeights& w);

/// L_DC = l2_sq(y, A x) + lambda1 * mean((Sobel(y) - Sobel(A x))^2)
///      + lambda2 * mean((1 - ssim_map(y, A x))^2), A noise-free.
double dc_loss(const Image& y, const Image& x0_hat, const DegradationConfig& cfg,
               const ConsistencyWeights& w);

/// Gradient of the three-term loss with respect to the degraded prediction b
/// (measurement space), at b. a is the fixed reference (y).
Image dc_measurement_gradient(const Image& y, const Image& b, const ConsistencyWeights& w);

/// Gradient of dc_loss with respect to x0_hat: chains the measurement-space
/// gradient through blur/downsample adjoints and the gamma Jacobian.
Image dc_prediction_gradient(const Image& y, const Image& x0_hat, const DegradationConfig& cfg,
                             const ConsistencyWeights& w);

/// Gradient of dc_loss(y, tweedie_denoise(x_t, t)) with respect to x_t under
/// the frozen-score-Jacobian approximation d x0_hat / d x_t = (1/sqrt(ab)) I.
Image dc_gradient(const Image& y, const Image& x_t, int t, const GaussianMixturePrior& prior,
                  const DiffusionSchedule& sched, const DegradationConfig& cfg,
                  const ConsistencyWeights& w);

}  // namespace dynadps
