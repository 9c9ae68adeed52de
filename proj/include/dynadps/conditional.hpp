// Phase-I conditional models mapping a measurement to a full-resolution
// estimate: a closed-form baseline (bilinear upsampling plus inverse gamma
// under the degradation the model ASSUMES) and a trainable ridge-regression
// patch model. Both are deliberately simple so their out-of-distribution
// failure modes are predictable and measurable.

#pragma once

#include "dynadps/degradation.hpp"
#include "dynadps/image.hpp"

#include <cstdint>
#include <utility>
#include <vector>

namespace dynadps {

/// Upsample by an integer factor with bilinear interpolation on the
/// half-pixel-centered grid (source position (dst + 0.5)/k - 0.5, clamped at
/// the borders). k = 1 is the identity.
Image bilinear_upsample(const Image& y, int k);

/// Weakest possible conditional model: bilinear upsample by cfg.factor_k,
/// then undo the ASSUMED gamma (pixel^(1/gamma)). When the data were made
/// with a different gamma this injects a controlled contrast error.
Image naive_predict(const Image& y, const DegradationConfig& cfg_assumed);

struct RidgeModel {
    int patch_in = 5;             // odd low-frequency patch side
    int scale_k = 2;              // upsampling factor
    double ridge_lambda = 1e-3;   // Tikhonov weight used at fit time
    Eigen::MatrixXd weights;      // (patch_in^2 + 1) x k^2, bias row last
    std::uint64_t trained_on = 0; // degradation fingerprint the pairs came from

    /// Throws std::invalid_argument on inconsistent members.
    void validate() const;
};

/// Regularized least squares from every (patch_in^2 LF patch -> k x k HF
/// block) pair extractable from the training images (reflective padding at
/// borders): solves (P^T P + lambda I) W = P^T Q. Deterministic; the seed is
/// recorded for interface stability but the full extraction uses no
/// randomness.
RidgeModel ridge_fit(const std::vector<std::pair<Image, Image>>& pairs_hf_lf, int patch_in, int k,
                     double ridge_lambda, std::uint64_t seed);

/// Tiled prediction: every LF pixel's patch maps to its k x k output block.
/// Linear in y (see ridge_predict_preclamp); the final clamp to [0, 1.2]
/// leaves headroom for overshoot.
Image ridge_predict(const RidgeModel& model, const Image& y);

/// ridge_predict without the final clamp — exactly linear in y.
Image ridge_predict_preclamp(const RidgeModel& model, const Image& y);

}  // namespace dynadps
