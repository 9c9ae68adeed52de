// Evaluation metrics: PSNR, aggregate SSIM, the intrinsic/extrinsic
// hallucination decomposition, and a relative-volume-error proxy for small
// labeled structures. The decomposition splits the reconstruction error into
// the part the measurement can see (range of the linear operator) and the
// part it cannot (numerical null space, where hallucinations live).

#pragma once

#include "dynadps/consistency.hpp"
#include "dynadps/degradation.hpp"
#include "dynadps/image.hpp"

namespace dynadps {

/// 10 log10(peak^2 / MSE); +infinity when the images match exactly.
double psnr(const Image& a, const Image& b, double peak = 1.0);

/// Mean of ssim_map over the image.
double ssim_aggregate(const Image& a, const Image& b, const ConsistencyWeights& w);

struct HallucinationReport {
    double intrinsic = 0.0;  // |A x_hat - A x_true|_2, measurement space
    double extrinsic = 0.0;  // |(I - A^+ A)(x_hat - x_true)|_2, image space
    double eps_used = 0.0;
    bool projector_converged = true;  // pseudo-inverse solve hit its tolerance
};

/// Intrinsic/extrinsic split of x_hat - x_true under the LINEAR part of the
/// degradation (blur + downsample; the pointwise gamma is excluded so the
/// projector matches the operator it inverts).
HallucinationReport hallucination_decompose(const Image& x_hat, const Image& x_true,
                                            const DegradationConfig& cfg, double eps = 1e-4);

/// RVE = 2 |V_pred - V_gt| / (V_pred + V_gt). V_pred counts pixels of x_hat
/// inside the class intensity band [band_lo, band_hi], restricted to the true
/// class region dilated by `dilation_radius` (Chebyshev); V_gt is the true
/// class pixel count. Throws std::invalid_argument when both volumes vanish.
double region_volume_error(const Image& x_hat, const LabelMap& labels_true, int class_id,
                           double band_lo, double band_hi, int dilation_radius = 2);

}  // namespace dynadps
