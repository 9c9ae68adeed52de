#include "dynadps/metrics.hpp"

#include <cmath>
#include <limits>
#include <stdexcept>

namespace dynadps {

double psnr(const Image& a, const Image& b, double peak) {
    require_same_dims(a, b, "psnr");
    if (!(peak > 0.0)) throw std::invalid_argument("psnr: peak must be positive");
    const double mse = l2_sq(a, b) / static_cast<double>(a.size());
    if (mse == 0.0) return std::numeric_limits<double>::infinity();
    return 10.0 * std::log10(peak * peak / mse);
}

double ssim_aggregate(const Image& a, const Image& b, const ConsistencyWeights& w) {
    return ssim_map(a, b, w).mean();
}

HallucinationReport hallucination_decompose(const Image& x_hat, const Image& x_true,
                                            const DegradationConfig& cfg, double eps) {
    require_same_dims(x_hat, x_true, "hallucination_decompose");
    HallucinationReport report;
    report.eps_used = eps;

    const Image d = x_hat - x_true;
    const Image ad = apply_linear(d, cfg);
    report.intrinsic = std::sqrt(ad.square().sum());

    const PseudoInverseResult pinv = pseudo_inverse_apply(ad, cfg, eps);
    report.projector_converged = pinv.converged;
    report.extrinsic = l2_norm(d - pinv.x);
    return report;
}

double region_volume_error(const Image& x_hat, const LabelMap& labels_true, int class_id,
                           double band_lo, double band_hi, int dilation_radius) {
    if (x_hat.rows() != labels_true.rows() || x_hat.cols() != labels_true.cols())
        throw std::invalid_argument("region_volume_error: image/label dimension mismatch");
    if (!(band_hi > band_lo))
        throw std::invalid_argument("region_volume_error: empty intensity band");
    if (dilation_radius < 0)
        throw std::invalid_argument("region_volume_error: negative dilation radius");

    const int rows = static_cast<int>(x_hat.rows());
    const int cols = static_cast<int>(x_hat.cols());

    // Chebyshev dilation of the true class mask.
    ImageT<bool> dilated = ImageT<bool>::Constant(rows, cols, false);
    long v_gt = 0;
    for (int i = 0; i < rows; ++i)
        for (int j = 0; j < cols; ++j) {
            if (labels_true(i, j) != class_id) continue;
            ++v_gt;
            const int i_lo = std::max(0, i - dilation_radius);
            const int i_hi = std::min(rows - 1, i + dilation_radius);
            const int j_lo = std::max(0, j - dilation_radius);
            const int j_hi = std::min(cols - 1, j + dilation_radius);
            for (int di = i_lo; di <= i_hi; ++di)
                for (int dj = j_lo; dj <= j_hi; ++dj) dilated(di, dj) = true;
        }

    long v_pred = 0;
    for (int i = 0; i < rows; ++i)
        for (int j = 0; j < cols; ++j)
            if (dilated(i, j) && x_hat(i, j) >= band_lo && x_hat(i, j) <= band_hi) ++v_pred;

    if (v_pred + v_gt == 0)
        throw std::invalid_argument("region_volume_error: class absent from truth and prediction");
    return 2.0 * std::abs(static_cast<double>(v_pred - v_gt)) /
           static_cast<double>(v_pred + v_gt);
}

}  // namespace dynadps
