// Forward degradation operator y = A x + n with A = Blur(DS_k(Gamma(x))):
// pointwise gamma transform, block-mean downsampling by k, then Gaussian blur
// at the reduced resolution, plus optional i.i.d. measurement noise. Also
// provides the adjoint of the linear part (blur + downsample, gamma excluded)
// and a regularized pseudoinverse via conjugate gradient, which the
// hallucination decomposition and data-consistency gradients build on.

#pragma once

#include "dynadps/image.hpp"

#include <cstdint>
#include <optional>
#include <vector>

namespace dynadps {

struct DegradationConfig {
    double gamma = 0.7;        // contrast exponent
    double blur_sigma = 1.0;   // Gaussian kernel std, pixels
    int blur_radius = 3;       // kernel half-width, pixels
    int factor_k = 2;          // downsampling factor
    double noise_sigma = 0.02; // measurement noise std, intensity units
    double gamma_floor = 1e-6; // clamp before exponentiation

    /// Throws ConfigError on an invalid parameter combination.
    void validate() const;

    /// Additionally checks that factor_k divides the given input dimensions.
    void validate_for(Eigen::Index rows, Eigen::Index cols) const;
};

/// Stable 64-bit fingerprint of the operator parameters.
std::uint64_t degradation_fingerprint(const DegradationConfig& cfg);

/// Pointwise max(x, floor)^gamma. Requires gamma > 0.
Image gamma_transform(const Image& x, double gamma, double floor);

/// Pointwise derivative of gamma_transform: gamma * max(x, floor)^(gamma-1).
Image gamma_jacobian_diag(const Image& x, double gamma, double floor);

/// Separable Gaussian blur with reflective padding; identity when sigma or
/// radius is zero.
Image gaussian_blur(const Image& x, double sigma, int radius);

/// Block-mean downsampling by factor k. Requires k to divide both dims.
Image downsample(const Image& x, int k);

/// Adjoint of downsample: replicate each pixel into its k x k block, scaled
/// by 1/k^2.
Image upsample_replicate(const Image& y, int k);

/// Full degradation y = Blur(DS(Gamma(x))) (+ noise when a seed is given and
/// noise_sigma > 0). Deterministic for a fixed seed.
Image apply_forward(const Image& x, const DegradationConfig& cfg,
                    std::optional<std::uint64_t> noise_seed = std::nullopt);

/// Linear part only: Blur(DS(x)). No gamma, no noise.
Image apply_linear(const Image& x, const DegradationConfig& cfg);

/// Exact adjoint of apply_linear. out_rows/out_cols are the x-space dims.
Image apply_linear_adjoint(const Image& y, const DegradationConfig& cfg,
                           Eigen::Index out_rows, Eigen::Index out_cols);

struct PseudoInverseResult {
    Image x;
    bool converged = false;
    int iterations = 0;
    double rel_residual = 0.0;
    std::vector<double> residual_history;  // ||r|| per iteration, including initial
};

/// Solves (A'A + eps I) x = A'y by a conjugate-residual Krylov iteration,
/// A = apply_linear. Converged when the relative residual drops below tol;
/// the result is returned either way with a convergence flag. Residual norms
/// in residual_history are monotone non-increasing.
PseudoInverseResult pseudo_inverse_apply(const Image& y, const DegradationConfig& cfg,
                                         double eps = 1e-4, int max_iter = 500,
                                         double tol = 1e-8);

}  // namespace dynadps
