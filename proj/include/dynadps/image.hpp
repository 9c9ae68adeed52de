// Core image container and elementwise/reduction arithmetic shared by all
// modules. Images are dense row-major 2D arrays of 64-bit reals with a
// top-left origin; they are plain value types and safe to share read-only.

#pragma once

#include <Eigen/Dense>

#include <cmath>
#include <stdexcept>
#include <string>

namespace dynadps {

template <typename Scalar>
using ImageT = Eigen::Array<Scalar, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;

/// Intensity grid, nominal range [0,1]. rows = height, cols = width.
using Image = ImageT<double>;

/// Tissue class ids paired with an Image of the same dimensions.
using LabelMap = ImageT<int>;

inline void require_same_dims(const Image& a, const Image& b, const char* what) {
    if (a.rows() != b.rows() || a.cols() != b.cols()) {
        throw std::invalid_argument(std::string(what) + ": dimension mismatch (" +
                                    std::to_string(a.rows()) + "x" + std::to_string(a.cols()) +
                                    " vs " + std::to_string(b.rows()) + "x" +
                                    std::to_string(b.cols()) + ")");
    }
}

/// Sum of elementwise products.
inline double dot(const Image& a, const Image& b) {
    require_same_dims(a, b, "dot");
    return (a * b).sum();
}

/// Squared L2 distance, sum over pixels of (a-b)^2.
inline double l2_sq(const Image& a, const Image& b) {
    require_same_dims(a, b, "l2_sq");
    return (a - b).square().sum();
}

inline double l2_norm(const Image& a) {
    return std::sqrt(a.square().sum());
}

/// Elementwise clipping to [lo, hi]. Requires lo < hi.
inline Image clamp(const Image& img, double lo, double hi) {
    if (!(lo < hi)) {
        throw std::invalid_argument("clamp: lo must be < hi");
    }
    return img.max(lo).min(hi);
}

inline bool all_finite(const Image& img) {
    return img.isFinite().all();
}

}  // namespace dynadps
