// Small-kernel correlation with reflective (symmetric, edge-repeating)
// boundary handling, plus the exact adjoints of those operators. The adjoints
// are implemented as scatter-accumulation over the same reflected indices, so
// <Kx, y> == <x, K'y> holds to rounding error; data-consistency gradients and
// the conjugate-gradient solver rely on this being exact rather than
// approximate.

#pragma once

#include "dynadps/image.hpp"

#include <Eigen/Dense>

namespace dynadps {

/// Reflect an out-of-range index into [0, n): ...2,1,0 | 0,1,2... | 2,1,0...
inline Eigen::Index reflect_index(Eigen::Index i, Eigen::Index n) {
    while (i < 0 || i >= n) {
        if (i < 0) {
            i = -i - 1;
        } else {
            i = 2 * n - 1 - i;
        }
    }
    return i;
}

/// Normalized Gaussian taps exp(-j^2 / 2 sigma^2), j in [-radius, radius].
/// sigma <= 0 or radius == 0 yields the identity kernel [1].
inline Eigen::ArrayXd gaussian_kernel(double sigma, int radius) {
    if (sigma <= 0.0 || radius <= 0) {
        return Eigen::ArrayXd::Ones(1);
    }
    Eigen::ArrayXd k(2 * radius + 1);
    for (int j = -radius; j <= radius; ++j) {
        k(j + radius) = std::exp(-0.5 * static_cast<double>(j) * j / (sigma * sigma));
    }
    return k / k.sum();
}

/// 1D correlation along rows then columns with a shared kernel (odd length).
inline Image separable_correlate_reflect(const Image& x, const Eigen::ArrayXd& kernel) {
    const Eigen::Index radius = (kernel.size() - 1) / 2;
    const Eigen::Index rows = x.rows();
    const Eigen::Index cols = x.cols();
    Image tmp(rows, cols);
    for (Eigen::Index r = 0; r < rows; ++r) {
        for (Eigen::Index c = 0; c < cols; ++c) {
            double acc = 0.0;
            for (Eigen::Index j = -radius; j <= radius; ++j) {
                acc += kernel(j + radius) * x(r, reflect_index(c + j, cols));
            }
            tmp(r, c) = acc;
        }
    }
    Image out(rows, cols);
    for (Eigen::Index c = 0; c < cols; ++c) {
        for (Eigen::Index r = 0; r < rows; ++r) {
            double acc = 0.0;
            for (Eigen::Index j = -radius; j <= radius; ++j) {
                acc += kernel(j + radius) * tmp(reflect_index(r + j, rows), c);
            }
            out(r, c) = acc;
        }
    }
    return out;
}

/// Exact adjoint of separable_correlate_reflect with the same kernel.
inline Image separable_correlate_reflect_adjoint(const Image& y, const Eigen::ArrayXd& kernel) {
    const Eigen::Index radius = (kernel.size() - 1) / 2;
    const Eigen::Index rows = y.rows();
    const Eigen::Index cols = y.cols();
    // Adjoint of the column pass: scatter along rows.
    Image tmp = Image::Zero(rows, cols);
    for (Eigen::Index c = 0; c < cols; ++c) {
        for (Eigen::Index r = 0; r < rows; ++r) {
            const double v = y(r, c);
            for (Eigen::Index j = -radius; j <= radius; ++j) {
                tmp(reflect_index(r + j, rows), c) += kernel(j + radius) * v;
            }
        }
    }
    // Adjoint of the row pass: scatter along columns.
    Image out = Image::Zero(rows, cols);
    for (Eigen::Index r = 0; r < rows; ++r) {
        for (Eigen::Index c = 0; c < cols; ++c) {
            const double v = tmp(r, c);
            for (Eigen::Index j = -radius; j <= radius; ++j) {
                out(r, reflect_index(c + j, cols)) += kernel(j + radius) * v;
            }
        }
    }
    return out;
}

/// Correlation with a dense 3x3 kernel (row-major taps), reflective boundary.
inline Image correlate3_reflect(const Image& x, const Eigen::Matrix3d& kernel) {
    const Eigen::Index rows = x.rows();
    const Eigen::Index cols = x.cols();
    Image out(rows, cols);
    for (Eigen::Index r = 0; r < rows; ++r) {
        for (Eigen::Index c = 0; c < cols; ++c) {
            double acc = 0.0;
            for (int dr = -1; dr <= 1; ++dr) {
                const Eigen::Index rr = reflect_index(r + dr, rows);
                for (int dc = -1; dc <= 1; ++dc) {
                    acc += kernel(dr + 1, dc + 1) * x(rr, reflect_index(c + dc, cols));
                }
            }
            out(r, c) = acc;
        }
    }
    return out;
}

/// Exact adjoint of correlate3_reflect.
inline Image correlate3_reflect_adjoint(const Image& y, const Eigen::Matrix3d& kernel) {
    const Eigen::Index rows = y.rows();
    const Eigen::Index cols = y.cols();
    Image out = Image::Zero(rows, cols);
    for (Eigen::Index r = 0; r < rows; ++r) {
        for (Eigen::Index c = 0; c < cols; ++c) {
            const double v = y(r, c);
            for (int dr = -1; dr <= 1; ++dr) {
                const Eigen::Index rr = reflect_index(r + dr, rows);
                for (int dc = -1; dc <= 1; ++dc) {
                    out(rr, reflect_index(c + dc, cols)) += kernel(dr + 1, dc + 1) * v;
                }
            }
        }
    }
    return out;
}

}  // namespace dynadps
