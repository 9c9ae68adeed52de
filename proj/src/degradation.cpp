#include "dynadps/degradation.hpp"

#include "dynadps/errors.hpp"
#include "dynadps/filters.hpp"
#include "dynadps/rng.hpp"

#include <cmath>
#include <cstdio>
#include <string>

namespace dynadps {

void DegradationConfig::validate() const {
    if (gamma <= 0.0) {
        throw ConfigError("degradation: gamma must be positive");
    }
    if (blur_sigma < 0.0) {
        throw ConfigError("degradation: blur_sigma must be non-negative");
    }
    if (blur_sigma > 0.0 && blur_radius < static_cast<int>(std::ceil(3.0 * blur_sigma))) {
        throw ConfigError("degradation: blur_radius must be >= ceil(3*blur_sigma)");
    }
    if (blur_radius < 0) {
        throw ConfigError("degradation: blur_radius must be non-negative");
    }
    if (factor_k < 1) {
        throw ConfigError("degradation: factor_k must be a positive integer");
    }
    if (noise_sigma < 0.0) {
        throw ConfigError("degradation: noise_sigma must be non-negative");
    }
    if (!(gamma_floor > 0.0 && gamma_floor <= 0.01)) {
        throw ConfigError("degradation: gamma_floor must lie in (0, 0.01]");
    }
}

void DegradationConfig::validate_for(Eigen::Index rows, Eigen::Index cols) const {
    validate();
    if (rows % factor_k != 0 || cols % factor_k != 0) {
        throw std::invalid_argument("degradation: factor_k=" + std::to_string(factor_k) +
                                    " does not divide image dims " + std::to_string(rows) + "x" +
                                    std::to_string(cols));
    }
}

std::uint64_t degradation_fingerprint(const DegradationConfig& cfg) {
    char buf[256];
    std::snprintf(buf, sizeof(buf), "gamma=%.17g;blur_sigma=%.17g;blur_radius=%d;factor_k=%d;noise_sigma=%.17g;gamma_floor=%.17g", cfg.gamma, cfg.blur_sigma, cfg.blur_radius,
                  cfg.factor_k, cfg.noise_sigma, cfg.gamma_floor);
    // FNV-1a over the canonical parameter string.
    std::uint64_t h = 0xcbf29ce484222325ull;
    for (const char* p = buf; *p; ++p) {
        h = (h ^ static_cast<unsigned char>(*p)) * 0x100000001b3ull;
    }
    return h;
}

Image gamma_transform(const Image& x, double gamma, double floor) {
    if (gamma <= 0.0) {
        throw std::invalid_argument("gamma_transform: gamma must be positive");
    }
    return x.max(floor).pow(gamma);
}

Image gamma_jacobian_diag(const Image& x, double gamma, double floor) {
    if (gamma <= 0.0) {
        throw std::invalid_argument("gamma_jacobian_diag: gamma must be positive");
    }
    return gamma * x.max(floor).pow(gamma - 1.0);
}

Image gaussian_blur(const Image& x, double sigma, int radius) {
    if (sigma <= 0.0 || radius <= 0) {
        return x;
    }
    return separable_correlate_reflect(x, gaussian_kernel(sigma, radius));
}

Image downsample(const Image& x, int k) {
    if (k == 1) {
        return x;
    }
    if (x.rows() % k != 0 || x.cols() % k != 0) {
        throw std::invalid_argument("downsample: factor does not divide image dims");
    }
    const Eigen::Index out_rows = x.rows() / k;
    const Eigen::Index out_cols = x.cols() / k;
    const double inv = 1.0 / (static_cast<double>(k) * k);
    Image out(out_rows, out_cols);
    for (Eigen::Index r = 0; r < out_rows; ++r) {
        for (Eigen::Index c = 0; c < out_cols; ++c) {
            out(r, c) = x.block(r * k, c * k, k, k).sum() * inv;
        }
    }
    return out;
}

Image upsample_replicate(const Image& y, int k) {
    if (k == 1) {
        return y;
    }
    const double inv = 1.0 / (static_cast<double>(k) * k);
    Image out(y.rows() * k, y.cols() * k);
    for (Eigen::Index r = 0; r < y.rows(); ++r) {
        for (Eigen::Index c = 0; c < y.cols(); ++c) {
            out.block(r * k, c * k, k, k).setConstant(y(r, c) * inv);
        }
    }
    return out;
}

Image apply_forward(const Image& x, const DegradationConfig& cfg,
                    std::optional<std::uint64_t> noise_seed) {
    cfg.validate_for(x.rows(), x.cols());
    Image out = gaussian_blur(downsample(gamma_transform(x, cfg.gamma, cfg.gamma_floor), cfg.factor_k),
                              cfg.blur_sigma, cfg.blur_radius);
    if (noise_seed && cfg.noise_sigma > 0.0) {
        GaussianSampler rng(*noise_seed);
        out += cfg.noise_sigma * rng.normal_image(out.rows(), out.cols());
    }
    return out;
}

Image apply_linear(const Image& x, const DegradationConfig& cfg) {
    cfg.validate_for(x.rows(), x.cols());
    return gaussian_blur(downsample(x, cfg.factor_k), cfg.blur_sigma, cfg.blur_radius);
}

Image apply_linear_adjoint(const Image& y, const DegradationConfig& cfg,
                           Eigen::Index out_rows, Eigen::Index out_cols) {
    cfg.validate_for(out_rows, out_cols);
    if (y.rows() * cfg.factor_k != out_rows || y.cols() * cfg.factor_k != out_cols) {
        throw std::invalid_argument("apply_linear_adjoint: y dims inconsistent with out dims / k");
    }
    Image blurred_adj = y;
    if (cfg.blur_sigma > 0.0 && cfg.blur_radius > 0) {
        blurred_adj =
            separable_correlate_reflect_adjoint(y, gaussian_kernel(cfg.blur_sigma, cfg.blur_radius));
    }
    return upsample_replicate(blurred_adj, cfg.factor_k);
}

PseudoInverseResult pseudo_inverse_apply(const Image& y, const DegradationConfig& cfg,
                                         double eps, int max_iter, double tol) {
    if (eps <= 0.0) {
        throw std::invalid_argument("pseudo_inverse_apply: eps must be positive");
    }
    const Eigen::Index rows = y.rows() * cfg.factor_k;
    const Eigen::Index cols = y.cols() * cfg.factor_k;
    const auto normal_op = [&](const Image& v) -> Image {
        return apply_linear_adjoint(apply_linear(v, cfg), cfg, rows, cols) + eps * v;
    };

    PseudoInverseResult res;
    const Image b = apply_linear_adjoint(y, cfg, rows, cols);
    const double b_norm = l2_norm(b);
    if (b_norm == 0.0) {
        res.x = Image::Zero(rows, cols);
        res.converged = true;
        res.residual_history.push_back(0.0);
        return res;
    }

    // Conjugate-residual iteration: like CG it needs one operator apply per
    // step, but it minimizes ||b - M x|| over the growing Krylov space, so the
    // recorded residual norms are non-increasing — a property the plain CG
    // recurrence does not have and that callers of residual_history rely on.
    Image x = Image::Zero(rows, cols);
    Image r = b;  // b - M x with x = 0
    Image p = r;
    Image mr = normal_op(r);
    Image mp = mr;
    double r_mr = dot(r, mr);
    double r_norm = b_norm;
    res.residual_history.push_back(r_norm);
    int it = 0;
    while (it < max_iter && r_mr > 0.0) {
        const double mp_sq = mp.square().sum();
        if (mp_sq == 0.0) {
            break;
        }
        const double alpha = r_mr / mp_sq;
        x += alpha * p;
        r -= alpha * mp;
        r_norm = l2_norm(r);
        ++it;
        res.residual_history.push_back(r_norm);
        if (r_norm / b_norm < tol) {
            res.converged = true;
            break;
        }
        mr = normal_op(r);
        const double r_mr_next = dot(r, mr);
        const double beta = r_mr_next / r_mr;
        p = r + beta * p;
        mp = mr + beta * mp;
        r_mr = r_mr_next;
    }
    res.x = std::move(x);
    res.iterations = it;
    res.rel_residual = r_norm / b_norm;
    return res;
}

}  // namespace dynadps
