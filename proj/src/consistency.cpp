#include "dynadps/consistency.hpp"

#include "dynadps/errors.hpp"
#include "dynadps/filters.hpp"

#include <cmath>
#include <stdexcept>

namespace dynadps {

namespace {

constexpr double kSobelEps = 1e-8;

const Eigen::Matrix3d& sobel_kx() {
    static const Eigen::Matrix3d k = (Eigen::Matrix3d() << -1, 0, 1, -2, 0, 2, -1, 0, 1).finished();
    return k;
}

const Eigen::Matrix3d& sobel_ky() {
    static const Eigen::Matrix3d k = (Eigen::Matrix3d() << -1, -2, -1, 0, 0, 0, 1, 2, 1).finished();
    return k;
}

Eigen::ArrayXd ssim_window_kernel(const ConsistencyWeights& w) {
    return gaussian_kernel(w.ssim_window / 6.0, (w.ssim_window - 1) / 2);
}

// Windowed moments of (a, b) and the SSIM factor maps built from them.
struct SsimTerms {
    Image mu_a, mu_b;
    Image sigma_a2, sigma_b2, sigma_ab;
    Image a1, b1, a2, b2;  // A1 = 2 mu_a mu_b + C1 etc.
    Image map;
};

SsimTerms ssim_terms(const Image& a, const Image& b, const ConsistencyWeights& w) {
    const Eigen::ArrayXd win = ssim_window_kernel(w);
    SsimTerms t;
    t.mu_a = separable_correlate_reflect(a, win);
    t.mu_b = separable_correlate_reflect(b, win);
    t.sigma_a2 = separable_correlate_reflect(a.square(), win) - t.mu_a.square();
    t.sigma_b2 = separable_correlate_reflect(b.square(), win) - t.mu_b.square();
    t.sigma_ab = separable_correlate_reflect(a * b, win) - t.mu_a * t.mu_b;
    const double c1 = (w.ssim_k1 * w.peak) * (w.ssim_k1 * w.peak);
    const double c2 = (w.ssim_k2 * w.peak) * (w.ssim_k2 * w.peak);
    t.a1 = 2.0 * t.mu_a * t.mu_b + c1;
    t.b1 = t.mu_a.square() + t.mu_b.square() + c1;
    t.a2 = 2.0 * t.sigma_ab + c2;
    t.b2 = t.sigma_a2 + t.sigma_b2 + c2;
    t.map = (t.a1 * t.a2) / (t.b1 * t.b2);
    return t;
}

void require_ssim_dims(const Image& a, const Image& b, const ConsistencyWeights& w,
                       const char* what) {
    require_same_dims(a, b, what);
    if (a.rows() < w.ssim_window || a.cols() < w.ssim_window) {
        throw std::invalid_argument(std::string(what) + ": image smaller than the SSIM window");
    }
}

}  // namespace

void ConsistencyWeights::validate() const {
    if (lambda1 < 0.0 || lambda2 < 0.0) {
        throw ConfigError("consistency: lambda weights must be non-negative");
    }
    if (ssim_window < 3 || ssim_window % 2 == 0) {
        throw ConfigError("consistency: ssim_window must be odd and >= 3");
    }
    if (ssim_k1 <= 0.0 || ssim_k2 <= 0.0 || peak <= 0.0) {
        throw ConfigError("consistency: ssim_k1, ssim_k2, peak must be positive");
    }
}

Image sobel_magnitude(const Image& img) {
    if (img.rows() < 3 || img.cols() < 3) {
        throw std::invalid_argument("sobel_magnitude: image smaller than 3x3");
    }
    const Image gx = correlate3_reflect(img, sobel_kx());
    const Image gy = correlate3_reflect(img, sobel_ky());
    return (gx.square() + gy.square() + kSobelEps * kSobelEps).sqrt();
}

Image ssim_map(const Image& a, const Image& b, const ConsistencyWeights& w) {
    require_ssim_dims(a, b, w, "ssim_map");
    return ssim_terms(a, b, w).map;
}

double dc_loss(const Image& y, const Image& x0_hat, const DegradationConfig& cfg,
               const ConsistencyWeights& w) {
    const Image b = apply_forward(x0_hat, cfg);  // noise-free
    require_same_dims(y, b, "dc_loss");
    double loss = l2_sq(y, b);
    if (w.lambda1 > 0.0) {
        loss += w.lambda1 * (sobel_magnitude(y) - sobel_magnitude(b)).square().mean();
    }
    if (w.lambda2 > 0.0) {
        loss += w.lambda2 * (1.0 - ssim_map(y, b, w)).square().mean();
    }
    return loss;
}

Image dc_measurement_gradient(const Image& y, const Image& b, const ConsistencyWeights& w) {
    require_same_dims(y, b, "dc_measurement_gradient");
    const double m = static_cast<double>(y.size());
    Image g = 2.0 * (b - y);

    if (w.lambda1 > 0.0) {
        // d/db of mean((S(b) - S(y))^2): dS = (gx dgx + gy dgy)/S, pulled back
        // through the Sobel correlations by their exact adjoints.
        const Image gx = correlate3_reflect(b, sobel_kx());
        const Image gy = correlate3_reflect(b, sobel_ky());
        const Image s = (gx.square() + gy.square() + kSobelEps * kSobelEps).sqrt();
        const Image u = (2.0 * w.lambda1 / m) * (s - sobel_magnitude(y));
        g += correlate3_reflect_adjoint(u * gx / s, sobel_kx()) +
             correlate3_reflect_adjoint(u * gy / s, sobel_ky());
    }

    if (w.lambda2 > 0.0) {
        // d/db of mean((1 - SSIM)^2). Per-pixel SSIM = (A1 A2)/(B1 B2) with
        // A1,B1 functions of mu_b and A2,B2 of sigma_ab,sigma_b2; windowed
        // moments are pulled back through the (symmetric) Gaussian window by
        // its exact adjoint. Writing mu = G b, t2 = G b^2, tab = G (a b):
        //   dS/dmu  = 2 mu_a A2/(B1 B2) - 2 mu_b A1 A2/(B1^2 B2)
        //           - 2 mu_a A1/(B1 B2) + 2 mu_b A1 A2/(B1 B2^2)
        //   dS/dtab = 2 A1/(B1 B2)
        //   dS/dt2  = -A1 A2/(B1 B2^2)
        // and grad = G'(u dS/dmu) + 2 b . G'(u dS/dt2) + a . G'(u dS/dtab).
        require_ssim_dims(y, b, w, "dc_measurement_gradient");
        const SsimTerms t = ssim_terms(y, b, w);
        const Image u = (-2.0 * w.lambda2 / m) * (1.0 - t.map);
        const Image inv_b1b2 = 1.0 / (t.b1 * t.b2);
        const Image s_over_b1 = t.map / t.b1;  // A1 A2 / (B1^2 B2)
        const Image s_over_b2 = t.map / t.b2;  // A1 A2 / (B1 B2^2)
        const Image d_mu = 2.0 * (t.mu_a * t.a2 * inv_b1b2 - t.mu_b * s_over_b1 -
                                  t.mu_a * t.a1 * inv_b1b2 + t.mu_b * s_over_b2);
        const Image d_tab = 2.0 * t.a1 * inv_b1b2;
        const Image d_t2 = -s_over_b2;

        const Eigen::ArrayXd win = ssim_window_kernel(w);
        g += separable_correlate_reflect_adjoint(u * d_mu, win) +
             2.0 * b * separable_correlate_reflect_adjoint(u * d_t2, win) +
             y * separable_correlate_reflect_adjoint(u * d_tab, win);
    }
    return g;
}

Image dc_prediction_gradient(const Image& y, const Image& x0_hat, const DegradationConfig& cfg,
                             const ConsistencyWeights& w) {
    const Image b = apply_forward(x0_hat, cfg);
    require_same_dims(y, b, "dc_prediction_gradient");
    const Image g_b = dc_measurement_gradient(y, b, w);
    return gamma_jacobian_diag(x0_hat, cfg.gamma, cfg.gamma_floor) *
           apply_linear_adjoint(g_b, cfg, x0_hat.rows(), x0_hat.cols());
}

Image dc_gradient(const Image& y, const Image& x_t, int t, const GaussianMixturePrior& prior,
                  const DiffusionSchedule& sched, const DegradationConfig& cfg,
                  const ConsistencyWeights& w) {
    const Image x0_hat = tweedie_denoise(x_t, t, prior, sched);
    return dc_prediction_gradient(y, x0_hat, cfg, w) / std::sqrt(sched.alpha_bar(t));
}

}  // namespace dynadps
