#include "dynadps/diffusion.hpp"

#include "dynadps/rng.hpp"

#include <cmath>
#include <stdexcept>
#include <string>

namespace dynadps {

namespace {

void require_t(int t, int t_min, const DiffusionSchedule& sched, const char* what) {
    if (t < t_min || t >= sched.T) {
        throw std::invalid_argument(std::string(what) + ": t=" + std::to_string(t) +
                                    " outside [" + std::to_string(t_min) + ", " +
                                    std::to_string(sched.T) + ")");
    }
}

}  // namespace

DiffusionSchedule make_schedule(int T, double beta_min, double beta_max) {
    if (T < 2) {
        throw std::invalid_argument("make_schedule: T must be >= 2");
    }
    if (!(0.0 < beta_min && beta_min < beta_max && beta_max < 1.0)) {
        throw std::invalid_argument("make_schedule: need 0 < beta_min < beta_max < 1");
    }
    DiffusionSchedule s;
    s.T = T;
    s.beta.resize(T);
    s.alpha.resize(T);
    s.alpha_bar.resize(T);
    long double running = 1.0L;  // extended precision keeps the tail product stable
    for (int t = 0; t < T; ++t) {
        s.beta(t) = beta_min + (beta_max - beta_min) * static_cast<double>(t) / (T - 1);
        s.alpha(t) = 1.0 - s.beta(t);
        running *= static_cast<long double>(s.alpha(t));
        s.alpha_bar(t) = static_cast<double>(running);
    }
    return s;
}

void GaussianMixturePrior::validate() const {
    if (templates.empty()) {
        throw std::invalid_argument("prior: no templates");
    }
    if (static_cast<Eigen::Index>(templates.size()) != weights.size()) {
        throw std::invalid_argument("prior: weights/templates count mismatch");
    }
    for (const Image& m : templates) {
        if (m.rows() != templates.front().rows() || m.cols() != templates.front().cols()) {
            throw std::invalid_argument("prior: template dimension mismatch");
        }
    }
    if ((weights <= 0.0).any()) {
        throw std::invalid_argument("prior: weights must be positive");
    }
    if (std::abs(weights.sum() - 1.0) > 1e-12) {
        throw std::invalid_argument("prior: weights must sum to 1");
    }
    if (sigma_p <= 0.0) {
        throw std::invalid_argument("prior: sigma_p must be positive");
    }
}

Image forward_noise(const Image& x0, int t, const DiffusionSchedule& sched, std::uint64_t seed) {
    require_t(t, 0, sched, "forward_noise");
    const double ab = sched.alpha_bar(t);
    GaussianSampler rng(seed);
    return std::sqrt(ab) * x0 + std::sqrt(1.0 - ab) * rng.normal_image(x0.rows(), x0.cols());
}

double marginal_variance(const GaussianMixturePrior& prior, int t,
                         const DiffusionSchedule& sched) {
    require_t(t, 0, sched, "marginal_variance");
    const double ab = sched.alpha_bar(t);
    return ab * prior.sigma_p * prior.sigma_p + (1.0 - ab);
}

Image gmm_score(const GaussianMixturePrior& prior, const Image& x, int t,
                const DiffusionSchedule& sched) {
    require_t(t, 0, sched, "gmm_score");
    require_same_dims(x, prior.templates.front(), "gmm_score");
    const double ab_sqrt = std::sqrt(sched.alpha_bar(t));
    const double v = marginal_variance(prior, t, sched);
    const std::size_t K = prior.templates.size();

    // Unnormalized log responsibilities; the shared Gaussian normalizer cancels.
    Eigen::ArrayXd log_r(K);
    for (std::size_t k = 0; k < K; ++k) {
        log_r(k) = std::log(prior.weights(k)) -
                   l2_sq(x, Image(ab_sqrt * prior.templates[k])) / (2.0 * v);
    }
    const double m = log_r.maxCoeff();
    Eigen::ArrayXd r = (log_r - m).exp();
    r /= r.sum();

    Image score = Image::Zero(x.rows(), x.cols());
    for (std::size_t k = 0; k < K; ++k) {
        score += r(k) * (ab_sqrt * prior.templates[k] - x);
    }
    return score / v;
}

Image tweedie_denoise(const Image& x_t, int t, const GaussianMixturePrior& prior,
                      const DiffusionSchedule& sched) {
    require_t(t, 0, sched, "tweedie_denoise");
    const double ab = sched.alpha_bar(t);
    return (x_t + (1.0 - ab) * gmm_score(prior, x_t, t, sched)) / std::sqrt(ab);
}

Image ancestral_step(const Image& x_t, int t, const GaussianMixturePrior& prior,
                     const DiffusionSchedule& sched, std::uint64_t seed) {
    require_t(t, 1, sched, "ancestral_step");
    const double beta = sched.beta(t);
    Image mean = (x_t + beta * gmm_score(prior, x_t, t, sched)) / std::sqrt(sched.alpha(t));
    if (t == 1) {
        return mean;
    }
    const double beta_tilde = beta * (1.0 - sched.alpha_bar(t - 1)) / (1.0 - sched.alpha_bar(t));
    GaussianSampler rng(seed);
    return mean + std::sqrt(beta_tilde) * rng.normal_image(x_t.rows(), x_t.cols());
}

}  // namespace dynadps
