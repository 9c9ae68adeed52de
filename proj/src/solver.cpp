#include "dynadps/solver.hpp"

#include "dynadps/errors.hpp"
#include "dynadps/rng.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>

namespace dynadps {

void SolveParams::validate(const DiffusionSchedule& sched) const {
    if (mode == SolveMode::vanilla && !(rho > 0.0))
        throw ConfigError("solve: vanilla rho must be positive");
    wolfe.validate();
    dcats.validate();
    weights.validate();
    if (t_start_override && (*t_start_override < 1 || *t_start_override >= sched.T))
        throw ConfigError("solve: t_start_override outside [1, T)");
}

Image dps_step_vanilla(const Image& x_t, int t, const Image& y,
                       const GaussianMixturePrior& prior, const DiffusionSchedule& sched,
                       const DegradationConfig& cfg, double rho, std::uint64_t seed) {
    const Image x_prime = ancestral_step(x_t, t, prior, sched, seed);
    if (rho == 0.0) return x_prime;
    ConsistencyWeights plain;
    plain.lambda1 = 0.0;
    plain.lambda2 = 0.0;
    const Image g = dc_gradient(y, x_prime, t - 1, prior, sched, cfg, plain);
    return x_prime - rho * g;
}

DynamicStepResult dynamic_step(const Image& x_t, int t, const Image& y,
                               const GaussianMixturePrior& prior, const DiffusionSchedule& sched,
                               const DegradationConfig& cfg, const ConsistencyWeights& w,
                               const WolfeParams& wolfe, std::uint64_t seed) {
    DynamicStepResult result;
    const Image x_prime = ancestral_step(x_t, t, prior, sched, seed);
    result.score_evals += 1;

    // One denoising serves the pre-update loss, the search direction, and
    // the line search's phi(0); the gradient is assembled from the same
    // x0_hat the composed dc_gradient would produce internally.
    const int level = t - 1;
    const Image x0_hat = tweedie_denoise(x_prime, level, prior, sched);
    result.score_evals += 1;
    result.ldc_pre = dc_loss(y, x0_hat, cfg, w);
    const Image g =
        dc_prediction_gradient(y, x0_hat, cfg, w) / std::sqrt(sched.alpha_bar(level));

    if (g.abs().maxCoeff() == 0.0) {  // already consistent: nothing to search
        result.x_next = x_prime;
        result.ldc_post = result.ldc_pre;
        result.armijo = true;
        result.curvature = true;
        return result;
    }

    const Image p = -g;
    const double g_sq = g.square().sum();
    auto& evals = result.score_evals;
    // The search probes phi and dphi at the same alpha back to back; cache
    // the latest denoised point so each trial step is denoised once.
    double memo_alpha = 0.0;
    Image memo_x0 = x0_hat;
    const auto denoise_at = [&](double alpha) -> const Image& {
        if (alpha != memo_alpha) {
            memo_x0 = tweedie_denoise(Image(x_prime + alpha * p), level, prior, sched);
            memo_alpha = alpha;
            evals += 1;
        }
        return memo_x0;
    };
    const auto phi = [&](double alpha) { return dc_loss(y, denoise_at(alpha), cfg, w); };
    const auto dphi = [&](double alpha) {
        if (alpha == 0.0) return -g_sq;
        return dot(Image(dc_prediction_gradient(y, denoise_at(alpha), cfg, w) /
                         std::sqrt(sched.alpha_bar(level))),
                   p);
    };

    const LineSearchResult ls = strong_wolfe(phi, dphi, wolfe);
    result.alpha = ls.armijo ? ls.alpha : 0.0;
    result.armijo = ls.armijo;
    result.curvature = ls.curvature;
    if (result.alpha > 0.0) {
        result.x_next = x_prime + result.alpha * p;
        result.ldc_post = ls.phi_alpha;
    } else {
        result.x_next = x_prime;
        result.ldc_post = result.ldc_pre;
    }
    return result;
}

SolveReport solve(const Image& y, const ConditionalModel& conditional,
                  const GaussianMixturePrior& prior, const DiffusionSchedule& sched,
                  const DegradationConfig& cfg, const MemoryBank& bank,
                  const SolveParams& params) {
    const auto clock_start = std::chrono::steady_clock::now();
    params.validate(sched);
    cfg.validate();
    prior.validate();

    SolveReport report;
    Image x;
    if (params.mode == SolveMode::dynamic) {
        if (bank.meta.fingerprint != degradation_fingerprint(cfg))
            throw FingerprintError("solve: memory bank built for a different degradation");
        const Image x_cond = conditional(y);
        report.t_start = params.t_start_override
                             ? *params.t_start_override
                             : select_time(bank, y, x_cond, cfg, params.dcats);
        x = forward_noise(x_cond, report.t_start, sched,
                          derive_seed(params.seed, seed_tag::init_noise));
    } else {
        report.t_start = sched.T - 1;
        GaussianSampler rng(derive_seed(params.seed, seed_tag::init_noise));
        x = rng.normal_image(static_cast<int>(y.rows()) * cfg.factor_k,
                             static_cast<int>(y.cols()) * cfg.factor_k);
    }

    WolfeParams wolfe = params.wolfe;  // alpha_init warm-started between steps
    for (int t = report.t_start; t >= 1; --t) {
        const std::uint64_t step_seed = derive_seed(params.seed, seed_tag::ancestral, t);
        if (params.mode == SolveMode::dynamic) {
            DynamicStepResult step =
                dynamic_step(x, t, y, prior, sched, cfg, params.weights, wolfe, step_seed);
            x = std::move(step.x_next);
            report.alpha_trace.push_back(step.alpha);
            report.ldc_pre_trace.push_back(step.ldc_pre);
            report.ldc_trace.push_back(step.ldc_post);
            report.armijo_trace.push_back(step.armijo);
            report.score_evals += step.score_evals;
            if (step.alpha > 0.0)
                wolfe.alpha_init =
                    std::clamp(step.alpha, 1e-3, params.wolfe.alpha_max / 2.0);
        } else {
            x = dps_step_vanilla(x, t, y, prior, sched, cfg, params.rho, step_seed);
            report.score_evals += 3;  // ancestral + gradient + trace loss below
            ConsistencyWeights plain;
            plain.lambda1 = 0.0;
            plain.lambda2 = 0.0;
            const double ldc =
                dc_loss(y, tweedie_denoise(x, t - 1, prior, sched), cfg, plain);
            report.alpha_trace.push_back(params.rho);
            report.ldc_pre_trace.push_back(ldc);
            report.ldc_trace.push_back(ldc);
            report.armijo_trace.push_back(false);
        }
        ++report.steps_taken;
    }

    report.output = clamp(x, 0.0, 1.0);
    report.wall_time =
        std::chrono::duration<double>(std::chrono::steady_clock::now() - clock_start).count();
    return report;
}

}  // namespace dynadps
