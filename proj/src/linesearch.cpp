#include "dynadps/linesearch.hpp"

#include "dynadps/errors.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <stdexcept>

namespace dynadps {

namespace {

// One endpoint of the zoom bracket. The derivative is only known when the
// endpoint was accepted through the gradient branch.
struct Endpoint {
    double a = 0.0;
    double phi = 0.0;
    double dphi = 0.0;
    bool has_dphi = false;
};

// Minimizer of the cubic Hermite fit through both endpoints, falling back to
// the quadratic fit (lo value+slope, hi value) and finally to bisection.
// Trial points outside the middle 80% of the bracket are snapped to the
// midpoint for robustness.
double interpolate(const Endpoint& lo, const Endpoint& hi) {
    const double left = std::min(lo.a, hi.a);
    const double right = std::max(lo.a, hi.a);
    const double width = right - left;
    const double mid = 0.5 * (left + right);
    double trial = mid;

    bool have_trial = false;
    if (lo.has_dphi && hi.has_dphi) {
        const double d1 = lo.dphi + hi.dphi - 3.0 * (lo.phi - hi.phi) / (lo.a - hi.a);
        const double disc = d1 * d1 - lo.dphi * hi.dphi;
        if (disc >= 0.0) {
            const double d2 = std::copysign(std::sqrt(disc), hi.a - lo.a);
            const double denom = hi.dphi - lo.dphi + 2.0 * d2;
            if (denom != 0.0) {
                trial = hi.a - (hi.a - lo.a) * (hi.dphi + d2 - d1) / denom;
                have_trial = true;
            }
        }
    }
    if (!have_trial && lo.has_dphi) {
        const double gap = hi.a - lo.a;
        const double denom = 2.0 * (hi.phi - lo.phi - lo.dphi * gap);
        if (denom != 0.0) {
            trial = lo.a - lo.dphi * gap * gap / denom;
            have_trial = true;
        }
    }
    if (!std::isfinite(trial) || trial < left + 0.1 * width || trial > right - 0.1 * width) {
        trial = mid;
    }
    return trial;
}

}  // namespace

void WolfeParams::validate() const {
    if (!(0.0 < c1 && c1 < c2 && c2 < 1.0)) {
        throw ConfigError("wolfe: need 0 < c1 < c2 < 1");
    }
    if (alpha_init <= 0.0 || alpha_max < alpha_init) {
        throw ConfigError("wolfe: need 0 < alpha_init <= alpha_max");
    }
    if (max_iters < 1) {
        throw ConfigError("wolfe: max_iters must be >= 1");
    }
}

LineSearchResult strong_wolfe(const std::function<double(double)>& phi,
                              const std::function<double(double)>& dphi,
                              const WolfeParams& params) {
    params.validate();
    LineSearchResult res;

    const double d0 = dphi(0.0);
    ++res.grad_evals;
    if (d0 >= 0.0) {
        throw std::invalid_argument("strong_wolfe: dphi(0) must be negative");
    }
    const double phi0 = phi(0.0);
    ++res.evals;
    const int eval_budget = 2 * params.max_iters + 2;

    const auto armijo_ok = [&](double a, double phi_a) {
        return phi_a <= phi0 + params.c1 * a * d0;
    };
    const auto curvature_ok = [&](double da) { return std::abs(da) <= -params.c2 * d0; };

    // Best Armijo-satisfying step seen so far (failure fallback).
    double best_a = 0.0;
    double best_phi = phi0;
    const auto note_armijo = [&](double a, double phi_a) {
        if (best_a == 0.0 || phi_a < best_phi) {
            best_a = a;
            best_phi = phi_a;
        }
    };
    const auto finish = [&](double a, double phi_a, bool arm, bool curv) {
        res.alpha = a;
        res.phi_alpha = phi_a;
        res.armijo = arm;
        res.curvature = curv;
        return res;
    };
    const auto fail_with_best = [&]() {
        return finish(best_a, best_phi, best_a > 0.0, false);
    };

    // Zoom phase: shrink [lo, hi] (lo = best Armijo endpoint) until the
    // curvature condition holds or the evaluation budget runs out.
    const auto zoom = [&](Endpoint lo, Endpoint hi) {
        while (res.evals < eval_budget) {
            if (std::abs(hi.a - lo.a) <=
                1e-12 * std::max(1.0, std::max(std::abs(lo.a), std::abs(hi.a)))) {
                break;
            }
            Endpoint trial;
            trial.a = interpolate(lo, hi);
            trial.phi = phi(trial.a);
            ++res.evals;
            if (!armijo_ok(trial.a, trial.phi) || trial.phi >= lo.phi) {
                hi = trial;
                continue;
            }
            note_armijo(trial.a, trial.phi);
            trial.dphi = dphi(trial.a);
            trial.has_dphi = true;
            ++res.grad_evals;
            if (curvature_ok(trial.dphi)) {
                return finish(trial.a, trial.phi, true, true);
            }
            if (trial.dphi * (hi.a - lo.a) >= 0.0) {
                hi = lo;
            }
            lo = trial;
        }
        return fail_with_best();
    };

    // Bracketing phase: expand until the minimum is straddled.
    Endpoint prev{0.0, phi0, d0, true};
    double a = std::min(params.alpha_init, params.alpha_max);
    for (int iter = 0; iter < params.max_iters && res.evals < eval_budget; ++iter) {
        Endpoint cur;
        cur.a = a;
        cur.phi = phi(a);
        ++res.evals;
        if (!armijo_ok(cur.a, cur.phi) || (iter > 0 && cur.phi >= prev.phi)) {
            return zoom(prev, cur);
        }
        note_armijo(cur.a, cur.phi);
        cur.dphi = dphi(cur.a);
        cur.has_dphi = true;
        ++res.grad_evals;
        if (curvature_ok(cur.dphi)) {
            return finish(cur.a, cur.phi, true, true);
        }
        if (cur.dphi >= 0.0) {
            return zoom(cur, prev);
        }
        if (a >= params.alpha_max) {
            break;  // slope still negative at the cap: take the cap
        }
        prev = cur;
        a = std::min(2.0 * a, params.alpha_max);
    }
    return fail_with_best();
}

}  // namespace dynadps
