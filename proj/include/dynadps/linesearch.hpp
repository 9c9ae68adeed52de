// Strong Wolfe line search: bracket-then-zoom with safeguarded cubic
// interpolation. The caller supplies phi(alpha) and its derivative as
// closures; the search certifies the Armijo sufficient-decrease condition
// phi(a) <= phi(0) + c1 a phi'(0) and the two-sided curvature condition
// |phi'(a)| <= c2 |phi'(0)|, and reports which of the two the returned step
// actually satisfies.

#pragma once

#include <functional>

namespace dynadps {

struct WolfeParams {
    double c1 = 1e-4;
    double c2 = 0.9;
    double alpha_init = 1.0;
    double alpha_max = 100.0;
    int max_iters = 25;

    void validate() const;
};

struct LineSearchResult {
    double alpha = 0.0;      // 0 on total failure
    double phi_alpha = 0.0;  // phi at the returned alpha
    int evals = 0;           // phi evaluations, phi(0) included
    int grad_evals = 0;      // dphi evaluations, dphi(0) included
    bool armijo = false;
    bool curvature = false;
};

/// Requires dphi(0) < 0 (throws std::invalid_argument otherwise, before any
/// phi evaluation past 0). Never exceeds 2 * max_iters + 2 phi evaluations.
/// On failure to certify curvature, returns the best Armijo point seen; with
/// no Armijo point at all, returns alpha = 0 and both flags false.
LineSearchResult strong_wolfe(const std::function<double(double)>& phi,
                              const std::function<double(double)>& dphi,
                              const WolfeParams& params = WolfeParams{});

}  // namespace dynadps
