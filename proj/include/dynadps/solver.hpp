// Two-phase solver: a conditional model proposes a clean estimate, the memory
// bank picks how far back up the diffusion trajectory that estimate deserves
// to be pushed, and a short reverse pass refines it with line-searched
// data-consistency corrections. A vanilla fixed-step baseline runs the full
// trajectory from pure noise for comparison.

#pragma once

#include "dynadps/consistency.hpp"
#include "dynadps/dcats.hpp"
#include "dynadps/degradation.hpp"
#include "dynadps/diffusion.hpp"
#include "dynadps/image.hpp"
#include "dynadps/linesearch.hpp"

#include <cstdint>
#include <functional>
#include <optional>
#include <vector>

namespace dynadps {

enum class SolveMode { dynamic, vanilla };

struct SolveParams {
    SolveMode mode = SolveMode::dynamic;
    double rho = 0.5;  // vanilla fixed step size; unused in dynamic mode
    ConsistencyWeights weights;
    WolfeParams wolfe;
    DcatsParams dcats;
    std::uint64_t seed = 0;
    std::optional<int> t_start_override;

    /// Throws ConfigError on out-of-range values.
    void validate(const DiffusionSchedule& sched) const;
};

struct SolveReport {
    Image output;  // final estimate, clamped to [0, 1]
    int t_start = 0;
    int steps_taken = 0;
    std::vector<double> alpha_trace;    // accepted step length per reverse step
    std::vector<double> ldc_pre_trace;  // consistency loss before the update
    std::vector<double> ldc_trace;      // consistency loss after the update
    std::vector<bool> armijo_trace;     // sufficient-decrease certificate per step
    std::int64_t score_evals = 0;       // mixture-score evaluations consumed
    double wall_time = 0.0;             // seconds
};

struct DynamicStepResult {
    Image x_next;
    double alpha = 0.0;
    double ldc_pre = 0.0;
    double ldc_post = 0.0;
    bool armijo = false;
    bool curvature = false;
    std::int64_t score_evals = 0;
};

/// Vanilla DPS transition: ancestral step, then subtract rho times the
/// gradient of the PLAIN L2 consistency term evaluated at the shifted level.
Image dps_step_vanilla(const Image& x_t, int t, const Image& y,
                       const GaussianMixturePrior& prior, const DiffusionSchedule& sched,
                       const DegradationConfig& cfg, double rho, std::uint64_t seed);

/// One refined transition: ancestral step to x', steepest-descent direction
/// of the composite consistency loss at level t-1, strong-Wolfe step along
/// it. A zero gradient skips the search (alpha = 0, trivially certified); a
/// failed search skips the consistency update entirely.
DynamicStepResult dynamic_step(const Image& x_t, int t, const Image& y,
                               const GaussianMixturePrior& prior, const DiffusionSchedule& sched,
                               const DegradationConfig& cfg, const ConsistencyWeights& w,
                               const WolfeParams& wolfe, std::uint64_t seed);

using ConditionalModel = std::function<Image(const Image&)>;

/// Full pipeline. Dynamic mode: conditional prediction, bank-matched start
/// time (or the override), forward-noise to that level, refine down to level
/// 0. Vanilla mode ignores the conditional and the bank and runs every step
/// from pure noise. Throws FingerprintError when the bank was built for a
/// different degradation.
SolveReport solve(const Image& y, const ConditionalModel& conditional,
                  const GaussianMixturePrior& prior, const DiffusionSchedule& sched,
                  const DegradationConfig& cfg, const MemoryBank& bank,
                  const SolveParams& params);

}  // namespace dynadps
