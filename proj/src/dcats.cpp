#include "dynadps/dcats.hpp"

#include "dynadps/errors.hpp"
#include "dynadps/rng.hpp"

#include <cmath>
#include <cstdio>
#include <stdexcept>

namespace dynadps {

void MemoryBank::validate() const {
    if (t_grid.empty()) throw std::invalid_argument("MemoryBank: empty time grid");
    if (t_grid.size() != avg_loglik.size() || t_grid.size() != se.size())
        throw std::invalid_argument("MemoryBank: grid/loglik/se length mismatch");
    for (std::size_t i = 0; i < t_grid.size(); ++i) {
        if (t_grid[i] < 1) throw std::invalid_argument("MemoryBank: grid time below 1");
        if (i > 0 && t_grid[i] <= t_grid[i - 1])
            throw std::invalid_argument("MemoryBank: grid not strictly increasing");
    }
    if (meta.n_refs < 1 || meta.n_draws < 1)
        throw std::invalid_argument("MemoryBank: needs >= 1 reference and >= 1 draw");
}

void DcatsParams::validate() const {
    if (!(tau > 0.0) || tau > 1.0) throw ConfigError("dcats: tau must lie in (0, 1]");
    if (t_grid_stride < 0) throw ConfigError("dcats: t_grid_stride must be >= 0");
}

double measurement_loglik(const Image& y, const Image& x0_hat, const DegradationConfig& cfg) {
    if (cfg.noise_sigma == 0.0)
        throw ConfigError("measurement_loglik: noise_sigma must be positive");
    const Image ax = apply_forward(x0_hat, cfg);
    require_same_dims(y, ax, "measurement_loglik");
    const double m = static_cast<double>(y.size());
    return -l2_sq(y, ax) / (2.0 * cfg.noise_sigma * cfg.noise_sigma * m);
}

std::vector<int> default_t_grid(int t_total, int stride) {
    if (t_total < 2) throw std::invalid_argument("default_t_grid: t_total must be >= 2");
    if (stride < 0) throw std::invalid_argument("default_t_grid: negative stride");
    if (stride == 0) stride = std::max(1, t_total / 40);
    std::vector<int> grid;
    for (int t = stride; t < t_total; t += stride) grid.push_back(t);
    return grid;
}

MemoryBank build_memory_bank(const std::vector<std::pair<Image, Image>>& refs,
                             const GaussianMixturePrior& prior, const DiffusionSchedule& sched,
                             const DegradationConfig& cfg, const DcatsParams& params, int n_draws,
                             std::uint64_t seed) {
    if (refs.empty()) throw std::invalid_argument("build_memory_bank: empty reference set");
    if (n_draws < 1) throw std::invalid_argument("build_memory_bank: n_draws must be >= 1");
    params.validate();
    cfg.validate();
    prior.validate();

    MemoryBank bank;
    bank.t_grid = default_t_grid(sched.T, params.t_grid_stride);
    bank.avg_loglik.resize(bank.t_grid.size());
    bank.se.resize(bank.t_grid.size());
    bank.meta.n_refs = static_cast<int>(refs.size());
    bank.meta.n_draws = n_draws;
    bank.meta.noise_sigma = cfg.noise_sigma;
    bank.meta.fingerprint = degradation_fingerprint(cfg);

    const double n_samples = static_cast<double>(refs.size()) * n_draws;
    std::uint64_t draw_index = 0;
    for (std::size_t gi = 0; gi < bank.t_grid.size(); ++gi) {
        const int t = bank.t_grid[gi];
        double sum = 0.0;
        double sum_sq = 0.0;
        for (const auto& [x_ref, y_ref] : refs) {
            for (int d = 0; d < n_draws; ++d) {
                const std::uint64_t draw_seed =
                    derive_seed(seed, seed_tag::bank_draw, draw_index++);
                const Image x_t = forward_noise(x_ref, t, sched, draw_seed);
                const Image x0_hat = tweedie_denoise(x_t, t, prior, sched);
                const double ll = measurement_loglik(y_ref, x0_hat, cfg);
                sum += ll;
                sum_sq += ll * ll;
                ++bank.meta.op_count;
            }
        }
        const double mean = sum / n_samples;
        bank.avg_loglik[gi] = mean;
        if (n_samples > 1.5) {
            const double var = std::max(0.0, (sum_sq - n_samples * mean * mean) /
                                                 (n_samples - 1.0));
            bank.se[gi] = std::sqrt(var / n_samples);
        } else {
            bank.se[gi] = 0.0;
        }
    }
    bank.validate();
    return bank;
}

int select_time(const MemoryBank& bank, const Image& y, const Image& x_cond,
                const DegradationConfig& cfg, const DcatsParams& params) {
    bank.validate();
    params.validate();
    const double target = params.tau * measurement_loglik(y, x_cond, cfg);
    int best_t = bank.t_grid.front();
    double best_gap = std::abs(target - bank.avg_loglik.front());
    for (std::size_t i = 1; i < bank.t_grid.size(); ++i) {
        const double gap = std::abs(target - bank.avg_loglik[i]);
        if (gap < best_gap) {  // strict: ties keep the earlier (smaller) time
            best_gap = gap;
            best_t = bank.t_grid[i];
        }
    }
    return best_t;
}

}  // namespace dynadps
