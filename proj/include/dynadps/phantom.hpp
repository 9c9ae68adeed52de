// Synthetic brain-like phantoms with known label maps. Templates are
// deterministic compositions of ellipses (skull, gray ring, white interior,
// a handful of small deep structures); test truths are exact draws from the
// Gaussian mixture over those templates, so the analytic prior used by the
// solver is the true data distribution rather than an approximation of it.

#pragma once

#include "dynadps/degradation.hpp"
#include "dynadps/diffusion.hpp"
#include "dynadps/image.hpp"

#include <array>
#include <cstdint>
#include <utility>
#include <vector>

namespace dynadps {

// Label ids, in class order: background, white matter, gray matter, deep
// structure. Intensities are the centers of the matching class bands.
enum PhantomLabel : int {
    kLabelBackground = 0,
    kLabelWhite = 1,
    kLabelGray = 2,
    kLabelDeep = 3,
};

struct ClassBand {
    double lo = 0.0;
    double hi = 0.0;
    double center() const { return 0.5 * (lo + hi); }
};

struct PhantomSpec {
    int size = 72;  // divisible by both downsampling factors (2 and 3)
    int n_classes = 4;
    std::array<ClassBand, 4> class_bands = {
        ClassBand{0.00, 0.16},  // background
        ClassBand{0.52, 0.68},  // white
        ClassBand{0.26, 0.42},  // gray
        ClassBand{0.78, 0.94},  // deep structure
    };
    int n_templates = 8;
    double sigma_p = 0.05;
    std::uint64_t seed = 0;

    /// Throws ConfigError on non-divisible size, overlapping bands, or bands
    /// separated by less than 0.08.
    void validate() const;
};

/// Deterministic template `index`: skull ellipse enclosing a gray ring, a
/// white interior, and 2-4 small deep-structure ellipses occupying 1-5% of
/// the pixels. Background stays exactly at the background band center.
std::pair<Image, LabelMap> generate_template(const PhantomSpec& spec, int index);

/// All n_templates templates plus label maps, in index order.
std::pair<std::vector<Image>, std::vector<LabelMap>> make_templates(const PhantomSpec& spec);

/// Equal-weight Gaussian mixture over the spec's templates.
GaussianMixturePrior make_prior(const PhantomSpec& spec);

/// Pick a component uniformly at random, add N(0, sigma_p^2 I), clamp to
/// [0, 1]. The chosen component index is written through `component` when
/// non-null (needed to pair a truth with its label map).
Image sample_truth(const std::vector<Image>& prior_templates, double sigma_p, std::uint64_t seed,
                   int* component = nullptr);

enum class Partition { ind, ood_contrast, ood_res };

/// Degradation presets: in-distribution is the DegradationConfig default
/// (gamma 0.7, k = 2); out-of-distribution lowers contrast (gamma 0.4) or
/// resolution (k = 3), one axis at a time.
DegradationConfig partition_config(Partition p);

const char* partition_name(Partition p);

struct DatasetSample {
    Image x_true;
    Image y;
    LabelMap labels;
    int component = -1;  // template index the truth was drawn from
};

/// n paired (truth, measurement, labels) triples. Truth seeds depend only on
/// (seed, index) — never on cfg — so datasets built from different
/// degradations share identical truths for paired comparisons.
std::vector<DatasetSample> make_dataset(const PhantomSpec& spec, const DegradationConfig& cfg,
                                        int n, std::uint64_t seed);

}  // namespace dynadps
