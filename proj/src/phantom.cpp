#include "dynadps/phantom.hpp"

#include "dynadps/errors.hpp"
#include "dynadps/rng.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>

namespace dynadps {

namespace {

struct Ellipse {
    double ci = 0.0, cj = 0.0;  // center (row, col)
    double a = 1.0, b = 1.0;    // semi-axes (row, col)

    bool contains(int i, int j) const {
        const double u = (i - ci) / a;
        const double v = (j - cj) / b;
        return u * u + v * v <= 1.0;
    }
};

void paint(Image& img, LabelMap& labels, const Ellipse& e, double value, int label) {
    const int rows = static_cast<int>(img.rows());
    const int cols = static_cast<int>(img.cols());
    const int i_lo = std::max(0, static_cast<int>(std::floor(e.ci - e.a)));
    const int i_hi = std::min(rows - 1, static_cast<int>(std::ceil(e.ci + e.a)));
    const int j_lo = std::max(0, static_cast<int>(std::floor(e.cj - e.b)));
    const int j_hi = std::min(cols - 1, static_cast<int>(std::ceil(e.cj + e.b)));
    for (int i = i_lo; i <= i_hi; ++i)
        for (int j = j_lo; j <= j_hi; ++j)
            if (e.contains(i, j)) {
                img(i, j) = value;
                labels(i, j) = label;
            }
}

double uniform_in(GaussianSampler& rng, double lo, double hi) {
    return lo + (hi - lo) * rng.uniform();
}

double class_band_center(const PhantomSpec& spec, int label) {
    return spec.class_bands[static_cast<std::size_t>(label)].center();
}

}  // namespace

void PhantomSpec::validate() const {
    if (size < 12 || size % 6 != 0)
        throw ConfigError("phantom: size must be >= 12 and divisible by 2 and 3");
    if (n_classes != 4) throw ConfigError("phantom: exactly 4 classes supported");
    if (n_templates < 1) throw ConfigError("phantom: n_templates must be >= 1");
    if (!(sigma_p > 0.0)) throw ConfigError("phantom: sigma_p must be positive");
    std::array<ClassBand, 4> sorted = class_bands;
    std::sort(sorted.begin(), sorted.end(),
              [](const ClassBand& x, const ClassBand& y) { return x.lo < y.lo; });
    for (const ClassBand& band : sorted)
        if (!(band.hi > band.lo)) throw ConfigError("phantom: degenerate class band");
    for (std::size_t i = 1; i < sorted.size(); ++i)
        if (sorted[i].lo - sorted[i - 1].hi < 0.08)
            throw ConfigError("phantom: class bands closer than the 0.08 separation floor");
}

std::pair<Image, LabelMap> generate_template(const PhantomSpec& spec, int index) {
    spec.validate();
    if (index < 0 || index >= spec.n_templates)
        throw std::invalid_argument("generate_template: index out of range");
    GaussianSampler rng(derive_seed(spec.seed, seed_tag::template_geometry,
                                    static_cast<std::uint64_t>(index)));
    const double n = static_cast<double>(spec.size);

    Image img = Image::Constant(spec.size, spec.size, class_band_center(spec, kLabelBackground));
    LabelMap labels = LabelMap::Constant(spec.size, spec.size, kLabelBackground);

    Ellipse skull;
    skull.ci = 0.5 * n + uniform_in(rng, -0.02, 0.02) * n;
    skull.cj = 0.5 * n + uniform_in(rng, -0.02, 0.02) * n;
    skull.a = uniform_in(rng, 0.36, 0.44) * n;
    skull.b = uniform_in(rng, 0.36, 0.44) * n;
    paint(img, labels, skull, class_band_center(spec, kLabelGray), kLabelGray);

    Ellipse white;
    const double shrink = uniform_in(rng, 0.68, 0.80);
    white.ci = skull.ci + uniform_in(rng, -0.01, 0.01) * n;
    white.cj = skull.cj + uniform_in(rng, -0.01, 0.01) * n;
    white.a = shrink * skull.a;
    white.b = shrink * skull.b;
    paint(img, labels, white, class_band_center(spec, kLabelWhite), kLabelWhite);

    // 2-4 deep structures at angularly separated spots strictly inside the
    // white interior; sizes chosen so the union stays within 1-5% of pixels.
    const int n_deep = 2 + static_cast<int>(rng.below(3));
    const double phase = uniform_in(rng, 0.0, 2.0 * 3.14159265358979323846);
    for (int d = 0; d < n_deep; ++d) {
        const double theta = phase + 2.0 * 3.14159265358979323846 *
                                         (d + uniform_in(rng, -0.15, 0.15)) / n_deep;
        const double rho = uniform_in(rng, 0.42, 0.55);
        Ellipse deep;
        deep.ci = white.ci + rho * white.a * std::cos(theta);
        deep.cj = white.cj + rho * white.b * std::sin(theta);
        deep.a = uniform_in(rng, 0.042, 0.058) * n;
        deep.b = uniform_in(rng, 0.042, 0.058) * n;
        paint(img, labels, deep, class_band_center(spec, kLabelDeep), kLabelDeep);
    }
    return {std::move(img), std::move(labels)};
}

std::pair<std::vector<Image>, std::vector<LabelMap>> make_templates(const PhantomSpec& spec) {
    std::vector<Image> imgs;
    std::vector<LabelMap> labels;
    imgs.reserve(spec.n_templates);
    labels.reserve(spec.n_templates);
    for (int k = 0; k < spec.n_templates; ++k) {
        auto [img, lab] = generate_template(spec, k);
        imgs.push_back(std::move(img));
        labels.push_back(std::move(lab));
    }
    return {std::move(imgs), std::move(labels)};
}

GaussianMixturePrior make_prior(const PhantomSpec& spec) {
    GaussianMixturePrior prior;
    prior.templates = make_templates(spec).first;
    prior.weights =
        Eigen::ArrayXd::Constant(spec.n_templates, 1.0 / static_cast<double>(spec.n_templates));
    prior.sigma_p = spec.sigma_p;
    prior.validate();
    return prior;
}

Image sample_truth(const std::vector<Image>& prior_templates, double sigma_p, std::uint64_t seed,
                   int* component) {
    if (prior_templates.empty())
        throw std::invalid_argument("sample_truth: empty template list");
    GaussianSampler rng(seed);
    const int k = static_cast<int>(rng.below(prior_templates.size()));
    if (component != nullptr) *component = k;
    const Image& mu = prior_templates[static_cast<std::size_t>(k)];
    if (sigma_p == 0.0) return mu;
    Image x = mu + sigma_p * rng.normal_image(static_cast<int>(mu.rows()),
                                              static_cast<int>(mu.cols()));
    return clamp(x, 0.0, 1.0);
}

DegradationConfig partition_config(Partition p) {
    DegradationConfig cfg;  // defaults are the in-distribution preset
    switch (p) {
        case Partition::ind:
            break;
        case Partition::ood_contrast:
            cfg.gamma = 0.4;
            break;
        case Partition::ood_res:
            cfg.factor_k = 3;
            break;
    }
    cfg.validate();
    return cfg;
}

const char* partition_name(Partition p) {
    switch (p) {
        case Partition::ind:
            return "ind";
        case Partition::ood_contrast:
            return "ood-contrast";
        case Partition::ood_res:
            return "ood-res";
    }
    return "ind";
}

std::vector<DatasetSample> make_dataset(const PhantomSpec& spec, const DegradationConfig& cfg,
                                        int n, std::uint64_t seed) {
    if (n < 1) throw std::invalid_argument("make_dataset: n must be >= 1");
    cfg.validate_for(spec.size, spec.size);
    auto [templates, labels] = make_templates(spec);

    std::vector<DatasetSample> out;
    out.reserve(n);
    for (int i = 0; i < n; ++i) {
        DatasetSample s;
        // Truth seeds depend only on (seed, i) so different degradations pair up.
        s.x_true = sample_truth(templates, spec.sigma_p,
                                derive_seed(seed, seed_tag::truth_draw, i), &s.component);
        s.labels = labels[static_cast<std::size_t>(s.component)];
        s.y = apply_forward(s.x_true, cfg, derive_seed(seed, seed_tag::measurement_noise, i));
        out.push_back(std::move(s));
    }
    return out;
}

}  // namespace dynadps
