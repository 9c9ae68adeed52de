// Command-line driver for the full pipeline: phantom-gen writes template and
// dataset artifacts, fit-conditional trains the ridge model, bank-build
// precomputes the time-selection table, solve runs the dynamic or vanilla
// sampler over a test partition, and evaluate turns solve outputs into a
// metrics CSV plus side-by-side montages. Every artifact carries the config
// fingerprint; commands refuse to mix artifacts across configs.
//
// Exit codes: 0 success, 2 config error (including bad invocations and path
// collisions), 3 fingerprint mismatch, 4 missing artifact.

#include "dynadps/conditional.hpp"
#include "dynadps/errors.hpp"
#include "dynadps/io.hpp"
#include "dynadps/metrics.hpp"
#include "dynadps/phantom.hpp"
#include "dynadps/rng.hpp"
#include "dynadps/solver.hpp"

#include <CLI11.hpp>

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <map>
#include <string>
#include <vector>

namespace fs = std::filesystem;
using namespace dynadps;

namespace {

// ---------------------------------------------------------------------------
// shared plumbing
// ---------------------------------------------------------------------------

Partition partition_from(const std::string& s) {
    if (s == "ind") return Partition::ind;
    if (s == "ood-contrast") return Partition::ood_contrast;
    if (s == "ood-res") return Partition::ood_res;
    throw ConfigError("unknown partition '" + s + "'");
}

std::string sample_file(const char* stem, int id) {
    char buf[64];
    std::snprintf(buf, sizeof(buf), "%s_%03d.f64", stem, id);
    return buf;
}

std::string format_g17(double v) {
    char buf[64];
    std::snprintf(buf, sizeof(buf), "%.17g", v);
    return buf;
}

// Directory layout under paths.out. Everything a command writes lands in its
// own subtree so collisions are easy to detect and --force easy to scope.
struct Layout {
    fs::path root;

    fs::path templates() const { return root / "templates"; }
    fs::path model() const { return root / "model" / "ridge.bin"; }
    fs::path partition(Partition p) const { return root / partition_name(p); }
    fs::path dataset(Partition p) const { return partition(p) / "dataset"; }
    fs::path refs(Partition p) const { return partition(p) / "refs"; }
    fs::path train() const { return partition(Partition::ind) / "train"; }
    fs::path bank(Partition p) const { return partition(p) / "bank.txt"; }
    fs::path mode_dir(Partition p, SolveMode m) const {
        return partition(p) / (m == SolveMode::dynamic ? "dynamic" : "vanilla");
    }
    fs::path solve_dir(Partition p, SolveMode m) const { return mode_dir(p, m) / "solve"; }
    fs::path eval_dir(Partition p, SolveMode m) const { return mode_dir(p, m) / "eval"; }
};

void claim_output(const fs::path& path, bool force) {
    if (fs::exists(path)) {
        if (!force) {
            throw ConfigError(path.string() + " already exists (rerun with --force to replace)");
        }
        fs::remove_all(path);
    }
}

// Writes one dataset role (truth/measurement/labels per sample plus the
// manifest) under `dir`.
void write_dataset(const fs::path& dir, const std::vector<DatasetSample>& samples,
                   const RunConfig& rc, const DegradationConfig& cfg, Partition p,
                   const std::string& role, std::uint64_t seed) {
    DatasetManifest manifest;
    manifest.config_fingerprint = rc.fingerprint();
    manifest.degradation_fingerprint = degradation_fingerprint(cfg);
    manifest.partition = partition_name(p);
    manifest.role = role;
    manifest.seed = seed;
    for (std::size_t i = 0; i < samples.size(); ++i) {
        const int id = static_cast<int>(i);
        ManifestEntry e;
        e.id = id;
        e.component = samples[i].component;
        e.truth = sample_file("truth", id);
        e.measurement = sample_file("meas", id);
        e.labels = sample_file("labels", id);
        write_image_f64(dir / e.truth, samples[i].x_true);
        write_image_f64(dir / e.measurement, samples[i].y);
        write_label_map(dir / e.labels, samples[i].labels);
        manifest.entries.push_back(std::move(e));
    }
    write_manifest(dir / "manifest.txt", manifest);
}

// Reads a dataset role back and cross-checks the manifest against the active
// config and the requested partition/role.
std::vector<DatasetSample> load_dataset(const fs::path& dir, const RunConfig& rc, Partition p,
                                        const std::string& role) {
    const DatasetManifest manifest = read_manifest(dir / "manifest.txt");
    if (manifest.config_fingerprint != rc.fingerprint()) {
        throw FingerprintError(dir.string() + ": dataset built from a different config");
    }
    if (manifest.partition != partition_name(p) || manifest.role != role) {
        throw ConfigError(dir.string() + ": expected partition '" + partition_name(p) +
                          "' role '" + role + "', found '" + manifest.partition + "'/'" +
                          manifest.role + "'");
    }
    std::vector<DatasetSample> samples;
    samples.reserve(manifest.entries.size());
    for (const ManifestEntry& e : manifest.entries) {
        DatasetSample s;
        s.x_true = read_image_f64(dir / e.truth);
        s.y = read_image_f64(dir / e.measurement);
        s.labels = read_label_map(dir / e.labels);
        s.component = e.component;
        samples.push_back(std::move(s));
    }
    return samples;
}

RidgeModel load_model(const Layout& out, const RunConfig& rc) {
    std::uint64_t fp = 0;
    RidgeModel model = read_ridge(out.model(), &fp);
    if (fp != rc.fingerprint()) {
        throw FingerprintError(out.model().string() + ": model trained under a different config");
    }
    return model;
}

// The ridge model consumes measurements on its training grid (size/scale_k).
// Partitions with a different measurement resolution are first resampled onto
// that grid: bilinear up to the full grid, block-mean back down.
Image conditional_predict(const RidgeModel& model, const Image& y, int hf_size) {
    const int expected = hf_size / model.scale_k;
    if (static_cast<int>(y.rows()) == expected && static_cast<int>(y.cols()) == expected) {
        return ridge_predict(model, y);
    }
    if (hf_size % y.rows() != 0 || hf_size % y.cols() != 0) {
        throw ConfigError("conditional: measurement dims do not divide the phantom size");
    }
    const Image full = bilinear_upsample(y, hf_size / static_cast<int>(y.rows()));
    return ridge_predict(model, downsample(full, model.scale_k));
}

// Minimal reader for solve/report.csv (our own emission; strict).
struct SolveRow {
    int t_start = 0;
    int steps = 0;
    long long score_evals = 0;
};

std::map<int, SolveRow> read_solve_report(const fs::path& path) {
    if (!fs::exists(path)) {
        throw MissingArtifactError("missing artifact: " + path.string());
    }
    std::ifstream in(path);
    std::string line;
    if (!std::getline(in, line) || line != "sample,t_start,steps,score_evals,ldc_final") {
        throw ConfigError(path.string() + ": unexpected report header");
    }
    std::map<int, SolveRow> rows;
    while (std::getline(in, line)) {
        if (line.empty()) continue;
        SolveRow row;
        int id = 0;
        double ldc = 0.0;
        if (std::sscanf(line.c_str(), "%d,%d,%d,%lld,%lf", &id, &row.t_start, &row.steps,
                        &row.score_evals, &ldc) != 5) {
            throw ConfigError(path.string() + ": malformed report row '" + line + "'");
        }
        rows[id] = row;
    }
    return rows;
}

double mean_of(const std::vector<double>& v) {
    double s = 0.0;
    for (const double x : v) s += x;
    return v.empty() ? 0.0 : s / static_cast<double>(v.size());
}

double median_of(std::vector<double> v) {
    if (v.empty()) return 0.0;
    std::sort(v.begin(), v.end());
    const std::size_t m = v.size() / 2;
    return v.size() % 2 == 1 ? v[m] : 0.5 * (v[m - 1] + v[m]);
}

// ---------------------------------------------------------------------------
// commands
// ---------------------------------------------------------------------------

void cmd_phantom_gen(const RunConfig& rc, Partition p, bool force) {
    const Layout out{rc.out_dir};
    const DegradationConfig cfg = rc.degradation_for(p);
    // Claim only the dataset roles this command owns; banks and solve outputs
    // under the same partition belong to later stages.
    claim_output(out.dataset(p), force);
    claim_output(out.refs(p), force);
    if (p == Partition::ind) claim_output(out.train(), force);

    // Templates are partition-independent; rewriting them is byte-identical,
    // so concurrent partitions can share the directory.
    const auto [templates, template_labels] = make_templates(rc.phantom);
    for (std::size_t k = 0; k < templates.size(); ++k) {
        const int id = static_cast<int>(k);
        write_image_f64(out.templates() / sample_file("template", id), templates[k]);
        write_label_map(out.templates() / sample_file("template_labels", id), template_labels[k]);
        char pgm[64];
        std::snprintf(pgm, sizeof(pgm), "template_%03d.pgm", id);
        write_image_pgm16(out.templates() / pgm, templates[k]);
    }

    write_dataset(out.dataset(p), make_dataset(rc.phantom, cfg, rc.n_test, rc.seed_test), rc, cfg,
                  p, "test", rc.seed_test);
    write_dataset(out.refs(p), make_dataset(rc.phantom, cfg, rc.n_refs, rc.seed_refs), rc, cfg, p,
                  "refs", rc.seed_refs);
    int n_train = 0;
    if (p == Partition::ind) {
        write_dataset(out.train(), make_dataset(rc.phantom, cfg, rc.n_train, rc.seed_train), rc,
                      cfg, p, "train", rc.seed_train);
        n_train = rc.n_train;
    }
    std::printf("phantom-gen [%s]: %d templates, %d test + %d ref + %d train samples -> %s\n",
                partition_name(p), rc.phantom.n_templates, rc.n_test, rc.n_refs, n_train,
                out.partition(p).string().c_str());
}

void cmd_fit_conditional(const RunConfig& rc, bool force) {
    const Layout out{rc.out_dir};
    const std::vector<DatasetSample> train = load_dataset(out.train(), rc, Partition::ind, "train");
    if (train.empty()) {
        throw MissingArtifactError(out.train().string() + ": empty training partition");
    }
    std::vector<std::pair<Image, Image>> pairs;
    pairs.reserve(train.size());
    for (const DatasetSample& s : train) pairs.emplace_back(s.x_true, s.y);

    RidgeModel model = ridge_fit(pairs, rc.ridge_patch_in, rc.degradation.factor_k,
                                 rc.ridge_lambda, rc.seed_ridge);
    model.trained_on = degradation_fingerprint(rc.degradation_for(Partition::ind));

    claim_output(out.model(), force);
    write_ridge(out.model(), model, rc.fingerprint());

    double mse = 0.0;
    for (const auto& [hf, lf] : pairs) {
        const Image pred = ridge_predict(model, lf);
        mse += l2_sq(pred, hf) / static_cast<double>(hf.size());
    }
    std::printf("fit-conditional: %zu pairs, patch %d, lambda %g, train RMSE %.4f -> %s\n",
                pairs.size(), rc.ridge_patch_in, rc.ridge_lambda,
                std::sqrt(mse / static_cast<double>(pairs.size())), out.model().string().c_str());
}

void cmd_bank_build(const RunConfig& rc, Partition p, bool force) {
    const Layout out{rc.out_dir};
    const DegradationConfig cfg = rc.degradation_for(p);
    const std::vector<DatasetSample> ref_samples = load_dataset(out.refs(p), rc, p, "refs");
    if (ref_samples.empty()) {
        throw MissingArtifactError(out.refs(p).string() + ": empty reference partition");
    }
    std::vector<std::pair<Image, Image>> refs;
    refs.reserve(ref_samples.size());
    for (const DatasetSample& s : ref_samples) refs.emplace_back(s.x_true, s.y);

    const DiffusionSchedule sched = make_schedule(rc.t_total, rc.beta_min, rc.beta_max);
    const MemoryBank bank = build_memory_bank(refs, make_prior(rc.phantom), sched, cfg, rc.dcats,
                                              rc.bank_draws, rc.seed_bank);
    claim_output(out.bank(p), force);
    write_bank(out.bank(p), bank, rc.fingerprint());
    std::printf("bank-build [%s]: %zu grid times in [%d, %d], %d refs x %d draws, %lld ops -> %s\n",
                partition_name(p), bank.t_grid.size(), bank.t_grid.front(), bank.t_grid.back(),
                bank.meta.n_refs, bank.meta.n_draws,
                static_cast<long long>(bank.meta.op_count), out.bank(p).string().c_str());
}

void cmd_solve(const RunConfig& rc, Partition p, SolveMode mode, bool force) {
    const Layout out{rc.out_dir};
    const DegradationConfig cfg = rc.degradation_for(p);
    const DiffusionSchedule sched = make_schedule(rc.t_total, rc.beta_min, rc.beta_max);
    const GaussianMixturePrior prior = make_prior(rc.phantom);
    const std::vector<DatasetSample> data = load_dataset(out.dataset(p), rc, p, "test");

    SolveParams params;
    params.mode = mode;
    params.rho = rc.rho;
    params.weights = rc.weights;
    params.wolfe = rc.wolfe;
    params.dcats = rc.dcats;
    if (rc.t_start_override != -1) params.t_start_override = rc.t_start_override;

    MemoryBank bank;  // untouched in vanilla mode
    ConditionalModel conditional = [](const Image& y) { return y; };
    if (mode == SolveMode::dynamic) {
        const RidgeModel model = load_model(out, rc);
        std::uint64_t bank_fp = 0;
        bank = read_bank(out.bank(p), &bank_fp);
        if (bank_fp != rc.fingerprint()) {
            throw FingerprintError(out.bank(p).string() + ": bank built under a different config");
        }
        conditional = [model, size = rc.phantom.size](const Image& y) {
            return conditional_predict(model, y, size);
        };
    }

    const fs::path dir = out.solve_dir(p, mode);
    claim_output(dir, force);

    std::string report = "sample,t_start,steps,score_evals,ldc_final\n";
    std::string timing = "# per-sample wall time, seconds\n";
    double wall_total = 0.0;
    double steps_total = 0.0;
    for (std::size_t i = 0; i < data.size(); ++i) {
        params.seed = derive_seed(rc.seed_solve, seed_tag::sample, static_cast<std::uint64_t>(i));
        const SolveReport rep = solve(data[i].y, conditional, prior, sched, cfg, bank, params);
        const int id = static_cast<int>(i);
        write_image_f64(dir / sample_file("out", id), rep.output);
        const double ldc_final = rep.ldc_trace.empty() ? 0.0 : rep.ldc_trace.back();
        report += std::to_string(id) + "," + std::to_string(rep.t_start) + "," +
                  std::to_string(rep.steps_taken) + "," + std::to_string(rep.score_evals) + "," +
                  format_g17(ldc_final) + "\n";
        timing += std::to_string(id) + " " + format_g17(rep.wall_time) + "\n";
        wall_total += rep.wall_time;
        steps_total += rep.steps_taken;
    }
    atomic_write(dir / "report.csv", report);
    timing += "# total " + format_g17(wall_total) + "\n";
    atomic_write(dir / "timing.txt", timing);

    RunStamp stamp;
    stamp.config_fingerprint = rc.fingerprint();
    stamp.partition = partition_name(p);
    stamp.mode = mode == SolveMode::dynamic ? "dynamic" : "vanilla";
    stamp.n = static_cast<int>(data.size());
    write_run_stamp(dir / "run.txt", stamp);

    std::printf("solve [%s/%s]: %zu samples, mean steps %.1f, mean wall %.3f s, total %.1f s\n",
                partition_name(p), stamp.mode.c_str(), data.size(),
                steps_total / static_cast<double>(data.size()),
                wall_total / static_cast<double>(data.size()), wall_total);
}

void cmd_evaluate(const RunConfig& rc, Partition p, SolveMode mode, bool force) {
    const Layout out{rc.out_dir};
    const DegradationConfig cfg = rc.degradation_for(p);
    const std::vector<DatasetSample> data = load_dataset(out.dataset(p), rc, p, "test");
    const RidgeModel model = load_model(out, rc);

    const fs::path solve_dir = out.solve_dir(p, mode);
    const std::string mode_name = mode == SolveMode::dynamic ? "dynamic" : "vanilla";
    const RunStamp stamp = read_run_stamp(solve_dir / "run.txt");
    if (stamp.config_fingerprint != rc.fingerprint()) {
        throw FingerprintError(solve_dir.string() + ": outputs solved under a different config");
    }
    if (stamp.partition != partition_name(p) || stamp.mode != mode_name ||
        stamp.n != static_cast<int>(data.size())) {
        throw ConfigError(solve_dir.string() + ": run stamp does not match this evaluation");
    }
    const std::map<int, SolveRow> solve_rows = read_solve_report(solve_dir / "report.csv");

    const fs::path dir = out.eval_dir(p, mode);
    claim_output(dir, force);
    fs::create_directories(dir);

    std::string csv =
        "sample,method,partition,psnr,ssim,intrinsic,extrinsic,"
        "rve_white,rve_gray,rve_deep,steps,score_evals\n";
    std::map<std::string, std::vector<double>> psnr_by, ssim_by, rve_deep_by;
    std::vector<double> steps_refined;

    for (std::size_t i = 0; i < data.size(); ++i) {
        const int id = static_cast<int>(i);
        const DatasetSample& s = data[i];
        const Image refined = read_image_f64(solve_dir / sample_file("out", id));
        const Image cond = conditional_predict(model, s.y, rc.phantom.size);
        const auto row_it = solve_rows.find(id);
        if (row_it == solve_rows.end()) {
            throw MissingArtifactError(solve_dir.string() + ": no report row for sample " +
                                       std::to_string(id));
        }

        const auto emit = [&](const std::string& method, const Image& x, int steps,
                              long long score_evals) {
            const double psnr_v = psnr(x, s.x_true);
            const double ssim_v = ssim_aggregate(x, s.x_true, rc.weights);
            const HallucinationReport h = hallucination_decompose(x, s.x_true, cfg);
            const auto& bands = rc.phantom.class_bands;
            const double rve_white = region_volume_error(x, s.labels, kLabelWhite,
                                                         bands[kLabelWhite].lo,
                                                         bands[kLabelWhite].hi);
            const double rve_gray = region_volume_error(x, s.labels, kLabelGray,
                                                        bands[kLabelGray].lo,
                                                        bands[kLabelGray].hi);
            const double rve_deep = region_volume_error(x, s.labels, kLabelDeep,
                                                        bands[kLabelDeep].lo,
                                                        bands[kLabelDeep].hi);
            csv += std::to_string(id) + "," + method + "," + partition_name(p) + "," +
                   format_g17(psnr_v) + "," + format_g17(ssim_v) + "," + format_g17(h.intrinsic) +
                   "," + format_g17(h.extrinsic) + "," + format_g17(rve_white) + "," +
                   format_g17(rve_gray) + "," + format_g17(rve_deep) + "," +
                   std::to_string(steps) + "," + std::to_string(score_evals) + "\n";
            psnr_by[method].push_back(psnr_v);
            ssim_by[method].push_back(ssim_v);
            rve_deep_by[method].push_back(rve_deep);
        };
        emit("conditional", cond, 0, 0);
        emit("refined", refined, row_it->second.steps, row_it->second.score_evals);
        steps_refined.push_back(static_cast<double>(row_it->second.steps));

        // Four panels, left to right: upsampled measurement, conditional,
        // refined, truth.
        const int up = rc.phantom.size / static_cast<int>(s.y.rows());
        const Image panels[4] = {bilinear_upsample(s.y, up), cond, refined, s.x_true};
        Image montage(rc.phantom.size, 4 * rc.phantom.size);
        for (int panel = 0; panel < 4; ++panel) {
            montage.block(0, panel * rc.phantom.size, rc.phantom.size, rc.phantom.size) =
                clamp(panels[panel], 0.0, 1.0);
        }
        char pgm[64];
        std::snprintf(pgm, sizeof(pgm), "montage_%03d.pgm", id);
        write_image_pgm16(dir / pgm, montage);
    }
    atomic_write(dir / "metrics.csv", csv);

    std::string summary = "# per-method aggregates over " + std::to_string(data.size()) +
                          " samples, partition " + partition_name(p) + ", mode " + mode_name + "\n";
    for (const std::string method : {"conditional", "refined"}) {
        summary += method + ": mean psnr " + format_g17(mean_of(psnr_by[method])) +
                   ", mean ssim " + format_g17(mean_of(ssim_by[method])) + ", median rve_deep " +
                   format_g17(median_of(rve_deep_by[method])) + "\n";
    }
    summary += "refined mean steps " + format_g17(mean_of(steps_refined)) + "\n";
    atomic_write(dir / "summary.txt", summary);

    std::printf("evaluate [%s/%s]: %zu samples x 2 methods -> %s\n"
                "  conditional: mean psnr %.2f dB, median rve_deep %.3f\n"
                "  refined:     mean psnr %.2f dB, median rve_deep %.3f, mean steps %.1f\n",
                partition_name(p), mode_name.c_str(), data.size(), dir.string().c_str(),
                mean_of(psnr_by["conditional"]), median_of(rve_deep_by["conditional"]),
                mean_of(psnr_by["refined"]), median_of(rve_deep_by["refined"]),
                mean_of(steps_refined));
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"dynadps: warm-started diffusion refinement on synthetic phantoms"};
    app.require_subcommand(1);

    std::string config_path;
    std::string partition_s = "ind";
    std::string mode_s = "dynamic";
    bool force = false;

    const auto add_common = [&](CLI::App* sub, bool with_partition, bool with_mode) {
        sub->add_option("--config", config_path, "run configuration file")
            ->required()
            ->check(CLI::ExistingFile);
        sub->add_flag("--force", force, "replace existing outputs");
        if (with_partition) {
            sub->add_option("--partition", partition_s, "dataset partition")
                ->check(CLI::IsMember({"ind", "ood-contrast", "ood-res"}));
        }
        if (with_mode) {
            sub->add_option("--mode", mode_s, "solver mode")
                ->check(CLI::IsMember({"dynamic", "vanilla"}));
        }
    };

    CLI::App* gen = app.add_subcommand("phantom-gen", "write templates and dataset partitions");
    add_common(gen, true, false);
    CLI::App* fit = app.add_subcommand("fit-conditional", "train the ridge conditional model");
    add_common(fit, false, false);
    CLI::App* bank = app.add_subcommand("bank-build", "precompute the time-selection bank");
    add_common(bank, true, false);
    CLI::App* slv = app.add_subcommand("solve", "run the solver over a test partition");
    add_common(slv, true, true);
    CLI::App* eval = app.add_subcommand("evaluate", "score solve outputs and write montages");
    add_common(eval, true, true);

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        const int code = app.exit(e);
        return code == 0 ? 0 : 2;
    }

    try {
        const RunConfig rc = parse_run_config(config_path);
        const Partition p = partition_from(partition_s);
        const SolveMode mode = mode_s == "vanilla" ? SolveMode::vanilla : SolveMode::dynamic;
        if (gen->parsed()) cmd_phantom_gen(rc, p, force);
        if (fit->parsed()) cmd_fit_conditional(rc, force);
        if (bank->parsed()) cmd_bank_build(rc, p, force);
        if (slv->parsed()) cmd_solve(rc, p, mode, force);
        if (eval->parsed()) cmd_evaluate(rc, p, mode, force);
        return 0;
    } catch (const ConfigError& e) {
        std::fprintf(stderr, "config error: %s\n", e.what());
        return 2;
    } catch (const FingerprintError& e) {
        std::fprintf(stderr, "fingerprint mismatch: %s\n", e.what());
        return 3;
    } catch (const MissingArtifactError& e) {
        std::fprintf(stderr, "missing artifact: %s\n", e.what());
        return 4;
    } catch (const std::exception& e) {
        std::fprintf(stderr, "internal error: %s\n", e.what());
        return 1;
    }
}
