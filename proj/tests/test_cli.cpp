// End-to-end tests of the command-line driver. The binary under test is
// passed as --cli=<path>; commands run through std::system against scratch
// directories, and artifacts are reopened with the io readers to check
// structure, determinism, and the exit-code contract (0 ok, 2 config,
// 3 fingerprint, 4 missing artifact).

#define DOCTEST_CONFIG_IMPLEMENT
#include "doctest.h"

#include "dynadps/io.hpp"
#include "dynadps/metrics.hpp"

#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <string>
#include <sys/wait.h>
#include <vector>

namespace fs = std::filesystem;

namespace {

fs::path g_cli;
fs::path g_work;

int run(const std::string& args) {
    const std::string cmd = g_cli.string() + " " + args + " >> " +
                            (g_work / "cli.log").string() + " 2>&1";
    const int status = std::system(cmd.c_str());
    REQUIRE(status != -1);
    REQUIRE(WIFEXITED(status));
    return WEXITSTATUS(status);
}

std::string slurp(const fs::path& p) {
    std::ifstream in(p, std::ios::binary);
    REQUIRE(in.good());
    return std::string(std::istreambuf_iterator<char>(in), {});
}

std::vector<std::string> lines_of(const std::string& text) {
    std::vector<std::string> out;
    std::istringstream in(text);
    std::string line;
    while (std::getline(in, line))
        if (!line.empty()) out.push_back(line);
    return out;
}

std::vector<std::string> split_csv(const std::string& line) {
    std::vector<std::string> out;
    std::string field;
    std::istringstream in(line);
    while (std::getline(in, field, ',')) out.push_back(field);
    return out;
}

int count_files(const fs::path& dir) {
    int n = 0;
    for ([[maybe_unused]] const auto& e : fs::directory_iterator(dir)) ++n;
    return n;
}

// One shared small-scale pipeline most cases inspect; built on first use.
struct Pipeline {
    fs::path out;
    fs::path cfg;
};

const Pipeline& main_pipeline() {
    static const Pipeline p = [] {
        Pipeline pl;
        pl.out = g_work / "main";
        pl.cfg = g_work / "main.cfg";
        std::ofstream c(pl.cfg);
        c << "schedule.t_total = 200\n"
          << "dataset.n_test = 3\n"
          << "dataset.n_train = 8\n"
          << "dataset.n_refs = 4\n"
          << "bank.n_draws = 2\n"
          << "paths.out = " << pl.out.string() << "\n";
        c.close();
        const std::string base = " --config " + pl.cfg.string();
        REQUIRE(run("phantom-gen" + base) == 0);
        REQUIRE(run("fit-conditional" + base) == 0);
        REQUIRE(run("bank-build" + base) == 0);
        REQUIRE(run("solve" + base) == 0);
        REQUIRE(run("evaluate" + base) == 0);
        return pl;
    }();
    return p;
}

}  // namespace

TEST_CASE("phantom-gen lays out templates and sample triples") {
    const Pipeline& pl = main_pipeline();

    // 8 templates x (f64 + labels + pgm).
    CHECK(count_files(pl.out / "templates") == 24);
    // 3 samples x (truth, measurement, labels) + manifest.
    CHECK(count_files(pl.out / "ind" / "dataset") == 10);
    CHECK(count_files(pl.out / "ind" / "refs") == 13);
    CHECK(count_files(pl.out / "ind" / "train") == 25);

    const dynadps::DatasetManifest m =
        dynadps::read_manifest(pl.out / "ind" / "dataset" / "manifest.txt");
    CHECK(m.role == "test");
    CHECK(m.partition == "ind");
    REQUIRE(m.entries.size() == 3);
    const dynadps::Image truth =
        dynadps::read_image_f64(pl.out / "ind" / "dataset" / m.entries[0].truth);
    const dynadps::Image meas =
        dynadps::read_image_f64(pl.out / "ind" / "dataset" / m.entries[0].measurement);
    CHECK(truth.rows() == 72);
    CHECK(meas.rows() == 36);  // k = 2

    SUBCASE("rerun without --force collides; with --force reproduces the bytes") {
        const std::string base = " --config " + pl.cfg.string();
        const std::string manifest_before = slurp(pl.out / "ind" / "dataset" / "manifest.txt");
        const std::string truth_before = slurp(pl.out / "ind" / "dataset" / "truth_000.f64");
        CHECK(run("phantom-gen" + base) == 2);
        CHECK(run("phantom-gen --force" + base) == 0);
        CHECK(slurp(pl.out / "ind" / "dataset" / "manifest.txt") == manifest_before);
        CHECK(slurp(pl.out / "ind" / "dataset" / "truth_000.f64") == truth_before);
    }
    SUBCASE("no temp files survive anywhere in the tree") {
        for (const auto& e : fs::recursive_directory_iterator(pl.out)) {
            CHECK(e.path().extension() != ".tmp");
        }
    }
}

TEST_CASE("bank-build writes one row per grid time and rebuilds identically") {
    const Pipeline& pl = main_pipeline();
    const dynadps::MemoryBank bank = dynadps::read_bank(pl.out / "ind" / "bank.txt");
    CHECK(bank.t_grid.size() == 39);  // stride max(1, 200/40) = 5, grid {5,...,195}
    CHECK(bank.t_grid.front() == 5);
    CHECK(bank.t_grid.back() == 195);
    CHECK(bank.meta.n_refs == 4);
    CHECK(bank.meta.n_draws == 2);
    CHECK(bank.meta.op_count == 39 * 4 * 2);

    const std::string before = slurp(pl.out / "ind" / "bank.txt");
    CHECK(run("bank-build --force --config " + pl.cfg.string()) == 0);
    CHECK(slurp(pl.out / "ind" / "bank.txt") == before);
}

TEST_CASE("solve in dynamic mode starts below T and reruns bit-identically") {
    const Pipeline& pl = main_pipeline();
    const fs::path solve_dir = pl.out / "ind" / "dynamic" / "solve";

    const auto rows = lines_of(slurp(solve_dir / "report.csv"));
    REQUIRE(rows.size() == 4);  // header + 3 samples
    CHECK(rows[0] == "sample,t_start,steps,score_evals,ldc_final");
    for (std::size_t i = 1; i < rows.size(); ++i) {
        const auto f = split_csv(rows[i]);
        REQUIRE(f.size() == 5);
        const int t_start = std::stoi(f[1]);
        CHECK(t_start >= 1);
        CHECK(t_start < 200);
        CHECK(std::stoi(f[2]) == t_start);  // one reverse step per level
    }
    const dynadps::RunStamp stamp = dynadps::read_run_stamp(solve_dir / "run.txt");
    CHECK(stamp.mode == "dynamic");
    CHECK(stamp.n == 3);

    SUBCASE("rerun reproduces outputs and report bytes") {
        const std::string out0 = slurp(solve_dir / "out_000.f64");
        const std::string report = slurp(solve_dir / "report.csv");
        CHECK(run("solve --force --config " + pl.cfg.string()) == 0);
        CHECK(slurp(solve_dir / "out_000.f64") == out0);
        CHECK(slurp(solve_dir / "report.csv") == report);
    }
}

TEST_CASE("vanilla mode runs the full trajectory") {
    const Pipeline& pl = main_pipeline();
    const std::string base = " --config " + pl.cfg.string();
    REQUIRE(run("solve --mode vanilla" + base) == 0);
    const auto rows = lines_of(slurp(pl.out / "ind" / "vanilla" / "solve" / "report.csv"));
    REQUIRE(rows.size() == 4);
    for (std::size_t i = 1; i < rows.size(); ++i) {
        const auto f = split_csv(rows[i]);
        CHECK(std::stoi(f[1]) == 199);  // T - 1
        CHECK(std::stoi(f[2]) == 199);
    }
    REQUIRE(run("evaluate --mode vanilla" + base) == 0);
    CHECK(lines_of(slurp(pl.out / "ind" / "vanilla" / "eval" / "metrics.csv")).size() == 7);
}

TEST_CASE("evaluate emits samples x methods rows and 4-panel montages") {
    const Pipeline& pl = main_pipeline();
    const fs::path eval_dir = pl.out / "ind" / "dynamic" / "eval";

    const auto rows = lines_of(slurp(eval_dir / "metrics.csv"));
    REQUIRE(rows.size() == 7);  // header + 3 samples x 2 methods
    CHECK(rows[0] ==
          "sample,method,partition,psnr,ssim,intrinsic,extrinsic,"
          "rve_white,rve_gray,rve_deep,steps,score_evals");
    CHECK(split_csv(rows[1])[1] == "conditional");
    CHECK(split_csv(rows[2])[1] == "refined");
    for (std::size_t i = 1; i < rows.size(); ++i) {
        const auto f = split_csv(rows[i]);
        REQUIRE(f.size() == 12);
        CHECK(f[2] == "ind");
        CHECK(std::stod(f[3]) > 0.0);                    // psnr
        CHECK(std::stod(f[9]) >= 0.0);                   // rve_deep
        if (f[1] == "conditional") CHECK(f[10] == "0");  // no reverse steps spent
    }

    const dynadps::Image montage = dynadps::read_image_pgm16(eval_dir / "montage_000.pgm");
    CHECK(montage.rows() == 72);
    CHECK(montage.cols() == 4 * 72);
    CHECK(count_files(eval_dir) == 5);  // 3 montages + metrics.csv + summary.txt

    SUBCASE("rerun after a fresh solve reproduces the CSV bytes") {
        const std::string before = slurp(eval_dir / "metrics.csv");
        CHECK(run("evaluate --force --config " + pl.cfg.string()) == 0);
        CHECK(slurp(eval_dir / "metrics.csv") == before);
    }
}

TEST_CASE("the ood-res partition resamples through the k=2 conditional") {
    const Pipeline& pl = main_pipeline();
    const std::string base = " --config " + pl.cfg.string() + " --partition ood-res";
    REQUIRE(run("phantom-gen" + base) == 0);
    REQUIRE(run("bank-build" + base) == 0);
    REQUIRE(run("solve" + base) == 0);
    REQUIRE(run("evaluate" + base) == 0);

    const dynadps::DatasetManifest m =
        dynadps::read_manifest(pl.out / "ood-res" / "dataset" / "manifest.txt");
    const dynadps::Image meas =
        dynadps::read_image_f64(pl.out / "ood-res" / "dataset" / m.entries[0].measurement);
    CHECK(meas.rows() == 24);  // k = 3
    const dynadps::Image out =
        dynadps::read_image_f64(pl.out / "ood-res" / "dynamic" / "solve" / "out_000.f64");
    CHECK(out.rows() == 72);
    const dynadps::Image montage = dynadps::read_image_pgm16(pl.out / "ood-res" / "dynamic" /
                                                             "eval" / "montage_000.pgm");
    CHECK(montage.cols() == 4 * 72);

    SUBCASE("ood truths pair with ind truths sample for sample") {
        CHECK(slurp(pl.out / "ood-res" / "dataset" / "truth_000.f64") ==
              slurp(pl.out / "ind" / "dataset" / "truth_000.f64"));
        CHECK(slurp(pl.out / "ood-res" / "dataset" / "meas_000.f64") !=
              slurp(pl.out / "ind" / "dataset" / "meas_000.f64"));
    }
}

TEST_CASE("exit codes follow the contract") {
    const Pipeline& pl = main_pipeline();
    const std::string base = " --config " + pl.cfg.string();

    SUBCASE("bad invocations and configs exit 2") {
        CHECK(run("solve") == 2);                          // missing --config
        CHECK(run("frobnicate" + base) == 2);              // unknown subcommand
        CHECK(run("solve --partition mars" + base) == 2);  // bad enum value
        const fs::path bad = g_work / "bad.cfg";
        std::ofstream(bad) << "dcats.tua = 0.4\n";
        CHECK(run("solve --config " + bad.string()) == 2);
        const fs::path invalid = g_work / "invalid.cfg";
        std::ofstream(invalid) << "solve.rho = 0\n";
        CHECK(run("solve --config " + invalid.string()) == 2);
    }
    SUBCASE("cross-config artifacts exit 3") {
        const fs::path shifted = g_work / "shifted.cfg";
        std::ofstream(shifted) << "schedule.t_total = 200\n"
                               << "dataset.n_test = 3\n"
                               << "dcats.tau = 0.35\n"  // differs from the artifacts' config
                               << "paths.out = " << pl.out.string() << "\n";
        CHECK(run("solve --force --config " + shifted.string()) == 3);
    }
    SUBCASE("an ind bank copied into an ood partition exits 3 at solve time") {
        const std::string ood = base + " --partition ood-contrast";
        REQUIRE(run("phantom-gen --force" + ood) == 0);
        fs::copy_file(pl.out / "ind" / "bank.txt", pl.out / "ood-contrast" / "bank.txt",
                      fs::copy_options::overwrite_existing);
        CHECK(run("solve --force" + ood) == 3);
    }
    SUBCASE("absent artifacts exit 4") {
        const fs::path fresh = g_work / "fresh.cfg";
        std::ofstream(fresh) << "schedule.t_total = 200\n"
                             << "paths.out = " << (g_work / "fresh_out").string() << "\n";
        CHECK(run("fit-conditional --config " + fresh.string()) == 4);
        CHECK(run("solve --config " + fresh.string()) == 4);
        CHECK(run("evaluate --config " + fresh.string()) == 4);
    }
}

TEST_CASE("a planted identical sample reproduces the metric sentinels") {
    const std::string cfg_path = (g_work / "planted.cfg").string();
    const fs::path out = g_work / "planted_out";
    std::ofstream(cfg_path) << "schedule.t_total = 200\n"
                            << "dataset.n_test = 1\n"
                            << "dataset.n_train = 4\n"
                            << "dataset.n_refs = 2\n"
                            << "bank.n_draws = 1\n"
                            << "solve.t_start_override = 1\n"
                            << "paths.out = " << out.string() << "\n";
    const std::string base = " --config " + cfg_path;
    REQUIRE(run("phantom-gen" + base) == 0);
    REQUIRE(run("fit-conditional" + base) == 0);
    REQUIRE(run("bank-build" + base) == 0);
    REQUIRE(run("solve" + base) == 0);

    // Plant: replace both the truth and the solver output with the sample's
    // own noise-free template, making the refined method an exact match.
    const dynadps::DatasetManifest m =
        dynadps::read_manifest(out / "ind" / "dataset" / "manifest.txt");
    REQUIRE(m.entries.size() == 1);
    const fs::path tpl = out / "templates" /
                         ("template_00" + std::to_string(m.entries[0].component) + ".f64");
    fs::copy_file(tpl, out / "ind" / "dataset" / "truth_000.f64",
                  fs::copy_options::overwrite_existing);
    fs::copy_file(tpl, out / "ind" / "dynamic" / "solve" / "out_000.f64",
                  fs::copy_options::overwrite_existing);
    REQUIRE(run("evaluate" + base) == 0);

    const auto rows = lines_of(slurp(out / "ind" / "dynamic" / "eval" / "metrics.csv"));
    REQUIRE(rows.size() == 3);
    const auto f = split_csv(rows[2]);
    REQUIRE(f[1] == "refined");
    CHECK(std::stod(f[3]) == std::numeric_limits<double>::infinity());  // psnr sentinel
    CHECK(std::stod(f[4]) == doctest::Approx(1.0).epsilon(1e-12));      // ssim
    CHECK(std::stod(f[5]) == 0.0);                                      // intrinsic
    CHECK(std::stod(f[6]) == 0.0);                                      // extrinsic
    CHECK(std::stod(f[7]) == 0.0);                                      // rve, every class
    CHECK(std::stod(f[8]) == 0.0);
    CHECK(std::stod(f[9]) == 0.0);
}

int main(int argc, char** argv) {
    std::vector<char*> passthrough;
    for (int i = 0; i < argc; ++i) {
        const std::string arg = argv[i];
        if (arg.rfind("--cli=", 0) == 0) {
            g_cli = fs::absolute(arg.substr(6));
        } else {
            passthrough.push_back(argv[i]);
        }
    }
    if (g_cli.empty() || !fs::exists(g_cli)) {
        std::fprintf(stderr, "usage: test_cli --cli=<path-to-dynadps-binary>\n");
        return 1;
    }
    g_work = fs::temp_directory_path() / ("dynadps_cli_" + std::to_string(::getpid()));
    fs::remove_all(g_work);
    fs::create_directories(g_work);

    doctest::Context ctx(static_cast<int>(passthrough.size()), passthrough.data());
    const int rc = ctx.run();
    fs::remove_all(g_work);
    return rc;
}
