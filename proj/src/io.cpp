#include "dynadps/io.hpp"

#include "dynadps/errors.hpp"

#include <algorithm>
#include <bit>
#include <cctype>
#include <charconv>
#include <climits>
#include <cmath>
#include <cstdio>
#include <cstring>
#include <fstream>
#include <functional>
#include <sstream>
#include <system_error>
#include <vector>

static_assert(std::endian::native == std::endian::little,
              "on-disk formats assume a little-endian host");

namespace dynadps {
namespace {

namespace fs = std::filesystem;

constexpr char kMagicF64[8] = {'D', 'D', 'P', 'S', 'F', '6', '4', '\n'};
constexpr char kMagicRidge[8] = {'D', 'D', 'P', 'S', 'R', 'D', 'G', '\n'};

// ---- byte-level plumbing ---------------------------------------------------

void put_u32(std::string& out, std::uint32_t v) {
    char b[4];
    std::memcpy(b, &v, 4);
    out.append(b, 4);
}

void put_u64(std::string& out, std::uint64_t v) {
    char b[8];
    std::memcpy(b, &v, 8);
    out.append(b, 8);
}

void put_f64(std::string& out, double v) {
    char b[8];
    std::memcpy(b, &v, 8);
    out.append(b, 8);
}

// Sequential reader over an in-memory byte buffer with bounds checking.
struct ByteReader {
    const std::string& bytes;
    std::size_t pos = 0;
    std::string where;

    void need(std::size_t n) const {
        if (pos + n > bytes.size()) {
            throw ConfigError(where + ": truncated file");
        }
    }
    void expect_magic(const char magic[8]) {
        need(8);
        if (std::memcmp(bytes.data() + pos, magic, 8) != 0) {
            throw ConfigError(where + ": bad magic");
        }
        pos += 8;
    }
    std::uint32_t u32() {
        need(4);
        std::uint32_t v;
        std::memcpy(&v, bytes.data() + pos, 4);
        pos += 4;
        return v;
    }
    std::uint64_t u64() {
        need(8);
        std::uint64_t v;
        std::memcpy(&v, bytes.data() + pos, 8);
        pos += 8;
        return v;
    }
    double f64() {
        need(8);
        double v;
        std::memcpy(&v, bytes.data() + pos, 8);
        pos += 8;
        return v;
    }
    void done() const {
        if (pos != bytes.size()) {
            throw ConfigError(where + ": trailing bytes after payload");
        }
    }
};

std::string read_file_bytes(const fs::path& path) {
    std::error_code ec;
    if (!fs::exists(path, ec) || ec) {
        throw MissingArtifactError("missing artifact: " + path.string());
    }
    std::ifstream in(path, std::ios::binary);
    if (!in) {
        throw ConfigError("cannot open " + path.string());
    }
    std::ostringstream buf;
    buf << in.rdbuf();
    if (!in.good() && !in.eof()) {
        throw ConfigError("read failure on " + path.string());
    }
    return std::move(buf).str();
}

// ---- text formatting -------------------------------------------------------

std::string format_g17(double v) {
    char buf[64];
    std::snprintf(buf, sizeof(buf), "%.17g", v);
    return buf;
}

std::string format_hex64(std::uint64_t v) {
    char buf[24];
    std::snprintf(buf, sizeof(buf), "%016llx", static_cast<unsigned long long>(v));
    return buf;
}

std::string trim(const std::string& s) {
    const auto begin = s.find_first_not_of(" \t\r");
    if (begin == std::string::npos) return {};
    const auto end = s.find_last_not_of(" \t\r");
    return s.substr(begin, end - begin + 1);
}

double parse_double_strict(const std::string& s, const std::string& what) {
    double v = 0.0;
    const auto [ptr, ec] = std::from_chars(s.data(), s.data() + s.size(), v);
    if (ec != std::errc{} || ptr != s.data() + s.size()) {
        throw ConfigError(what + ": expected a number, got '" + s + "'");
    }
    return v;
}

long long parse_int_strict(const std::string& s, const std::string& what) {
    long long v = 0;
    const auto [ptr, ec] = std::from_chars(s.data(), s.data() + s.size(), v);
    if (ec != std::errc{} || ptr != s.data() + s.size()) {
        throw ConfigError(what + ": expected an integer, got '" + s + "'");
    }
    return v;
}

std::uint64_t parse_u64_strict(const std::string& s, const std::string& what) {
    std::uint64_t v = 0;
    const auto [ptr, ec] = std::from_chars(s.data(), s.data() + s.size(), v);
    if (ec != std::errc{} || ptr != s.data() + s.size()) {
        throw ConfigError(what + ": expected an unsigned integer, got '" + s + "'");
    }
    return v;
}

std::uint64_t parse_hex64_strict(const std::string& s, const std::string& what) {
    std::uint64_t v = 0;
    const auto [ptr, ec] = std::from_chars(s.data(), s.data() + s.size(), v, 16);
    if (ec != std::errc{} || ptr != s.data() + s.size()) {
        throw ConfigError(what + ": expected a hex fingerprint, got '" + s + "'");
    }
    return v;
}

// Line-oriented reader for the text artifacts: skips blank and '#' comment
// lines, checks fixed "key value" headers.
struct TextReader {
    std::istringstream in;
    std::string where;

    TextReader(const std::string& text, std::string where_)
        : in(text), where(std::move(where_)) {}

    bool next(std::string& line) {
        while (std::getline(in, line)) {
            const auto hash = line.find('#');
            if (hash != std::string::npos) line.erase(hash);
            line = trim(line);
            if (!line.empty()) return true;
        }
        return false;
    }
    std::string field(const std::string& key) {
        std::string line;
        if (!next(line)) {
            throw ConfigError(where + ": missing '" + key + "' line");
        }
        const auto space = line.find(' ');
        if (space == std::string::npos || line.substr(0, space) != key) {
            throw ConfigError(where + ": expected '" + key + " <value>', got '" + line + "'");
        }
        return trim(line.substr(space + 1));
    }
};

std::vector<std::string> split_ws(const std::string& line) {
    std::istringstream in(line);
    std::vector<std::string> out;
    std::string tok;
    while (in >> tok) out.push_back(tok);
    return out;
}

std::uint64_t fnv1a(const std::string& bytes) {
    std::uint64_t h = 0xcbf29ce484222325ull;
    for (const unsigned char c : bytes) {
        h = (h ^ c) * 0x100000001b3ull;
    }
    return h;
}

// ---- run-config key registry ----------------------------------------------

// One entry per config key; the same accessor drives parsing and canonical
// emission, so the two can never drift apart.
struct KeyDef {
    std::string key;
    std::function<void(RunConfig&, const std::string&)> set;
    std::function<std::string(const RunConfig&)> emit;
};

const std::vector<KeyDef>& key_registry() {
    static const std::vector<KeyDef> defs = [] {
        std::vector<KeyDef> out;
        const auto add_int = [&out](const char* key, auto ref) {
            out.push_back({key,
                           [key, ref](RunConfig& rc, const std::string& v) {
                               const long long n = parse_int_strict(v, key);
                               if (n < INT_MIN || n > INT_MAX) {
                                   throw ConfigError(std::string(key) + ": out of range");
                               }
                               ref(rc) = static_cast<int>(n);
                           },
                           [ref](const RunConfig& rc) {
                               return std::to_string(ref(const_cast<RunConfig&>(rc)));
                           }});
        };
        const auto add_dbl = [&out](const char* key, auto ref) {
            out.push_back({key,
                           [key, ref](RunConfig& rc, const std::string& v) {
                               ref(rc) = parse_double_strict(v, key);
                           },
                           [ref](const RunConfig& rc) {
                               return format_g17(ref(const_cast<RunConfig&>(rc)));
                           }});
        };
        const auto add_u64 = [&out](const char* key, auto ref) {
            out.push_back({key,
                           [key, ref](RunConfig& rc, const std::string& v) {
                               ref(rc) = parse_u64_strict(v, key);
                           },
                           [ref](const RunConfig& rc) {
                               return std::to_string(ref(const_cast<RunConfig&>(rc)));
                           }});
        };
        const auto add_str = [&out](const char* key, auto ref) {
            out.push_back({key,
                           [ref](RunConfig& rc, const std::string& v) { ref(rc) = v; },
                           [ref](const RunConfig& rc) {
                               return ref(const_cast<RunConfig&>(rc));
                           }});
        };

        add_int("phantom.size", [](RunConfig& c) -> int& { return c.phantom.size; });
        add_int("phantom.n_templates",
                [](RunConfig& c) -> int& { return c.phantom.n_templates; });
        add_dbl("phantom.sigma_p", [](RunConfig& c) -> double& { return c.phantom.sigma_p; });
        add_u64("phantom.seed", [](RunConfig& c) -> std::uint64_t& { return c.phantom.seed; });

        add_dbl("degradation.gamma",
                [](RunConfig& c) -> double& { return c.degradation.gamma; });
        add_dbl("degradation.blur_sigma",
                [](RunConfig& c) -> double& { return c.degradation.blur_sigma; });
        add_int("degradation.blur_radius",
                [](RunConfig& c) -> int& { return c.degradation.blur_radius; });
        add_int("degradation.factor_k",
                [](RunConfig& c) -> int& { return c.degradation.factor_k; });
        add_dbl("degradation.noise_sigma",
                [](RunConfig& c) -> double& { return c.degradation.noise_sigma; });
        add_dbl("degradation.gamma_floor",
                [](RunConfig& c) -> double& { return c.degradation.gamma_floor; });

        add_int("schedule.t_total", [](RunConfig& c) -> int& { return c.t_total; });
        add_dbl("schedule.beta_min", [](RunConfig& c) -> double& { return c.beta_min; });
        add_dbl("schedule.beta_max", [](RunConfig& c) -> double& { return c.beta_max; });

        add_dbl("weights.lambda1", [](RunConfig& c) -> double& { return c.weights.lambda1; });
        add_dbl("weights.lambda2", [](RunConfig& c) -> double& { return c.weights.lambda2; });
        add_int("weights.ssim_window",
                [](RunConfig& c) -> int& { return c.weights.ssim_window; });
        add_dbl("weights.ssim_k1", [](RunConfig& c) -> double& { return c.weights.ssim_k1; });
        add_dbl("weights.ssim_k2", [](RunConfig& c) -> double& { return c.weights.ssim_k2; });
        add_dbl("weights.peak", [](RunConfig& c) -> double& { return c.weights.peak; });

        add_dbl("wolfe.c1", [](RunConfig& c) -> double& { return c.wolfe.c1; });
        add_dbl("wolfe.c2", [](RunConfig& c) -> double& { return c.wolfe.c2; });
        add_dbl("wolfe.alpha_init", [](RunConfig& c) -> double& { return c.wolfe.alpha_init; });
        add_dbl("wolfe.alpha_max", [](RunConfig& c) -> double& { return c.wolfe.alpha_max; });
        add_int("wolfe.max_iters", [](RunConfig& c) -> int& { return c.wolfe.max_iters; });

        add_dbl("dcats.tau", [](RunConfig& c) -> double& { return c.dcats.tau; });
        add_int("dcats.t_grid_stride",
                [](RunConfig& c) -> int& { return c.dcats.t_grid_stride; });

        add_dbl("solve.rho", [](RunConfig& c) -> double& { return c.rho; });
        add_int("solve.t_start_override",
                [](RunConfig& c) -> int& { return c.t_start_override; });

        add_int("ridge.patch_in", [](RunConfig& c) -> int& { return c.ridge_patch_in; });
        add_dbl("ridge.lambda", [](RunConfig& c) -> double& { return c.ridge_lambda; });

        add_int("dataset.n_train", [](RunConfig& c) -> int& { return c.n_train; });
        add_int("dataset.n_refs", [](RunConfig& c) -> int& { return c.n_refs; });
        add_int("dataset.n_test", [](RunConfig& c) -> int& { return c.n_test; });
        add_int("bank.n_draws", [](RunConfig& c) -> int& { return c.bank_draws; });

        add_u64("seed.train", [](RunConfig& c) -> std::uint64_t& { return c.seed_train; });
        add_u64("seed.refs", [](RunConfig& c) -> std::uint64_t& { return c.seed_refs; });
        add_u64("seed.test", [](RunConfig& c) -> std::uint64_t& { return c.seed_test; });
        add_u64("seed.bank", [](RunConfig& c) -> std::uint64_t& { return c.seed_bank; });
        add_u64("seed.solve", [](RunConfig& c) -> std::uint64_t& { return c.seed_solve; });
        add_u64("seed.ridge", [](RunConfig& c) -> std::uint64_t& { return c.seed_ridge; });

        add_str("paths.out", [](RunConfig& c) -> std::string& { return c.out_dir; });

        std::sort(out.begin(), out.end(),
                  [](const KeyDef& a, const KeyDef& b) { return a.key < b.key; });
        return out;
    }();
    return defs;
}

const KeyDef* find_key(const std::string& key) {
    const auto& defs = key_registry();
    const auto it = std::lower_bound(defs.begin(), defs.end(), key,
                                     [](const KeyDef& d, const std::string& k) { return d.key < k; });
    if (it == defs.end() || it->key != key) return nullptr;
    return &*it;
}

}  // namespace

// ---------------------------------------------------------------------------
// atomic writes
// ---------------------------------------------------------------------------

void atomic_write(const fs::path& path, const std::string& bytes) {
    if (path.has_parent_path()) {
        fs::create_directories(path.parent_path());
    }
    const fs::path tmp = path.string() + ".tmp";
    {
        std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
        if (!out) {
            throw ConfigError("cannot open " + tmp.string() + " for writing");
        }
        out.write(bytes.data(), static_cast<std::streamsize>(bytes.size()));
        out.flush();
        if (!out.good()) {
            throw ConfigError("write failure on " + tmp.string());
        }
    }
    fs::rename(tmp, path);
}

// ---------------------------------------------------------------------------
// raw f64 images
// ---------------------------------------------------------------------------

void write_image_f64(const fs::path& path, const Image& img) {
    if (img.rows() <= 0 || img.cols() <= 0) {
        throw std::invalid_argument("write_image_f64: empty image");
    }
    std::string bytes;
    bytes.reserve(16 + static_cast<std::size_t>(img.size()) * 8);
    bytes.append(kMagicF64, 8);
    put_u32(bytes, static_cast<std::uint32_t>(img.cols()));
    put_u32(bytes, static_cast<std::uint32_t>(img.rows()));
    for (Eigen::Index i = 0; i < img.rows(); ++i) {
        for (Eigen::Index j = 0; j < img.cols(); ++j) {
            put_f64(bytes, img(i, j));
        }
    }
    atomic_write(path, bytes);
}

Image read_image_f64(const fs::path& path) {
    const std::string bytes = read_file_bytes(path);
    ByteReader r{bytes, 0, path.string()};
    r.expect_magic(kMagicF64);
    const std::uint32_t width = r.u32();
    const std::uint32_t height = r.u32();
    if (width == 0 || height == 0 || width > (1u << 20) || height > (1u << 20)) {
        throw ConfigError(path.string() + ": implausible dimensions");
    }
    Image img(static_cast<Eigen::Index>(height), static_cast<Eigen::Index>(width));
    for (Eigen::Index i = 0; i < img.rows(); ++i) {
        for (Eigen::Index j = 0; j < img.cols(); ++j) {
            img(i, j) = r.f64();
        }
    }
    r.done();
    return img;
}

void write_label_map(const fs::path& path, const LabelMap& labels) {
    write_image_f64(path, labels.cast<double>());
}

LabelMap read_label_map(const fs::path& path) {
    const Image raw = read_image_f64(path);
    LabelMap labels(raw.rows(), raw.cols());
    for (Eigen::Index i = 0; i < raw.rows(); ++i) {
        for (Eigen::Index j = 0; j < raw.cols(); ++j) {
            const double v = raw(i, j);
            const double rounded = std::nearbyint(v);
            if (!(std::abs(v - rounded) < 1e-9) || rounded < 0.0 || rounded > 1e6) {
                throw ConfigError(path.string() + ": non-integer label value");
            }
            labels(i, j) = static_cast<int>(rounded);
        }
    }
    return labels;
}

// ---------------------------------------------------------------------------
// 16-bit PGM
// ---------------------------------------------------------------------------

void write_image_pgm16(const fs::path& path, const Image& img, double peak) {
    if (img.rows() <= 0 || img.cols() <= 0) {
        throw std::invalid_argument("write_image_pgm16: empty image");
    }
    if (!(peak > 0.0)) {
        throw std::invalid_argument("write_image_pgm16: peak must be positive");
    }
    std::string bytes;
    bytes += "P5\n";
    bytes += std::to_string(img.cols()) + " " + std::to_string(img.rows()) + "\n";
    bytes += "65535\n";
    for (Eigen::Index i = 0; i < img.rows(); ++i) {
        for (Eigen::Index j = 0; j < img.cols(); ++j) {
            const double unit = std::clamp(img(i, j) / peak, 0.0, 1.0);
            const auto q = static_cast<std::uint16_t>(std::lround(unit * 65535.0));
            bytes.push_back(static_cast<char>(q >> 8));  // most significant byte first
            bytes.push_back(static_cast<char>(q & 0xff));
        }
    }
    atomic_write(path, bytes);
}

Image read_image_pgm16(const fs::path& path, double peak) {
    if (!(peak > 0.0)) {
        throw std::invalid_argument("read_image_pgm16: peak must be positive");
    }
    const std::string bytes = read_file_bytes(path);
    // Header: "P5", width, height, maxval as whitespace-separated tokens with
    // optional '#' comments, then a single whitespace byte before the samples.
    std::size_t pos = 0;
    const auto next_token = [&]() -> std::string {
        while (pos < bytes.size()) {
            if (bytes[pos] == '#') {
                while (pos < bytes.size() && bytes[pos] != '\n') ++pos;
            } else if (std::isspace(static_cast<unsigned char>(bytes[pos]))) {
                ++pos;
            } else {
                break;
            }
        }
        const std::size_t start = pos;
        while (pos < bytes.size() && !std::isspace(static_cast<unsigned char>(bytes[pos]))) ++pos;
        if (start == pos) {
            throw ConfigError(path.string() + ": truncated PGM header");
        }
        return bytes.substr(start, pos - start);
    };
    if (next_token() != "P5") {
        throw ConfigError(path.string() + ": not a binary PGM");
    }
    const long long width = parse_int_strict(next_token(), path.string() + " width");
    const long long height = parse_int_strict(next_token(), path.string() + " height");
    const long long maxval = parse_int_strict(next_token(), path.string() + " maxval");
    if (width <= 0 || height <= 0 || maxval != 65535) {
        throw ConfigError(path.string() + ": unsupported PGM geometry");
    }
    ++pos;  // the single whitespace byte after maxval
    const std::size_t need = static_cast<std::size_t>(width) * static_cast<std::size_t>(height) * 2;
    if (bytes.size() - pos != need) {
        throw ConfigError(path.string() + ": PGM payload size mismatch");
    }
    Image img(static_cast<Eigen::Index>(height), static_cast<Eigen::Index>(width));
    for (Eigen::Index i = 0; i < img.rows(); ++i) {
        for (Eigen::Index j = 0; j < img.cols(); ++j) {
            const auto hi = static_cast<unsigned char>(bytes[pos]);
            const auto lo = static_cast<unsigned char>(bytes[pos + 1]);
            pos += 2;
            img(i, j) = (hi * 256 + lo) * peak / 65535.0;
        }
    }
    return img;
}

// ---------------------------------------------------------------------------
// memory bank
// ---------------------------------------------------------------------------

void write_bank(const fs::path& path, const MemoryBank& bank,
                std::uint64_t config_fingerprint) {
    bank.validate();
    std::string out;
    out += "# dynadps memory bank\n";
    out += "config " + format_hex64(config_fingerprint) + "\n";
    out += "degradation " + format_hex64(bank.meta.fingerprint) + "\n";
    out += "n_refs " + std::to_string(bank.meta.n_refs) + "\n";
    out += "n_draws " + std::to_string(bank.meta.n_draws) + "\n";
    out += "noise_sigma " + format_g17(bank.meta.noise_sigma) + "\n";
    out += "op_count " + std::to_string(bank.meta.op_count) + "\n";
    out += "rows " + std::to_string(bank.t_grid.size()) + "\n";
    out += "# t avg_loglik se\n";
    for (std::size_t i = 0; i < bank.t_grid.size(); ++i) {
        out += std::to_string(bank.t_grid[i]) + " " + format_g17(bank.avg_loglik[i]) + " " +
               format_g17(bank.se[i]) + "\n";
    }
    atomic_write(path, out);
}

MemoryBank read_bank(const fs::path& path, std::uint64_t* config_fingerprint) {
    const std::string text = read_file_bytes(path);
    TextReader r(text, path.string());
    const std::uint64_t config_fp = parse_hex64_strict(r.field("config"), path.string());
    MemoryBank bank;
    bank.meta.fingerprint = parse_hex64_strict(r.field("degradation"), path.string());
    bank.meta.n_refs = static_cast<int>(parse_int_strict(r.field("n_refs"), path.string()));
    bank.meta.n_draws = static_cast<int>(parse_int_strict(r.field("n_draws"), path.string()));
    bank.meta.noise_sigma = parse_double_strict(r.field("noise_sigma"), path.string());
    bank.meta.op_count = parse_int_strict(r.field("op_count"), path.string());
    const long long rows = parse_int_strict(r.field("rows"), path.string());
    if (rows < 1 || rows > 1'000'000) {
        throw ConfigError(path.string() + ": implausible row count");
    }
    for (long long i = 0; i < rows; ++i) {
        std::string line;
        if (!r.next(line)) {
            throw ConfigError(path.string() + ": missing bank rows");
        }
        const auto tok = split_ws(line);
        if (tok.size() != 3) {
            throw ConfigError(path.string() + ": malformed bank row '" + line + "'");
        }
        bank.t_grid.push_back(static_cast<int>(parse_int_strict(tok[0], path.string())));
        bank.avg_loglik.push_back(parse_double_strict(tok[1], path.string()));
        bank.se.push_back(parse_double_strict(tok[2], path.string()));
    }
    std::string extra;
    if (r.next(extra)) {
        throw ConfigError(path.string() + ": trailing content after bank rows");
    }
    try {
        bank.validate();
    } catch (const std::invalid_argument& e) {
        throw ConfigError(path.string() + ": " + e.what());
    }
    if (config_fingerprint) *config_fingerprint = config_fp;
    return bank;
}

// ---------------------------------------------------------------------------
// ridge model
// ---------------------------------------------------------------------------

void write_ridge(const fs::path& path, const RidgeModel& model,
                 std::uint64_t config_fingerprint) {
    model.validate();
    std::string bytes;
    bytes.append(kMagicRidge, 8);
    put_u32(bytes, static_cast<std::uint32_t>(model.patch_in));
    put_u32(bytes, static_cast<std::uint32_t>(model.scale_k));
    put_f64(bytes, model.ridge_lambda);
    put_u64(bytes, model.trained_on);
    put_u64(bytes, config_fingerprint);
    put_u32(bytes, static_cast<std::uint32_t>(model.weights.rows()));
    put_u32(bytes, static_cast<std::uint32_t>(model.weights.cols()));
    for (Eigen::Index i = 0; i < model.weights.rows(); ++i) {
        for (Eigen::Index j = 0; j < model.weights.cols(); ++j) {
            put_f64(bytes, model.weights(i, j));
        }
    }
    atomic_write(path, bytes);
}

RidgeModel read_ridge(const fs::path& path, std::uint64_t* config_fingerprint) {
    const std::string bytes = read_file_bytes(path);
    ByteReader r{bytes, 0, path.string()};
    r.expect_magic(kMagicRidge);
    RidgeModel model;
    model.patch_in = static_cast<int>(r.u32());
    model.scale_k = static_cast<int>(r.u32());
    model.ridge_lambda = r.f64();
    model.trained_on = r.u64();
    const std::uint64_t config_fp = r.u64();
    const std::uint32_t rows = r.u32();
    const std::uint32_t cols = r.u32();
    if (rows == 0 || cols == 0 || rows > (1u << 16) || cols > (1u << 16)) {
        throw ConfigError(path.string() + ": implausible weight dimensions");
    }
    model.weights.resize(static_cast<Eigen::Index>(rows), static_cast<Eigen::Index>(cols));
    for (Eigen::Index i = 0; i < model.weights.rows(); ++i) {
        for (Eigen::Index j = 0; j < model.weights.cols(); ++j) {
            model.weights(i, j) = r.f64();
        }
    }
    r.done();
    try {
        model.validate();
    } catch (const std::invalid_argument& e) {
        throw ConfigError(path.string() + ": " + e.what());
    }
    if (config_fingerprint) *config_fingerprint = config_fp;
    return model;
}

// ---------------------------------------------------------------------------
// dataset manifest
// ---------------------------------------------------------------------------

void write_manifest(const fs::path& path, const DatasetManifest& manifest) {
    std::string out;
    out += "# dynadps dataset manifest\n";
    out += "config " + format_hex64(manifest.config_fingerprint) + "\n";
    out += "degradation " + format_hex64(manifest.degradation_fingerprint) + "\n";
    out += "partition " + manifest.partition + "\n";
    out += "role " + manifest.role + "\n";
    out += "seed " + std::to_string(manifest.seed) + "\n";
    out += "n " + std::to_string(manifest.entries.size()) + "\n";
    out += "# id component truth measurement labels\n";
    for (const ManifestEntry& e : manifest.entries) {
        out += std::to_string(e.id) + " " + std::to_string(e.component) + " " + e.truth + " " +
               e.measurement + " " + e.labels + "\n";
    }
    atomic_write(path, out);
}

DatasetManifest read_manifest(const fs::path& path) {
    const std::string text = read_file_bytes(path);
    TextReader r(text, path.string());
    DatasetManifest m;
    m.config_fingerprint = parse_hex64_strict(r.field("config"), path.string());
    m.degradation_fingerprint = parse_hex64_strict(r.field("degradation"), path.string());
    m.partition = r.field("partition");
    m.role = r.field("role");
    m.seed = parse_u64_strict(r.field("seed"), path.string());
    const long long n = parse_int_strict(r.field("n"), path.string());
    if (n < 0 || n > 1'000'000) {
        throw ConfigError(path.string() + ": implausible sample count");
    }
    for (long long i = 0; i < n; ++i) {
        std::string line;
        if (!r.next(line)) {
            throw ConfigError(path.string() + ": missing manifest rows");
        }
        const auto tok = split_ws(line);
        if (tok.size() != 5) {
            throw ConfigError(path.string() + ": malformed manifest row '" + line + "'");
        }
        ManifestEntry e;
        e.id = static_cast<int>(parse_int_strict(tok[0], path.string()));
        e.component = static_cast<int>(parse_int_strict(tok[1], path.string()));
        e.truth = tok[2];
        e.measurement = tok[3];
        e.labels = tok[4];
        m.entries.push_back(std::move(e));
    }
    std::string extra;
    if (r.next(extra)) {
        throw ConfigError(path.string() + ": trailing content after manifest rows");
    }
    return m;
}

// ---------------------------------------------------------------------------
// run stamp
// ---------------------------------------------------------------------------

void write_run_stamp(const fs::path& path, const RunStamp& stamp) {
    std::string out;
    out += "# dynadps run stamp\n";
    out += "config " + format_hex64(stamp.config_fingerprint) + "\n";
    out += "partition " + stamp.partition + "\n";
    out += "mode " + stamp.mode + "\n";
    out += "n " + std::to_string(stamp.n) + "\n";
    atomic_write(path, out);
}

RunStamp read_run_stamp(const fs::path& path) {
    const std::string text = read_file_bytes(path);
    TextReader r(text, path.string());
    RunStamp stamp;
    stamp.config_fingerprint = parse_hex64_strict(r.field("config"), path.string());
    stamp.partition = r.field("partition");
    stamp.mode = r.field("mode");
    stamp.n = static_cast<int>(parse_int_strict(r.field("n"), path.string()));
    return stamp;
}

// ---------------------------------------------------------------------------
// run configuration
// ---------------------------------------------------------------------------

void RunConfig::validate() const {
    phantom.validate();
    if (t_total < 2) {
        throw ConfigError("schedule.t_total must be at least 2");
    }
    if (!(0.0 < beta_min && beta_min < beta_max && beta_max < 1.0)) {
        throw ConfigError("schedule betas must satisfy 0 < beta_min < beta_max < 1");
    }
    weights.validate();
    wolfe.validate();
    dcats.validate();
    if (!(rho > 0.0)) {
        throw ConfigError("solve.rho must be positive");
    }
    if (t_start_override != -1 && (t_start_override < 1 || t_start_override >= t_total)) {
        throw ConfigError("solve.t_start_override must be -1 or in [1, t_total)");
    }
    if (ridge_patch_in < 1 || ridge_patch_in % 2 == 0) {
        throw ConfigError("ridge.patch_in must be odd and positive");
    }
    if (!(ridge_lambda > 0.0)) {
        throw ConfigError("ridge.lambda must be positive");
    }
    if (n_train < 1 || n_refs < 1 || n_test < 1 || bank_draws < 1) {
        throw ConfigError("dataset sizes and bank.n_draws must be at least 1");
    }
    if (out_dir.empty()) {
        throw ConfigError("paths.out must not be empty");
    }
    // The same config serves every partition, so every preset must be viable:
    // the degradation itself, the divisibility of the phantom size, and enough
    // measurement pixels for the SSIM window.
    for (const Partition p : {Partition::ind, Partition::ood_contrast, Partition::ood_res}) {
        const DegradationConfig cfg = degradation_for(p);
        cfg.validate_for(phantom.size, phantom.size);
        if (phantom.size / cfg.factor_k < weights.ssim_window) {
            throw ConfigError(std::string("partition ") + partition_name(p) +
                              ": measurement smaller than weights.ssim_window");
        }
    }
}

DegradationConfig RunConfig::degradation_for(Partition p) const {
    DegradationConfig cfg = degradation;
    switch (p) {
        case Partition::ind:
            break;
        case Partition::ood_contrast:
            cfg.gamma = 0.4;  // contrast shift, resolution unchanged
            break;
        case Partition::ood_res:
            cfg.factor_k = 3;  // resolution shift, contrast unchanged
            break;
    }
    return cfg;
}

std::string RunConfig::canonical_lines() const {
    std::string out;
    for (const KeyDef& def : key_registry()) {
        out += def.key + "=" + def.emit(*this) + "\n";
    }
    return out;
}

std::uint64_t RunConfig::fingerprint() const {
    // Path keys are where results land, not what they are; excluding them
    // lets a relocated output tree keep passing the artifact guards once the
    // config's paths are updated to match.
    std::string semantic;
    std::istringstream in(canonical_lines());
    std::string line;
    while (std::getline(in, line)) {
        if (line.rfind("paths.", 0) != 0) semantic += line + "\n";
    }
    return fnv1a(semantic);
}

RunConfig parse_run_config_text(const std::string& text) {
    RunConfig rc;
    std::istringstream in(text);
    std::string line;
    int line_no = 0;
    std::vector<std::string> seen;
    while (std::getline(in, line)) {
        ++line_no;
        const auto hash = line.find('#');
        if (hash != std::string::npos) line.erase(hash);
        line = trim(line);
        if (line.empty()) continue;
        const auto eq = line.find('=');
        if (eq == std::string::npos) {
            throw ConfigError("config line " + std::to_string(line_no) +
                              ": expected key=value, got '" + line + "'");
        }
        const std::string key = trim(line.substr(0, eq));
        const std::string value = trim(line.substr(eq + 1));
        const KeyDef* def = find_key(key);
        if (!def) {
            throw ConfigError("unknown config key '" + key + "'");
        }
        if (std::find(seen.begin(), seen.end(), key) != seen.end()) {
            throw ConfigError("duplicate config key '" + key + "'");
        }
        seen.push_back(key);
        def->set(rc, value);
    }
    rc.validate();
    return rc;
}

RunConfig parse_run_config(const fs::path& path) {
    std::error_code ec;
    if (!fs::exists(path, ec) || ec) {
        throw ConfigError("config file not found: " + path.string());
    }
    return parse_run_config_text(read_file_bytes(path));
}

}  // namespace dynadps
