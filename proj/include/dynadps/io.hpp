// Persistence layer shared by the command-line driver and its tests. Two
// image formats (a raw little-endian 64-bit-real container for lossless
// intermediates and 16-bit binary PGM for viewables), text tables for the
// memory bank and dataset manifests, a small binary container for the ridge
// model, and the flat key=value run configuration whose canonical fingerprint
// ties every artifact on disk back to the configuration that produced it.
//
// All writers go through an atomic write-then-rename so a crashed command
// never leaves a half-written artifact behind. Readers throw
// MissingArtifactError when the file is absent and ConfigError when it is
// present but malformed.

#pragma once

#include "dynadps/conditional.hpp"
#include "dynadps/consistency.hpp"
#include "dynadps/dcats.hpp"
#include "dynadps/degradation.hpp"
#include "dynadps/image.hpp"
#include "dynadps/linesearch.hpp"
#include "dynadps/phantom.hpp"

#include <cstdint>
#include <filesystem>
#include <string>
#include <vector>

namespace dynadps {

// ---------------------------------------------------------------------------
// Raw image container: 16-byte header (8-byte magic "DDPSF64\n", then width
// and height as little-endian uint32), followed by row-major little-endian
// IEEE doubles. Lossless round trip, bit for bit.
// ---------------------------------------------------------------------------

void write_image_f64(const std::filesystem::path& path, const Image& img);
Image read_image_f64(const std::filesystem::path& path);

/// Label maps ride in the same container with exact small-integer values.
void write_label_map(const std::filesystem::path& path, const LabelMap& labels);
LabelMap read_label_map(const std::filesystem::path& path);

// ---------------------------------------------------------------------------
// 16-bit binary portable graymap ("P5", maxval 65535, big-endian samples).
// Values are clamped to [0, peak] and quantized; inspectable with standard
// image tools.
// ---------------------------------------------------------------------------

void write_image_pgm16(const std::filesystem::path& path, const Image& img, double peak = 1.0);
Image read_image_pgm16(const std::filesystem::path& path, double peak = 1.0);

// ---------------------------------------------------------------------------
// Memory bank: a '#'-commented text table. Doubles are printed with 17
// significant digits so the round trip is exact. The file records both the
// run-config fingerprint (cross-artifact guard) and the degradation
// fingerprint the bank was built for (checked again inside solve()).
// ---------------------------------------------------------------------------

void write_bank(const std::filesystem::path& path, const MemoryBank& bank,
                std::uint64_t config_fingerprint);
MemoryBank read_bank(const std::filesystem::path& path,
                     std::uint64_t* config_fingerprint = nullptr);

// ---------------------------------------------------------------------------
// Ridge model: binary container (magic "DDPSRDG\n"), little-endian fields,
// weights stored row-major. Lossless.
// ---------------------------------------------------------------------------

void write_ridge(const std::filesystem::path& path, const RidgeModel& model,
                 std::uint64_t config_fingerprint);
RidgeModel read_ridge(const std::filesystem::path& path,
                      std::uint64_t* config_fingerprint = nullptr);

// ---------------------------------------------------------------------------
// Dataset manifest: one text file per sample directory listing (id,
// component, file names) plus the fingerprints and the partition/role the
// samples belong to. Deterministic content, so equal configs yield
// byte-identical manifests.
// ---------------------------------------------------------------------------

struct ManifestEntry {
    int id = 0;
    int component = -1;
    std::string truth;
    std::string measurement;
    std::string labels;
};

struct DatasetManifest {
    std::uint64_t config_fingerprint = 0;
    std::uint64_t degradation_fingerprint = 0;
    std::string partition;
    std::string role;  // "test", "refs", or "train"
    std::uint64_t seed = 0;
    std::vector<ManifestEntry> entries;
};

void write_manifest(const std::filesystem::path& path, const DatasetManifest& manifest);
DatasetManifest read_manifest(const std::filesystem::path& path);

// ---------------------------------------------------------------------------
// Run stamp: a tiny header dropped next to solve outputs so downstream
// commands can verify which config/partition/mode produced them.
// ---------------------------------------------------------------------------

struct RunStamp {
    std::uint64_t config_fingerprint = 0;
    std::string partition;
    std::string mode;  // "dynamic" or "vanilla"
    int n = 0;         // samples solved
};

void write_run_stamp(const std::filesystem::path& path, const RunStamp& stamp);
RunStamp read_run_stamp(const std::filesystem::path& path);

// ---------------------------------------------------------------------------
// Run configuration: flat key=value text, '#' starts a comment, unknown and
// duplicate keys are rejected. Every key has a default, so the empty file is
// a valid configuration. The fingerprint hashes the canonicalized key=value
// lines (sorted keys, 17-significant-digit numerics), which makes it a
// function of the semantic configuration rather than of the file text.
// ---------------------------------------------------------------------------

struct RunConfig {
    PhantomSpec phantom;            // phantom.*
    DegradationConfig degradation;  // degradation.* (in-distribution base)

    int t_total = 1000;             // schedule.t_total
    double beta_min = 1e-4;         // schedule.beta_min
    double beta_max = 0.02;         // schedule.beta_max

    ConsistencyWeights weights;     // weights.*
    WolfeParams wolfe;              // wolfe.*
    DcatsParams dcats;              // dcats.*

    double rho = 0.5;               // solve.rho (vanilla step size)
    int t_start_override = -1;      // solve.t_start_override (-1 = use the bank)

    int ridge_patch_in = 5;         // ridge.patch_in
    double ridge_lambda = 1e-3;     // ridge.lambda

    int n_train = 16;               // dataset.n_train
    int n_refs = 8;                 // dataset.n_refs
    int n_test = 50;                // dataset.n_test
    int bank_draws = 4;             // bank.n_draws

    std::uint64_t seed_train = 10000;  // seed.train
    std::uint64_t seed_refs = 30000;   // seed.refs
    std::uint64_t seed_test = 20000;   // seed.test
    std::uint64_t seed_bank = 11;      // seed.bank
    std::uint64_t seed_solve = 77;     // seed.solve
    std::uint64_t seed_ridge = 1;      // seed.ridge

    std::string out_dir = "out";    // paths.out

    /// Cross-field validation on top of the member structs' own validate().
    void validate() const;

    /// Degradation for a partition: the in-distribution base with the
    /// out-of-distribution axis (gamma or factor_k) overridden.
    DegradationConfig degradation_for(Partition p) const;

    /// Stable 64-bit hash of the canonical_lines() text with the
    /// non-semantic paths.* keys removed: configs that describe the same
    /// experiment in different output locations share a fingerprint.
    std::uint64_t fingerprint() const;

    /// The canonical key=value serialization (every key, defaults included,
    /// sorted by name).
    std::string canonical_lines() const;
};

RunConfig parse_run_config_text(const std::string& text);
RunConfig parse_run_config(const std::filesystem::path& path);

/// Serialize bytes to path atomically (write to a sibling temp file, then
/// rename over the destination).
void atomic_write(const std::filesystem::path& path, const std::string& bytes);

}  // namespace dynadps
