// Error taxonomy shared by the library and the command-line driver. The
// driver maps these onto process exit codes (config 2, fingerprint 3,
// missing artifact 4).

#pragma once

#include <stdexcept>
#include <string>

namespace dynadps {

struct ConfigError : std::runtime_error {
    explicit ConfigError(const std::string& msg) : std::runtime_error(msg) {}
};

struct FingerprintError : std::runtime_error {
    explicit FingerprintError(const std::string& msg) : std::runtime_error(msg) {}
};

struct MissingArtifactError : std::runtime_error {
    explicit MissingArtifactError(const std::string& msg) : std::runtime_error(msg) {}
};

}  // namespace dynadps
