#pragma once

#include <stdexcept>
#include <string>

namespace vne_admit {

/// Invalid or unreadable configuration / sweep spec.
struct ConfigError : std::runtime_error {
    using std::runtime_error::runtime_error;
};

/// Action values blew past the divergence guard during training.
struct TrainingDiverged : std::runtime_error {
    using std::runtime_error::runtime_error;
};

/// A policy was trained for a different environment shape than the one it is used with.
struct SignatureMismatch : std::runtime_error {
    using std::runtime_error::runtime_error;
};

/// Policy file is truncated, malformed, or of an unsupported version.
struct PolicyFileError : std::runtime_error {
    using std::runtime_error::runtime_error;
};

}  // namespace vne_admit
