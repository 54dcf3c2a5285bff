#pragma once

#include <cmath>
#include <cstdint>
#include <stdexcept>
#include <string>

#include <Eigen/Dense>

namespace toolskill {

using Mat = Eigen::MatrixXd;
using Vec = Eigen::VectorXd;

/// Control period of the simulator, sensors and policy (20 Hz).
inline constexpr double kDt = 0.05;

/// Observation vector fed to the policy: 10 tactile feature + 6 proximity.
inline constexpr int kTactileFeatureDim = 10;
inline constexpr int kProximityDim = 6;
inline constexpr int kObsDim = kTactileFeatureDim + kProximityDim;
inline constexpr int kActDim = 2;

// Error taxonomy. The CLI maps these onto its exit codes.

struct InputError : std::invalid_argument {
    using std::invalid_argument::invalid_argument;
};

struct DomainError : std::domain_error {
    using std::domain_error::domain_error;
};

struct NumericError : std::runtime_error {
    using std::runtime_error::runtime_error;
};

struct ConfigError : std::runtime_error {
    using std::runtime_error::runtime_error;
};

struct MissingInputError : std::runtime_error {
    using std::runtime_error::runtime_error;
};

/// splitmix64 finaliser; used to derive independent child seeds.
inline std::uint64_t mix_seed(std::uint64_t seed, std::uint64_t stream) {
    std::uint64_t z = seed + 0x9E3779B97F4A7C15ULL * (stream + 1);
    z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ULL;
    z = (z ^ (z >> 27)) * 0x94D049BB133111EBULL;
    return z ^ (z >> 31);
}

inline bool all_finite(const Eigen::Ref<const Mat>& m) { return m.allFinite(); }

}  // namespace toolskill
