#pragma once

#include <array>
#include <cstdint>
#include <string>
#include <vector>

#include "toolskill/common.hpp"
#include "toolskill/env_sim.hpp"

namespace toolskill {

inline constexpr int kFingers = 2;
inline constexpr int kTaxelRows = 4;
inline constexpr int kTaxelCols = 4;
inline constexpr int kTactileAxes = 3;
inline constexpr int kTactileRawDim = kFingers * kTaxelRows * kTaxelCols * kTactileAxes;

/// One 20 Hz sample of everything the robot senses plus the ground-truth
/// contact state used for evaluation.
struct SensorFrame {
    double t = 0.0;
    double ee_x = 0.0;
    double ee_z = 0.0;
    double tip_x = 0.0;
    std::array<double, kTactileRawDim> tactile_raw{};
    std::array<double, kTactileFeatureDim> tactile_feature{};
    std::array<double, kProximityDim> proximity{};
    ContactWrench wrench;
};

struct Frame {
    SensorFrame sensors;
    Action action;
};

/// Policy observation: tactile feature followed by proximity.
inline Vec observation(const SensorFrame& f) {
    Vec x(kObsDim);
    for (int i = 0; i < kTactileFeatureDim; ++i) x[i] = f.tactile_feature[static_cast<std::size_t>(i)];
    for (int i = 0; i < kProximityDim; ++i)
        x[kTactileFeatureDim + i] = f.proximity[static_cast<std::size_t>(i)];
    return x;
}

struct TrajectoryMeta {
    std::string label;  // e.g. "primitive", "demo"
    EnvironmentSpec env;
    ToolSpec tool;
    std::uint64_t seed = 0;
    double grasp_shift = 0.0;
};

struct Trajectory {
    TrajectoryMeta meta;
    std::vector<Frame> frames;
};

struct Dataset {
    std::vector<Trajectory> trajectories;
    std::string provenance;  // JSON text describing how the data was produced

    std::size_t frame_count() const {
        std::size_t n = 0;
        for (const auto& t : trajectories) n += t.frames.size();
        return n;
    }
};

}  // namespace toolskill
