#pragma once

// Fingertip tactile arrays, downward proximity rays, the shear/slip tactile
// feature and [-0.9, 0.9] channel normalisation.

#include <algorithm>
#include <array>
#include <cmath>
#include <limits>
#include <cstdint>
#include <random>
#include <string>
#include <vector>

#include "toolskill/common.hpp"
#include "toolskill/env_sim.hpp"
#include "toolskill/trajectory.hpp"

namespace toolskill {

/// 2 fingertips x 4 rows x 4 cols x (tangential-x, tangential-y, normal).
/// Tangential-x is aligned with world x, tangential-y with world z.
struct TactileArray {
    std::array<double, kTactileRawDim> data{};

    static constexpr std::size_t index(int finger, int row, int col, int axis) {
        return static_cast<std::size_t>(((finger * kTaxelRows + row) * kTaxelCols + col) * kTactileAxes + axis);
    }
    double& at(int finger, int row, int col, int axis) { return data[index(finger, row, col, axis)]; }
    double at(int finger, int row, int col, int axis) const { return data[index(finger, row, col, axis)]; }
};

struct TactileFeature {
    // Per fingertip: shear_x, shear_y, slip_x, slip_y, slip_rot.
    std::array<double, kTactileFeatureDim> values{};
};

struct SensorConfig {
    double grip_force = 5.0;           // N, total normal load per fingertip
    double tactile_noise = 0.01;       // N, per channel
    double taxel_pitch = 0.25;         // cm
    std::array<double, kProximityDim> ray_offsets{0.0, 1.0, 2.0, 3.0, 4.0, 5.0};  // cm ahead of fingertip
    double proximity_max_range = 20.0; // cm
    double proximity_noise = 0.0;      // cm
};

/// Taxel loads for the grasp plus the wrench transmitted from the tool tip.
inline TactileArray simulate_tactile(const WorldState& world, const ToolSpec& tool,
                                     const ContactWrench& wrench, const SensorConfig& cfg,
                                     std::uint64_t seed) {
    if (!(cfg.grip_force >= 0.0)) throw InputError("simulate_tactile: grip force must be >= 0");
    TactileArray arr;
    constexpr double taxels = kTaxelRows * kTaxelCols;
    // Moment of the tip wrench about the grasp, split between fingertips and
    // spread linearly over the rows: sum_r n_r * l_r = M / 2 per fingertip.
    const double moment = wrench.f_x * lever_arm(tool, world);
    double row_sq = 0.0;
    for (int r = 0; r < kTaxelRows; ++r) {
        const double l = (r - (kTaxelRows - 1) / 2.0) * cfg.taxel_pitch;
        row_sq += l * l;
    }
    std::mt19937_64 rng(seed);
    std::normal_distribution<double> noise(0.0, cfg.tactile_noise > 0.0 ? cfg.tactile_noise : 1.0);
    const bool noisy = cfg.tactile_noise > 0.0;
    for (int f = 0; f < kFingers; ++f) {
        const double side = f == 0 ? 1.0 : -1.0;
        for (int r = 0; r < kTaxelRows; ++r) {
            const double l = (r - (kTaxelRows - 1) / 2.0) * cfg.taxel_pitch;
            const double moment_share = side * (moment / 2.0) * l / (kTaxelCols * row_sq);
            for (int c = 0; c < kTaxelCols; ++c) {
                arr.at(f, r, c, 0) = wrench.f_x / 2.0 / taxels;
                arr.at(f, r, c, 1) = wrench.f_z / 2.0 / taxels;
                arr.at(f, r, c, 2) = cfg.grip_force / taxels + moment_share;
            }
        }
    }
    if (noisy)
        for (double& v : arr.data) v += noise(rng);
    for (int f = 0; f < kFingers; ++f)
        for (int r = 0; r < kTaxelRows; ++r)
            for (int c = 0; c < kTaxelCols; ++c) arr.at(f, r, c, 2) = std::max(0.0, arr.at(f, r, c, 2));
    return arr;
}

/// Shear = summed tangential load; slip proxies = shear / normal and
/// tangential moment about the grid centre / normal (taxel-pitch units).
inline TactileFeature preprocess_tactile(const TactileArray& arr, double eps = 1e-9) {
    TactileFeature out;
    for (int f = 0; f < kFingers; ++f) {
        double sx = 0.0, sy = 0.0, normal = 0.0, torque = 0.0;
        for (int r = 0; r < kTaxelRows; ++r) {
            const double v = r - (kTaxelRows - 1) / 2.0;
            for (int c = 0; c < kTaxelCols; ++c) {
                const double u = c - (kTaxelCols - 1) / 2.0;
                const double tx = arr.at(f, r, c, 0);
                const double ty = arr.at(f, r, c, 1);
                sx += tx;
                sy += ty;
                normal += arr.at(f, r, c, 2);
                torque += u * ty - v * tx;
            }
        }
        auto* o = &out.values[static_cast<std::size_t>(f * 5)];
        o[0] = sx;
        o[1] = sy;
        if (normal > eps) {
            o[2] = sx / normal;
            o[3] = sy / normal;
            o[4] = torque / normal;
        }
    }
    return out;
}

struct ProximityReading {
    std::array<double, kProximityDim> distance{};
};

/// Downward rays from the right fingertip (at the end-effector position).
/// Rays leaving the surface extent report max range.
inline ProximityReading simulate_proximity(const WorldState& world, const EnvironmentSpec& env,
                                           const SensorConfig& cfg = {}, std::uint64_t seed = 0) {
    ProximityReading out;
    std::mt19937_64 rng(seed);
    std::normal_distribution<double> noise(0.0, cfg.proximity_noise > 0.0 ? cfg.proximity_noise : 1.0);
    for (int i = 0; i < kProximityDim; ++i) {
        const double x = world.ee_x + cfg.ray_offsets[static_cast<std::size_t>(i)];
        double d = cfg.proximity_max_range;
        if (in_extent(env, x)) {
            d = world.ee_z - surface_height(env, x, world);
            if (cfg.proximity_noise > 0.0) d += noise(rng);
        }
        out.distance[static_cast<std::size_t>(i)] = std::clamp(d, 0.0, cfg.proximity_max_range);
    }
    return out;
}

// ---------------------------------------------------------------------------
// Normalisation

/// Channel layout shared by NormalizationStats and its JSON file.
inline constexpr int kChanEeX = 0;
inline constexpr int kChanEeZ = 1;
inline constexpr int kChanObs = 2;  // 16 observation channels start here
inline constexpr int kChanAct = kChanObs + kObsDim;
inline constexpr int kNormChannels = kChanAct + kActDim;

inline std::vector<std::string> normalization_channel_names() {
    std::vector<std::string> n{"ee_x", "ee_z"};
    for (const char* side : {"left", "right"})
        for (const char* q : {"shear_x", "shear_y", "slip_x", "slip_y", "slip_rot"})
            n.push_back(std::string(side) + "_" + q);
    for (int i = 0; i < kProximityDim; ++i) n.push_back("proximity_" + std::to_string(i));
    n.push_back("u_x");
    n.push_back("u_z");
    return n;
}

inline constexpr double kNormLo = -0.9;
inline constexpr double kNormHi = 0.9;

struct NormalizationStats {
    Vec min;
    Vec max;

    int channels() const { return static_cast<int>(min.size()); }
};

inline Vec frame_channels(const Frame& f) {
    Vec v(kNormChannels);
    v[kChanEeX] = f.sensors.ee_x;
    v[kChanEeZ] = f.sensors.ee_z;
    v.segment(kChanObs, kObsDim) = observation(f.sensors);
    v[kChanAct] = f.action.u_x;
    v[kChanAct + 1] = f.action.u_z;
    return v;
}

inline NormalizationStats fit_normalization(const Dataset& corpus) {
    if (corpus.frame_count() == 0) throw InputError("fit_normalization: empty corpus");
    NormalizationStats s;
    s.min = Vec::Constant(kNormChannels, std::numeric_limits<double>::infinity());
    s.max = Vec::Constant(kNormChannels, -std::numeric_limits<double>::infinity());
    for (const auto& tr : corpus.trajectories)
        for (const auto& f : tr.frames) {
            const Vec v = frame_channels(f);
            s.min = s.min.cwiseMin(v);
            s.max = s.max.cwiseMax(v);
        }
    return s;
}

namespace detail {
inline void check_channels(const NormalizationStats& s, Eigen::Index n, int offset) {
    if (offset < 0 || offset + n > s.channels() || s.max.size() != s.min.size())
        throw InputError("normalization: channel count does not match stats layout");
}
}  // namespace detail

/// Affine map [min, max] -> [-0.9, 0.9] on channels [offset, offset + n).
/// Degenerate channels (max == min) map to 0.
inline Vec normalize(const Eigen::Ref<const Vec>& v, const NormalizationStats& s, int offset = 0) {
    detail::check_channels(s, v.size(), offset);
    Vec out(v.size());
    for (Eigen::Index i = 0; i < v.size(); ++i) {
        const double lo = s.min[offset + i], hi = s.max[offset + i];
        out[i] = hi > lo ? kNormLo + (v[i] - lo) * (kNormHi - kNormLo) / (hi - lo) : 0.0;
    }
    return out;
}

/// Inverse of normalize; degenerate channels return their single value.
inline Vec denormalize(const Eigen::Ref<const Vec>& v, const NormalizationStats& s, int offset = 0) {
    detail::check_channels(s, v.size(), offset);
    Vec out(v.size());
    for (Eigen::Index i = 0; i < v.size(); ++i) {
        const double lo = s.min[offset + i], hi = s.max[offset + i];
        out[i] = hi > lo ? lo + (v[i] - kNormLo) * (hi - lo) / (kNormHi - kNormLo) : lo;
    }
    return out;
}

/// Which of the 16 observation channels the policy may see; masked channels
/// are zeroed after normalisation.
struct ObservationMask {
    std::array<bool, kObsDim> keep{};

    ObservationMask() { keep.fill(true); }

    static ObservationMask full() { return {}; }
    static ObservationMask tactile_only() {
        ObservationMask m;
        for (int i = kTactileFeatureDim; i < kObsDim; ++i) m.keep[static_cast<std::size_t>(i)] = false;
        return m;
    }
    static ObservationMask proximity_only() {
        ObservationMask m;
        for (int i = 0; i < kTactileFeatureDim; ++i) m.keep[static_cast<std::size_t>(i)] = false;
        return m;
    }
    /// Only the normal-direction shear (the z-force carried by each fingertip).
    static ObservationMask normal_force_only() {
        ObservationMask m;
        m.keep.fill(false);
        m.keep[1] = true;
        m.keep[6] = true;
        return m;
    }
    static ObservationMask single_ray() {
        ObservationMask m = tactile_only();
        m.keep[kTactileFeatureDim] = true;
        return m;
    }
    static ObservationMask from_name(const std::string& name) {
        if (name == "full") return full();
        if (name == "tactile_only") return tactile_only();
        if (name == "proximity_only") return proximity_only();
        if (name == "normal_force_only") return normal_force_only();
        if (name == "single_ray") return single_ray();
        throw ConfigError("unknown observation mask '" + name + "'");
    }

    void apply(Eigen::Ref<Vec> obs) const {
        for (int i = 0; i < kObsDim; ++i)
            if (!keep[static_cast<std::size_t>(i)]) obs[i] = 0.0;
    }
    bool operator==(const ObservationMask&) const = default;
};

/// Normalised (and masked) policy observation for one frame.
inline Vec policy_observation(const SensorFrame& f, const NormalizationStats& s, const ObservationMask& mask) {
    Vec x = normalize(observation(f), s, kChanObs);
    mask.apply(x);
    return x;
}

}  // namespace toolskill
