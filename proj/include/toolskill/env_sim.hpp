#pragma once

// Quasi-static 2D (x-z) contact world: an end-effector holding a tool with a
// rigid handle and a linear-spring tip above a heightfield. Units: cm, N, rad, s.

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <limits>
#include <random>
#include <string>
#include <vector>

#include "toolskill/common.hpp"

namespace toolskill {

enum class SurfaceKind { Inclined, Step, Stairs, Deforming };

inline const char* to_string(SurfaceKind k) {
    switch (k) {
        case SurfaceKind::Inclined: return "inclined";
        case SurfaceKind::Step: return "step";
        case SurfaceKind::Stairs: return "stairs";
        case SurfaceKind::Deforming: return "deforming";
    }
    return "?";
}

inline SurfaceKind surface_kind_from_string(const std::string& s) {
    if (s == "inclined") return SurfaceKind::Inclined;
    if (s == "step") return SurfaceKind::Step;
    if (s == "stairs") return SurfaceKind::Stairs;
    if (s == "deforming") return SurfaceKind::Deforming;
    throw ConfigError("unknown surface kind '" + s + "'");
}

struct EnvironmentSpec {
    SurfaceKind kind = SurfaceKind::Inclined;
    double inclination = 0.0;  // rad; Inclined, and base plane of Deforming
    double step_height = 2.0;  // cm
    double step_x = 1.0;       // cm, location of the step face
    int stair_count = 3;
    double stair_rise = 0.5;   // cm
    double stair_run = 1.0;    // cm
    double deform_drop = 0.02; // cm per completed contact pass
    double extent_x = 10.0;    // cm
    double start_x = 0.2;      // cm, end-effector x at reset
    double start_gap = 0.9;    // cm, tip clearance above the surface at reset
    double memory_cell = 0.1;  // cm, resolution of the per-cell contact record
    double wipe_length = 3.0;  // cm from start_x scored by the wiped-area metric

    void validate() const {
        if (!(extent_x > 0.0)) throw InputError("environment: extent_x must be > 0");
        if (kind == SurfaceKind::Inclined || kind == SurfaceKind::Deforming) {
            if (!(inclination >= -0.3 && inclination <= 0.3))
                throw InputError("environment: inclination must lie in [-0.3, 0.3] rad");
        }
        if (kind == SurfaceKind::Step) {
            if (!(step_height >= 0.5 && step_height <= 5.0))
                throw InputError("environment: step_height must lie in [0.5, 5.0] cm");
            if (!(step_x > 0.0 && step_x < extent_x))
                throw InputError("environment: step_x must lie inside the surface");
        }
        if (kind == SurfaceKind::Stairs) {
            if (!(stair_rise > 0.0)) throw InputError("environment: stair_rise must be > 0");
            if (!(stair_run > 0.0)) throw InputError("environment: stair_run must be > 0");
            if (stair_count < 1) throw InputError("environment: stair_count must be >= 1");
        }
        if (kind == SurfaceKind::Deforming && !(deform_drop >= 0.0))
            throw InputError("environment: deform_drop must be >= 0");
        if (!(start_x >= 0.0 && start_x <= extent_x))
            throw InputError("environment: start_x must lie inside the surface");
        if (!(start_gap >= 0.0)) throw InputError("environment: start_gap must be >= 0");
        if (!(memory_cell > 0.0)) throw InputError("environment: memory_cell must be > 0");
        if (!(wipe_length > 0.0)) throw InputError("environment: wipe_length must be > 0");
    }
};

struct ToolSpec {
    std::string name = "brush";
    double handle_length = 3.0;    // cm
    double tip_stiffness = 30.0;   // N/cm
    double tip_rest_length = 1.0;  // cm
    double tip_width = 0.5;        // cm
    double friction_mu = 0.3;

    void validate() const {
        if (!(handle_length > 0.0 && tip_rest_length > 0.0 && tip_width > 0.0))
            throw InputError("tool: lengths must be > 0");
        if (!(tip_stiffness > 0.0)) throw InputError("tool: tip_stiffness must be > 0");
        if (!(friction_mu >= 0.0 && friction_mu <= 2.0))
            throw InputError("tool: friction_mu must lie in [0, 2]");
    }

    /// Tool used to generate the pre-training corpus.
    static ToolSpec pretraining_brush() { return {}; }
    /// Longer handle (5 cm) and softer tip (stiffness 10).
    static ToolSpec long_soft_brush() {
        ToolSpec t;
        t.name = "long_soft_brush";
        t.handle_length = 5.0;
        t.tip_stiffness = 10.0;
        return t;
    }
};

struct SimConfig {
    double force_max = 5.0;      // N, saturation of both wrench components
    double grasp_shift_std = 1.0;  // cm
};

struct WorldState {
    double ee_x = 0.0;
    double ee_z = 0.0;
    double grasp_shift = 0.0;  // cm, + moves the grasp away from the tip
    double tip_x = 0.0;        // x of the tip centre (lags ee_x when blocked by a wall)
    double tip_compression = 0.0;
    double t = 0.0;
    // Per-cell contact record over [0, extent_x].
    std::vector<int> contact_passes;
    std::vector<std::uint8_t> in_contact;
};

struct ContactWrench {
    double f_x = 0.0;  // tangential resistance, positive against +x motion
    double f_z = 0.0;  // normal, >= 0
};

struct Action {
    double u_x = 0.0;  // cm/s
    double u_z = 0.0;  // cm/s
};

/// Distance from the grasp point to the tip base.
inline double lever_arm(const ToolSpec& tool, const WorldState& s) {
    return tool.handle_length + s.grasp_shift;
}

/// z of the undeformed tip bottom.
inline double tip_rest_bottom(const ToolSpec& tool, const WorldState& s) {
    return s.ee_z - lever_arm(tool, s) - tool.tip_rest_length;
}

namespace detail {

inline double base_height(const EnvironmentSpec& env, double x) {
    switch (env.kind) {
        case SurfaceKind::Inclined:
        case SurfaceKind::Deforming: return x * std::tan(env.inclination);
        case SurfaceKind::Step: return x >= env.step_x ? env.step_height : 0.0;
        case SurfaceKind::Stairs: {
            const double n = std::floor(x / env.stair_run);
            return env.stair_rise * std::min(n, static_cast<double>(env.stair_count));
        }
    }
    return 0.0;
}

inline int memory_cells(const EnvironmentSpec& env) {
    return static_cast<int>(std::ceil(env.extent_x / env.memory_cell));
}

inline int memory_index(const EnvironmentSpec& env, double x) {
    const int n = memory_cells(env);
    return std::clamp(static_cast<int>(std::floor(x / env.memory_cell)), 0, n - 1);
}

/// Rising faces of the heightfield as (x, height just right of the face).
inline std::vector<std::pair<double, double>> rising_faces(const EnvironmentSpec& env) {
    std::vector<std::pair<double, double>> out;
    if (env.kind == SurfaceKind::Step) {
        out.emplace_back(env.step_x, env.step_height);
    } else if (env.kind == SurfaceKind::Stairs) {
        for (int i = 1; i <= env.stair_count; ++i) {
            const double x = env.stair_run * i;
            if (x < env.extent_x) out.emplace_back(x, env.stair_rise * i);
        }
    }
    return out;
}

}  // namespace detail

inline bool in_extent(const EnvironmentSpec& env, double x) { return x >= 0.0 && x <= env.extent_x; }

/// Heightfield value at x, including deformation recorded in `state`.
inline double surface_height(const EnvironmentSpec& env, double x, const WorldState& state) {
    if (!(x >= 0.0 && x <= env.extent_x))
        throw DomainError("surface_height: x=" + std::to_string(x) + " outside [0, extent_x]");
    double h = detail::base_height(env, x);
    if (env.kind == SurfaceKind::Deforming && !state.contact_passes.empty())
        h -= env.deform_drop * state.contact_passes[static_cast<std::size_t>(detail::memory_index(env, x))];
    return h;
}

inline WorldState reset_world(const EnvironmentSpec& env, const ToolSpec& tool, std::uint64_t seed,
                              const SimConfig& cfg = {}) {
    env.validate();
    tool.validate();
    WorldState s;
    std::mt19937_64 rng(seed);
    std::normal_distribution<double> shift(0.0, cfg.grasp_shift_std);
    const double half = tool.handle_length / 2.0;
    s.grasp_shift = std::clamp(shift(rng), -half, half);
    const int cells = detail::memory_cells(env);
    s.contact_passes.assign(static_cast<std::size_t>(cells), 0);
    s.in_contact.assign(static_cast<std::size_t>(cells), 0);
    s.ee_x = env.start_x;
    s.tip_x = env.start_x;
    const double ground = surface_height(env, env.start_x, s);
    s.ee_z = ground + env.start_gap + lever_arm(tool, s) + tool.tip_rest_length;
    return s;
}

struct StepResult {
    WorldState state;
    ContactWrench wrench;
};

inline StepResult step_world(const WorldState& state, const EnvironmentSpec& env, const ToolSpec& tool,
                             const Action& action, double dt = kDt, const SimConfig& cfg = {}) {
    if (!std::isfinite(action.u_x) || !std::isfinite(action.u_z))
        throw InputError("step_world: non-finite velocity command");
    if (!(dt > 0.0)) throw InputError("step_world: dt must be > 0");

    StepResult r{state, {}};
    WorldState& s = r.state;
    s.ee_x += action.u_x * dt;
    s.ee_z += action.u_z * dt;
    s.t += dt;

    const double half_w = tool.tip_width / 2.0;
    const double z_rest = tip_rest_bottom(tool, s);

    // The tip stays behind a rising face while its bottom is below the face top.
    double overlap = 0.0;
    s.tip_x = s.ee_x;
    for (const auto& [face_x, face_top] : detail::rising_faces(env)) {
        const bool was_behind = state.tip_x + half_w <= face_x + 1e-12;
        if (was_behind && s.ee_x + half_w > face_x && z_rest < face_top) {
            s.tip_x = face_x - half_w;
            overlap = s.ee_x + half_w - face_x;
            break;
        }
    }

    // Off the end of the surface there is nothing to touch.
    const bool over = s.tip_x >= 0.0 && s.tip_x <= env.extent_x;
    const double pen = over ? std::max(0.0, surface_height(env, s.tip_x, state) - z_rest) : 0.0;
    s.tip_compression = pen;
    r.wrench.f_z = std::min(tool.tip_stiffness * pen, cfg.force_max);
    r.wrench.f_x = std::min(tool.friction_mu * r.wrench.f_z + tool.tip_stiffness * overlap, cfg.force_max);

    // Contact record: a pass over a cell completes when the tip leaves it.
    if (!s.in_contact.empty()) {
        const int lo = detail::memory_index(env, std::max(0.0, s.tip_x - half_w));
        const int hi = detail::memory_index(env, std::min(env.extent_x, s.tip_x + half_w));
        for (std::size_t i = 0; i < s.in_contact.size(); ++i) {
            const int ii = static_cast<int>(i);
            const bool now = pen > 0.0 && ii >= lo && ii <= hi;
            if (s.in_contact[i] && !now) ++s.contact_passes[i];
            s.in_contact[i] = now ? 1 : 0;
        }
    }
    return r;
}

/// Wrench for the current state without advancing time.
inline ContactWrench contact_wrench(const WorldState& state, const EnvironmentSpec& env,
                                    const ToolSpec& tool, const SimConfig& cfg = {}) {
    const double z_rest = tip_rest_bottom(tool, state);
    const bool over = state.tip_x >= 0.0 && state.tip_x <= env.extent_x;
    const double pen = over ? std::max(0.0, surface_height(env, state.tip_x, state) - z_rest) : 0.0;
    ContactWrench w;
    w.f_z = std::min(tool.tip_stiffness * pen, cfg.force_max);
    double overlap = std::max(0.0, state.ee_x - state.tip_x);
    w.f_x = std::min(tool.friction_mu * w.f_z + tool.tip_stiffness * overlap, cfg.force_max);
    return w;
}

}  // namespace toolskill
