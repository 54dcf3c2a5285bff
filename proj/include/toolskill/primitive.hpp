#pragma once

// Scripted surface-following primitive: constant lateral velocity, lift on a
// wall hit, descend when out of contact, admittance force tracking otherwise.
// The same controller, with task-specific parameters, serves as the
// demonstration oracle.

#include <cmath>
#include <cstdint>
#include <functional>
#include <random>
#include <sstream>
#include <string>
#include <vector>

#include "toolskill/common.hpp"
#include "toolskill/env_sim.hpp"
#include "toolskill/sensing.hpp"
#include "toolskill/trajectory.hpp"

namespace toolskill {

struct PrimitiveParams {
    double v_ref = 0.3;         // cm/s
    double v_up = 0.5;          // cm/s
    double v_down = -0.5;       // cm/s
    double force_threshold = 0.5;  // N, wall detection on f_x
    double target_force = 0.3;  // N
    double k_adm = 0.1;         // (cm/s)/N

    void validate() const {
        if (!(v_ref > 0.0 && v_up > 0.0 && v_down < 0.0 && force_threshold > 0.0 && target_force > 0.0 &&
              k_adm > 0.0))
            throw InputError("primitive params: require v_ref, v_up, F_th, F_d, k_adm > 0 and v_down < 0");
    }
};

enum class PrimitiveBranch { HitWall, OutOfContact, InContact };

inline PrimitiveBranch primitive_branch(double f_x, double f_z, const PrimitiveParams& p) {
    if (f_x > p.force_threshold) return PrimitiveBranch::HitWall;
    if (f_z <= 0.0) return PrimitiveBranch::OutOfContact;
    return PrimitiveBranch::InContact;
}

inline Action primitive_action(double f_x, double f_z, const PrimitiveParams& p) {
    if (!std::isfinite(f_x) || !std::isfinite(f_z)) throw InputError("primitive_action: non-finite force");
    Action a;
    a.u_x = p.v_ref;
    switch (primitive_branch(f_x, f_z, p)) {
        case PrimitiveBranch::HitWall: a.u_z = p.v_up; break;
        case PrimitiveBranch::OutOfContact: a.u_z = p.v_down; break;
        // z points up and f_z is compressive, so excess force must retract
        // the end-effector for the loop to settle at the target.
        case PrimitiveBranch::InContact: a.u_z = p.k_adm * (f_z - p.target_force); break;
    }
    return a;
}

struct EpisodeConfig {
    double duration = 10.0;  // s
    SensorConfig sensors;
    SimConfig sim;
};

inline int episode_frames(const EpisodeConfig& cfg) {
    const double n = cfg.duration / kDt;
    const long r = std::lround(n);
    if (r < 1 || std::abs(n - static_cast<double>(r)) > 1e-9)
        throw InputError("episode duration must be a positive multiple of dt");
    return static_cast<int>(r);
}

/// Decides the action for frame `index` given every frame sensed so far
/// (the last element is the current frame, its action not yet set).
using Controller = std::function<Action(const std::vector<Frame>& history, int index)>;

/// Sense, act and step for the configured duration.
inline Trajectory run_episode(const EnvironmentSpec& env, const ToolSpec& tool, std::uint64_t seed,
                              const EpisodeConfig& cfg, const Controller& controller,
                              const std::string& label) {
    const int n = episode_frames(cfg);
    WorldState state = reset_world(env, tool, mix_seed(seed, 0), cfg.sim);
    ContactWrench wrench = contact_wrench(state, env, tool, cfg.sim);
    Trajectory tr;
    tr.meta = {label, env, tool, seed, state.grasp_shift};
    tr.frames.reserve(static_cast<std::size_t>(n));
    for (int i = 0; i < n; ++i) {
        Frame f;
        f.sensors.t = state.t;
        f.sensors.ee_x = state.ee_x;
        f.sensors.ee_z = state.ee_z;
        f.sensors.tip_x = state.tip_x;
        f.sensors.wrench = wrench;
        const auto i64 = static_cast<std::uint64_t>(i);
        const TactileArray arr = simulate_tactile(state, tool, wrench, cfg.sensors, mix_seed(seed, 2 * i64 + 1));
        f.sensors.tactile_raw = arr.data;
        f.sensors.tactile_feature = preprocess_tactile(arr).values;
        f.sensors.proximity = simulate_proximity(state, env, cfg.sensors, mix_seed(seed, 2 * i64 + 2)).distance;
        tr.frames.push_back(f);
        const Action a = controller(tr.frames, i);
        if (!std::isfinite(a.u_x) || !std::isfinite(a.u_z)) {
            std::ostringstream msg;
            msg << "episode '" << label << "' diverged: non-finite action at frame " << i;
            throw NumericError(msg.str());
        }
        tr.frames.back().action = a;
        StepResult next = step_world(state, env, tool, a, kDt, cfg.sim);
        if (!std::isfinite(next.state.ee_z) || !std::isfinite(next.wrench.f_z)) {
            std::ostringstream msg;
            msg << "episode '" << label << "' diverged: non-finite state at frame " << i;
            throw NumericError(msg.str());
        }
        state = std::move(next.state);
        wrench = next.wrench;
    }
    return tr;
}

inline Controller primitive_controller(const PrimitiveParams& p) {
    return [p](const std::vector<Frame>& history, int) {
        const ContactWrench& w = history.back().sensors.wrench;
        return primitive_action(w.f_x, w.f_z, p);
    };
}

struct CollectConfig {
    int inclined_count = 11;
    int step_count = 10;
    double inclination_min = -0.3;
    double inclination_max = 0.3;
    double step_height_min = 0.5;
    double step_height_max = 5.0;
    EnvironmentSpec inclined_template{};
    EnvironmentSpec step_template = [] {
        EnvironmentSpec e;
        e.kind = SurfaceKind::Step;
        return e;
    }();
    ToolSpec tool{};
    PrimitiveParams controller{};
    EpisodeConfig episode{};
    std::uint64_t seed = 0;
};

/// Environments of the primitive corpus, sampled deterministically from the seed.
inline std::vector<EnvironmentSpec> sample_primitive_envs(const CollectConfig& cfg) {
    if (cfg.inclined_count < 1 || cfg.step_count < 1)
        throw InputError("collect: trajectory counts must be >= 1");
    std::mt19937_64 rng(mix_seed(cfg.seed, 0xE17));
    std::uniform_real_distribution<double> psi(cfg.inclination_min, cfg.inclination_max);
    std::uniform_real_distribution<double> height(cfg.step_height_min, cfg.step_height_max);
    std::vector<EnvironmentSpec> envs;
    for (int i = 0; i < cfg.inclined_count; ++i) {
        EnvironmentSpec e = cfg.inclined_template;
        e.kind = SurfaceKind::Inclined;
        e.inclination = psi(rng);
        envs.push_back(e);
    }
    for (int i = 0; i < cfg.step_count; ++i) {
        EnvironmentSpec e = cfg.step_template;
        e.kind = SurfaceKind::Step;
        e.step_height = height(rng);
        envs.push_back(e);
    }
    return envs;
}

inline Dataset collect_primitive_dataset(const CollectConfig& cfg) {
    cfg.controller.validate();
    Dataset d;
    const auto envs = sample_primitive_envs(cfg);
    const Controller ctl = primitive_controller(cfg.controller);
    for (std::size_t i = 0; i < envs.size(); ++i)
        d.trajectories.push_back(run_episode(envs[i], cfg.tool, mix_seed(cfg.seed, 100 + i), cfg.episode, ctl,
                                             "primitive"));
    return d;
}

/// Scripted stand-in for a human demonstration of a downstream task.
inline Trajectory demo_oracle(const EnvironmentSpec& env, const ToolSpec& tool, double target_force,
                              std::uint64_t seed, PrimitiveParams params = {},
                              const EpisodeConfig& episode = {}) {
    if (!(target_force > 0.0)) throw InputError("demo_oracle: target force must be > 0");
    params.target_force = target_force;
    params.validate();
    return run_episode(env, tool, seed, episode, primitive_controller(params), "demo");
}

}  // namespace toolskill
