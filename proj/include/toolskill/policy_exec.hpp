#pragma once

// Receding-horizon execution: each frame the policy predicts T_n actions from
// the last T_p observations and only the first one is applied.

#include <algorithm>
#include <cstdint>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include "toolskill/common.hpp"
#include "toolskill/env_sim.hpp"
#include "toolskill/io.hpp"
#include "toolskill/primitive.hpp"
#include "toolskill/sensing.hpp"
#include "toolskill/seq2seq.hpp"
#include "toolskill/trajectory.hpp"

namespace toolskill {

struct RolloutConfig {
    EpisodeConfig episode{};
    PrimitiveParams warmup{};  // primitive controller used until a full window exists
    double velocity_limit = 2.0;  // cm/s, per axis
    ObservationMask observation_mask{};
    std::string label = "policy";
};

struct RolloutRecord {
    Trajectory trajectory;
    int warmup_frames = 0;
    // One entry per learned-policy frame, aligned with frames[warmup_frames + i].
    std::vector<Mat> horizons;  // T_n x 2, denormalised, before clamping
    std::vector<LatentState> latents;  // encoder (c, h) after the window
};

inline Action clamp_action(const Action& a, double limit) {
    return {std::clamp(a.u_x, -limit, limit), std::clamp(a.u_z, -limit, limit)};
}

/// Encodes the last T_p frames of `history` and returns the window batch.
inline WindowBatch policy_window(const std::vector<Frame>& history, const Seq2SeqDims& d,
                                 const NormalizationStats& stats, const ObservationMask& mask) {
    if (static_cast<int>(history.size()) < d.past_steps) throw InputError("policy_window: history shorter than T_p");
    WindowBatch b;
    b.past.reserve(static_cast<std::size_t>(d.past_steps));
    const std::size_t first = history.size() - static_cast<std::size_t>(d.past_steps);
    for (std::size_t i = first; i < history.size(); ++i)
        b.past.push_back(policy_observation(history[i].sensors, stats, mask));
    return b;
}

inline RolloutRecord rollout(const Seq2SeqParams& params, const NormalizationStats& stats,
                             const EnvironmentSpec& env, const ToolSpec& tool, std::uint64_t seed,
                             const RolloutConfig& cfg = {}) {
    const Seq2SeqDims& d = params.dims;
    if (d.obs != kObsDim || d.act != kActDim) throw InputError("rollout: model dims do not match the sensor layout");
    if (stats.channels() != kNormChannels) throw InputError("rollout: normalization stats have the wrong layout");
    if (!(cfg.velocity_limit > 0.0)) throw InputError("rollout: velocity_limit must be > 0");
    cfg.warmup.validate();
    const int frames = episode_frames(cfg.episode);

    RolloutRecord rec;
    rec.warmup_frames = std::min(d.past_steps, frames);
    const Controller warm = primitive_controller(cfg.warmup);
    ForwardOptions opt;  // eval mode, no dropout
    opt.actions_only = true;

    Controller policy = [&](const std::vector<Frame>& history, int index) -> Action {
        if (index < d.past_steps) return warm(history, index);
        // The window ends at the current frame; the first predicted action
        // (the next step's) is executed now.
        const WindowBatch w = policy_window(history, d, stats, cfg.observation_mask);
        const ForwardTrace tr = forward_batch(params, w, opt);
        Mat horizon(d.future_steps, d.act);
        for (int k = 0; k < d.future_steps; ++k)
            horizon.row(k) = denormalize(tr.action_preds[static_cast<std::size_t>(k)].col(0), stats, kChanAct).transpose();
        if (!horizon.allFinite()) {
            std::ostringstream msg;
            msg << "rollout: non-finite policy prediction at frame " << index;
            throw NumericError(msg.str());
        }
        const auto& last = tr.encoder_steps[static_cast<std::size_t>(d.past_steps - 1)];
        rec.latents.push_back({last.c.col(0), last.h.col(0)});
        rec.horizons.push_back(horizon);
        return clamp_action({horizon(0, 0), horizon(0, 1)}, cfg.velocity_limit);
    };
    rec.trajectory = run_episode(env, tool, seed, cfg.episode, policy, cfg.label);
    return rec;
}

/// JSON-Lines: one header line, then one line per frame with the predicted
/// horizon (empty during warm-up).
inline std::string rollout_to_jsonl(const RolloutRecord& r, const json& meta = json::object()) {
    std::string out;
    json head = trajectory_header(r.trajectory, 0);
    head["kind"] = "rollout";
    head["warmup_frames"] = r.warmup_frames;
    head["meta"] = meta;
    out += head.dump() + "\n";
    for (std::size_t i = 0; i < r.trajectory.frames.size(); ++i) {
        json f = frame_to_json(r.trajectory.frames[i], 0);
        json h = json::array();
        const int k = static_cast<int>(i) - r.warmup_frames;
        if (k >= 0 && k < static_cast<int>(r.horizons.size())) {
            const Mat& m = r.horizons[static_cast<std::size_t>(k)];
            for (Eigen::Index row = 0; row < m.rows(); ++row) h.push_back({m(row, 0), m(row, 1)});
        }
        f["horizon"] = h;
        out += f.dump() + "\n";
    }
    return out;
}

/// CSV of latent snapshots: frame, t, c_0..c_{H-1}, h_0..h_{H-1}.
inline std::string latents_to_csv(const RolloutRecord& r) {
    std::ostringstream out;
    out.precision(17);
    if (r.latents.empty()) return "frame,t\n";
    const Eigen::Index hd = r.latents.front().c.size();
    out << "frame,t";
    for (Eigen::Index i = 0; i < hd; ++i) out << ",c_" << i;
    for (Eigen::Index i = 0; i < hd; ++i) out << ",h_" << i;
    out << "\n";
    for (std::size_t k = 0; k < r.latents.size(); ++k) {
        const std::size_t frame = static_cast<std::size_t>(r.warmup_frames) + k;
        out << frame << "," << r.trajectory.frames[frame].sensors.t;
        for (Eigen::Index i = 0; i < hd; ++i) out << "," << r.latents[k].c[i];
        for (Eigen::Index i = 0; i < hd; ++i) out << "," << r.latents[k].h[i];
        out << "\n";
    }
    return out.str();
}

inline RolloutRecord rollout_from_jsonl(const std::string& text, const std::string& where = "rollout") {
    RolloutRecord r;
    std::istringstream in(text);
    std::string line;
    std::size_t lineno = 0;
    try {
        while (std::getline(in, line)) {
            ++lineno;
            if (line.empty()) continue;
            const json j = json::parse(line);
            const std::string kind = j.at("kind").get<std::string>();
            if (kind == "rollout") {
                r.trajectory.meta.label = j.at("label").get<std::string>();
                r.trajectory.meta.seed = j.at("seed").get<std::uint64_t>();
                r.trajectory.meta.grasp_shift = j.at("grasp_shift").get<double>();
                r.trajectory.meta.env = environment_from_json(j.at("env"));
                r.trajectory.meta.tool = tool_from_json(j.at("tool"));
                r.warmup_frames = j.at("warmup_frames").get<int>();
            } else if (kind == "frame") {
                r.trajectory.frames.push_back(frame_from_json(j));
                const json& h = j.at("horizon");
                if (!h.empty()) {
                    Mat m(static_cast<Eigen::Index>(h.size()), kActDim);
                    for (std::size_t k = 0; k < h.size(); ++k) {
                        m(static_cast<Eigen::Index>(k), 0) = h[k].at(0).get<double>();
                        m(static_cast<Eigen::Index>(k), 1) = h[k].at(1).get<double>();
                    }
                    r.horizons.push_back(std::move(m));
                }
            } else {
                throw InputError("unknown record kind '" + kind + "'");
            }
        }
    } catch (const json::exception& e) {
        throw InputError(where + ": line " + std::to_string(lineno) + ": " + e.what());
    }
    if (r.trajectory.frames.empty()) throw InputError(where + ": no frames");
    return r;
}

}  // namespace toolskill
