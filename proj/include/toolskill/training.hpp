#pragma once

// Sliding-window datasets and the SGD loops for pre-training (all groups),
// fine-tuning (decoder head only) and the demonstration-only baseline.

#include <algorithm>
#include <cstdint>
#include <functional>
#include <numeric>
#include <random>
#include <sstream>
#include <string>
#include <vector>

#include "toolskill/common.hpp"
#include "toolskill/sensing.hpp"
#include "toolskill/seq2seq.hpp"
#include "toolskill/trajectory.hpp"

namespace toolskill {

struct WindowSet {
    std::vector<WindowSample> samples;
    std::vector<std::string> warnings;
};

/// One window per start index (every `stride`-th). Observations and actions
/// are normalised with `stats`; masked observation channels are zeroed in
/// both inputs and state targets.
inline WindowSet window_dataset(const Dataset& d, const NormalizationStats& stats, int past_steps,
                                int future_steps, const ObservationMask& mask = {}, int stride = 1) {
    if (past_steps < 1 || future_steps < 1) throw InputError("window_dataset: T_p and T_n must be >= 1");
    if (stride < 1) throw InputError("window_dataset: stride must be >= 1");
    WindowSet out;
    for (std::size_t ti = 0; ti < d.trajectories.size(); ++ti) {
        const auto& frames = d.trajectories[ti].frames;
        const int len = static_cast<int>(frames.size());
        if (len < past_steps + future_steps) {
            std::ostringstream w;
            w << "trajectory " << ti << " has " << len << " frames, fewer than T_p + T_n = "
              << past_steps + future_steps << "; skipped";
            out.warnings.push_back(w.str());
            continue;
        }
        Mat obs(len, kObsDim), act(len, kActDim);
        for (int i = 0; i < len; ++i) {
            const auto& f = frames[static_cast<std::size_t>(i)];
            obs.row(i) = policy_observation(f.sensors, stats, mask).transpose();
            Vec a(kActDim);
            a << f.action.u_x, f.action.u_z;
            act.row(i) = normalize(a, stats, kChanAct).transpose();
        }
        for (int t = past_steps; t + future_steps <= len; t += stride) {
            WindowSample w;
            w.past = obs.middleRows(t - past_steps, past_steps);
            w.future_states = obs.middleRows(t, future_steps);
            w.future_actions = act.middleRows(t, future_steps);
            out.samples.push_back(std::move(w));
        }
    }
    return out;
}

struct TrainConfig {
    int epochs = 2000;
    double lr = 0.001;
    double beta = 0.1;
    double dropout = 0.2;
    int batch_size = 32;
    // Each epoch visits every window_stride-th window, with the offset
    // rotating by one per epoch, so stride epochs cover the full set once.
    int window_stride = 1;
    std::uint64_t seed = 0;
    GroupMask mask = GroupMask::all();
    Seq2SeqDims dims{};
    ObservationMask observation_mask{};

    void validate() const {
        if (epochs <= 0) throw InputError("train config: epochs must be > 0");
        if (!(lr > 0.0)) throw InputError("train config: lr must be > 0");
        if (!(beta >= 0.0)) throw InputError("train config: beta must be >= 0");
        if (!(dropout >= 0.0 && dropout < 1.0)) throw InputError("train config: dropout must lie in [0, 1)");
        if (batch_size < 1) throw InputError("train config: batch_size must be >= 1");
        if (window_stride < 1) throw InputError("train config: window_stride must be >= 1");
        if (!mask.any()) throw InputError("train config: mask selects no parameter group");
    }

    /// Pre-training defaults: 2000 epochs at lr 0.001, all groups.
    static TrainConfig pretraining() { return {}; }
    /// Fine-tuning defaults: 300 epochs at lr 0.005, decoder head only.
    static TrainConfig finetuning() {
        TrainConfig c;
        c.epochs = 300;
        c.lr = 0.005;
        c.mask = GroupMask::decoder_head_only();
        return c;
    }
};

struct TrainResult {
    Seq2SeqParams params;
    std::vector<double> loss_curve;  // mean training loss per epoch
};

/// Called after every epoch with (epoch index, mean loss).
using EpochCallback = std::function<void(int, double)>;

/// Mini-batch SGD over shuffled windows.
inline TrainResult train(Seq2SeqParams params, std::span<const WindowSample> windows, const TrainConfig& cfg,
                         const EpochCallback& on_epoch = {}) {
    cfg.validate();
    if (windows.empty()) throw InputError("train: no training windows");
    if (!(params.dims == cfg.dims)) throw InputError("train: parameter dims differ from config dims");
    TrainResult r;
    r.loss_curve.reserve(static_cast<std::size_t>(cfg.epochs));
    const auto stride = static_cast<std::size_t>(cfg.window_stride);
    std::vector<std::size_t> order;
    std::vector<WindowSample> chunk;
    for (int e = 0; e < cfg.epochs; ++e) {
        order.clear();
        for (std::size_t k = static_cast<std::size_t>(e) % stride; k < windows.size(); k += stride) order.push_back(k);
        if (order.empty()) order.push_back(static_cast<std::size_t>(e) % windows.size());
        std::mt19937_64 rng(mix_seed(cfg.seed, static_cast<std::uint64_t>(e)));
        std::shuffle(order.begin(), order.end(), rng);
        double weighted = 0.0;
        std::size_t b_index = 0;
        for (std::size_t start = 0; start < order.size(); start += static_cast<std::size_t>(cfg.batch_size), ++b_index) {
            const std::size_t end = std::min(order.size(), start + static_cast<std::size_t>(cfg.batch_size));
            chunk.clear();
            for (std::size_t i = start; i < end; ++i) chunk.push_back(windows[order[i]]);
            const WindowBatch batch = make_batch(chunk, params.dims);
            ForwardOptions opt;
            opt.mode = Mode::Train;
            opt.dropout = cfg.dropout;
            opt.seed = mix_seed(mix_seed(cfg.seed ^ 0xD509ULL, static_cast<std::uint64_t>(e)), b_index);
            const ForwardTrace tr = forward_batch(params, batch, opt);
            const double l = batch_loss(tr, batch, cfg.beta);
            if (!std::isfinite(l)) {
                std::ostringstream msg;
                msg << "non-finite training loss at epoch " << e + 1 << " (batch " << b_index << ")";
                throw NumericError(msg.str());
            }
            weighted += l * static_cast<double>(end - start);
            const Seq2SeqParams g = backward_batch(params, batch, tr, cfg.beta, cfg.mask);
            sgd_step(params, g, cfg.lr, cfg.mask);
        }
        const double mean = weighted / static_cast<double>(order.size());
        r.loss_curve.push_back(mean);
        if (on_epoch) on_epoch(e, mean);
    }
    if (!params_finite(params)) throw NumericError("train: parameters became non-finite");
    r.params = std::move(params);
    return r;
}

/// Base policy from primitive data, starting from a seeded random init.
inline TrainResult pretrain(const Dataset& d, const NormalizationStats& stats, const TrainConfig& cfg,
                            const EpochCallback& on_epoch = {}) {
    if (!cfg.mask.is_all()) throw InputError("pretrain: mask must select all parameter groups");
    const WindowSet w =
        window_dataset(d, stats, cfg.dims.past_steps, cfg.dims.future_steps, cfg.observation_mask);
    return train(init_params(cfg.dims, cfg.seed), w.samples, cfg, on_epoch);
}

/// Adapts a base policy on demonstrations, normally touching only the decoder head.
inline TrainResult finetune(const Seq2SeqParams& base, const Dataset& demos, const NormalizationStats& stats,
                            const TrainConfig& cfg, const EpochCallback& on_epoch = {}) {
    const WindowSet w =
        window_dataset(demos, stats, cfg.dims.past_steps, cfg.dims.future_steps, cfg.observation_mask);
    return train(base, w.samples, cfg, on_epoch);
}

/// Behaviour-cloning baseline: same network, random init, demonstrations only.
inline TrainResult train_demo_only(const Dataset& demos, const NormalizationStats& stats, const TrainConfig& cfg,
                                   const EpochCallback& on_epoch = {}) {
    return pretrain(demos, stats, cfg, on_epoch);
}

/// Mean loss over windows without dropout.
inline double evaluate_loss(const Seq2SeqParams& p, std::span<const WindowSample> windows, double beta,
                            int chunk_size = 256) {
    if (windows.empty()) throw InputError("evaluate_loss: no windows");
    double total = 0.0;
    for (std::size_t start = 0; start < windows.size(); start += static_cast<std::size_t>(chunk_size)) {
        const std::size_t n = std::min(windows.size() - start, static_cast<std::size_t>(chunk_size));
        const WindowBatch batch = make_batch(windows.subspan(start, n), p.dims);
        const ForwardTrace tr = forward_batch(p, batch, {});
        total += batch_loss(tr, batch, beta) * static_cast<double>(n);
    }
    return total / static_cast<double>(windows.size());
}

}  // namespace toolskill
