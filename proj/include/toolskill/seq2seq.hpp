#pragma once

// Encoder-decoder LSTM policy with exact backpropagation through time.
//
// Encoder: consumes T_p past observations, then runs T_n further steps
// feeding back its own state predictions (emitted through the encoder head).
// Decoder: starts from the encoder state at the end of the observation
// window, consumes a zero start token and then its own previous action
// prediction, emitting one action per step through the decoder head.
// Dropout (inverted) is applied to the inputs of both heads in train mode.

#include <array>
#include <cstdint>
#include <random>
#include <span>
#include <string>
#include <vector>

#include "toolskill/common.hpp"

namespace toolskill {

struct Seq2SeqDims {
    int past_steps = 20;
    int future_steps = 10;
    int hidden = 100;
    int obs = kObsDim;
    int act = kActDim;

    bool operator==(const Seq2SeqDims&) const = default;
};

/// Gate blocks are stacked in the order input, forget, cell, output.
struct LstmWeights {
    Mat input_weights;      // 4H x I
    Mat recurrent_weights;  // 4H x H
    Vec bias;               // 4H
};

struct DenseWeights {
    Mat weights;  // O x H
    Vec bias;     // O
};

enum class ParamGroup { Encoder = 0, EncoderHead = 1, Decoder = 2, DecoderHead = 3 };

inline constexpr std::array<ParamGroup, 4> kAllGroups{
    ParamGroup::Encoder, ParamGroup::EncoderHead, ParamGroup::Decoder, ParamGroup::DecoderHead};

inline const char* group_name(ParamGroup g) {
    switch (g) {
        case ParamGroup::Encoder: return "encoder";
        case ParamGroup::EncoderHead: return "encoder_head";
        case ParamGroup::Decoder: return "decoder";
        case ParamGroup::DecoderHead: return "decoder_head";
    }
    return "?";
}

/// Selects which parameter groups receive gradients and updates.
struct GroupMask {
    std::array<bool, 4> on{true, true, true, true};

    static GroupMask all() { return {}; }
    static GroupMask none() { return {{false, false, false, false}}; }
    static GroupMask only(ParamGroup g) {
        GroupMask m = none();
        m.on[static_cast<int>(g)] = true;
        return m;
    }
    static GroupMask decoder_head_only() { return only(ParamGroup::DecoderHead); }

    bool operator[](ParamGroup g) const { return on[static_cast<int>(g)]; }
    bool any() const { return on[0] || on[1] || on[2] || on[3]; }
    bool is_all() const { return on[0] && on[1] && on[2] && on[3]; }
    bool is_decoder_head_only() const { return !on[0] && !on[1] && !on[2] && on[3]; }
    bool operator==(const GroupMask&) const = default;
};

struct Seq2SeqParams {
    Seq2SeqDims dims;
    LstmWeights encoder;
    DenseWeights encoder_head;
    LstmWeights decoder;
    DenseWeights decoder_head;

    /// Zero-valued parameters with the shapes implied by `d`.
    static Seq2SeqParams zeros(const Seq2SeqDims& d) {
        Seq2SeqParams p;
        p.dims = d;
        const int h4 = 4 * d.hidden;
        p.encoder = {Mat::Zero(h4, d.obs), Mat::Zero(h4, d.hidden), Vec::Zero(h4)};
        p.encoder_head = {Mat::Zero(d.obs, d.hidden), Vec::Zero(d.obs)};
        p.decoder = {Mat::Zero(h4, d.act), Mat::Zero(h4, d.hidden), Vec::Zero(h4)};
        p.decoder_head = {Mat::Zero(d.act, d.hidden), Vec::Zero(d.act)};
        return p;
    }
};

/// Visits every tensor of `p` as (group, tensor). Works for const and non-const.
template <class P, class F>
void for_each_tensor(P& p, F&& f) {
    f(ParamGroup::Encoder, p.encoder.input_weights);
    f(ParamGroup::Encoder, p.encoder.recurrent_weights);
    f(ParamGroup::Encoder, p.encoder.bias);
    f(ParamGroup::EncoderHead, p.encoder_head.weights);
    f(ParamGroup::EncoderHead, p.encoder_head.bias);
    f(ParamGroup::Decoder, p.decoder.input_weights);
    f(ParamGroup::Decoder, p.decoder.recurrent_weights);
    f(ParamGroup::Decoder, p.decoder.bias);
    f(ParamGroup::DecoderHead, p.decoder_head.weights);
    f(ParamGroup::DecoderHead, p.decoder_head.bias);
}

inline std::size_t group_size(const Seq2SeqParams& p, ParamGroup g) {
    std::size_t n = 0;
    for_each_tensor(p, [&](ParamGroup tg, const auto& t) {
        if (tg == g) n += static_cast<std::size_t>(t.size());
    });
    return n;
}

inline std::size_t param_count(const Seq2SeqParams& p) {
    std::size_t n = 0;
    for_each_tensor(p, [&](ParamGroup, const auto& t) { n += static_cast<std::size_t>(t.size()); });
    return n;
}

inline bool params_finite(const Seq2SeqParams& p) {
    bool ok = true;
    for_each_tensor(p, [&](ParamGroup, const auto& t) { ok = ok && t.allFinite(); });
    return ok;
}

/// Uniform in [-1/sqrt(fan_in), 1/sqrt(fan_in)], forget-gate bias 1.
inline Seq2SeqParams init_params(const Seq2SeqDims& d, std::uint64_t seed) {
    if (d.past_steps < 1 || d.future_steps < 1 || d.hidden < 1 || d.obs < 1 || d.act < 1)
        throw InputError("init_params: all dimensions must be positive");
    Seq2SeqParams p = Seq2SeqParams::zeros(d);
    std::mt19937_64 rng(seed);
    auto fill = [&rng](auto& t, int fan_in) {
        const double bound = 1.0 / std::sqrt(static_cast<double>(fan_in));
        std::uniform_real_distribution<double> u(-bound, bound);
        for (Eigen::Index i = 0; i < t.size(); ++i) t.data()[i] = u(rng);
    };
    // LSTM fan-in is the hidden size, matching the usual recurrent convention.
    fill(p.encoder.input_weights, d.hidden);
    fill(p.encoder.recurrent_weights, d.hidden);
    fill(p.encoder.bias, d.hidden);
    fill(p.encoder_head.weights, d.hidden);
    fill(p.encoder_head.bias, d.hidden);
    fill(p.decoder.input_weights, d.hidden);
    fill(p.decoder.recurrent_weights, d.hidden);
    fill(p.decoder.bias, d.hidden);
    fill(p.decoder_head.weights, d.hidden);
    fill(p.decoder_head.bias, d.hidden);
    p.encoder.bias.segment(d.hidden, d.hidden).setOnes();
    p.decoder.bias.segment(d.hidden, d.hidden).setOnes();
    return p;
}

/// One training example cut from a trajectory. Rows index time.
struct WindowSample {
    Mat past;            // T_p x obs
    Mat future_states;   // T_n x obs
    Mat future_actions;  // T_n x act
};

/// Samples regrouped time-major, one obs x B matrix per step.
struct WindowBatch {
    std::vector<Mat> past;
    std::vector<Mat> future_states;
    std::vector<Mat> future_actions;

    int size() const { return past.empty() ? 0 : static_cast<int>(past.front().cols()); }
};

inline WindowBatch make_batch(std::span<const WindowSample> samples, const Seq2SeqDims& d) {
    if (samples.empty()) throw InputError("make_batch: empty batch");
    const auto b = static_cast<Eigen::Index>(samples.size());
    WindowBatch out;
    out.past.assign(d.past_steps, Mat(d.obs, b));
    out.future_states.assign(d.future_steps, Mat(d.obs, b));
    out.future_actions.assign(d.future_steps, Mat(d.act, b));
    for (Eigen::Index j = 0; j < b; ++j) {
        const WindowSample& s = samples[static_cast<std::size_t>(j)];
        if (s.past.rows() != d.past_steps || s.past.cols() != d.obs ||
            s.future_states.rows() != d.future_steps || s.future_states.cols() != d.obs ||
            s.future_actions.rows() != d.future_steps || s.future_actions.cols() != d.act)
            throw InputError("make_batch: window shape does not match model dims");
        for (int t = 0; t < d.past_steps; ++t) out.past[t].col(j) = s.past.row(t).transpose();
        for (int k = 0; k < d.future_steps; ++k) {
            out.future_states[k].col(j) = s.future_states.row(k).transpose();
            out.future_actions[k].col(j) = s.future_actions.row(k).transpose();
        }
    }
    return out;
}

enum class Mode { Train, Eval };

struct ForwardOptions {
    Mode mode = Mode::Eval;
    double dropout = 0.2;
    std::uint64_t seed = 0;
    /// Run the trailing encoder step on the last state prediction so the
    /// latent trace covers T_p + T_n steps. Not needed for the loss.
    bool full_latent_trace = false;
    /// Skip the encoder's state predictions (execution only needs actions).
    bool actions_only = false;
};

namespace detail {

struct LstmStepCache {
    Mat x, h_prev, c_prev;
    Mat gates;  // activated gates, 4H x B
    Mat c, tanh_c, h;
};

inline void lstm_step(const LstmWeights& w, const Mat& x, const Mat& h_prev, const Mat& c_prev,
                      LstmStepCache& s) {
    const Eigen::Index hd = h_prev.rows();
    s.x = x;
    s.h_prev = h_prev;
    s.c_prev = c_prev;
    s.gates.noalias() = w.input_weights * x;
    s.gates.noalias() += w.recurrent_weights * h_prev;
    s.gates.colwise() += w.bias;
    auto sigmoid = [](auto block) { block = (1.0 + (-block.array()).exp()).inverse().matrix(); };
    sigmoid(s.gates.topRows(2 * hd));
    s.gates.middleRows(2 * hd, hd) = s.gates.middleRows(2 * hd, hd).array().tanh().matrix();
    sigmoid(s.gates.bottomRows(hd));
    const auto i = s.gates.topRows(hd).array();
    const auto f = s.gates.middleRows(hd, hd).array();
    const auto g = s.gates.middleRows(2 * hd, hd).array();
    const auto o = s.gates.bottomRows(hd).array();
    s.c = (f * c_prev.array() + i * g).matrix();
    s.tanh_c = s.c.array().tanh().matrix();
    s.h = (o * s.tanh_c.array()).matrix();
}

struct LstmGrad {
    Mat dx, dh_prev, dc_prev;
};

/// Backward through one LSTM step. Accumulates weight gradients into `gw`
/// when non-null; always returns input and previous-state gradients.
inline LstmGrad lstm_step_backward(const LstmWeights& w, const LstmStepCache& s, const Mat& dh,
                                   const Mat& dc, LstmWeights* gw, bool need_dx) {
    const Eigen::Index hd = s.h.rows();
    const auto i = s.gates.topRows(hd).array();
    const auto f = s.gates.middleRows(hd, hd).array();
    const auto g = s.gates.middleRows(2 * hd, hd).array();
    const auto o = s.gates.bottomRows(hd).array();
    const auto tc = s.tanh_c.array();

    Mat dc_total = (dc.array() + dh.array() * o * (1.0 - tc.square())).matrix();
    Mat dz(4 * hd, s.h.cols());
    dz.topRows(hd) = (dc_total.array() * g * i * (1.0 - i)).matrix();
    dz.middleRows(hd, hd) = (dc_total.array() * s.c_prev.array() * f * (1.0 - f)).matrix();
    dz.middleRows(2 * hd, hd) = (dc_total.array() * i * (1.0 - g.square())).matrix();
    dz.bottomRows(hd) = (dh.array() * tc * o * (1.0 - o)).matrix();

    LstmGrad out;
    out.dc_prev = (dc_total.array() * f).matrix();
    out.dh_prev.noalias() = w.recurrent_weights.transpose() * dz;
    if (need_dx) out.dx.noalias() = w.input_weights.transpose() * dz;
    if (gw != nullptr) {
        gw->input_weights.noalias() += dz * s.x.transpose();
        gw->recurrent_weights.noalias() += dz * s.h_prev.transpose();
        gw->bias += dz.rowwise().sum();
    }
    return out;
}

class DropoutSource {
public:
    DropoutSource(double rate, std::uint64_t seed) : rate_(rate), rng_(seed) {}

    /// Inverted-dropout mask: entries are 0 or 1/(1-rate).
    Mat mask(Eigen::Index rows, Eigen::Index cols) {
        Mat m(rows, cols);
        const double keep_scale = 1.0 / (1.0 - rate_);
        for (Eigen::Index k = 0; k < m.size(); ++k) {
            const double u = static_cast<double>(rng_() >> 11) * 0x1.0p-53;
            m.data()[k] = u < rate_ ? 0.0 : keep_scale;
        }
        return m;
    }

private:
    double rate_;
    std::mt19937_64 rng_;
};

}  // namespace detail

/// Everything produced by a batched forward pass, including BPTT caches.
struct ForwardTrace {
    std::vector<detail::LstmStepCache> encoder_steps;  // T_p (+ T_n - 1, + 1 if full trace)
    std::vector<Mat> encoder_masks;                    // T_n, empty in eval mode
    std::vector<Mat> state_preds;                      // T_n of obs x B
    std::vector<detail::LstmStepCache> decoder_steps;  // T_n
    std::vector<Mat> decoder_masks;
    std::vector<Mat> action_preds;  // T_n of act x B
};

inline ForwardTrace forward_batch(const Seq2SeqParams& p, const WindowBatch& batch,
                                  const ForwardOptions& opt) {
    const Seq2SeqDims& d = p.dims;
    if (static_cast<int>(batch.past.size()) != d.past_steps)
        throw InputError("forward: past window length does not match T_p");
    const Eigen::Index b = batch.size();
    for (const Mat& x : batch.past)
        if (x.rows() != d.obs || x.cols() != b)
            throw InputError("forward: observation width does not match model dims");
    const bool train = opt.mode == Mode::Train && opt.dropout > 0.0;
    detail::DropoutSource dropout(opt.dropout, opt.seed);

    ForwardTrace tr;
    const bool predict_states = !opt.actions_only;
    tr.encoder_steps.resize(d.past_steps +
                            (predict_states ? d.future_steps - 1 + (opt.full_latent_trace ? 1 : 0) : 0));
    Mat h = Mat::Zero(d.hidden, b);
    Mat c = Mat::Zero(d.hidden, b);
    int step = 0;
    for (int t = 0; t < d.past_steps; ++t, ++step) {
        detail::lstm_step(p.encoder, batch.past[t], h, c, tr.encoder_steps[step]);
        h = tr.encoder_steps[step].h;
        c = tr.encoder_steps[step].c;
    }
    const Mat window_h = h;
    const Mat window_c = c;

    auto head = [&](const DenseWeights& w, const Mat& hid, std::vector<Mat>& masks) {
        Mat out;
        if (train) {
            masks.push_back(dropout.mask(hid.rows(), hid.cols()));
            out.noalias() = w.weights * hid.cwiseProduct(masks.back());
        } else {
            out.noalias() = w.weights * hid;
        }
        out.colwise() += w.bias;
        return out;
    };

    for (int k = 0; predict_states && k < d.future_steps; ++k) {
        if (k > 0) {
            detail::lstm_step(p.encoder, tr.state_preds.back(), h, c, tr.encoder_steps[step]);
            h = tr.encoder_steps[step].h;
            c = tr.encoder_steps[step].c;
            ++step;
        }
        tr.state_preds.push_back(head(p.encoder_head, h, tr.encoder_masks));
    }
    if (predict_states && opt.full_latent_trace) {
        detail::lstm_step(p.encoder, tr.state_preds.back(), h, c, tr.encoder_steps[step]);
    }

    tr.decoder_steps.resize(d.future_steps);
    h = window_h;
    c = window_c;
    Mat input = Mat::Zero(d.act, b);
    for (int k = 0; k < d.future_steps; ++k) {
        detail::lstm_step(p.decoder, input, h, c, tr.decoder_steps[k]);
        h = tr.decoder_steps[k].h;
        c = tr.decoder_steps[k].c;
        tr.action_preds.push_back(head(p.decoder_head, h, tr.decoder_masks));
        input = tr.action_preds.back();
    }
    return tr;
}

/// Eq.-1 style objective: MSE(states) + beta * MSE(actions), each a mean over
/// all elements of the batch.
inline double batch_loss(const ForwardTrace& tr, const WindowBatch& batch, double beta) {
    double se_state = 0.0, se_act = 0.0;
    Eigen::Index n_state = 0, n_act = 0;
    for (std::size_t k = 0; k < tr.state_preds.size(); ++k) {
        se_state += (tr.state_preds[k] - batch.future_states[k]).squaredNorm();
        n_state += tr.state_preds[k].size();
        se_act += (tr.action_preds[k] - batch.future_actions[k]).squaredNorm();
        n_act += tr.action_preds[k].size();
    }
    return se_state / static_cast<double>(n_state) + beta * se_act / static_cast<double>(n_act);
}

/// Gradient of batch_loss with respect to the groups selected by `mask`;
/// the other groups are returned as exact zeros.
inline Seq2SeqParams backward_batch(const Seq2SeqParams& p, const WindowBatch& batch,
                                    const ForwardTrace& tr, double beta, const GroupMask& mask) {
    const Seq2SeqDims& d = p.dims;
    Seq2SeqParams g = Seq2SeqParams::zeros(d);
    if (!mask.any()) return g;

    const Eigen::Index b = batch.size();
    const double state_scale = 2.0 / static_cast<double>(d.future_steps * d.obs * b);
    const double act_scale = 2.0 * beta / static_cast<double>(d.future_steps * d.act * b);
    const bool need_encoder = mask[ParamGroup::Encoder] || mask[ParamGroup::EncoderHead];
    const bool train_masks = !tr.decoder_masks.empty();

    auto head_backward = [](const DenseWeights& w, const Mat& hid, const Mat* drop,
                            const Mat& dout, DenseWeights* gw) {
        if (gw != nullptr) {
            if (drop != nullptr)
                gw->weights.noalias() += dout * hid.cwiseProduct(*drop).transpose();
            else
                gw->weights.noalias() += dout * hid.transpose();
            gw->bias += dout.rowwise().sum();
        }
        Mat dh = w.weights.transpose() * dout;
        if (drop != nullptr) dh.array() *= drop->array();
        return dh;
    };

    // Decoder, reverse time. Input of step k is the action emitted at k-1.
    Mat dh = Mat::Zero(d.hidden, b);
    Mat dc = Mat::Zero(d.hidden, b);
    Mat dnext_input;  // gradient flowing into action_preds[k] through step k+1
    LstmWeights* gdec = mask[ParamGroup::Decoder] ? &g.decoder : nullptr;
    DenseWeights* gdec_head = mask[ParamGroup::DecoderHead] ? &g.decoder_head : nullptr;
    for (int k = d.future_steps - 1; k >= 0; --k) {
        Mat da = act_scale * (tr.action_preds[k] - batch.future_actions[k]);
        if (dnext_input.size() > 0) da += dnext_input;
        const auto& step = tr.decoder_steps[k];
        dh += head_backward(p.decoder_head, step.h, train_masks ? &tr.decoder_masks[k] : nullptr,
                            da, gdec_head);
        auto lg = detail::lstm_step_backward(p.decoder, step, dh, dc, gdec, k > 0);
        dh = std::move(lg.dh_prev);
        dc = std::move(lg.dc_prev);
        dnext_input = std::move(lg.dx);
    }
    if (!need_encoder) return g;

    // dh, dc now hold the gradient w.r.t. the encoder window state.
    LstmWeights* genc = mask[ParamGroup::Encoder] ? &g.encoder : nullptr;
    DenseWeights* genc_head = mask[ParamGroup::EncoderHead] ? &g.encoder_head : nullptr;
    const bool enc_masks = !tr.encoder_masks.empty();
    Mat eh = Mat::Zero(d.hidden, b);
    Mat ec = Mat::Zero(d.hidden, b);
    dnext_input.resize(0, 0);
    // Prediction k > 0 is read from encoder step T_p + k - 1; prediction 0
    // from the window state (step T_p - 1).
    for (int k = d.future_steps - 1; k >= 0; --k) {
        Mat ds = state_scale * (tr.state_preds[k] - batch.future_states[k]);
        if (dnext_input.size() > 0) ds += dnext_input;
        const int idx = d.past_steps + k - 1;
        const auto& step = tr.encoder_steps[idx];
        eh += head_backward(p.encoder_head, step.h, enc_masks ? &tr.encoder_masks[k] : nullptr, ds,
                            genc_head);
        if (k == 0) break;
        auto lg = detail::lstm_step_backward(p.encoder, step, eh, ec, genc, true);
        eh = std::move(lg.dh_prev);
        ec = std::move(lg.dc_prev);
        dnext_input = std::move(lg.dx);
    }
    if (genc == nullptr) return g;
    eh += dh;
    ec += dc;
    for (int t = d.past_steps - 1; t >= 0; --t) {
        auto lg = detail::lstm_step_backward(p.encoder, tr.encoder_steps[t], eh, ec, genc, false);
        eh = std::move(lg.dh_prev);
        ec = std::move(lg.dc_prev);
    }
    return g;
}

struct LatentState {
    Vec c;
    Vec h;
};

struct ForwardResult {
    Mat state_preds;   // T_n x obs
    Mat action_preds;  // T_n x act
    std::vector<LatentState> latents;  // T_p + T_n encoder states
};

/// Single-window forward pass with the full encoder latent trace.
inline ForwardResult forward(const Seq2SeqParams& p, const WindowSample& w, Mode mode,
                             std::uint64_t seed, double dropout = 0.2) {
    const Seq2SeqDims& d = p.dims;
    WindowSample padded = w;
    // Targets are irrelevant for inference; allow callers to leave them empty.
    if (padded.future_states.size() == 0) padded.future_states = Mat::Zero(d.future_steps, d.obs);
    if (padded.future_actions.size() == 0) padded.future_actions = Mat::Zero(d.future_steps, d.act);
    const WindowBatch batch = make_batch(std::span<const WindowSample>(&padded, 1), d);
    ForwardOptions opt;
    opt.mode = mode;
    opt.dropout = dropout;
    opt.seed = seed;
    opt.full_latent_trace = true;
    const ForwardTrace tr = forward_batch(p, batch, opt);
    ForwardResult r;
    r.state_preds.resize(d.future_steps, d.obs);
    r.action_preds.resize(d.future_steps, d.act);
    for (int k = 0; k < d.future_steps; ++k) {
        r.state_preds.row(k) = tr.state_preds[k].col(0).transpose();
        r.action_preds.row(k) = tr.action_preds[k].col(0).transpose();
    }
    for (const auto& s : tr.encoder_steps) r.latents.push_back({s.c.col(0), s.h.col(0)});
    return r;
}

inline double loss(const Mat& state_preds, const Mat& action_preds, const WindowSample& w,
                   double beta) {
    if (state_preds.rows() != w.future_states.rows() || state_preds.cols() != w.future_states.cols() ||
        action_preds.rows() != w.future_actions.rows() ||
        action_preds.cols() != w.future_actions.cols())
        throw InputError("loss: prediction and target shapes differ");
    return (state_preds - w.future_states).squaredNorm() / static_cast<double>(state_preds.size()) +
           beta * (action_preds - w.future_actions).squaredNorm() /
               static_cast<double>(action_preds.size());
}

/// Mean-loss gradient over a batch of windows.
inline Seq2SeqParams backward(const Seq2SeqParams& p, std::span<const WindowSample> samples,
                              double beta, const GroupMask& mask, Mode mode, std::uint64_t seed,
                              double dropout = 0.2) {
    const WindowBatch batch = make_batch(samples, p.dims);
    ForwardOptions opt;
    opt.mode = mode;
    opt.dropout = dropout;
    opt.seed = seed;
    const ForwardTrace tr = forward_batch(p, batch, opt);
    return backward_batch(p, batch, tr, beta, mask);
}

/// p <- p - lr * grad on the selected groups.
inline void sgd_step(Seq2SeqParams& p, const Seq2SeqParams& grad, double lr,
                     const GroupMask& mask = GroupMask::all()) {
    if (!(lr > 0.0)) throw InputError("sgd_step: learning rate must be positive");
    if (!(p.dims == grad.dims)) throw InputError("sgd_step: gradient dims differ from params");
    std::vector<Eigen::Map<const Eigen::ArrayXd>> gviews;
    for_each_tensor(grad, [&](ParamGroup, const auto& t) {
        gviews.emplace_back(t.data(), t.size());
    });
    std::size_t i = 0;
    for_each_tensor(p, [&](ParamGroup g, auto& t) {
        const auto& gv = gviews[i++];
        if (!mask[g]) return;
        Eigen::Map<Eigen::ArrayXd>(t.data(), t.size()) -= lr * gv;
    });
}

}  // namespace toolskill
