#include <gtest/gtest.h>

#include "toolskill/policy_exec.hpp"
#include "toolskill/primitive.hpp"

using namespace toolskill;

namespace {

NormalizationStats unit_stats() {
    NormalizationStats s;
    s.min = Vec::Constant(kNormChannels, -1.0);
    s.max = Vec::Constant(kNormChannels, 1.0);
    return s;
}

Seq2SeqDims small_dims() {
    Seq2SeqDims d;
    d.hidden = 10;
    d.past_steps = 20;
    d.future_steps = 4;
    return d;
}

}  // namespace

TEST(Rollout, WarmupThenPolicySchedule) {
    const auto p = init_params(small_dims(), 1);
    const auto r = rollout(p, unit_stats(), {}, {}, 3);
    ASSERT_EQ(r.trajectory.frames.size(), 200u);
    EXPECT_EQ(r.warmup_frames, 20);
    EXPECT_EQ(r.horizons.size(), 180u);
    EXPECT_EQ(r.latents.size(), 180u);
    // Warm-up frames follow the primitive law exactly.
    for (int i = 0; i < r.warmup_frames; ++i) {
        const auto& f = r.trajectory.frames[static_cast<std::size_t>(i)];
        const Action a = primitive_action(f.sensors.wrench.f_x, f.sensors.wrench.f_z, {});
        EXPECT_EQ(f.action.u_z, a.u_z);
    }
}

TEST(Rollout, ExecutesFirstActionOfEachHorizon) {
    const auto p = init_params(small_dims(), 2);
    RolloutConfig rc;
    rc.velocity_limit = 0.05;  // force some clamping
    const auto r = rollout(p, unit_stats(), {}, {}, 3, rc);
    for (std::size_t k = 0; k < r.horizons.size(); ++k) {
        const auto& f = r.trajectory.frames[static_cast<std::size_t>(r.warmup_frames) + k];
        const Action expect = clamp_action({r.horizons[k](0, 0), r.horizons[k](0, 1)}, rc.velocity_limit);
        EXPECT_EQ(f.action.u_x, expect.u_x);
        EXPECT_EQ(f.action.u_z, expect.u_z);
        EXPECT_LE(std::abs(f.action.u_x), rc.velocity_limit);
    }
}

TEST(Rollout, ZeroPolicyHovers) {
    // Zero weights predict normalised 0, which is the midpoint of the action
    // range; a symmetric range makes that a zero velocity.
    const auto p = Seq2SeqParams::zeros(small_dims());
    const auto r = rollout(p, unit_stats(), {}, {}, 4);
    for (std::size_t i = static_cast<std::size_t>(r.warmup_frames); i < r.trajectory.frames.size(); ++i) {
        EXPECT_EQ(r.trajectory.frames[i].action.u_x, 0.0);
        EXPECT_EQ(r.trajectory.frames[i].action.u_z, 0.0);
    }
    const auto& last = r.trajectory.frames.back().sensors;
    const auto& first_policy = r.trajectory.frames[static_cast<std::size_t>(r.warmup_frames)].sensors;
    EXPECT_EQ(last.ee_z, first_policy.ee_z);
}

TEST(Rollout, DeterministicPerSeed) {
    const auto p = init_params(small_dims(), 5);
    const auto a = rollout(p, unit_stats(), {}, {}, 9);
    const auto b = rollout(p, unit_stats(), {}, {}, 9);
    ASSERT_EQ(a.trajectory.frames.size(), b.trajectory.frames.size());
    for (std::size_t i = 0; i < a.trajectory.frames.size(); ++i) {
        EXPECT_EQ(a.trajectory.frames[i].action.u_z, b.trajectory.frames[i].action.u_z);
        EXPECT_EQ(a.trajectory.frames[i].sensors.ee_z, b.trajectory.frames[i].sensors.ee_z);
    }
    EXPECT_EQ(a.latents.back().c, b.latents.back().c);
}

TEST(Rollout, LatentsAreEncoderStateAfterWindow) {
    const auto p = init_params(small_dims(), 6);
    const auto stats = unit_stats();
    const auto r = rollout(p, stats, {}, {}, 2);
    const std::size_t k = 37;
    const std::size_t frame = static_cast<std::size_t>(r.warmup_frames) + k;
    WindowSample w;
    w.past.resize(p.dims.past_steps, kObsDim);
    for (int t = 0; t < p.dims.past_steps; ++t)
        w.past.row(t) =
            policy_observation(r.trajectory.frames[frame - static_cast<std::size_t>(p.dims.past_steps - 1 - t)].sensors,
                               stats, {})
                .transpose();
    const auto fr = forward(p, w, Mode::Eval, 0);
    EXPECT_EQ(fr.latents[static_cast<std::size_t>(p.dims.past_steps - 1)].c, r.latents[k].c);
    EXPECT_EQ(fr.latents[static_cast<std::size_t>(p.dims.past_steps - 1)].h, r.latents[k].h);
}

TEST(Rollout, NaNPredictionAbortsWithFrame) {
    auto p = init_params(small_dims(), 1);
    p.decoder_head.bias[0] = std::numeric_limits<double>::quiet_NaN();
    try {
        rollout(p, unit_stats(), {}, {}, 1);
        FAIL() << "expected NumericError";
    } catch (const NumericError& e) {
        EXPECT_NE(std::string(e.what()).find("frame 20"), std::string::npos);
    }
}

TEST(Rollout, RejectsMismatchedStats) {
    const auto p = init_params(small_dims(), 1);
    NormalizationStats s;
    s.min = Vec::Zero(3);
    s.max = Vec::Ones(3);
    EXPECT_THROW(rollout(p, s, {}, {}, 1), InputError);
}

TEST(Rollout, JsonlRoundTrip) {
    const auto p = init_params(small_dims(), 3);
    const auto r = rollout(p, unit_stats(), {}, {}, 8);
    const std::string text = rollout_to_jsonl(r, {{"condition", "x"}});
    const auto back = rollout_from_jsonl(text);
    EXPECT_EQ(back.warmup_frames, r.warmup_frames);
    ASSERT_EQ(back.horizons.size(), r.horizons.size());
    EXPECT_EQ(back.horizons[5], r.horizons[5]);
    ASSERT_EQ(back.trajectory.frames.size(), r.trajectory.frames.size());
    EXPECT_EQ(back.trajectory.frames[100].sensors.wrench.f_z, r.trajectory.frames[100].sensors.wrench.f_z);
    EXPECT_EQ(back.trajectory.meta.grasp_shift, r.trajectory.meta.grasp_shift);
    EXPECT_EQ(rollout_to_jsonl(back, {{"condition", "x"}}), text);
    EXPECT_THROW(rollout_from_jsonl("{\"kind\":\"frame\"\n"), InputError);
}

TEST(Rollout, LatentCsvShape) {
    const auto p = init_params(small_dims(), 3);
    const auto r = rollout(p, unit_stats(), {}, {}, 8);
    const std::string csv = latents_to_csv(r);
    std::size_t lines = 0;
    for (char c : csv) lines += c == '\n';
    EXPECT_EQ(lines, 1u + 180u);
    EXPECT_EQ(csv.rfind("frame,t,c_0", 0), 0u);
}
