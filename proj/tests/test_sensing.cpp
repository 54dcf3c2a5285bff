#include <cmath>
#include <random>

#include <gtest/gtest.h>

#include "toolskill/sensing.hpp"

using namespace toolskill;

namespace {

SensorConfig noiseless() {
    SensorConfig c;
    c.tactile_noise = 0.0;
    return c;
}

// Normal-load difference between the outer rows of fingertip 0.
double row_gradient(const TactileArray& a) { return a.at(0, kTaxelRows - 1, 0, 2) - a.at(0, 0, 0, 2); }

}  // namespace

TEST(Tactile, UniformGripSplit) {
    WorldState w;
    const auto a = simulate_tactile(w, ToolSpec{}, {}, noiseless(), 0);
    for (int f = 0; f < kFingers; ++f)
        for (int r = 0; r < kTaxelRows; ++r)
            for (int c = 0; c < kTaxelCols; ++c) {
                EXPECT_DOUBLE_EQ(a.at(f, r, c, 2), 0.3125);
                EXPECT_EQ(a.at(f, r, c, 0), 0.0);
                EXPECT_EQ(a.at(f, r, c, 1), 0.0);
            }
}

TEST(Tactile, NormalForceSharedBetweenFingertips) {
    WorldState w;
    const auto a = simulate_tactile(w, ToolSpec{}, {0.0, 0.3}, noiseless(), 0);
    double total = 0.0;
    for (int f = 0; f < kFingers; ++f) {
        double per = 0.0;
        for (int r = 0; r < kTaxelRows; ++r)
            for (int c = 0; c < kTaxelCols; ++c) per += a.at(f, r, c, 1);
        EXPECT_NEAR(per, 0.15, 1e-15);
        total += per;
    }
    EXPECT_NEAR(total, 0.3, 1e-15);
}

TEST(Tactile, MomentScalesWithLeverArm) {
    WorldState w;
    ToolSpec short_tool, long_tool;
    long_tool.handle_length = 2.0 * short_tool.handle_length;
    const ContactWrench wr{0.2, 0.3};
    const double g1 = row_gradient(simulate_tactile(w, short_tool, wr, noiseless(), 0));
    const double g2 = row_gradient(simulate_tactile(w, long_tool, wr, noiseless(), 0));
    EXPECT_GT(std::abs(g1), 0.0);
    EXPECT_NEAR(g2, 2.0 * g1, 1e-12);
}

TEST(Tactile, NoiseIsSeededAndZeroMean) {
    WorldState w;
    SensorConfig c;
    const auto a = simulate_tactile(w, ToolSpec{}, {}, c, 5);
    const auto b = simulate_tactile(w, ToolSpec{}, {}, c, 5);
    EXPECT_EQ(a.data, b.data);
    double s = 0.0;
    for (int i = 0; i < kTactileRawDim; i += 3) s += a.data[static_cast<std::size_t>(i)];
    EXPECT_NEAR(s / (kTactileRawDim / 3), 0.0, 5.0 * c.tactile_noise / std::sqrt(kTactileRawDim / 3.0));
}

TEST(TactileFeature, ZeroArrayGivesZeroFeature) {
    const auto f = preprocess_tactile(TactileArray{});
    for (double v : f.values) EXPECT_EQ(v, 0.0);
}

TEST(TactileFeature, UniformShearHasNoRotation) {
    TactileArray a;
    for (int f = 0; f < kFingers; ++f)
        for (int r = 0; r < kTaxelRows; ++r)
            for (int c = 0; c < kTaxelCols; ++c) {
                a.at(f, r, c, 0) = 0.02;
                a.at(f, r, c, 1) = -0.01;
                a.at(f, r, c, 2) = 0.25;
            }
    const auto out = preprocess_tactile(a);
    EXPECT_NEAR(out.values[0], 0.32, 1e-15);
    EXPECT_NEAR(out.values[1], -0.16, 1e-15);
    EXPECT_NEAR(out.values[2], 0.32 / 4.0, 1e-15);
    EXPECT_NEAR(out.values[3], -0.16 / 4.0, 1e-15);
    EXPECT_NEAR(out.values[4], 0.0, 1e-15);
}

TEST(TactileFeature, PureTorsionField) {
    // Tangential vectors perpendicular to the radius: t = (-v, u) * s.
    TactileArray a;
    const double s = 0.01;
    for (int r = 0; r < kTaxelRows; ++r)
        for (int c = 0; c < kTaxelCols; ++c) {
            const double u = c - 1.5, v = r - 1.5;
            a.at(0, r, c, 0) = -v * s;
            a.at(0, r, c, 1) = u * s;
            a.at(0, r, c, 2) = 0.5;
        }
    // Independent oracle: net moment = sum(u^2 + v^2) * s; normal = 8.
    double moment = 0.0;
    for (int r = 0; r < kTaxelRows; ++r)
        for (int c = 0; c < kTaxelCols; ++c) moment += ((c - 1.5) * (c - 1.5) + (r - 1.5) * (r - 1.5)) * s;
    const auto out = preprocess_tactile(a);
    EXPECT_NEAR(out.values[2], 0.0, 1e-15);
    EXPECT_NEAR(out.values[3], 0.0, 1e-15);
    EXPECT_GT(out.values[4], 0.0);
    EXPECT_NEAR(out.values[4], moment / 8.0, 1e-14);
}

TEST(Proximity, FlatSurface) {
    WorldState w;
    w.ee_x = 1.0;
    w.ee_z = 10.0;
    const auto r = simulate_proximity(w, EnvironmentSpec{});
    for (double d : r.distance) EXPECT_EQ(d, 10.0);
}

TEST(Proximity, InclineIsMonotone) {
    WorldState w;
    w.ee_z = 8.0;
    EnvironmentSpec e;
    e.inclination = 0.15;
    const auto r = simulate_proximity(w, e);
    for (int i = 1; i < kProximityDim; ++i) EXPECT_LT(r.distance[i], r.distance[i - 1]);
    e.inclination = -0.15;
    const auto q = simulate_proximity(w, e);
    for (int i = 1; i < kProximityDim; ++i) EXPECT_GT(q.distance[i], q.distance[i - 1]);
}

TEST(Proximity, StepUnderLastRays) {
    EnvironmentSpec e;
    e.kind = SurfaceKind::Step;
    e.step_height = 1.7;
    e.step_x = 3.5;
    WorldState w;
    w.ee_x = 0.5;  // rays at 0.5..5.5; rays 4-6 at 3.5, 4.5, 5.5
    w.ee_z = 6.0;
    const auto r = simulate_proximity(w, e);
    for (int i = 0; i < 3; ++i)
        for (int j = 3; j < 6; ++j) EXPECT_DOUBLE_EQ(r.distance[i] - r.distance[j], 1.7);
}

TEST(Proximity, ExactToHeightfield) {
    std::mt19937_64 rng(11);
    std::uniform_real_distribution<double> ux(0.0, 4.0), uz(2.0, 15.0), upsi(-0.3, 0.3);
    double worst = 0.0;
    for (int i = 0; i < 10000; ++i) {
        EnvironmentSpec e;
        e.inclination = upsi(rng);
        WorldState w;
        w.ee_x = ux(rng);
        w.ee_z = uz(rng);
        const auto r = simulate_proximity(w, e);
        for (int k = 0; k < kProximityDim; ++k) {
            const double x = w.ee_x + SensorConfig{}.ray_offsets[k];
            const double expect = std::clamp(w.ee_z - x * std::tan(e.inclination), 0.0, 20.0);
            worst = std::max(worst, std::abs(r.distance[k] - expect));
        }
    }
    EXPECT_LT(worst, 1e-9);
}

TEST(Proximity, OffSurfaceRaysReportMaxRange) {
    WorldState w;
    w.ee_x = 8.0;
    w.ee_z = 5.0;
    const auto r = simulate_proximity(w, EnvironmentSpec{});
    EXPECT_EQ(r.distance[0], 5.0);
    EXPECT_EQ(r.distance[5], SensorConfig{}.proximity_max_range);
}

TEST(Normalization, EndpointsMidpointAndRoundTrip) {
    NormalizationStats s;
    s.min = Vec::Zero(kNormChannels);
    s.max = Vec::LinSpaced(kNormChannels, 1.0, 5.0);
    s.max[3] = s.min[3];  // degenerate
    const Vec lo = normalize(s.min, s);
    const Vec mid = normalize(0.5 * (s.min + s.max), s);
    for (int i = 0; i < kNormChannels; ++i) {
        if (i == 3) {
            EXPECT_EQ(lo[i], 0.0);
            continue;
        }
        EXPECT_DOUBLE_EQ(lo[i], -0.9);
        EXPECT_NEAR(mid[i], 0.0, 1e-15);
    }
    std::mt19937_64 rng(3);
    std::uniform_real_distribution<double> u(-2.0, 7.0);
    double worst = 0.0;
    for (int n = 0; n < 1000; ++n) {
        Vec v(kNormChannels);
        for (auto& x : v) x = u(rng);
        const Vec back = denormalize(normalize(v, s), s);
        for (int i = 0; i < kNormChannels; ++i)
            if (i != 3) worst = std::max(worst, std::abs(back[i] - v[i]));
    }
    EXPECT_LT(worst, 1e-12);
}

TEST(Normalization, ChannelMismatchIsInputError) {
    NormalizationStats s;
    s.min = Vec::Zero(4);
    s.max = Vec::Ones(4);
    EXPECT_THROW(normalize(Vec::Zero(5), s), InputError);
    EXPECT_THROW(denormalize(Vec::Zero(2), s, 3), InputError);
}

TEST(Normalization, FitCoversCorpus) {
    Dataset d;
    d.trajectories.resize(1);
    for (int i = 0; i < 5; ++i) {
        Frame f;
        f.sensors.ee_x = i;
        f.action.u_z = -i;
        d.trajectories[0].frames.push_back(f);
    }
    const auto s = fit_normalization(d);
    EXPECT_EQ(s.min[kChanEeX], 0.0);
    EXPECT_EQ(s.max[kChanEeX], 4.0);
    EXPECT_EQ(s.min[kChanAct + 1], -4.0);
    EXPECT_THROW(fit_normalization(Dataset{}), InputError);
}

TEST(ObservationMask, ZeroesMaskedChannels) {
    Vec x = Vec::Ones(kObsDim);
    ObservationMask::proximity_only().apply(x);
    EXPECT_EQ(x.head(kTactileFeatureDim).sum(), 0.0);
    EXPECT_EQ(x.tail(kProximityDim).sum(), kProximityDim);
    EXPECT_THROW(ObservationMask::from_name("sonar"), ConfigError);
}
