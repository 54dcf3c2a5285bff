#pragma once

// Rollout metrics (slope RMSE, force RMSE, wiped area), latent-space analyses
// (PCA, exact t-SNE, linear separability) and the per-condition report table.

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <map>
#include <numeric>
#include <random>
#include <sstream>
#include <string>
#include <vector>

#include <Eigen/Eigenvalues>

#include "toolskill/common.hpp"
#include "toolskill/env_sim.hpp"
#include "toolskill/io.hpp"
#include "toolskill/trajectory.hpp"

namespace toolskill {

struct MetricConfig {
    int slope_window = 11;           // frames, centred
    double contact_threshold = 0.02; // N, f_z above this counts as contact
    double wipe_cell = 0.5;          // cm
};

/// Followed inclination at frame i from a centred window of end-effector
/// positions: atan2(z[i+k] - z[i-k], x[i+k] - x[i-k]), k = window / 2.
inline double windowed_slope(const std::vector<Frame>& frames, std::size_t i, int window = 11) {
    if (window < 3 || window % 2 == 0) throw InputError("windowed_slope: window must be odd and >= 3");
    const std::size_t k = static_cast<std::size_t>(window / 2);
    if (i < k || i + k >= frames.size()) throw InputError("windowed_slope: window leaves the trajectory");
    const SensorFrame& a = frames[i - k].sensors;
    const SensorFrame& b = frames[i + k].sensors;
    return std::atan2(b.ee_z - a.ee_z, b.ee_x - a.ee_x);
}

/// RMSE between followed and true inclination over in-contact frames from
/// `first_frame` on whose slope window fits inside the trajectory.
inline double rmse_slope(const Trajectory& tr, const EnvironmentSpec& env, const MetricConfig& cfg = {},
                         std::size_t first_frame = 0) {
    if (env.kind != SurfaceKind::Inclined) throw InputError("rmse_slope: requires an Inclined environment");
    const std::size_t k = static_cast<std::size_t>(cfg.slope_window / 2);
    double se = 0.0;
    std::size_t n = 0;
    for (std::size_t i = std::max(first_frame, k); i + k < tr.frames.size(); ++i) {
        if (!(tr.frames[i].sensors.wrench.f_z > cfg.contact_threshold)) continue;
        const double e = windowed_slope(tr.frames, i, cfg.slope_window) - env.inclination;
        se += e * e;
        ++n;
    }
    if (n == 0) throw DomainError("rmse_slope: no in-contact frames, metric undefined");
    return std::sqrt(se / static_cast<double>(n));
}

/// RMSE of f_z against a desired per-frame force over the trajectory's
/// in-contact frames from `first_frame` on (frames past the end of `desired`
/// are ignored). A run that never touches is scored over all those frames.
inline double rmse_force(const Trajectory& tr, const std::vector<double>& desired, std::size_t first_frame = 0,
                         double contact_threshold = MetricConfig{}.contact_threshold) {
    const std::size_t n = std::min(tr.frames.size(), desired.size());
    if (first_frame >= n) throw InputError("rmse_force: no frames to score");
    auto score = [&](bool contact_only) {
        double se = 0.0;
        std::size_t count = 0;
        for (std::size_t i = first_frame; i < n; ++i) {
            const double f = tr.frames[i].sensors.wrench.f_z;
            if (contact_only && !(f > contact_threshold)) continue;
            se += (f - desired[i]) * (f - desired[i]);
            ++count;
        }
        return count == 0 ? -1.0 : std::sqrt(se / static_cast<double>(count));
    };
    const double in_contact = score(true);
    return in_contact >= 0.0 ? in_contact : score(false);
}

inline std::vector<double> force_profile(const Trajectory& tr) {
    std::vector<double> f;
    f.reserve(tr.frames.size());
    for (const auto& fr : tr.frames) f.push_back(fr.sensors.wrench.f_z);
    return f;
}

/// Percentage of cells of [start_x, start_x + wipe_length] whose centre was
/// under the tooltip patch, with the tip bottom pressed below the surface
/// there, in at least one in-contact frame.
inline double wiped_area(const Trajectory& tr, const EnvironmentSpec& env, const MetricConfig& cfg = {}) {
    if (!(cfg.wipe_cell > 0.0)) throw InputError("wiped_area: cell must be > 0");
    const double x0 = env.start_x;
    const double x1 = std::min(env.extent_x, env.start_x + env.wipe_length);
    const int cells = std::max(1, static_cast<int>(std::ceil((x1 - x0) / cfg.wipe_cell - 1e-9)));
    std::vector<char> wiped(static_cast<std::size_t>(cells), 0);
    const ToolSpec& tool = tr.meta.tool;
    WorldState probe;  // base heightfield, no deformation
    probe.grasp_shift = tr.meta.grasp_shift;
    for (const auto& fr : tr.frames) {
        const SensorFrame& s = fr.sensors;
        if (!(s.wrench.f_z > cfg.contact_threshold)) continue;
        probe.ee_z = s.ee_z;
        const double z_rest = tip_rest_bottom(tool, probe);
        const double lo = s.tip_x - tool.tip_width / 2.0;
        const double hi = s.tip_x + tool.tip_width / 2.0;
        for (int c = 0; c < cells; ++c) {
            const double centre = x0 + (c + 0.5) * cfg.wipe_cell;
            if (centre < lo || centre > hi || centre > x1) continue;
            if (surface_height(env, centre, probe) >= z_rest) wiped[static_cast<std::size_t>(c)] = 1;
        }
    }
    const auto hit = std::count(wiped.begin(), wiped.end(), 1);
    return 100.0 * static_cast<double>(hit) / static_cast<double>(cells);
}

// ---------------------------------------------------------------------------
// PCA

struct PcaResult {
    Vec mean;
    Mat components;       // d x k, unit columns
    Mat projections;      // N x k
    Vec explained_ratio;  // k, fraction of total variance
};

/// Covariance eigendecomposition; each component's largest-magnitude loading
/// is made positive.
inline PcaResult pca(const Mat& data, int k) {
    const Eigen::Index n = data.rows();
    const Eigen::Index d = data.cols();
    if (k < 1 || k > d) throw InputError("pca: k must lie in [1, dim]");
    if (n <= k) throw InputError("pca: need more samples than components");
    PcaResult r;
    r.mean = data.colwise().mean().transpose();
    const Mat centred = data.rowwise() - r.mean.transpose();
    const Mat cov = (centred.transpose() * centred) / static_cast<double>(n - 1);
    Eigen::SelfAdjointEigenSolver<Mat> eig(cov);
    if (eig.info() != Eigen::Success) throw NumericError("pca: eigendecomposition failed");
    const Vec vals = eig.eigenvalues().cwiseMax(0.0);  // ascending
    const double total = vals.sum();
    r.components.resize(d, k);
    r.explained_ratio.resize(k);
    for (int j = 0; j < k; ++j) {
        const Eigen::Index src = d - 1 - j;
        Vec v = eig.eigenvectors().col(src);
        Eigen::Index arg = 0;
        v.cwiseAbs().maxCoeff(&arg);
        if (v[arg] < 0.0) v = -v;
        r.components.col(j) = v;
        r.explained_ratio[j] = total > 0.0 ? vals[src] / total : 0.0;
    }
    r.projections = centred * r.components;
    return r;
}

// ---------------------------------------------------------------------------
// t-SNE (exact)

struct TsneConfig {
    double perplexity = 30.0;
    double learning_rate = 200.0;
    int iterations = 1000;
    int exaggeration_iterations = 250;
    double exaggeration = 12.0;
    double initial_momentum = 0.5;
    double final_momentum = 0.8;
    std::uint64_t seed = 0;
};

struct TsneResult {
    Mat embedding;           // N x 2
    std::vector<double> kl;  // KL(P || Q) after each iteration, without exaggeration
};

namespace detail {

/// Row-conditional affinities with per-point precision found by bisection
/// so that each row's entropy equals log(perplexity).
inline Mat conditional_affinities(const Mat& sq_dist, double perplexity) {
    const Eigen::Index n = sq_dist.rows();
    const double target = std::log(perplexity);
    Mat p = Mat::Zero(n, n);
    for (Eigen::Index i = 0; i < n; ++i) {
        double beta = 1.0, lo = 0.0, hi = std::numeric_limits<double>::infinity();
        Vec row(n);
        for (int it = 0; it < 200; ++it) {
            // Shift by the smallest off-diagonal distance for stability.
            double dmin = std::numeric_limits<double>::infinity();
            for (Eigen::Index j = 0; j < n; ++j)
                if (j != i) dmin = std::min(dmin, sq_dist(i, j));
            double sum = 0.0, wsum = 0.0;
            for (Eigen::Index j = 0; j < n; ++j) {
                row[j] = j == i ? 0.0 : std::exp(-beta * (sq_dist(i, j) - dmin));
                sum += row[j];
                wsum += row[j] * (sq_dist(i, j) - dmin);
            }
            const double h = std::log(sum) + beta * wsum / sum;
            row /= sum;
            if (std::abs(h - target) < 1e-10) break;
            if (h > target) {
                lo = beta;
                beta = std::isinf(hi) ? beta * 2.0 : (beta + hi) / 2.0;
            } else {
                hi = beta;
                beta = (beta + lo) / 2.0;
            }
        }
        p.row(i) = row.transpose();
    }
    return p;
}

}  // namespace detail

inline TsneResult tsne(const Mat& data, const TsneConfig& cfg = {}) {
    const Eigen::Index n = data.rows();
    if (!(cfg.perplexity > 0.0)) throw InputError("tsne: perplexity must be > 0");
    if (static_cast<double>(n) <= 3.0 * cfg.perplexity)
        throw InputError("tsne: need more than 3 * perplexity points");
    if (cfg.iterations < 1 || !(cfg.learning_rate > 0.0)) throw InputError("tsne: bad optimiser settings");

    const Vec norms = data.rowwise().squaredNorm();
    Mat sq = (-2.0 * data * data.transpose()).colwise() + norms;
    sq.rowwise() += norms.transpose();
    sq = sq.cwiseMax(0.0);
    sq.diagonal().setZero();

    Mat p = detail::conditional_affinities(sq, cfg.perplexity);
    p = (p + p.transpose()).eval() / (2.0 * static_cast<double>(n));
    p = p.cwiseMax(1e-12);
    p.diagonal().setZero();

    TsneResult r;
    std::mt19937_64 rng(cfg.seed);
    std::normal_distribution<double> init(0.0, 1e-4);
    r.embedding.resize(n, 2);
    for (Eigen::Index k = 0; k < r.embedding.size(); ++k) r.embedding.data()[k] = init(rng);
    Mat update = Mat::Zero(n, 2);
    Mat gains = Mat::Ones(n, 2);
    Mat num(n, n), grad(n, 2);
    r.kl.reserve(static_cast<std::size_t>(cfg.iterations));

    for (int it = 0; it < cfg.iterations; ++it) {
        const bool exaggerate = it < cfg.exaggeration_iterations;
        const double ex = exaggerate ? cfg.exaggeration : 1.0;
        const double momentum = exaggerate ? cfg.initial_momentum : cfg.final_momentum;
        const Mat& y = r.embedding;
        const Vec yn = y.rowwise().squaredNorm();
        num = (-2.0 * y * y.transpose()).colwise() + yn;
        num.rowwise() += yn.transpose();
        num = (1.0 + num.array().max(0.0)).inverse().matrix();
        num.diagonal().setZero();
        const double z = num.sum();
        // grad_i = 4 sum_j (ex * p_ij - q_ij) num_ij (y_i - y_j)
        const Mat w = ((ex * p).array() - num.array() / z).matrix().cwiseProduct(num);
        grad = 4.0 * (w.rowwise().sum().asDiagonal() * y - w * y);
        for (Eigen::Index k = 0; k < grad.size(); ++k) {
            double& g = gains.data()[k];
            const bool same = (grad.data()[k] > 0.0) == (update.data()[k] > 0.0);
            g = same ? std::max(g * 0.8, 0.01) : g + 0.2;
        }
        update = momentum * update - cfg.learning_rate * gains.cwiseProduct(grad);
        r.embedding += update;
        r.embedding.rowwise() -= r.embedding.colwise().mean();
        if (!r.embedding.allFinite()) throw NumericError("tsne: embedding diverged at iteration " + std::to_string(it));

        // Objective at the updated embedding.
        const Mat& y2 = r.embedding;
        const Vec yn2 = y2.rowwise().squaredNorm();
        Mat q = (-2.0 * y2 * y2.transpose()).colwise() + yn2;
        q.rowwise() += yn2.transpose();
        q = (1.0 + q.array().max(0.0)).inverse().matrix();
        q.diagonal().setZero();
        q /= q.sum();
        double kl = 0.0;
        for (Eigen::Index i = 0; i < n; ++i)
            for (Eigen::Index j = 0; j < n; ++j)
                if (i != j) kl += p(i, j) * std::log(p(i, j) / std::max(q(i, j), 1e-300));
        r.kl.push_back(kl);
    }
    return r;
}

// ---------------------------------------------------------------------------
// Linear separability

/// Training accuracy of linear discriminant analysis (shared covariance,
/// equal priors) on labelled points. Labels must be 0..C-1.
inline double lda_accuracy(const Mat& x, const std::vector<int>& labels, double ridge = 1e-9) {
    const Eigen::Index n = x.rows(), d = x.cols();
    if (static_cast<std::size_t>(n) != labels.size() || n == 0) throw InputError("lda: label count mismatch");
    const int classes = *std::max_element(labels.begin(), labels.end()) + 1;
    Mat means = Mat::Zero(classes, d);
    std::vector<int> count(static_cast<std::size_t>(classes), 0);
    for (Eigen::Index i = 0; i < n; ++i) {
        means.row(labels[static_cast<std::size_t>(i)]) += x.row(i);
        ++count[static_cast<std::size_t>(labels[static_cast<std::size_t>(i)])];
    }
    for (int c = 0; c < classes; ++c) {
        if (count[static_cast<std::size_t>(c)] == 0) throw InputError("lda: empty class");
        means.row(c) /= count[static_cast<std::size_t>(c)];
    }
    Mat cov = Mat::Zero(d, d);
    for (Eigen::Index i = 0; i < n; ++i) {
        const Vec r = (x.row(i) - means.row(labels[static_cast<std::size_t>(i)])).transpose();
        cov += r * r.transpose();
    }
    cov /= static_cast<double>(std::max<Eigen::Index>(1, n - classes));
    cov += ridge * (1.0 + cov.trace()) * Mat::Identity(d, d);
    const Eigen::LDLT<Mat> solver(cov);
    const Mat w = solver.solve(means.transpose());  // d x C
    int correct = 0;
    for (Eigen::Index i = 0; i < n; ++i) {
        int best = 0;
        double best_score = -std::numeric_limits<double>::infinity();
        for (int c = 0; c < classes; ++c) {
            const double s = x.row(i).dot(w.col(c)) - 0.5 * means.row(c).dot(w.col(c));
            if (s > best_score) {
                best_score = s;
                best = c;
            }
        }
        correct += best == labels[static_cast<std::size_t>(i)] ? 1 : 0;
    }
    return static_cast<double>(correct) / static_cast<double>(n);
}

// ---------------------------------------------------------------------------
// Report

struct MetricSummary {
    std::vector<double> values;  // per seed, in seed order
    double mean = 0.0;
    double std = 0.0;            // sample standard deviation (0 for one value)
};

inline MetricSummary summarize(std::vector<double> values) {
    MetricSummary s;
    s.values = std::move(values);
    if (s.values.empty()) return s;
    const double n = static_cast<double>(s.values.size());
    s.mean = std::accumulate(s.values.begin(), s.values.end(), 0.0) / n;
    if (s.values.size() > 1) {
        double ss = 0.0;
        for (double v : s.values) ss += (v - s.mean) * (v - s.mean);
        s.std = std::sqrt(ss / (n - 1.0));
    }
    return s;
}

struct MetricReport {
    std::string task;
    std::vector<std::uint64_t> seeds;
    // condition -> metric name -> summary; std::map keeps output order stable.
    std::map<std::string, std::map<std::string, MetricSummary>> rows;

    std::string to_csv() const {
        std::ostringstream out;
        out.precision(17);
        out << "task,condition,metric,mean,std";
        for (auto s : seeds) out << ",seed_" << s;
        out << "\n";
        for (const auto& [cond, metrics] : rows)
            for (const auto& [name, m] : metrics) {
                out << task << "," << cond << "," << name << "," << m.mean << "," << m.std;
                for (double v : m.values) out << "," << v;
                out << "\n";
            }
        return out.str();
    }

    json to_json() const {
        json conds = json::object();
        for (const auto& [cond, metrics] : rows)
            for (const auto& [name, m] : metrics)
                conds[cond][name] = {{"mean", m.mean}, {"std", m.std}, {"values", m.values}};
        return {{"task", task}, {"seeds", seeds}, {"conditions", conds}};
    }
};

}  // namespace toolskill
