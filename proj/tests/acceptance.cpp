// End-to-end acceptance checks. Prints one PASS/FAIL line per criterion and
// exits non-zero if any fails.
//
//   acceptance --work-dir DIR [--config FILE] [--determinism-config FILE] [--only 1,3,...]

#include <chrono>
#include <cmath>
#include <cstdio>
#include <cstring>
#include <filesystem>
#include <functional>
#include <iostream>
#include <random>
#include <set>
#include <sstream>

#include <CLI11.hpp>

#include "toolskill/pipeline.hpp"

using namespace toolskill;
namespace fs = std::filesystem;

namespace {

using Clock = std::chrono::steady_clock;

double seconds_since(Clock::time_point t0) { return std::chrono::duration<double>(Clock::now() - t0).count(); }

std::string fmt(const char* f, double v) {
    char buf[64];
    std::snprintf(buf, sizeof buf, f, v);
    return buf;
}

struct Outcome {
    bool pass = false;
    std::string detail;
};

// ---------------------------------------------------------------------------

Outcome gradient_check() {
    Seq2SeqDims d;
    d.hidden = 8;
    d.past_steps = 3;
    d.future_steps = 2;
    d.obs = 4;
    d.act = 2;
    std::mt19937_64 rng(2024);
    std::uniform_real_distribution<double> u(-0.9, 0.9);
    std::vector<WindowSample> ws(4);
    for (auto& w : ws) {
        w.past = Mat::NullaryExpr(d.past_steps, d.obs, [&] { return u(rng); });
        w.future_states = Mat::NullaryExpr(d.future_steps, d.obs, [&] { return u(rng); });
        w.future_actions = Mat::NullaryExpr(d.future_steps, d.act, [&] { return u(rng); });
    }
    const double beta = 0.1;
    auto p = init_params(d, 99);
    auto g = backward(p, ws, beta, GroupMask::all(), Mode::Eval, 0);
    std::vector<double*> ps, gs;
    for_each_tensor(p, [&](ParamGroup, auto& t) {
        for (Eigen::Index i = 0; i < t.size(); ++i) ps.push_back(t.data() + i);
    });
    for_each_tensor(g, [&](ParamGroup, auto& t) {
        for (Eigen::Index i = 0; i < t.size(); ++i) gs.push_back(t.data() + i);
    });
    auto mean_loss = [&] {
        double s = 0.0;
        for (const auto& w : ws) {
            const auto r = forward(p, w, Mode::Eval, 0);
            s += loss(r.state_preds, r.action_preds, w, beta);
        }
        return s / static_cast<double>(ws.size());
    };
    // Central differences at the pinned step decide; a five-point stencil at a
    // coarser step is reported alongside to separate roundoff from real error.
    auto rel = [](double a, double b) { return std::abs(a - b) / std::max({std::abs(a), std::abs(b), 1e-7}); };
    double worst = 0.0, worst5 = 0.0, worst_g = 0.0;
    for (std::size_t i = 0; i < ps.size(); ++i) {
        const double keep = *ps[i];
        auto at = [&](double off) {
            *ps[i] = keep + off;
            return mean_loss();
        };
        const double h = 1e-6, h5 = 1e-4;
        const double fd = (at(h) - at(-h)) / (2.0 * h);
        const double fd5 = (at(-2 * h5) - 8 * at(-h5) + 8 * at(h5) - at(2 * h5)) / (12 * h5);
        *ps[i] = keep;
        if (rel(fd, *gs[i]) > worst) {
            worst = rel(fd, *gs[i]);
            worst_g = *gs[i];
        }
        worst5 = std::max(worst5, rel(fd5, *gs[i]));
    }
    return {worst < 1e-5, "max relative error " + fmt("%.2e", worst) + " (< 1e-05, step 1e-6) at |g| " +
                              fmt("%.1e", std::abs(worst_g)) + " over " + std::to_string(ps.size()) +
                              " parameters; five-point stencil " + fmt("%.2e", worst5)};
}

Outcome branch_table() {
    const PrimitiveParams p;
    struct Case {
        double f_x, f_z, u_x, u_z;
    };
    // Expected values as stated for the controller, including the analytic
    // admittance example 0.1 * (0.3 - 0.1) = +0.02.
    const std::vector<Case> cases{
        {0.6, 0.3, 0.3, 0.5},
        {0.0, 0.3, 0.3, 0.0},
        {0.0, 0.1, 0.3, 0.1 * (0.3 - 0.1)},
        {0.5 + 1e-9, 0.3, 0.3, 0.5},
        {0.5 - 1e-9, 0.3, 0.3, 0.0},
        {0.5, 0.3, 0.3, 0.0},
        {0.5 + 1e-9, 0.0, 0.3, 0.5},
        {0.5 - 1e-9, 0.0, 0.3, -0.5},
        {0.0, 0.0, 0.3, -0.5},
    };
    int ok = 0;
    std::string failed;
    for (const auto& c : cases) {
        const Action a = primitive_action(c.f_x, c.f_z, p);
        if (a.u_x == c.u_x && a.u_z == c.u_z) {
            ++ok;
        } else {
            std::ostringstream s;
            s.precision(10);
            s << " (" << c.f_x << "," << c.f_z << ")->(" << a.u_x << "," << a.u_z << ") expected (" << c.u_x << ","
              << c.u_z << ")";
            failed += s.str();
        }
    }
    return {ok == static_cast<int>(cases.size()),
            std::to_string(ok) + "/" + std::to_string(cases.size()) + " exact" + (failed.empty() ? "" : ";" + failed)};
}

Outcome proximity_exactness() {
    std::mt19937_64 rng(77);
    std::uniform_real_distribution<double> ux(0.0, 4.0), uz(2.0, 15.0), upsi(-0.3, 0.3);
    SensorConfig sc;
    sc.proximity_noise = 0.0;
    double worst = 0.0;
    for (int i = 0; i < 10000; ++i) {
        EnvironmentSpec e;
        e.inclination = upsi(rng);
        WorldState w;
        w.ee_x = ux(rng);
        w.ee_z = uz(rng);
        const auto r = simulate_proximity(w, e, sc);
        for (int k = 0; k < kProximityDim; ++k) {
            const double x = w.ee_x + sc.ray_offsets[static_cast<std::size_t>(k)];
            const double expect = std::clamp(w.ee_z - x * std::tan(e.inclination), 0.0, sc.proximity_max_range);
            worst = std::max(worst, std::abs(r.distance[static_cast<std::size_t>(k)] - expect));
        }
    }
    return {worst < 1e-9, "max |error| " + fmt("%.2e", worst) + " cm over 10000 poses (< 1e-09)"};
}

// Trailing moving average of `curve` over `window` epochs, at 1-based epoch e.
double trailing_mean(const std::vector<double>& curve, std::size_t e, std::size_t window) {
    double s = 0.0;
    for (std::size_t i = e - window; i < e; ++i) s += curve[i];
    return s / static_cast<double>(window);
}

Outcome convergence(const std::vector<double>& curve, double runtime_s) {
    if (curve.size() < 300) return {false, "loss curve too short"};
    const double ratio = curve.back() / curve.front();
    // Sliding 100-epoch average compared at every epoch after 200.
    int rises = 0;
    double worst_rise = 0.0;
    for (std::size_t e = 201; e <= curve.size(); ++e) {
        const double prev = trailing_mean(curve, e - 1, 100), cur = trailing_mean(curve, e, 100);
        if (cur > prev) {
            ++rises;
            worst_rise = std::max(worst_rise, (cur - prev) / prev);
        }
    }
    const bool pass = ratio < 0.1 && rises == 0 && runtime_s < 1200.0;
    return {pass, "final/initial loss " + fmt("%.4f", ratio) + " (< 0.1); moving average rose at " +
                      std::to_string(rises) + " epochs after 200 (largest relative rise " + fmt("%.2e", worst_rise) +
                      "); pretrain " + fmt("%.0f", runtime_s) + " s (< 1200)"};
}

Outcome freeze(const Seq2SeqParams& base, const Seq2SeqParams& ft) {
    std::vector<double> a, b;
    std::vector<ParamGroup> grp;
    for_each_tensor(base, [&](ParamGroup g, const auto& t) {
        for (Eigen::Index i = 0; i < t.size(); ++i) {
            a.push_back(t.data()[i]);
            grp.push_back(g);
        }
    });
    for_each_tensor(ft, [&](ParamGroup, const auto& t) {
        for (Eigen::Index i = 0; i < t.size(); ++i) b.push_back(t.data()[i]);
    });
    std::size_t changed = 0, changed_outside = 0;
    for (std::size_t i = 0; i < a.size(); ++i)
        if (std::memcmp(&a[i], &b[i], sizeof(double)) != 0) {
            ++changed;
            changed_outside += grp[i] != ParamGroup::DecoderHead;
        }
    const std::size_t head = group_size(base, ParamGroup::DecoderHead);
    return {changed_outside == 0 && changed <= 202 && head == 202,
            std::to_string(changed) + " of " + std::to_string(a.size()) + " scalars changed, " +
                std::to_string(changed_outside) + " outside the decoder head (size " + std::to_string(head) + ")"};
}

std::vector<double> values(const MetricReport& r, const std::string& cond, const std::string& metric) {
    return r.rows.at(cond).at(metric).values;
}

std::string list(const std::vector<double>& v, const char* f = "%.3f") {
    std::string s;
    for (double x : v) s += (s.empty() ? "" : " ") + fmt(f, x);
    return "[" + s + "]";
}

Outcome force_trend(const MetricReport& r) {
    const auto ft = values(r, kCondFinetuned, "rmse_force");
    const auto no = values(r, kCondNoFt, "rmse_force");
    const auto demo = values(r, kCondDemoOnly, "rmse_force");
    int ordered = 0;
    for (std::size_t i = 0; i < ft.size(); ++i) ordered += ft[i] < no[i] && no[i] < demo[i];
    const double mf = r.rows.at(kCondFinetuned).at("rmse_force").mean;
    const double mn = r.rows.at(kCondNoFt).at("rmse_force").mean;
    const bool pass = ordered >= 2 && mf <= 0.6 * mn;
    return {pass, "ordered in " + std::to_string(ordered) + "/" + std::to_string(ft.size()) + " seeds (>= 2); finetuned " +
                      list(ft) + " no_ft " + list(no) + " demo_only " + list(demo) + "; mean ratio " +
                      fmt("%.3f", mf / mn) + " (<= 0.6)"};
}

Outcome stairs_trend(const MetricReport& r) {
    const auto ft = values(r, kCondFinetuned, "wiped_area");
    const auto no = values(r, kCondNoFt, "wiped_area");
    const auto demo = values(r, kCondDemoOnly, "wiped_area");
    int ordered = 0;
    for (std::size_t i = 0; i < ft.size(); ++i) ordered += ft[i] > no[i] && no[i] > demo[i];
    return {ordered >= 2, "ordered in " + std::to_string(ordered) + "/" + std::to_string(ft.size()) +
                              " seeds (>= 2); finetuned " + list(ft, "%.1f") + " no_ft " + list(no, "%.1f") +
                              " demo_only " + list(demo, "%.1f") + " %"};
}

Outcome separability(const AnalysisOutputs& a, std::size_t rollouts) {
    return {a.pca_lda_accuracy >= 0.9 && rollouts >= 30,
            "LDA accuracy on top-2 PCs " + fmt("%.3f", a.pca_lda_accuracy) + " (>= 0.9) over " +
                std::to_string(rollouts) + " rollouts (>= 30); explained " +
                fmt("%.3f", a.pca.explained_ratio[0]) + " + " + fmt("%.3f", a.pca.explained_ratio[1])};
}

// ---------------------------------------------------------------------------

struct RunResult {
    TrainResult pretrain;
    double pretrain_seconds = 0.0;
    std::map<std::string, FinetuneOutputs> finetune;
    std::map<std::string, MetricReport> reports;
};

RunResult run_pipeline(const ExperimentConfig& cfg, const std::vector<std::string>& tasks, bool demo_only,
                       std::ostream* log) {
    RunResult out;
    CommandOptions opt;
    opt.log = log;
    cmd_collect(cfg, opt);
    opt.demo = true;
    cmd_collect(cfg, opt);
    opt.demo = false;
    const auto t0 = Clock::now();
    out.pretrain = cmd_pretrain(cfg, opt);
    out.pretrain_seconds = seconds_since(t0);
    for (const auto& t : tasks) {
        opt.task = t;
        opt.skip_demo_only = !demo_only;
        opt.conditions = demo_only ? baseline_conditions() : std::vector<std::string>{kCondFinetuned, kCondNoFt};
        out.finetune.emplace(t, cmd_finetune(cfg, opt));
        cmd_rollout(cfg, opt);
        out.reports.emplace(t, cmd_eval(cfg, opt));
    }
    return out;
}

bool same_bytes(const fs::path& a, const fs::path& b) {
    return fs::exists(a) && fs::exists(b) && read_file(a) == read_file(b);
}

Outcome determinism(const ExperimentConfig& base_cfg, const fs::path& work, std::ostream* log) {
    std::vector<std::string> tasks;
    for (const auto& t : base_cfg.tasks) tasks.push_back(t.name);
    std::vector<fs::path> dirs{work / "determinism_a", work / "determinism_b"};
    for (const auto& d : dirs) {
        fs::remove_all(d);
        ExperimentConfig cfg = base_cfg;
        cfg.output_dir = d.string();
        run_pipeline(cfg, tasks, true, log);
    }
    int files = 0, same = 0;
    std::string differing;
    for (const auto& sub : {"models", "eval"})
        for (const auto& e : fs::directory_iterator(dirs[0] / sub)) {
            const std::string name = e.path().filename().string();
            const bool relevant = name.ends_with(".params.json") || name.ends_with(".csv");
            if (!relevant) continue;
            ++files;
            if (same_bytes(e.path(), dirs[1] / sub / name))
                ++same;
            else
                differing += " " + name;
        }
    return {files > 0 && same == files, std::to_string(same) + "/" + std::to_string(files) +
                                            " parameter and metric files byte-identical across two runs" +
                                            (differing.empty() ? "" : "; differ:" + differing)};
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"acceptance checks"};
    std::string work_dir;
    std::string config = std::string(TOOLSKILL_CONFIG_DIR) + "/default.json";
    std::string det_config = std::string(TOOLSKILL_CONFIG_DIR) + "/determinism.json";
    std::vector<int> only;
    bool verbose = false;
    app.add_option("--work-dir", work_dir, "scratch directory for pipeline outputs")->required();
    app.add_option("--config", config, "main experiment config");
    app.add_option("--determinism-config", det_config, "config for the rerun check");
    app.add_option("--only", only, "criteria to run (default: all)")->delimiter(',');
    app.add_flag("-v,--verbose", verbose, "training progress on stderr");
    CLI11_PARSE(app, argc, argv);

    std::set<int> want(only.begin(), only.end());
    if (want.empty())
        for (int i = 1; i <= 10; ++i) want.insert(i);
    auto wanted = [&](std::initializer_list<int> ids) {
        for (int i : ids)
            if (want.count(i)) return true;
        return false;
    };
    std::ostream* log = verbose ? &std::cerr : nullptr;
    const fs::path work(work_dir);

    std::map<int, std::pair<std::string, Outcome>> results;
    auto record = [&](int id, const std::string& name, const std::function<Outcome()>& f) {
        const auto t0 = Clock::now();
        Outcome o;
        try {
            o = f();
        } catch (const std::exception& e) {
            o = {false, std::string("error: ") + e.what()};
        }
        o.detail += " [" + fmt("%.1f", seconds_since(t0)) + " s]";
        results[id] = {name, o};
        std::cout << (o.pass ? "PASS" : "FAIL") << "  " << id << ". " << name << ": " << o.detail << std::endl;
    };

    if (want.count(1)) record(1, "gradient oracle", gradient_check);
    if (want.count(2)) record(2, "primitive branch table", branch_table);
    if (want.count(9)) record(9, "proximity exactness", proximity_exactness);

    try {
        if (wanted({3, 4, 5, 6, 7, 8})) {
            ExperimentConfig cfg = load_experiment(config);
            cfg.output_dir = (work / "main").string();
            fs::remove_all(cfg.output_dir);
            const std::string force_task = "force", stairs_task = "stairs";
            const RunResult main = run_pipeline(cfg, {force_task, stairs_task}, true, log);
            const LoadedParams base = detail::load_params(ArtifactLayout{cfg.output_dir}.params("base"));

            if (want.count(3))
                record(3, "pre-training convergence", [&] { return convergence(main.pretrain.loss_curve, main.pretrain_seconds); });
            if (want.count(4)) record(4, "force task trend", [&] { return force_trend(main.reports.at(force_task)); });
            if (want.count(5)) record(5, "stairs task trend", [&] { return stairs_trend(main.reports.at(stairs_task)); });
            if (want.count(6))
                record(6, "fine-tune freeze", [&] { return freeze(base.params, main.finetune.at(force_task).finetuned.params); });
            if (want.count(7))
                record(7, "latent separability", [&] {
                    CommandOptions opt;
                    opt.log = log;
                    const AnalysisOutputs a = cmd_analyze(cfg, opt);
                    return separability(a, cfg.analysis.pca_inclinations.size() *
                                               static_cast<std::size_t>(cfg.analysis.rollouts_per_inclination));
                });
            if (want.count(8))
                record(8, "proximity-only ablation", [&] {
                    ExperimentConfig prox = cfg;
                    prox.observation_mask = "proximity_only";
                    prox.pretrain.observation_mask = prox.finetune.observation_mask = prox.demo_only.observation_mask =
                        prox.mask();
                    prox.output_dir = (work / "proximity_only").string();
                    fs::remove_all(prox.output_dir);
                    const RunResult r = run_pipeline(prox, {force_task}, false, log);
                    const auto& full = main.reports.at(force_task).rows.at(kCondFinetuned).at("rmse_force");
                    const auto& only_prox = r.reports.at(force_task).rows.at(kCondFinetuned).at("rmse_force");
                    return Outcome{only_prox.mean > full.mean,
                                   "finetuned rmse_force proximity-only " + fmt("%.3f", only_prox.mean) + " " +
                                       list(only_prox.values) + " vs full " + fmt("%.3f", full.mean) + " " +
                                       list(full.values) + " (strictly worse)"};
                });
        }
    } catch (const std::exception& e) {
        for (int id : {3, 4, 5, 6, 7, 8})
            if (want.count(id) && !results.count(id)) {
                results[id] = {"pipeline", {false, std::string("error: ") + e.what()}};
                std::cout << "FAIL  " << id << ". pipeline: error: " << e.what() << std::endl;
            }
    }

    if (want.count(10))
        record(10, "determinism", [&] { return determinism(load_experiment(det_config), work, log); });

    int passed = 0;
    for (const auto& [id, r] : results) passed += r.second.pass;
    std::cout << passed << "/" << results.size() << " criteria passed" << std::endl;
    return passed == static_cast<int>(results.size()) ? 0 : 1;
}
