#pragma once

// File-level pipeline commands shared by the CLI and the acceptance suite:
// collect -> pretrain -> finetune -> rollout -> eval, plus analyze.
//
// Layout under ExperimentConfig::output_dir:
//   config.json                         canonical config echo
//   manifests/<command>[_<task>].json   config hash, input and output hashes
//   data/primitive.jsonl, data/demos_<task>.jsonl
//   models/stats.json, models/base.params.json, models/base.loss.csv
//   models/finetuned_<task>.params.json, models/demo_only_<task>.params.json (+ .loss.csv)
//   rollouts/<task>/<condition>_seed<k>.jsonl (+ .latents.csv); condition "oracle" is the reference
//   eval/<task>.csv, eval/<task>.json
//   analysis/pca.csv, analysis/pca.json, analysis/tsne.csv

#include <filesystem>
#include <iostream>
#include <map>
#include <optional>
#include <ostream>
#include <sstream>
#include <string>
#include <vector>

#include "toolskill/eval.hpp"
#include "toolskill/experiment.hpp"
#include "toolskill/io.hpp"
#include "toolskill/policy_exec.hpp"
#include "toolskill/training.hpp"

namespace toolskill {

namespace fs = std::filesystem;

inline constexpr const char* kCondFinetuned = "finetuned";
inline constexpr const char* kCondNoFt = "no_ft";
inline constexpr const char* kCondDemoOnly = "demo_only";
inline constexpr const char* kCondOracle = "oracle";

inline std::vector<std::string> baseline_conditions() { return {kCondFinetuned, kCondNoFt, kCondDemoOnly}; }

struct ArtifactLayout {
    fs::path root;

    fs::path config_echo() const { return root / "config.json"; }
    fs::path manifest(const std::string& name) const { return root / "manifests" / (name + ".json"); }
    fs::path primitive_data() const { return root / "data" / "primitive.jsonl"; }
    fs::path demos(const std::string& task) const { return root / "data" / ("demos_" + task + ".jsonl"); }
    fs::path stats() const { return root / "models" / "stats.json"; }
    fs::path params(const std::string& name) const { return root / "models" / (name + ".params.json"); }
    fs::path loss_curve(const std::string& name) const { return root / "models" / (name + ".loss.csv"); }
    fs::path rollout(const std::string& task, const std::string& cond, std::uint64_t seed) const {
        return root / "rollouts" / task / (cond + "_seed" + std::to_string(seed) + ".jsonl");
    }
    fs::path latents(const std::string& task, const std::string& cond, std::uint64_t seed) const {
        return root / "rollouts" / task / (cond + "_seed" + std::to_string(seed) + ".latents.csv");
    }
    fs::path eval_csv(const std::string& task) const { return root / "eval" / (task + ".csv"); }
    fs::path eval_json(const std::string& task) const { return root / "eval" / (task + ".json"); }
    fs::path analysis(const std::string& file) const { return root / "analysis" / file; }

    /// Model file name for a condition of a task.
    static std::string model_name(const std::string& cond, const std::string& task) {
        if (cond == kCondNoFt) return "base";
        return cond + "_" + task;
    }
};

struct CommandOptions {
    std::string task;                   // finetune / rollout / eval; collect --demo (empty: all tasks)
    bool demo = false;                  // collect demonstrations instead of primitive data
    bool allow_full = false;            // finetune with a mask other than the decoder head
    bool allow_hash_mismatch = false;   // eval across config changes
    bool skip_demo_only = false;        // finetune without the demo-only baseline
    std::vector<std::string> conditions = baseline_conditions();
    std::ostream* log = &std::cerr;
};

namespace detail {

class Manifest {
public:
    Manifest(const ArtifactLayout& layout, std::string command, std::string hash)
        : layout_(layout), command_(std::move(command)), hash_(std::move(hash)) {}

    void input(const fs::path& p) { inputs_[rel(p)] = file_sha256(p); }
    void output(const fs::path& p, const std::string& bytes) {
        write_file(p, bytes);
        outputs_[rel(p)] = sha256_hex(bytes);
    }
    void write(const std::string& name, const ExperimentConfig& cfg) const {
        write_file(layout_.config_echo(), to_json(cfg).dump(2) + "\n");
        json j{{"command", command_}, {"config_hash", hash_}, {"inputs", inputs_}, {"outputs", outputs_}};
        write_file(layout_.manifest(name), j.dump(2) + "\n");
    }

private:
    std::string rel(const fs::path& p) const { return fs::relative(p, layout_.root).generic_string(); }

    const ArtifactLayout& layout_;
    std::string command_;
    std::string hash_;
    std::map<std::string, std::string> inputs_;
    std::map<std::string, std::string> outputs_;
};

inline void require(const fs::path& p, const std::string& what) {
    if (!fs::exists(p)) throw MissingInputError(what + " not found: " + p.string());
}

inline std::string loss_csv(const std::vector<double>& curve) {
    std::ostringstream out;
    out.precision(17);
    out << "epoch,loss\n";
    for (std::size_t i = 0; i < curve.size(); ++i) out << i + 1 << "," << curve[i] << "\n";
    return out.str();
}

inline EpochCallback progress(std::ostream* log, const std::string& label, int epochs) {
    if (log == nullptr) return {};
    const int every = std::max(1, epochs / 20);
    return [log, label, every, epochs](int e, double l) {
        if ((e + 1) % every == 0 || e == 0 || e + 1 == epochs)
            *log << label << " epoch " << e + 1 << "/" << epochs << " loss " << l << "\n";
    };
}

inline Dataset load_dataset(const fs::path& p) { return dataset_from_jsonl(read_file(p), p.string()); }

inline NormalizationStats load_stats(const fs::path& p) {
    return stats_from_json(parse_json(read_file(p), p.string()));
}

inline LoadedParams load_params(const fs::path& p) { return params_from_json(parse_json(read_file(p), p.string())); }

}  // namespace detail

// ---------------------------------------------------------------------------
// Commands

inline void cmd_collect(const ExperimentConfig& cfg, const CommandOptions& opt = {}) {
    const ArtifactLayout L{cfg.output_dir};
    const std::string hash = config_hash(cfg);
    if (!opt.demo) {
        detail::Manifest m(L, "collect", hash);
        Dataset d = collect_primitive_dataset(cfg.collect);
        d.provenance = json{{"source", "primitive"},
                            {"config_hash", hash},
                            {"seed", cfg.seed},
                            {"controller", to_json(cfg.collect.controller)},
                            {"tool", to_json(cfg.collect.tool)}}
                           .dump();
        m.output(L.primitive_data(), dataset_to_jsonl(d));
        m.write("collect", cfg);
        if (opt.log) *opt.log << "collected " << d.trajectories.size() << " primitive trajectories\n";
        return;
    }
    std::vector<const TaskConfig*> tasks;
    if (opt.task.empty())
        for (const auto& t : cfg.tasks) tasks.push_back(&t);
    else
        tasks.push_back(&cfg.task(opt.task));
    if (tasks.empty()) throw ConfigError("collect --demo: config defines no tasks");
    for (const TaskConfig* t : tasks) {
        detail::Manifest m(L, "collect_demo", hash);
        Dataset d = collect_demos(cfg, *t);
        json prov = json::parse(d.provenance);
        prov["source"] = "demo_oracle";
        prov["config_hash"] = hash;
        d.provenance = prov.dump();
        m.output(L.demos(t->name), dataset_to_jsonl(d));
        m.write("collect_demo_" + t->name, cfg);
        if (opt.log) *opt.log << "collected " << d.trajectories.size() << " demonstrations for " << t->name << "\n";
    }
}

inline TrainResult cmd_pretrain(const ExperimentConfig& cfg, const CommandOptions& opt = {}) {
    const ArtifactLayout L{cfg.output_dir};
    const std::string hash = config_hash(cfg);
    detail::require(L.primitive_data(), "primitive dataset (run collect first)");
    detail::Manifest m(L, "pretrain", hash);
    m.input(L.primitive_data());
    const Dataset d = detail::load_dataset(L.primitive_data());
    const NormalizationStats stats = fit_normalization(d);
    const std::string stats_bytes = stats_to_string(stats);
    m.output(L.stats(), stats_bytes);
    TrainResult r = pretrain(d, stats, cfg.pretrain, detail::progress(opt.log, "pretrain", cfg.pretrain.epochs));
    const json meta{{"role", "base"},
                    {"config_hash", hash},
                    {"dataset_sha256", file_sha256(L.primitive_data())},
                    {"train", to_json(cfg.pretrain)},
                    {"observation_mask", cfg.observation_mask},
                    {"final_loss", r.loss_curve.back()}};
    m.output(L.params("base"), params_to_string(r.params, sha256_hex(stats_bytes), meta));
    m.output(L.loss_curve("base"), detail::loss_csv(r.loss_curve));
    m.write("pretrain", cfg);
    return r;
}

struct FinetuneOutputs {
    TrainResult finetuned;
    std::optional<TrainResult> demo_only;
};

inline FinetuneOutputs cmd_finetune(const ExperimentConfig& cfg, const CommandOptions& opt) {
    if (!cfg.finetune.mask.is_decoder_head_only() && !opt.allow_full)
        throw ConfigError("finetune: mask '" + mask_to_string(cfg.finetune.mask) +
                          "' is not the decoder head; pass --allow-full to override");
    const TaskConfig& task = cfg.task(opt.task);
    const ArtifactLayout L{cfg.output_dir};
    const std::string hash = config_hash(cfg);
    detail::require(L.params("base"), "base parameters (run pretrain first)");
    detail::require(L.stats(), "normalization stats (run pretrain first)");
    detail::require(L.demos(task.name), "demonstrations (run collect --demo first)");
    detail::Manifest m(L, "finetune", hash);
    m.input(L.params("base"));
    m.input(L.stats());
    m.input(L.demos(task.name));
    const LoadedParams base = detail::load_params(L.params("base"));
    const NormalizationStats stats = detail::load_stats(L.stats());
    const std::string stats_sha = file_sha256(L.stats());
    if (base.stats_sha256 != stats_sha) throw ConfigError("finetune: base parameters were trained with other stats");
    const Dataset demos = detail::load_dataset(L.demos(task.name));
    const std::string demo_sha = file_sha256(L.demos(task.name));

    FinetuneOutputs out;
    out.finetuned = finetune(base.params, demos, stats, cfg.finetune,
                             detail::progress(opt.log, "finetune " + task.name, cfg.finetune.epochs));
    const std::string ft_name = ArtifactLayout::model_name(kCondFinetuned, task.name);
    m.output(L.params(ft_name), params_to_string(out.finetuned.params, stats_sha,
                                                 {{"role", "finetuned"},
                                                  {"task", task.name},
                                                  {"config_hash", hash},
                                                  {"dataset_sha256", demo_sha},
                                                  {"base_sha256", file_sha256(L.params("base"))},
                                                  {"train", to_json(cfg.finetune)},
                                                  {"observation_mask", cfg.observation_mask},
                                                  {"final_loss", out.finetuned.loss_curve.back()}}));
    m.output(L.loss_curve(ft_name), detail::loss_csv(out.finetuned.loss_curve));

    if (!opt.skip_demo_only) {
        out.demo_only = train_demo_only(demos, stats, cfg.demo_only,
                                        detail::progress(opt.log, "demo-only " + task.name, cfg.demo_only.epochs));
        const std::string name = ArtifactLayout::model_name(kCondDemoOnly, task.name);
        m.output(L.params(name), params_to_string(out.demo_only->params, stats_sha,
                                                  {{"role", "demo_only"},
                                                   {"task", task.name},
                                                   {"config_hash", hash},
                                                   {"dataset_sha256", demo_sha},
                                                   {"train", to_json(cfg.demo_only)},
                                                   {"observation_mask", cfg.observation_mask},
                                                   {"final_loss", out.demo_only->loss_curve.back()}}));
        m.output(L.loss_curve(name), detail::loss_csv(out.demo_only->loss_curve));
    }
    m.write("finetune_" + task.name, cfg);
    return out;
}

// ---------------------------------------------------------------------------
// Rollouts and scoring (in memory)

inline RolloutConfig rollout_config(const ExperimentConfig& cfg, const std::string& label) {
    RolloutConfig rc;
    rc.episode = cfg.episode;
    rc.warmup = cfg.collect.controller;
    rc.velocity_limit = cfg.eval.velocity_limit;
    rc.observation_mask = cfg.mask();
    rc.label = label;
    return rc;
}

/// Reference run of the task's oracle on the index-th evaluation episode.
inline Trajectory task_reference(const ExperimentConfig& cfg, const TaskConfig& task, std::uint64_t index) {
    return demo_oracle(task_environment(cfg, task, TaskStream::Eval, index), task.tool, task.oracle.target_force,
                       task_episode_seed(cfg, task, TaskStream::Eval, index), task.oracle, cfg.episode);
}

inline RolloutRecord task_rollout(const ExperimentConfig& cfg, const TaskConfig& task, const Seq2SeqParams& params,
                                  const NormalizationStats& stats, std::uint64_t index, const std::string& label) {
    return rollout(params, stats, task_environment(cfg, task, TaskStream::Eval, index), task.tool,
                   task_episode_seed(cfg, task, TaskStream::Eval, index), rollout_config(cfg, label));
}

/// Metrics of one rollout against the oracle reference of the same episode.
inline std::map<std::string, double> score_rollout(const ExperimentConfig& cfg, const Trajectory& tr, int warmup,
                                                   const Trajectory& reference) {
    std::map<std::string, double> m;
    const EnvironmentSpec& env = tr.meta.env;
    const auto from = static_cast<std::size_t>(warmup);
    m["rmse_force"] = rmse_force(tr, force_profile(reference), from, cfg.eval.metrics.contact_threshold);
    m["wiped_area"] = wiped_area(tr, env, cfg.eval.metrics);
    if (env.kind == SurfaceKind::Inclined) {
        try {
            m["rmse_slope"] = rmse_slope(tr, env, cfg.eval.metrics, from);
        } catch (const DomainError&) {
            m["rmse_slope"] = std::numeric_limits<double>::quiet_NaN();
        }
    }
    return m;
}

struct ScoredRun {
    Trajectory trajectory;
    int warmup = 0;
};

/// Per-condition summaries over seeds. `runs[cond][i]` and `references[i]`
/// belong to cfg.eval.seeds[i].
inline MetricReport build_report(const ExperimentConfig& cfg, const std::string& task,
                                 const std::map<std::string, std::vector<ScoredRun>>& runs,
                                 const std::vector<Trajectory>& references) {
    MetricReport rep;
    rep.task = task;
    rep.seeds = cfg.eval.seeds;
    for (const auto& [cond, list] : runs) {
        if (list.size() != references.size()) throw InputError("build_report: rollout count differs from seeds");
        std::map<std::string, std::vector<double>> values;
        for (std::size_t i = 0; i < list.size(); ++i)
            for (const auto& [name, v] : score_rollout(cfg, list[i].trajectory, list[i].warmup, references[i]))
                values[name].push_back(v);
        for (auto& [name, v] : values) rep.rows[cond][name] = summarize(std::move(v));
    }
    return rep;
}

/// Matched rollouts of several policies on a task (same environments and
/// seeds), scored against the task oracle.
inline MetricReport compare_baselines(const ExperimentConfig& cfg, const TaskConfig& task,
                                      const std::map<std::string, const Seq2SeqParams*>& policies,
                                      const NormalizationStats& stats) {
    std::map<std::string, std::vector<ScoredRun>> runs;
    std::vector<Trajectory> refs;
    for (std::uint64_t s : cfg.eval.seeds) refs.push_back(task_reference(cfg, task, s));
    for (const auto& [cond, p] : policies) {
        if (p == nullptr) throw MissingInputError("compare_baselines: no parameters for condition '" + cond + "'");
        for (std::uint64_t s : cfg.eval.seeds) {
            RolloutRecord r = task_rollout(cfg, task, *p, stats, s, cond);
            runs[cond].push_back({std::move(r.trajectory), r.warmup_frames});
        }
    }
    return build_report(cfg, task.name, runs, refs);
}

// ---------------------------------------------------------------------------

inline void cmd_rollout(const ExperimentConfig& cfg, const CommandOptions& opt) {
    const TaskConfig& task = cfg.task(opt.task);
    const ArtifactLayout L{cfg.output_dir};
    const std::string hash = config_hash(cfg);
    detail::require(L.stats(), "normalization stats (run pretrain first)");
    detail::Manifest m(L, "rollout", hash);
    m.input(L.stats());
    const NormalizationStats stats = detail::load_stats(L.stats());
    const std::string stats_sha = file_sha256(L.stats());
    std::map<std::string, LoadedParams> policies;
    for (const std::string& cond : opt.conditions) {
        const fs::path p = L.params(ArtifactLayout::model_name(cond, task.name));
        detail::require(p, "parameters for condition '" + cond + "'");
        m.input(p);
        policies.emplace(cond, detail::load_params(p));
        if (policies.at(cond).stats_sha256 != stats_sha)
            throw ConfigError("rollout: parameters for '" + cond + "' were trained with other stats");
    }
    for (std::uint64_t s : cfg.eval.seeds) {
        const json meta{{"config_hash", hash}, {"task", task.name}, {"eval_seed", s}};
        RolloutRecord ref;
        ref.trajectory = task_reference(cfg, task, s);
        json ref_meta = meta;
        ref_meta["condition"] = kCondOracle;
        m.output(L.rollout(task.name, kCondOracle, s), rollout_to_jsonl(ref, ref_meta));
        for (const auto& [cond, lp] : policies) {
            const RolloutRecord r = task_rollout(cfg, task, lp.params, stats, s, cond);
            json cm = meta;
            cm["condition"] = cond;
            m.output(L.rollout(task.name, cond, s), rollout_to_jsonl(r, cm));
            m.output(L.latents(task.name, cond, s), latents_to_csv(r));
        }
    }
    m.write("rollout_" + task.name, cfg);
    if (opt.log) *opt.log << "rolled out " << policies.size() << " conditions x " << cfg.eval.seeds.size() << " seeds\n";
}

inline MetricReport cmd_eval(const ExperimentConfig& cfg, const CommandOptions& opt) {
    const TaskConfig& task = cfg.task(opt.task);
    const ArtifactLayout L{cfg.output_dir};
    const std::string hash = config_hash(cfg);
    detail::Manifest m(L, "eval", hash);

    auto load = [&](const std::string& cond, std::uint64_t s) {
        const fs::path p = L.rollout(task.name, cond, s);
        m.input(p);
        const std::string text = read_file(p);
        const json head = json::parse(text.substr(0, text.find('\n')));
        const std::string got = head.at("meta").value("config_hash", std::string{});
        if (got != hash && !opt.allow_hash_mismatch)
            throw ConfigError("eval: " + p.string() + " was produced under config " + got.substr(0, 12) +
                              ", current config is " + hash.substr(0, 12) + " (use --allow-hash-mismatch)");
        return rollout_from_jsonl(text, p.string());
    };

    std::vector<std::string> present;
    for (const std::string& cond : opt.conditions) {
        bool all = true;
        for (std::uint64_t s : cfg.eval.seeds) all = all && fs::exists(L.rollout(task.name, cond, s));
        if (all) present.push_back(cond);
    }
    if (present.empty()) throw MissingInputError("eval: no rollouts found for task '" + task.name + "'");
    for (std::uint64_t s : cfg.eval.seeds) detail::require(L.rollout(task.name, kCondOracle, s), "oracle reference rollout");

    std::vector<Trajectory> refs;
    for (std::uint64_t s : cfg.eval.seeds) refs.push_back(load(kCondOracle, s).trajectory);
    std::map<std::string, std::vector<ScoredRun>> runs;
    for (const std::string& cond : present)
        for (std::uint64_t s : cfg.eval.seeds) {
            RolloutRecord r = load(cond, s);
            runs[cond].push_back({std::move(r.trajectory), r.warmup_frames});
        }
    MetricReport rep = build_report(cfg, task.name, runs, refs);
    json j = rep.to_json();
    j["config_hash"] = hash;
    m.output(L.eval_csv(task.name), rep.to_csv());
    m.output(L.eval_json(task.name), j.dump(2) + "\n");
    m.write("eval_" + task.name, cfg);
    return rep;
}

// ---------------------------------------------------------------------------
// Latent-space analysis

struct LatentSnapshots {
    Mat cells;                 // one row per rollout
    std::vector<int> labels;   // index into pca_inclinations
    std::vector<double> inclinations;
};

/// Encoder cell states at `snapshot_time` from rollouts on Inclined surfaces.
inline LatentSnapshots snapshot_latents(const ExperimentConfig& cfg, const Seq2SeqParams& params,
                                        const NormalizationStats& stats) {
    const int frame = static_cast<int>(std::lround(cfg.analysis.snapshot_time / kDt));
    const int k = frame - std::min(params.dims.past_steps, episode_frames(cfg.episode));
    const int per = cfg.analysis.rollouts_per_inclination;
    const auto& incl = cfg.analysis.pca_inclinations;
    if (k < 0) throw ConfigError("analysis.snapshot_time falls inside the warm-up");
    LatentSnapshots out;
    out.cells.resize(static_cast<Eigen::Index>(incl.size()) * per, params.dims.hidden);
    Eigen::Index row = 0;
    for (std::size_t c = 0; c < incl.size(); ++c)
        for (int r = 0; r < per; ++r, ++row) {
            EnvironmentSpec e = cfg.collect.inclined_template;
            e.kind = SurfaceKind::Inclined;
            e.inclination = incl[c];
            const std::uint64_t seed = mix_seed(cfg.seed ^ 0xA11A, c * 1000 + static_cast<std::uint64_t>(r));
            const RolloutRecord rec = rollout(params, stats, e, cfg.collect.tool, seed, rollout_config(cfg, "analysis"));
            if (k >= static_cast<int>(rec.latents.size())) throw ConfigError("analysis.snapshot_time beyond rollout");
            out.cells.row(row) = rec.latents[static_cast<std::size_t>(k)].c.transpose();
            out.labels.push_back(static_cast<int>(c));
            out.inclinations.push_back(incl[c]);
        }
    return out;
}

struct AnalysisOutputs {
    PcaResult pca;
    double pca_lda_accuracy = 0.0;
    TsneResult tsne;
};

inline AnalysisOutputs cmd_analyze(const ExperimentConfig& cfg, const CommandOptions& opt = {}) {
    const ArtifactLayout L{cfg.output_dir};
    const std::string hash = config_hash(cfg);
    detail::require(L.params("base"), "base parameters (run pretrain first)");
    detail::require(L.stats(), "normalization stats (run pretrain first)");
    detail::Manifest m(L, "analyze", hash);
    m.input(L.params("base"));
    m.input(L.stats());
    const LoadedParams base = detail::load_params(L.params("base"));
    const NormalizationStats stats = detail::load_stats(L.stats());

    AnalysisOutputs out;
    const LatentSnapshots snaps = snapshot_latents(cfg, base.params, stats);
    out.pca = pca(snaps.cells, 2);
    out.pca_lda_accuracy = lda_accuracy(out.pca.projections, snaps.labels);
    {
        std::ostringstream csv;
        csv.precision(17);
        csv << "inclination,label,pc1,pc2\n";
        for (Eigen::Index i = 0; i < out.pca.projections.rows(); ++i)
            csv << snaps.inclinations[static_cast<std::size_t>(i)] << "," << snaps.labels[static_cast<std::size_t>(i)]
                << "," << out.pca.projections(i, 0) << "," << out.pca.projections(i, 1) << "\n";
        m.output(L.analysis("pca.csv"), csv.str());
        json j{{"config_hash", hash},
               {"snapshot_time", cfg.analysis.snapshot_time},
               {"explained_ratio", std::vector<double>(out.pca.explained_ratio.data(),
                                                       out.pca.explained_ratio.data() + out.pca.explained_ratio.size())},
               {"lda_accuracy", out.pca_lda_accuracy}};
        m.output(L.analysis("pca.json"), j.dump(2) + "\n");
    }

    // t-SNE over the cell-state stream of base-policy rollouts on every task
    // environment (first evaluation episode each).
    std::vector<std::string> source;
    std::vector<const Frame*> frames;
    std::vector<RolloutRecord> recs;
    for (const TaskConfig& t : cfg.tasks) recs.push_back(task_rollout(cfg, t, base.params, stats, cfg.eval.seeds.front(), t.name));
    std::vector<Vec> rows;
    for (std::size_t ti = 0; ti < recs.size(); ++ti) {
        const RolloutRecord& r = recs[ti];
        for (std::size_t k = 0; k < r.latents.size(); k += static_cast<std::size_t>(cfg.analysis.tsne_stride)) {
            rows.push_back(r.latents[k].c);
            source.push_back(cfg.tasks[ti].name);
            frames.push_back(&r.trajectory.frames[static_cast<std::size_t>(r.warmup_frames) + k]);
        }
    }
    if (!rows.empty() && static_cast<double>(rows.size()) > 3.0 * cfg.analysis.tsne.perplexity) {
        Mat data(static_cast<Eigen::Index>(rows.size()), base.params.dims.hidden);
        for (std::size_t i = 0; i < rows.size(); ++i) data.row(static_cast<Eigen::Index>(i)) = rows[i].transpose();
        out.tsne = tsne(data, cfg.analysis.tsne);
        std::ostringstream csv;
        csv.precision(17);
        csv << "source,t,f_x,f_z,y1,y2\n";
        for (std::size_t i = 0; i < rows.size(); ++i)
            csv << source[i] << "," << frames[i]->sensors.t << "," << frames[i]->sensors.wrench.f_x << ","
                << frames[i]->sensors.wrench.f_z << "," << out.tsne.embedding(static_cast<Eigen::Index>(i), 0) << ","
                << out.tsne.embedding(static_cast<Eigen::Index>(i), 1) << "\n";
        m.output(L.analysis("tsne.csv"), csv.str());
    } else if (opt.log) {
        *opt.log << "analyze: too few latent snapshots for t-SNE, skipped\n";
    }
    m.write("analyze", cfg);
    return out;
}

// ---------------------------------------------------------------------------

/// Applies a `dotted.path=json_value` override to a config document; values
/// that do not parse as JSON are taken as strings.
inline void apply_override(json& doc, const std::string& assignment) {
    const auto eq = assignment.find('=');
    if (eq == std::string::npos || eq == 0) throw ConfigError("override '" + assignment + "' is not key=value");
    const std::string path = assignment.substr(0, eq);
    const std::string text = assignment.substr(eq + 1);
    json value;
    try {
        value = json::parse(text);
    } catch (const json::parse_error&) {
        value = text;
    }
    json* node = &doc;
    std::size_t pos = 0;
    while (true) {
        const std::size_t dot = path.find('.', pos);
        const std::string key = path.substr(pos, dot == std::string::npos ? std::string::npos : dot - pos);
        if (key.empty()) throw ConfigError("override '" + assignment + "' has an empty path segment");
        if (node->is_array()) {
            std::size_t idx = 0;
            try {
                idx = std::stoul(key);
            } catch (const std::exception&) {
                throw ConfigError("override '" + assignment + "': '" + key + "' is not an array index");
            }
            if (idx >= node->size()) throw ConfigError("override '" + assignment + "': index out of range");
            node = &(*node)[idx];
        } else {
            if (!node->is_object()) *node = json::object();
            node = &(*node)[key];
        }
        if (dot == std::string::npos) break;
        pos = dot + 1;
    }
    *node = value;
}

inline ExperimentConfig load_experiment(const fs::path& path, const std::vector<std::string>& overrides = {}) {
    if (!fs::exists(path)) throw ConfigError("config file not found: " + path.string());
    json doc = parse_json(read_file(path), path.string());
    for (const auto& o : overrides) apply_override(doc, o);
    return experiment_from_json(doc);
}

}  // namespace toolskill
