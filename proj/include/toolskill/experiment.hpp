#pragma once

// Experiment configuration: one JSON document describing data collection,
// the model, the three training runs, downstream tasks and evaluation.
// Unknown keys are rejected at every level.

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "toolskill/common.hpp"
#include "toolskill/env_sim.hpp"
#include "toolskill/eval.hpp"
#include "toolskill/io.hpp"
#include "toolskill/primitive.hpp"
#include "toolskill/sensing.hpp"
#include "toolskill/training.hpp"

namespace toolskill {

/// A downstream task: target environment (and optionally tool), the oracle's
/// controller parameters, how many demonstrations to record.
struct TaskConfig {
    std::string name;
    EnvironmentSpec env{};
    // When set, demo and evaluation environments draw their inclination
    // uniformly from this range (Inclined tasks).
    std::optional<std::array<double, 2>> inclination_range;
    ToolSpec tool{};
    PrimitiveParams oracle{};
    int demo_count = 3;
};

struct EvalConfig {
    std::vector<std::uint64_t> seeds{0, 1, 2};
    MetricConfig metrics{};
    double velocity_limit = 2.0;
};

struct AnalysisConfig {
    std::vector<double> pca_inclinations{-0.25, 0.0, 0.25};
    int rollouts_per_inclination = 10;
    double snapshot_time = 5.0;  // s
    int tsne_stride = 2;         // keep every n-th latent snapshot
    TsneConfig tsne{};
};

struct ExperimentConfig {
    std::string output_dir = "runs/default";
    std::uint64_t seed = 0;
    EpisodeConfig episode{};
    CollectConfig collect{};
    Seq2SeqDims dims{};
    std::string observation_mask = "full";
    TrainConfig pretrain = TrainConfig::pretraining();
    TrainConfig finetune = TrainConfig::finetuning();
    TrainConfig demo_only = TrainConfig::pretraining();
    std::vector<TaskConfig> tasks;
    EvalConfig eval{};
    AnalysisConfig analysis{};

    const TaskConfig& task(const std::string& name) const {
        for (const auto& t : tasks)
            if (t.name == name) return t;
        throw ConfigError("unknown task '" + name + "'");
    }

    ObservationMask mask() const { return ObservationMask::from_name(observation_mask); }
};

// ---------------------------------------------------------------------------
// JSON

inline std::string mask_to_string(const GroupMask& m) {
    if (m.is_all()) return "all";
    if (m.is_decoder_head_only()) return "decoder_head";
    std::string s;
    for (ParamGroup g : kAllGroups)
        if (m[g]) s += (s.empty() ? "" : "+") + std::string(group_name(g));
    return s.empty() ? "none" : s;
}

inline GroupMask mask_from_string(const std::string& s) {
    if (s == "all") return GroupMask::all();
    if (s == "decoder_head") return GroupMask::decoder_head_only();
    GroupMask m = GroupMask::none();
    std::size_t pos = 0;
    while (pos <= s.size()) {
        const std::size_t end = std::min(s.find('+', pos), s.size());
        const std::string tok = s.substr(pos, end - pos);
        bool found = false;
        for (ParamGroup g : kAllGroups)
            if (tok == group_name(g)) {
                m.on[static_cast<std::size_t>(g)] = true;
                found = true;
            }
        if (!found) throw ConfigError("unknown parameter group '" + tok + "' in mask '" + s + "'");
        pos = end + 1;
    }
    return m;
}

inline json to_json(const TrainConfig& c) {
    return {{"epochs", c.epochs},         {"lr", c.lr},
            {"beta", c.beta},             {"dropout", c.dropout},
            {"batch_size", c.batch_size}, {"window_stride", c.window_stride},
            {"seed", c.seed},             {"mask", mask_to_string(c.mask)}};
}

inline TrainConfig train_config_from_json(const json& j, const std::string& where, TrainConfig c) {
    std::string mask = mask_to_string(c.mask);
    detail::FieldReader(j, where)
        .opt("epochs", c.epochs)
        .opt("lr", c.lr)
        .opt("beta", c.beta)
        .opt("dropout", c.dropout)
        .opt("batch_size", c.batch_size)
        .opt("window_stride", c.window_stride)
        .opt("seed", c.seed)
        .opt("mask", mask)
        .finish();
    c.mask = mask_from_string(mask);
    try {
        c.validate();
    } catch (const InputError& e) {
        throw ConfigError(where + ": " + e.what());
    }
    return c;
}

inline json to_json(const TaskConfig& t) {
    json j{{"name", t.name},
           {"env", to_json(t.env)},
           {"tool", to_json(t.tool)},
           {"oracle", to_json(t.oracle)},
           {"demo_count", t.demo_count}};
    if (t.inclination_range) j["inclination_range"] = *t.inclination_range;
    return j;
}

inline TaskConfig task_from_json(const json& j, const std::string& where) {
    TaskConfig t;
    detail::FieldReader r(j, where);
    r.req("name", t.name).opt("demo_count", t.demo_count).known("env").known("tool").known("oracle").known(
        "inclination_range");
    r.finish();
    if (t.name.empty()) throw ConfigError(where + ": empty task name");
    for (char ch : t.name)
        if (!(std::isalnum(static_cast<unsigned char>(ch)) || ch == '_' || ch == '-'))
            throw ConfigError(where + ": task name may only contain letters, digits, '_' and '-'");
    if (j.contains("env")) t.env = environment_from_json(j["env"], where + ".env");
    if (j.contains("tool")) t.tool = tool_from_json(j["tool"], where + ".tool");
    if (j.contains("oracle")) t.oracle = primitive_params_from_json(j["oracle"], where + ".oracle");
    if (j.contains("inclination_range")) {
        std::array<double, 2> r2{};
        try {
            r2 = j["inclination_range"].get<std::array<double, 2>>();
        } catch (const json::exception& e) {
            throw ConfigError(where + ".inclination_range: " + e.what());
        }
        if (!(r2[0] <= r2[1])) throw ConfigError(where + ".inclination_range: lower bound above upper");
        t.inclination_range = r2;
    }
    if (t.demo_count < 1) throw ConfigError(where + ": demo_count must be >= 1");
    try {
        t.env.validate();
        t.tool.validate();
        t.oracle.validate();
    } catch (const InputError& e) {
        throw ConfigError(where + ": " + e.what());
    }
    return t;
}

inline json to_json(const ExperimentConfig& c) {
    json tasks = json::array();
    for (const auto& t : c.tasks) tasks.push_back(to_json(t));
    const CollectConfig& cc = c.collect;
    return {
        {"output_dir", c.output_dir},
        {"seed", c.seed},
        {"episode", {{"duration", c.episode.duration}}},
        {"sensors", to_json(c.episode.sensors)},
        {"sim", to_json(c.episode.sim)},
        {"collect",
         {{"inclined_count", cc.inclined_count},
          {"step_count", cc.step_count},
          {"inclination_range", {cc.inclination_min, cc.inclination_max}},
          {"step_height_range", {cc.step_height_min, cc.step_height_max}},
          {"inclined_env", to_json(cc.inclined_template)},
          {"step_env", to_json(cc.step_template)}}},
        {"tool", to_json(cc.tool)},
        {"controller", to_json(cc.controller)},
        {"model", {{"past_steps", c.dims.past_steps}, {"future_steps", c.dims.future_steps}, {"hidden", c.dims.hidden}}},
        {"observation_mask", c.observation_mask},
        {"pretrain", to_json(c.pretrain)},
        {"finetune", to_json(c.finetune)},
        {"demo_only", to_json(c.demo_only)},
        {"tasks", tasks},
        {"eval",
         {{"seeds", c.eval.seeds},
          {"slope_window", c.eval.metrics.slope_window},
          {"contact_threshold", c.eval.metrics.contact_threshold},
          {"wipe_cell", c.eval.metrics.wipe_cell},
          {"velocity_limit", c.eval.velocity_limit}}},
        {"analysis",
         {{"pca_inclinations", c.analysis.pca_inclinations},
          {"rollouts_per_inclination", c.analysis.rollouts_per_inclination},
          {"snapshot_time", c.analysis.snapshot_time},
          {"tsne_stride", c.analysis.tsne_stride},
          {"tsne",
           {{"perplexity", c.analysis.tsne.perplexity},
            {"learning_rate", c.analysis.tsne.learning_rate},
            {"iterations", c.analysis.tsne.iterations},
            {"seed", c.analysis.tsne.seed}}}}},
    };
}

inline ExperimentConfig experiment_from_json(const json& j) {
    ExperimentConfig c;
    detail::FieldReader top(j, "config");
    top.opt("output_dir", c.output_dir).opt("seed", c.seed);
    for (const char* k : {"episode", "sensors", "sim", "collect", "tool", "controller", "model", "observation_mask",
                          "pretrain", "finetune", "demo_only", "tasks", "eval", "analysis"})
        top.known(k);
    top.finish();

    if (j.contains("episode"))
        detail::FieldReader(j["episode"], "config.episode").opt("duration", c.episode.duration).finish();
    if (j.contains("sensors")) c.episode.sensors = sensor_config_from_json(j["sensors"], "config.sensors");
    if (j.contains("sim")) c.episode.sim = sim_config_from_json(j["sim"], "config.sim");

    CollectConfig& cc = c.collect;
    if (j.contains("collect")) {
        const json& cj = j["collect"];
        std::array<double, 2> incl{cc.inclination_min, cc.inclination_max};
        std::array<double, 2> steps{cc.step_height_min, cc.step_height_max};
        detail::FieldReader(cj, "config.collect")
            .opt("inclined_count", cc.inclined_count)
            .opt("step_count", cc.step_count)
            .opt("inclination_range", incl)
            .opt("step_height_range", steps)
            .known("inclined_env")
            .known("step_env")
            .finish();
        cc.inclination_min = incl[0];
        cc.inclination_max = incl[1];
        cc.step_height_min = steps[0];
        cc.step_height_max = steps[1];
        if (cj.contains("inclined_env"))
            cc.inclined_template = environment_from_json(cj["inclined_env"], "config.collect.inclined_env");
        if (cj.contains("step_env"))
            cc.step_template = environment_from_json(cj["step_env"], "config.collect.step_env", cc.step_template);
        if (cc.inclined_count < 1 || cc.step_count < 1)
            throw ConfigError("config.collect: trajectory counts must be >= 1");
        if (!(cc.inclination_min <= cc.inclination_max && cc.step_height_min <= cc.step_height_max))
            throw ConfigError("config.collect: empty sampling range");
    }
    if (j.contains("tool")) cc.tool = tool_from_json(j["tool"], "config.tool");
    if (j.contains("controller")) cc.controller = primitive_params_from_json(j["controller"], "config.controller");

    if (j.contains("model")) {
        detail::FieldReader(j["model"], "config.model")
            .opt("past_steps", c.dims.past_steps)
            .opt("future_steps", c.dims.future_steps)
            .opt("hidden", c.dims.hidden)
            .finish();
        if (c.dims.past_steps < 1 || c.dims.future_steps < 1 || c.dims.hidden < 1)
            throw ConfigError("config.model: dimensions must be >= 1");
    }
    if (j.contains("observation_mask")) {
        c.observation_mask = j["observation_mask"].get<std::string>();
        (void)c.mask();  // validates the name
    }
    if (j.contains("pretrain")) c.pretrain = train_config_from_json(j["pretrain"], "config.pretrain", c.pretrain);
    if (j.contains("finetune")) c.finetune = train_config_from_json(j["finetune"], "config.finetune", c.finetune);
    if (j.contains("demo_only"))
        c.demo_only = train_config_from_json(j["demo_only"], "config.demo_only", c.demo_only);
    if (!c.pretrain.mask.is_all()) throw ConfigError("config.pretrain: mask must be 'all'");
    if (!c.demo_only.mask.is_all()) throw ConfigError("config.demo_only: mask must be 'all'");

    if (j.contains("tasks")) {
        if (!j["tasks"].is_array()) throw ConfigError("config.tasks: expected an array");
        for (std::size_t i = 0; i < j["tasks"].size(); ++i) {
            TaskConfig t = task_from_json(j["tasks"][i], "config.tasks[" + std::to_string(i) + "]");
            for (const auto& other : c.tasks)
                if (other.name == t.name) throw ConfigError("config.tasks: duplicate task '" + t.name + "'");
            c.tasks.push_back(std::move(t));
        }
    }

    if (j.contains("eval")) {
        detail::FieldReader(j["eval"], "config.eval")
            .opt("seeds", c.eval.seeds)
            .opt("slope_window", c.eval.metrics.slope_window)
            .opt("contact_threshold", c.eval.metrics.contact_threshold)
            .opt("wipe_cell", c.eval.metrics.wipe_cell)
            .opt("velocity_limit", c.eval.velocity_limit)
            .finish();
        if (c.eval.seeds.empty()) throw ConfigError("config.eval.seeds: at least one seed required");
        if (!(c.eval.metrics.wipe_cell > 0.0)) throw ConfigError("config.eval.wipe_cell: must be > 0");
        if (!(c.eval.velocity_limit > 0.0)) throw ConfigError("config.eval.velocity_limit: must be > 0");
        if (c.eval.metrics.slope_window < 3 || c.eval.metrics.slope_window % 2 == 0)
            throw ConfigError("config.eval.slope_window: must be odd and >= 3");
    }
    if (j.contains("analysis")) {
        const json& aj = j["analysis"];
        detail::FieldReader(aj, "config.analysis")
            .opt("pca_inclinations", c.analysis.pca_inclinations)
            .opt("rollouts_per_inclination", c.analysis.rollouts_per_inclination)
            .opt("snapshot_time", c.analysis.snapshot_time)
            .opt("tsne_stride", c.analysis.tsne_stride)
            .known("tsne")
            .finish();
        if (aj.contains("tsne"))
            detail::FieldReader(aj["tsne"], "config.analysis.tsne")
                .opt("perplexity", c.analysis.tsne.perplexity)
                .opt("learning_rate", c.analysis.tsne.learning_rate)
                .opt("iterations", c.analysis.tsne.iterations)
                .opt("seed", c.analysis.tsne.seed)
                .finish();
        if (c.analysis.rollouts_per_inclination < 1 || c.analysis.tsne_stride < 1)
            throw ConfigError("config.analysis: counts must be >= 1");
    }

    c.collect.episode = c.episode;
    c.collect.seed = c.seed;
    c.pretrain.dims = c.finetune.dims = c.demo_only.dims = c.dims;
    c.pretrain.observation_mask = c.finetune.observation_mask = c.demo_only.observation_mask = c.mask();
    try {
        (void)episode_frames(c.episode);
        c.collect.tool.validate();
        c.collect.controller.validate();
    } catch (const InputError& e) {
        throw ConfigError(std::string("config: ") + e.what());
    }
    return c;
}

/// Hash of the canonical (defaults filled in) configuration. The output
/// directory is excluded so relocated runs compare equal.
inline std::string config_hash(const ExperimentConfig& c) {
    json j = to_json(c);
    j.erase("output_dir");
    return sha256_hex(j.dump());
}

// ---------------------------------------------------------------------------
// Environment sampling for tasks

namespace detail {
inline std::uint64_t name_stream(const std::string& s) {
    std::uint64_t h = 1469598103934665603ULL;  // FNV-1a
    for (unsigned char ch : s) h = (h ^ ch) * 1099511628211ULL;
    return h;
}
}  // namespace detail

enum class TaskStream : std::uint64_t { Demo = 1, Eval = 2 };

/// Environment for the index-th demo or evaluation episode of a task.
inline EnvironmentSpec task_environment(const ExperimentConfig& c, const TaskConfig& t, TaskStream stream,
                                        std::uint64_t index) {
    EnvironmentSpec e = t.env;
    if (t.inclination_range) {
        std::mt19937_64 rng(
            mix_seed(mix_seed(c.seed ^ detail::name_stream(t.name), static_cast<std::uint64_t>(stream)), index));
        std::uniform_real_distribution<double> u((*t.inclination_range)[0], (*t.inclination_range)[1]);
        e.inclination = u(rng);
    }
    return e;
}

/// Seed of the index-th demo or evaluation episode of a task.
inline std::uint64_t task_episode_seed(const ExperimentConfig& c, const TaskConfig& t, TaskStream stream,
                                       std::uint64_t index) {
    return mix_seed(mix_seed(c.seed ^ detail::name_stream(t.name), 100 + static_cast<std::uint64_t>(stream)), index);
}

inline Dataset collect_demos(const ExperimentConfig& c, const TaskConfig& t) {
    Dataset d;
    for (int i = 0; i < t.demo_count; ++i) {
        const auto idx = static_cast<std::uint64_t>(i);
        Trajectory tr = demo_oracle(task_environment(c, t, TaskStream::Demo, idx), t.tool, t.oracle.target_force,
                                    task_episode_seed(c, t, TaskStream::Demo, idx), t.oracle, c.episode);
        d.trajectories.push_back(std::move(tr));
    }
    d.provenance = json{{"task", to_json(t)}, {"seed", c.seed}}.dump();
    return d;
}

}  // namespace toolskill
