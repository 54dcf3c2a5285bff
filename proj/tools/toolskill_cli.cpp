// toolskill: experiment driver.
//
//   toolskill <command> --config FILE [--set key.path=value ...] [--output-dir DIR]
//
// Exit codes: 0 ok, 2 configuration error, 3 missing input, 4 numeric failure.
// TOOLSKILL_OUTPUT_ROOT, when set, is prepended to a relative output_dir.

#include <algorithm>
#include <cstdlib>
#include <iostream>
#include <optional>
#include <string>
#include <vector>

#include <CLI11.hpp>

#include "toolskill/pipeline.hpp"

namespace {

using namespace toolskill;

enum Exit : int { kOk = 0, kFailure = 1, kConfig = 2, kMissing = 3, kNumeric = 4 };

struct Common {
    std::string config;
    std::vector<std::string> overrides;
    std::string output_dir;
    bool quiet = false;
};

void add_common(CLI::App* cmd, Common& c) {
    cmd->add_option("-c,--config", c.config, "experiment config (JSON)")->required();
    cmd->add_option("--set", c.overrides, "override a config value: dotted.path=json")->take_all();
    cmd->add_option("-o,--output-dir", c.output_dir, "override output_dir");
    cmd->add_flag("-q,--quiet", c.quiet, "no progress output");
}

ExperimentConfig load(const Common& c) {
    std::vector<std::string> ov = c.overrides;
    if (!c.output_dir.empty()) ov.push_back("output_dir=" + json(c.output_dir).dump());
    ExperimentConfig cfg = load_experiment(c.config, ov);
    if (const char* root = std::getenv("TOOLSKILL_OUTPUT_ROOT"); root != nullptr && *root != '\0') {
        const fs::path out(cfg.output_dir);
        if (out.is_relative()) cfg.output_dir = (fs::path(root) / out).string();
    }
    return cfg;
}

void print_report(const MetricReport& rep) {
    for (const auto& [cond, metrics] : rep.rows)
        for (const auto& [name, s] : metrics)
            std::cout << rep.task << "  " << cond << "  " << name << "  " << s.mean << " +- " << s.std << "\n";
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"few-shot tool-use skill transfer: data, training, rollouts, metrics"};
    app.require_subcommand(1);

    Common common;
    CommandOptions opt;
    std::optional<double> target_force;

    auto* collect = app.add_subcommand("collect", "record primitive-controller data or task demonstrations");
    add_common(collect, common);
    collect->add_flag("--demo", opt.demo, "record demonstrations of a task with its oracle");
    collect->add_option("--task", opt.task, "task name (with --demo; default: every task)");
    collect->add_option("--target-force", target_force, "override the oracle target force (N)");

    auto* pre = app.add_subcommand("pretrain", "fit normalization stats and pre-train the base policy");
    add_common(pre, common);

    auto* ft = app.add_subcommand("finetune", "adapt the decoder head to a task; also trains the demo-only baseline");
    add_common(ft, common);
    ft->add_option("--task", opt.task, "task name")->required();
    ft->add_flag("--allow-full", opt.allow_full, "allow a fine-tune mask other than the decoder head");
    ft->add_flag("--skip-demo-only", opt.skip_demo_only, "do not train the demo-only baseline");

    auto* ro = app.add_subcommand("rollout", "closed-loop rollouts of each condition on the task's eval episodes");
    add_common(ro, common);
    ro->add_option("--task", opt.task, "task name")->required();
    ro->add_option("--conditions", opt.conditions, "subset of finetuned, no_ft, demo_only");

    auto* ev = app.add_subcommand("eval", "score rollouts against the oracle reference");
    add_common(ev, common);
    ev->add_option("--task", opt.task, "task name")->required();
    ev->add_flag("--allow-hash-mismatch", opt.allow_hash_mismatch, "score rollouts made under another config");

    auto* an = app.add_subcommand("analyze", "PCA and t-SNE of the base policy's cell states");
    add_common(an, common);

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        const int rc = app.exit(e);
        return rc == 0 ? kOk : kConfig;
    }

    try {
        if (common.quiet) opt.log = nullptr;
        ExperimentConfig cfg = load(common);
        if (target_force) {
            if (!opt.demo) throw ConfigError("--target-force requires --demo");
            std::vector<std::string> names;
            if (opt.task.empty())
                for (const auto& t : cfg.tasks) names.push_back(t.name);
            else
                names.push_back(opt.task);
            for (auto& t : cfg.tasks)
                if (std::find(names.begin(), names.end(), t.name) != names.end()) t.oracle.target_force = *target_force;
        }
        if (*collect) cmd_collect(cfg, opt);
        else if (*pre) {
            const TrainResult r = cmd_pretrain(cfg, opt);
            std::cout << "pretrain: loss " << r.loss_curve.front() << " -> " << r.loss_curve.back() << "\n";
        } else if (*ft) {
            const FinetuneOutputs r = cmd_finetune(cfg, opt);
            std::cout << "finetune: loss " << r.finetuned.loss_curve.front() << " -> " << r.finetuned.loss_curve.back()
                      << "\n";
        } else if (*ro) cmd_rollout(cfg, opt);
        else if (*ev) print_report(cmd_eval(cfg, opt));
        else if (*an) {
            const AnalysisOutputs r = cmd_analyze(cfg, opt);
            std::cout << "pca: explained " << r.pca.explained_ratio.transpose() << ", lda accuracy "
                      << r.pca_lda_accuracy << "\n";
        }
    } catch (const ConfigError& e) {
        std::cerr << "config error: " << e.what() << "\n";
        return kConfig;
    } catch (const MissingInputError& e) {
        std::cerr << "missing input: " << e.what() << "\n";
        return kMissing;
    } catch (const NumericError& e) {
        std::cerr << "numeric failure: " << e.what() << "\n";
        return kNumeric;
    } catch (const InputError& e) {
        std::cerr << "invalid input: " << e.what() << "\n";
        return kConfig;
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        return kFailure;
    }
    return kOk;
}
