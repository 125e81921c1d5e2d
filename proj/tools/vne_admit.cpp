// vne_admit: train, evaluate and sweep admission-control policies.

#include <filesystem>
#include <fstream>
#include <iostream>
#include <memory>
#include <optional>
#include <string>
#include <vector>

#include <CLI11.hpp>

#include "vne_admit/agents.hpp"
#include "vne_admit/config.hpp"
#include "vne_admit/error.hpp"
#include "vne_admit/harness.hpp"
#include "vne_admit/sweep.hpp"

namespace fs = std::filesystem;
using namespace vne_admit;

namespace {

enum Exit : int {
    exit_ok = 0,
    exit_failure = 1,
    exit_config = 2,
    exit_diverged = 3,
    exit_signature = 4,
    exit_partial_sweep = 5,
    exit_digest = 6,
};

struct Common {
    std::string config;
    std::vector<std::string> set;
    unsigned jobs = default_jobs();
};

void add_config_options(CLI::App* cmd, Common& c) {
    cmd->add_option("-c,--config", c.config, "configuration file (key = value)");
    cmd->add_option("--set", c.set, "override a key, e.g. --set reward.c_d=1.8")->take_all();
}

void add_jobs_option(CLI::App* cmd, Common& c) {
    cmd->add_option("-j,--jobs", c.jobs, "worker threads (default: hardware threads)")->check(CLI::PositiveNumber);
}

void print_warnings(const ExperimentConfig& cfg) {
    for (const auto& w : cfg.env.warnings()) std::cerr << "warning: " << w << '\n';
}

// --------------------------------------------------------------------------

struct TrainArgs {
    Common common;
    std::string out;
    std::string log;
    std::optional<std::int64_t> steps;
    std::optional<std::uint64_t> seed;
};

int run_train(const TrainArgs& a) {
    auto cfg = load_config(a.common.config, a.common.set);
    print_warnings(cfg);
    const std::int64_t steps = a.steps.value_or(cfg.harness.train_steps);
    const std::uint64_t seed = a.seed.value_or(cfg.harness.base_seed);
    if (steps < 0) throw ConfigError("--steps must be >= 0");
    if (steps == 0) std::cerr << "warning: 0 training steps; writing the untrained initial policy\n";

    auto res = train(cfg.env, cfg.learner, steps, seed, [&](const TrainLogEntry& e) {
        if (e.step % 10'000 == 0 || e.step == steps)
            std::cerr << "step " << e.step << "/" << steps << "  mean reward " << format_fixed(e.mean_reward, 3)
                      << "  epsilon " << format_fixed(e.epsilon, 3) << '\n';
    });
    write_file(a.out, to_json(*res.policy).dump());
    write_file(a.log.empty() ? a.out + ".log.csv" : a.log, train_log_csv(res.log));
    std::cout << "policy written to " << a.out << '\n';
    return exit_ok;
}

// --------------------------------------------------------------------------

struct EvalArgs {
    Common common;
    std::string policy;
    std::string out;
    std::string heatmap;
    std::optional<std::size_t> runs;
    std::optional<std::int64_t> steps;
    std::optional<std::uint64_t> seed;
};

int run_eval(const EvalArgs& a) {
    auto cfg = load_config(a.common.config, a.common.set);
    print_warnings(cfg);
    const EnvSignature sig = Environment(cfg.env).signature();

    std::unique_ptr<Policy> policy;
    if (a.policy == "always-accept") {
        policy = std::make_unique<AlwaysAccept>();
    } else {
        policy = load_policy(a.policy, &sig);
    }
    policy->set_mode(PolicyMode::evaluation);

    const auto rep = evaluate(*policy, cfg.env, a.runs.value_or(cfg.harness.runs), a.steps.value_or(cfg.harness.steps),
                              a.seed.value_or(cfg.harness.base_seed), a.common.jobs);
    if (a.out.empty()) {
        write_run_csv(std::cout, rep.runs);
    } else {
        std::ostringstream os;
        write_run_csv(os, rep.runs);
        write_file(a.out, os.str());
    }
    if (!a.heatmap.empty()) {
        std::ostringstream os;
        rep.heatmap.write_csv(os);
        write_file(a.heatmap, os.str());
    }
    std::cout << summary_line(rep.median) << '\n';
    return exit_ok;
}

// --------------------------------------------------------------------------

struct SweepArgs {
    Common common;
    std::string spec;
    std::string out;
    bool resume = false;
};

int run_sweep_command(const SweepArgs& a) {
    auto cfg = load_config(a.spec, a.common.set, true);
    print_warnings(cfg);
    const auto spec = to_sweep_spec(cfg);
    const fs::path dir = a.out.empty() ? fs::path(cfg.output_dir) : fs::path(a.out);
    SweepOptions opt;
    opt.jobs = a.common.jobs;
    opt.resume = a.resume;
    opt.progress = [](const std::string& line) { std::cerr << line << '\n'; };
    const auto outcome = run_sweep(spec, dir, opt);

    std::size_t failed = 0;
    for (const auto& c : outcome.manifest.cells)
        if (c.status != CellStatus::done) ++failed;
    if (failed) {
        std::cerr << failed << " cell(s) failed; see " << (dir / manifest_name).string() << '\n';
        return exit_partial_sweep;
    }
    std::cout << read_file(dir / "matrix.csv");
    return exit_ok;
}

// --------------------------------------------------------------------------

int run_report(const std::string& dir_arg) {
    const fs::path dir(dir_arg);
    if (!fs::exists(dir / manifest_name)) throw ConfigError("no " + std::string(manifest_name) + " in " + dir.string());
    auto manifest = read_manifest(dir);
    verify_digests(manifest, dir);
    if (!manifest.complete()) {
        std::cerr << "sweep in " << dir.string() << " is incomplete; resume it before reporting\n";
        return exit_partial_sweep;
    }
    const auto spec = to_sweep_spec(load_config((dir / spec_file_name).string(), {}, true, [](const std::string&) {
        return std::optional<std::string>();
    }));
    manifest.reports = write_reports(spec, dir);
    write_file(dir / manifest_name, to_json(spec, manifest).dump(2) + "\n");
    std::cout << read_file(dir / "matrix.csv");
    return exit_ok;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"Admission control for wireless virtual network embedding"};
    app.require_subcommand(1);

    TrainArgs train_args;
    auto* train_cmd = app.add_subcommand("train", "train a Q-learning admission policy");
    add_config_options(train_cmd, train_args.common);
    train_cmd->add_option("-o,--out", train_args.out, "policy file to write")->required();
    train_cmd->add_option("--log", train_args.log, "training log CSV (default: <out>.log.csv)");
    train_cmd->add_option("--steps", train_args.steps, "training steps (default: harness.train_steps)");
    train_cmd->add_option("--seed", train_args.seed, "training seed (default: harness.base_seed)");

    EvalArgs eval_args;
    auto* eval_cmd = app.add_subcommand("eval", "evaluate a policy over seeded runs");
    add_config_options(eval_cmd, eval_args.common);
    add_jobs_option(eval_cmd, eval_args.common);
    eval_cmd->add_option("-p,--policy", eval_args.policy, "policy file, or 'always-accept'")->required();
    eval_cmd->add_option("-o,--out", eval_args.out, "per-run CSV (default: standard output)");
    eval_cmd->add_option("--heatmap", eval_args.heatmap, "write the (delta, lambda) TP/FN heatmap CSV");
    eval_cmd->add_option("--runs", eval_args.runs, "runs (default: harness.runs)");
    eval_cmd->add_option("--steps", eval_args.steps, "steps per run (default: harness.steps)");
    eval_cmd->add_option("--seed", eval_args.seed, "base seed (default: harness.base_seed)");

    SweepArgs sweep_args;
    auto* sweep_cmd = app.add_subcommand("sweep", "train and evaluate one agent per sweep value");
    sweep_cmd->add_option("-s,--spec", sweep_args.spec, "sweep spec (config plus sweep.* keys)")->required();
    sweep_cmd->add_option("--set", sweep_args.common.set, "override a key")->take_all();
    add_jobs_option(sweep_cmd, sweep_args.common);
    sweep_cmd->add_option("-o,--out", sweep_args.out, "output directory (default: output.dir)");
    sweep_cmd->add_flag("--resume", sweep_args.resume, "skip cells already completed according to the manifest");

    std::string report_dir;
    auto* report_cmd = app.add_subcommand("report", "rebuild the report CSVs of a finished sweep");
    report_cmd->add_option("-d,--dir", report_dir, "sweep directory")->required();

    Common config_args;
    bool config_sweep = false;
    auto* config_cmd = app.add_subcommand("config", "print the effective configuration");
    add_config_options(config_cmd, config_args);
    config_cmd->add_flag("--sweep", config_sweep, "accept and print sweep.* keys");

    CLI11_PARSE(app, argc, argv);

    try {
        if (*train_cmd) return run_train(train_args);
        if (*eval_cmd) return run_eval(eval_args);
        if (*sweep_cmd) return run_sweep_command(sweep_args);
        if (*report_cmd) return run_report(report_dir);
        if (*config_cmd) {
            std::cout << emit_config(load_config(config_args.config, config_args.set, config_sweep), config_sweep);
            return exit_ok;
        }
    } catch (const ConfigError& e) {
        std::cerr << "config error: " << e.what() << '\n';
        return exit_config;
    } catch (const TrainingDiverged& e) {
        std::cerr << "training diverged: " << e.what() << '\n';
        return exit_diverged;
    } catch (const SignatureMismatch& e) {
        std::cerr << "signature mismatch: " << e.what() << '\n';
        return exit_signature;
    } catch (const DigestMismatch& e) {
        std::cerr << "refusing to report: " << e.what() << '\n';
        return exit_digest;
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << '\n';
        return exit_failure;
    }
    return exit_failure;
}
