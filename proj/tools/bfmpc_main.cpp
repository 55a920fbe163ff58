#include <CLI11.hpp>
#include <fstream>
#include <iostream>

#include "bfmpc/config.hpp"

namespace {

using bfmpc::ExperimentConfig;

struct CommonArgs {
    std::string config_path;
    std::optional<std::string> out_dir;
    std::optional<uint64_t> seed;
    std::optional<int> workers;
};

void add_common(CLI::App* cmd, CommonArgs& args) {
    cmd->add_option("--config", args.config_path, "experiment config (JSON)")
        ->required()
        ->check(CLI::ExistingFile);
    auto* out = cmd->add_option("--out", "output directory (default: runs/<timestamp>)");
    out->each([&args](const std::string& v) { args.out_dir = v; });
    cmd->add_option("--seed", "override the config seed")
        ->each([&args](const std::string& v) { args.seed = std::stoull(v); });
    cmd->add_option("--workers", "worker threads for sweeps (default: cores)")
        ->each([&args](const std::string& v) { args.workers = std::stoi(v); });
}

ExperimentConfig load(const CommonArgs& args) {
    ExperimentConfig cfg = bfmpc::load_config(args.config_path);
    if (args.seed) {
        cfg.seed = *args.seed;
        cfg.raw["seed"] = *args.seed;
    }
    if (args.workers) {
        cfg.workers = *args.workers;
        cfg.raw["workers"] = *args.workers;
    }
    return cfg;
}

void write_resolved(const ExperimentConfig& cfg, const std::filesystem::path& dir) {
    std::ofstream out(dir / "resolved_config.json");
    out << cfg.raw.dump(2) << "\n";
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"basis-function MPC toolkit"};
    app.require_subcommand(1);

    CommonArgs inspect_args, nmax_args, run_args, sweep_args;
    auto* cmd_inspect = app.add_subcommand("basis-inspect", "report basis family diagnostics");
    add_common(cmd_inspect, inspect_args);
    auto* cmd_nmax = app.add_subcommand("nmax", "compute the constraint horizon (certificate JSON)");
    add_common(cmd_nmax, nmax_args);
    auto* cmd_run = app.add_subcommand("run", "closed-loop experiment (log CSV + summary)");
    add_common(cmd_run, run_args);
    auto* cmd_sweep = app.add_subcommand("sweep", "batch sweep from the config grids");
    add_common(cmd_sweep, sweep_args);

    CLI11_PARSE(app, argc, argv);

    try {
        if (cmd_inspect->parsed()) {
            ExperimentConfig cfg = load(inspect_args);
            nlohmann::json report = bfmpc::basis_inspect(cfg);
            std::cout << report.dump(2) << "\n";
            if (inspect_args.out_dir) {
                auto dir = bfmpc::prepare_run_dir(inspect_args.out_dir, "basis-inspect");
                write_resolved(cfg, dir);
                std::ofstream(dir / "basis_report.json") << report.dump(2) << "\n";
            }
            return 0;
        }
        if (cmd_nmax->parsed()) {
            ExperimentConfig cfg = load(nmax_args);
            auto dir = bfmpc::prepare_run_dir(nmax_args.out_dir, "nmax");
            write_resolved(cfg, dir);
            auto res = bfmpc::run_nmax_experiment(cfg);
            std::ofstream(dir / "nmax_certificate.json") << res.certificate.dump(2) << "\n";
            if (res.result.cap_reached) {
                std::cerr << "nmax: cap reached after " << res.result.iterations
                          << " iterations; no horizon established\n";
                return 3;
            }
            std::cout << "nmax " << res.result.nmax << "\n";
            return 0;
        }
        if (cmd_run->parsed()) {
            ExperimentConfig cfg = load(run_args);
            auto dir = bfmpc::prepare_run_dir(run_args.out_dir, "run");
            write_resolved(cfg, dir);
            bfmpc::ClosedLoopLog log = bfmpc::run_single_experiment(cfg, dir);
            std::cout << log.summary_json().dump(2) << "\n";
            return 0;
        }
        if (cmd_sweep->parsed()) {
            ExperimentConfig cfg = load(sweep_args);
            auto dir = bfmpc::prepare_run_dir(sweep_args.out_dir, "sweep");
            write_resolved(cfg, dir);
            bfmpc::SweepTable table;
            if (!cfg.nu_grid.empty()) table = bfmpc::run_nu_sweep(cfg);
            else if (!cfg.s_grid.empty()) table = bfmpc::run_s_sweep(cfg);
            else if (!cfg.n_max_grid.empty()) table = bfmpc::run_robustness_sweep(cfg);
            else throw std::invalid_argument("config: sweep: no grid given");
            table.write_csv((dir / "sweep.csv").string());
            for (const auto& row : table.rows)
                std::cout << table.parameter_name << "=" << row.parameter
                          << " nmax=" << row.nmax << " mean_cost=" << row.mean_cost
                          << " infeasible=" << row.infeasible << "/" << row.runs << "\n";
            return 0;
        }
    } catch (const std::invalid_argument& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 2;  // malformed config / schema violation
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 1;
    }
    return 0;
}
