// Command-line front end: runs experiments from config files, sweeps the
// concurrency level, prints bound reports, and runs the posterior-vs-oracle
// check battery.

#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include "CLI11.hpp"
#include "hierts/hierts.hpp"

namespace {

std::string read_file(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw std::runtime_error("cannot read config file: " + path);
    std::ostringstream buffer;
    buffer << in.rdbuf();
    return buffer.str();
}

struct CommonOverrides {
    std::optional<std::uint64_t> seed;
    std::optional<int> reps;
    std::optional<std::string> out_dir;
    std::optional<std::string> format;
    std::optional<int> threads;
};

void add_common_flags(CLI::App* cmd, CommonOverrides& overrides) {
    cmd->add_option("--seed", overrides.seed, "master seed override");
    cmd->add_option("--reps", overrides.reps, "replication count override");
    cmd->add_option("--out-dir", overrides.out_dir, "output directory override");
    cmd->add_option("--format", overrides.format, "output format: csv|plot|both");
    cmd->add_option("--threads", overrides.threads, "worker threads over replications");
}

hierts::ExperimentConfig load_config(const std::string& path, const CommonOverrides& overrides) {
    hierts::ExperimentConfig cfg = hierts::parse_config(read_file(path));
    if (overrides.seed) cfg.seed = *overrides.seed;
    if (overrides.reps) {
        if (*overrides.reps < 1) throw hierts::BadValue("--reps", "must be >= 1");
        cfg.replications = *overrides.reps;
    }
    if (overrides.out_dir) cfg.out_dir = *overrides.out_dir;
    if (overrides.format) {
        if (*overrides.format == "csv") cfg.format = hierts::OutputFormat::Csv;
        else if (*overrides.format == "plot") cfg.format = hierts::OutputFormat::Plot;
        else if (*overrides.format == "both") cfg.format = hierts::OutputFormat::Both;
        else throw hierts::BadValue("--format", "expected csv, plot, or both");
    }
    if (overrides.threads) {
        if (*overrides.threads < 1) throw hierts::BadValue("--threads", "must be >= 1");
        cfg.threads = *overrides.threads;
    }
    return cfg;
}

std::filesystem::path out_path(const hierts::ExperimentConfig& cfg, const char* file) {
    return std::filesystem::path(cfg.out_dir) / file;
}

int cmd_run(const std::string& config_path, const CommonOverrides& overrides) {
    const hierts::ExperimentConfig cfg = load_config(config_path, overrides);
    const hierts::ExperimentResult result = hierts::run_experiment(cfg);

    if (cfg.format == hierts::OutputFormat::Csv || cfg.format == hierts::OutputFormat::Both) {
        hierts::emit_csv(result.traces, out_path(cfg, "regret.csv").string());
        std::cout << "wrote " << out_path(cfg, "regret.csv").string() << "\n";
    }
    if (cfg.format == hierts::OutputFormat::Plot || cfg.format == hierts::OutputFormat::Both) {
        hierts::emit_plot(result.traces, out_path(cfg, "regret.svg").string());
        std::cout << "wrote " << out_path(cfg, "regret.svg").string() << "\n";
    }
    if (cfg.bounds_enabled) {
        hierts::emit_bounds_csv(result.traces, out_path(cfg, "bounds.csv").string());
        std::cout << "wrote " << out_path(cfg, "bounds.csv").string() << "\n";
    }

    for (const hierts::AgentTrace& trace : result.traces) {
        std::printf("%-11s final regret %10.3f +- %.3f", trace.agent.c_str(),
                    trace.final_mean_cumulative(), trace.final_stderr_cumulative());
        if (trace.bound) std::printf("   bound %.3f", trace.bound->bound);
        std::printf("\n");
    }
    const hierts::HierDiagnostics& diag = result.diagnostics;
    if (diag.enabled) {
        std::printf("diagnostics: max marginal eigenvalue %.6g (cap %.6g)\n",
                    diag.max_marginal_eig, diag.sigma_max_sq);
        std::printf("diagnostics: posterior variance sum %.6g (cap %.6g)\n",
                    diag.mean_variance_sum, diag.variance_sum_cap);
        if (diag.max_concurrent_ratio > 0.0) {
            std::printf("diagnostics: max concurrent precision ratio %.6g (cap %.6g)\n",
                        diag.max_concurrent_ratio, diag.concurrent_ratio_cap);
        }
    }
    return 0;
}

int cmd_sweep(const std::string& config_path, const std::string& l_list,
              const CommonOverrides& overrides) {
    hierts::ExperimentConfig cfg = load_config(config_path, overrides);
    std::vector<int> l_values;
    std::stringstream stream(l_list);
    std::string token;
    while (std::getline(stream, token, ',')) {
        if (!token.empty()) l_values.push_back(std::stoi(token));
    }
    if (l_values.empty()) throw hierts::BadValue("--l", "need at least one L value");

    const std::vector<hierts::SweepPoint> points = hierts::sweep_concurrency(cfg, l_values);
    hierts::emit_sweep_csv(points, out_path(cfg, "sweep_l.csv").string());
    std::cout << "wrote " << out_path(cfg, "sweep_l.csv").string() << "\n";
    for (const hierts::SweepPoint& point : points) {
        for (std::size_t i = 0; i < point.agent.size(); ++i) {
            std::printf("L=%-3d %-11s final regret %10.3f +- %.3f\n", point.L,
                        point.agent[i].c_str(), point.final_mean_cumulative[i],
                        point.final_stderr_cumulative[i]);
        }
    }
    return 0;
}

int cmd_bounds(const std::string& config_path, const CommonOverrides& overrides) {
    const hierts::ExperimentConfig cfg = load_config(config_path, overrides);
    double eta = 1.0;
    if (cfg.schedule == hierts::ScheduleKind::Concurrent) {
        // Conservative eta: smallest over the replications' action sets.
        eta = std::numeric_limits<double>::infinity();
        for (int rep = 0; rep < cfg.replications; ++rep) {
            hierts::Rng rng = hierts::derive_rng(
                cfg.seed, {static_cast<std::uint64_t>(rep), hierts::stream::kActions});
            const hierts::ActionSet actions = hierts::detail::materialize_actions(cfg, rng);
            hierts::Matrix outer = hierts::Matrix::Zero(cfg.d, cfg.d);
            for (int idx : hierts::select_spanning_basis(actions)) {
                outer += actions[idx] * actions[idx].transpose();
            }
            eta = std::min(eta, hierts::lambda_min(outer));
        }
    }
    std::printf("%-11s %-18s %10s %10s %10s %10s %10s %8s %12s\n", "agent", "regime", "c", "c_q",
                "c1", "c2", "c3", "c4", "bound");
    for (hierts::AgentKind kind : cfg.agents) {
        const hierts::BoundReport report = hierts::bound_report_for_agent(cfg, kind, eta);
        std::printf("%-11s %-18s %10.4f %10.4f %10.4f %10.4f %10.4f %8.4f %12.3f\n",
                    hierts::to_string(kind).c_str(), hierts::to_string(report.regime).c_str(),
                    report.c, report.c_q, report.c1, report.c2, report.c3, report.c4,
                    report.bound);
    }
    return 0;
}

int cmd_oracle_check(const std::string& config_path, int instances, int max_obs,
                     const CommonOverrides& overrides) {
    const hierts::ExperimentConfig cfg = load_config(config_path, overrides);
    const hierts::OracleCheckStats model_stats =
        hierts::oracle_check_model(cfg, instances, max_obs, cfg.seed);
    const hierts::OracleCheckStats random_stats =
        hierts::oracle_check_random_models(instances, cfg.seed + 1);

    auto report = [](const char* label, const hierts::OracleCheckStats& stats) {
        std::printf("%s: %d instances\n", label, stats.instances);
        std::printf("  hyper-posterior    mean err %.3e, cov err %.3e\n",
                    stats.max_hyper_mean_err, stats.max_hyper_cov_err);
        std::printf("  marginal posterior mean err %.3e, cov err %.3e\n",
                    stats.max_marginal_mean_err, stats.max_marginal_cov_err);
        const bool pass = stats.worst() <= 1e-8;
        std::printf("  %s (tolerance 1e-8)\n", pass ? "PASS" : "FAIL");
        return pass;
    };
    const bool a = report("configured model vs conditioning oracle", model_stats);
    const bool b = report("random small models vs conditioning oracle", random_stats);
    return a && b ? 0 : 1;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"multi-task bandit simulator: hierarchical Thompson sampling with exact "
                 "Gaussian posteriors, baselines, and regret-bound reports"};
    app.require_subcommand(1);

    std::string config_path;
    std::string l_list = "1,2,5,10";
    int oracle_instances = 50;
    int oracle_max_obs = 10;
    CommonOverrides overrides;

    CLI::App* run = app.add_subcommand("run", "run an experiment from a config file");
    run->add_option("config", config_path, "config file path")->required();
    add_common_flags(run, overrides);

    CLI::App* sweep = app.add_subcommand("sweep-l", "rerun the experiment across L values");
    sweep->add_option("config", config_path, "config file path")->required();
    sweep->add_option("--l", l_list, "comma-separated concurrency levels");
    add_common_flags(sweep, overrides);

    CLI::App* bounds = app.add_subcommand("bounds", "print bound constants for a config");
    bounds->add_option("config", config_path, "config file path")->required();
    add_common_flags(bounds, overrides);

    CLI::App* oracle = app.add_subcommand(
        "oracle-check", "compare closed-form posteriors against the joint-Gaussian oracle");
    oracle->add_option("config", config_path, "config file path")->required();
    oracle->add_option("--instances", oracle_instances, "number of random histories");
    oracle->add_option("--max-obs", oracle_max_obs, "max observations per history");
    add_common_flags(oracle, overrides);

    CLI11_PARSE(app, argc, argv);

    try {
        if (run->parsed()) return cmd_run(config_path, overrides);
        if (sweep->parsed()) return cmd_sweep(config_path, l_list, overrides);
        if (bounds->parsed()) return cmd_bounds(config_path, overrides);
        if (oracle->parsed()) return cmd_oracle_check(config_path, oracle_instances,
                                                      oracle_max_obs, overrides);
    } catch (const std::exception& error) {
        std::cerr << "error: " << error.what() << "\n";
        return 1;
    }
    return 0;
}
