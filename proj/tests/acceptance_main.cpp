// Acceptance suite: one pass/fail line per criterion, exit code 0 only if all
// criteria hold. Criteria with a runtime budget report their elapsed time.

#include <chrono>
#include <cmath>
#include <cstdarg>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <sstream>
#include <string>
#include <vector>

#include "hierts/hierts.hpp"

using namespace hierts;

namespace {

int failures = 0;

void report(int id, bool pass, const std::string& label, const std::string& detail) {
    std::printf("criterion %2d %s  %s (%s)\n", id, pass ? "PASS" : "FAIL", label.c_str(),
                detail.c_str());
    std::fflush(stdout);
    if (!pass) ++failures;
}

double seconds_since(std::chrono::steady_clock::time_point start) {
    return std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
}

std::string fmt(const char* format, ...) {
    char buffer[512];
    va_list args;
    va_start(args, format);
    std::vsnprintf(buffer, sizeof(buffer), format, args);
    va_end(args);
    return buffer;
}

RealVector random_unit_ball(int d, Rng& rng) {
    RealVector a(d);
    for (int i = 0; i < d; ++i) a(i) = standard_normal(rng);
    const double norm = a.norm();
    if (norm > 0.0) a *= (0.2 + 0.8 * uniform_unit(rng)) / norm;
    return a;
}

ExperimentConfig synthetic_config(double sigma_q, int replications, std::uint64_t seed) {
    std::ostringstream text;
    text << "[model]\npreset = paper-synthetic-small\nsigma_q = " << sigma_q
         << "\n[run]\nreplications = " << replications << "\nseed = " << seed
         << "\nthreads = 4\n";
    return parse_config(text.str());
}

const AgentTrace& trace_of(const ExperimentResult& result, const std::string& name) {
    for (const AgentTrace& trace : result.traces) {
        if (trace.agent == name) return trace;
    }
    throw std::logic_error("no trace named " + name);
}

double combined_stderr(const AgentTrace& a, const AgentTrace& b) {
    const double sa = a.final_stderr_cumulative();
    const double sb = b.final_stderr_cumulative();
    return std::sqrt(sa * sa + sb * sb);
}

// --- criteria ---------------------------------------------------------------

void criterion_1_oracle_equivalence() {
    const auto start = std::chrono::steady_clock::now();
    const OracleCheckStats stats = oracle_check_random_models(200, 20240601);
    const double elapsed = seconds_since(start);
    const bool pass = stats.worst() <= 1e-8 && elapsed < 10.0;
    report(1, pass, "oracle posterior equivalence on 200 random instances",
           fmt("max abs err %.2e <= 1e-8, %.1f s < 10 s", stats.worst(), elapsed));
}

void criterion_2_path_equivalence() {
    Rng rng = derive_rng(20240602, {0});
    double worst = 0.0;
    for (int trial = 0; trial < 100; ++trial) {
        const int num_arms = 2 + static_cast<int>(uniform_index(rng, 4));
        const int num_tasks = 1 + static_cast<int>(uniform_index(rng, 4));
        const double sigma_q = 0.3 + uniform_unit(rng);
        const double sigma_0 = 0.2 + uniform_unit(rng);
        const double sigma = 0.3 + uniform_unit(rng);
        RealVector mu_q(num_arms);
        for (int i = 0; i < num_arms; ++i) mu_q(i) = standard_normal(rng);

        std::vector<TaskStats> stats(static_cast<std::size_t>(num_tasks), TaskStats(num_arms));
        const int num_obs = static_cast<int>(uniform_index(rng, 15));
        for (int j = 0; j < num_obs; ++j) {
            RealVector arm = RealVector::Zero(num_arms);
            arm(static_cast<int>(uniform_index(rng, num_arms))) = 1.0;
            auto& entry = stats[static_cast<std::size_t>(uniform_index(rng, num_tasks))];
            entry = update_task_stats(entry, arm, standard_normal(rng), sigma);
        }

        const CovMatrix sq{Matrix(sigma_q * sigma_q * Matrix::Identity(num_arms, num_arms))};
        const CovMatrix s0{Matrix(sigma_0 * sigma_0 * Matrix::Identity(num_arms, num_arms))};
        const HyperPosterior linear = hyper_posterior_linear(mu_q, sq, s0, stats);
        const HyperPosterior armed = hyper_posterior_karmed(mu_q, sigma_q, sigma_0, sigma, stats);
        worst = std::max(worst, (linear.mean - armed.mean).cwiseAbs().maxCoeff());
        worst = std::max(worst,
                         (linear.cov.matrix() - armed.cov.matrix()).cwiseAbs().maxCoeff());

        RealVector mu_t(num_arms);
        for (int i = 0; i < num_arms; ++i) mu_t(i) = standard_normal(rng);
        for (int s = 0; s < num_tasks; ++s) {
            const TaskConditional a =
                task_conditional_linear(mu_t, s0, stats[static_cast<std::size_t>(s)]);
            const TaskConditional b =
                task_conditional_karmed(mu_t, sigma_0, sigma, stats[static_cast<std::size_t>(s)]);
            worst = std::max(worst, (a.mean - b.mean).cwiseAbs().maxCoeff());
            worst = std::max(worst, (a.cov.matrix() - b.cov.matrix()).cwiseAbs().maxCoeff());
        }
    }
    report(2, worst <= 1e-10, "K-armed and linear posterior paths agree on basis actions",
           fmt("max abs deviation %.2e <= 1e-10 over 100 histories", worst));
}

void criterion_3_telescoping() {
    Rng rng = derive_rng(20240603, {0});
    const int d = 3, num_tasks = 4;
    const CovMatrix sigma_q{Matrix(0.8 * Matrix::Identity(d, d))};
    const CovMatrix sigma_0{Matrix(0.6 * Matrix::Identity(d, d))};
    const RealVector mu_q = RealVector::Zero(d);
    const double sigma = 1.0;

    std::vector<TaskStats> stats(num_tasks, TaskStats(d));
    double worst_err = 0.0;
    double worst_negative_eig = 0.0;
    for (int step = 0; step < 1000; ++step) {
        const int task = step % num_tasks;
        const RealVector action = random_unit_ball(d, rng);
        const double y = standard_normal(rng);

        const HyperPosterior before = hyper_posterior_linear(mu_q, sigma_q, sigma_0, stats);
        const Matrix increment =
            telescoping_increment(sigma_0, stats[static_cast<std::size_t>(task)], action, sigma);
        auto& entry = stats[static_cast<std::size_t>(task)];
        entry = update_task_stats(entry, action, y, sigma);
        const HyperPosterior after = hyper_posterior_linear(mu_q, sigma_q, sigma_0, stats);

        const Matrix direct = pd_inverse(after.cov) - pd_inverse(before.cov);
        worst_err = std::max(worst_err, (direct - increment).cwiseAbs().maxCoeff());
        worst_negative_eig = std::min(worst_negative_eig, lambda_min(increment));
    }
    const bool pass = worst_err <= 1e-9 && worst_negative_eig >= -1e-12;
    report(3, pass, "rank-one telescoping identity over 1000 sequential updates",
           fmt("max abs err %.2e <= 1e-9, min increment eigenvalue %.1e", worst_err,
               worst_negative_eig));
}

void criterion_5_two_stage_sampling() {
    const ExperimentConfig cfg = synthetic_config(0.5, 1, 20240605);
    Rng env_rng = derive_rng(20240605, {1});
    const ActionSet actions = detail::materialize_actions(cfg, env_rng);
    const ModelConfig model(cfg.mu_q, CovMatrix(cfg.Sigma_q), CovMatrix(cfg.Sigma_0), cfg.sigma,
                            cfg.m, cfg.n, cfg.L, actions, cfg.reward_kind);
    HierTs agent(model);

    // fixed history: a few observations spread over tasks
    Rng noise = derive_rng(20240605, {2});
    for (int i = 0; i < 24; ++i) {
        const int task = i % model.num_tasks;
        const int action = static_cast<int>(uniform_index(noise, actions.size()));
        agent.update({{task, action, 0.2 + 0.5 * standard_normal(noise)}});
    }

    const MarginalPosterior expected =
        marginal_posterior(agent.hyper(), model.sigma_0, agent.stats(0));

    Rng rng = derive_rng(20240605, {3});
    const int draws = 100000;
    RealVector sum = RealVector::Zero(2);
    Matrix sum_sq = Matrix::Zero(2, 2);
    for (int i = 0; i < draws; ++i) {
        const RealVector mu = sample_mvn(agent.hyper().mean, agent.hyper().cov, rng);
        const RealVector theta = agent.sample_task_parameter(0, mu, rng);
        sum += theta;
        sum_sq += theta * theta.transpose();
    }
    const RealVector mean = sum / draws;
    const Matrix cov = sum_sq / draws - mean * mean.transpose();

    double worst_sigmas = 0.0;
    for (int i = 0; i < 2; ++i) {
        const double se = std::sqrt(expected.cov.matrix()(i, i) / draws);
        worst_sigmas = std::max(worst_sigmas, std::abs(mean(i) - expected.mean(i)) / se);
        for (int j = 0; j < 2; ++j) {
            const double cov_se =
                std::sqrt((expected.cov.matrix()(i, i) * expected.cov.matrix()(j, j) +
                           expected.cov.matrix()(i, j) * expected.cov.matrix()(i, j)) /
                          draws);
            worst_sigmas =
                std::max(worst_sigmas, std::abs(cov(i, j) - expected.cov.matrix()(i, j)) / cov_se);
        }
    }
    report(5, worst_sigmas <= 3.0,
           "two-stage sampling matches the marginal posterior over 1e5 draws",
           fmt("worst deviation %.2f Monte-Carlo standard errors <= 3", worst_sigmas));
}

struct SyntheticRuns {
    ExperimentResult small;   // sigma_q = 0.5
    ExperimentResult large;   // sigma_q = 1.0
    double small_elapsed = 0.0;
};

SyntheticRuns run_synthetic() {
    SyntheticRuns runs;
    const auto start = std::chrono::steady_clock::now();
    runs.small = run_experiment(synthetic_config(0.5, 100, 20240606));
    runs.small_elapsed = seconds_since(start);
    runs.large = run_experiment(synthetic_config(1.0, 100, 20240606));
    return runs;
}

void criterion_4_lemma1_cap(const SyntheticRuns& runs) {
    const HierDiagnostics& diag = runs.small.diagnostics;
    const bool pass = diag.enabled && diag.max_marginal_eig <= diag.sigma_max_sq * (1.0 + 1e-9);
    report(4, pass, "marginal posterior eigenvalues stay below the uniform cap",
           fmt("max lambda_1 %.6f <= sigma_max^2 %.6f over the full synthetic run",
               diag.max_marginal_eig, diag.sigma_max_sq));
}

void criterion_6_ordering(const SyntheticRuns& runs) {
    const AgentTrace& hier = trace_of(runs.small, "HierTS");
    const AgentTrace& oracle = trace_of(runs.small, "OracleTS");
    const AgentTrace& marginal = trace_of(runs.small, "MarginalTS");

    const double h = hier.final_mean_cumulative();
    const double o = oracle.final_mean_cumulative();
    const double m = marginal.final_mean_cumulative();

    const bool ordered = o <= h && h < m;
    const bool separated = (m - h) >= 2.0 * combined_stderr(hier, marginal);
    const bool comparable = (h - o) <= 3.0 * combined_stderr(hier, oracle);
    const bool in_time = runs.small_elapsed <= 300.0;
    report(6, ordered && separated && comparable && in_time,
           "final regret ordering OracleTS <= HierTS < MarginalTS with the stated margins",
           fmt("O %.2f, H %.2f, M %.2f; M-H %.2f >= 2se %.2f; H-O %.2f <= 3se %.2f; %.0f s",
               o, h, m, m - h, 2.0 * combined_stderr(hier, marginal), h - o,
               3.0 * combined_stderr(hier, oracle), runs.small_elapsed));
}

void criterion_7_gap_grows(const SyntheticRuns& runs) {
    const double gap_small = trace_of(runs.small, "HierTS").final_mean_cumulative() -
                             trace_of(runs.small, "OracleTS").final_mean_cumulative();
    const double gap_large = trace_of(runs.large, "HierTS").final_mean_cumulative() -
                             trace_of(runs.large, "OracleTS").final_mean_cumulative();
    report(7, gap_large > gap_small,
           "the HierTS-OracleTS gap grows with the hyper-prior width",
           fmt("gap %.2f at width 1.0 > gap %.2f at width 0.5", gap_large, gap_small));
}

void criterion_8_sweep() {
    ExperimentConfig cfg = synthetic_config(0.5, 100, 20240608);
    cfg.agents = {AgentKind::HierTs};
    const std::vector<int> levels = {1, 2, 5, 10};
    const std::vector<SweepPoint> points = sweep_concurrency(cfg, levels);

    bool non_decreasing = true;
    for (std::size_t k = 1; k < points.size(); ++k) {
        const double prev = points[k - 1].final_mean_cumulative[0];
        const double curr = points[k].final_mean_cumulative[0];
        const double se_prev = points[k - 1].final_stderr_cumulative[0];
        const double se_curr = points[k].final_stderr_cumulative[0];
        if (curr < prev - 2.0 * std::sqrt(se_prev * se_prev + se_curr * se_curr)) {
            non_decreasing = false;
        }
    }
    const double ratio =
        points.back().final_mean_cumulative[0] / points.front().final_mean_cumulative[0];
    report(8, non_decreasing && ratio < 10.0,
           "regret grows with concurrency but sublinearly",
           fmt("finals %.2f, %.2f, %.2f, %.2f; ratio L10/L1 %.2f < 10",
               points[0].final_mean_cumulative[0], points[1].final_mean_cumulative[0],
               points[2].final_mean_cumulative[0], points[3].final_mean_cumulative[0], ratio));
}

void criterion_9_bound_validity(const SyntheticRuns& runs) {
    // concurrent: the synthetic run with forced exploration on
    const AgentTrace& hier_concurrent = trace_of(runs.small, "HierTS");
    const double concurrent_regret = hier_concurrent.final_mean_cumulative();
    const double concurrent_bound = hier_concurrent.bound ? hier_concurrent.bound->bound : -1.0;

    // sequential: same model, one task per round
    ExperimentConfig sequential = synthetic_config(0.5, 30, 20240609);
    sequential.schedule = ScheduleKind::SequentialRoundRobin;
    sequential.L = 1;
    sequential.agents = {AgentKind::HierTs};
    const ExperimentResult result = run_experiment(sequential);
    const AgentTrace& hier_sequential = trace_of(result, "HierTS");
    const double sequential_regret = hier_sequential.final_mean_cumulative();
    const double sequential_bound = hier_sequential.bound ? hier_sequential.bound->bound : -1.0;

    const bool pass =
        sequential_regret <= sequential_bound && concurrent_regret <= concurrent_bound;
    report(9, pass, "empirical regret stays below the bound values",
           fmt("sequential %.2f <= %.2f; concurrent %.2f <= %.2f", sequential_regret,
               sequential_bound, concurrent_regret, concurrent_bound));
}

void criterion_10_lemma3(const SyntheticRuns& runs) {
    const HierDiagnostics& diag = runs.small.diagnostics;
    const bool pass = diag.enabled && diag.max_concurrent_ratio >= 1.0 &&
                      diag.max_concurrent_ratio <= diag.concurrent_ratio_cap * (1.0 + 1e-9);
    report(10, pass, "concurrent hyper-precision ratios stay below the c4 cap",
           fmt("max ratio %.4f <= c4 %.4f over all sampled rounds", diag.max_concurrent_ratio,
               diag.concurrent_ratio_cap));
}

void criterion_11_determinism() {
    namespace fs = std::filesystem;
    ExperimentConfig cfg = synthetic_config(0.5, 16, 20240611);

    auto run_to_csv = [&cfg](int threads, const fs::path& path) {
        cfg.threads = threads;
        const ExperimentResult result = run_experiment(cfg);
        emit_csv(result.traces, path.string());
    };
    const fs::path serial = fs::temp_directory_path() / "hierts_accept_serial.csv";
    const fs::path parallel = fs::temp_directory_path() / "hierts_accept_parallel.csv";
    run_to_csv(1, serial);
    run_to_csv(8, parallel);

    auto slurp = [](const fs::path& path) {
        std::ifstream in(path, std::ios::binary);
        std::ostringstream buffer;
        buffer << in.rdbuf();
        return buffer.str();
    };
    const std::string a = slurp(serial);
    const std::string b = slurp(parallel);
    report(11, !a.empty() && a == b, "1-thread and 8-thread runs emit byte-identical csv",
           fmt("%zu bytes compared", a.size()));
}

}  // namespace

int main() {
    try {
        criterion_1_oracle_equivalence();
        criterion_2_path_equivalence();
        criterion_3_telescoping();
        criterion_5_two_stage_sampling();

        const SyntheticRuns runs = run_synthetic();
        criterion_4_lemma1_cap(runs);
        criterion_6_ordering(runs);
        criterion_7_gap_grows(runs);
        criterion_8_sweep();
        criterion_9_bound_validity(runs);
        criterion_10_lemma3(runs);
        criterion_11_determinism();
    } catch (const std::exception& error) {
        std::printf("acceptance suite aborted: %s\n", error.what());
        return 2;
    }

    std::printf("%s\n", failures == 0 ? "all criteria passed" : "criteria failed");
    return failures == 0 ? 0 : 1;
}
