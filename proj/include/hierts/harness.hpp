#pragma once

#include <atomic>
#include <cmath>
#include <cstdint>
#include <cstring>
#include <limits>
#include <memory>
#include <mutex>
#include <optional>
#include <span>
#include <string>
#include <thread>
#include <utility>
#include <vector>

#include "hierts/agents.hpp"
#include "hierts/bounds.hpp"
#include "hierts/config.hpp"
#include "hierts/env.hpp"
#include "hierts/posterior.hpp"
#include "hierts/random.hpp"
#include "hierts/schedule.hpp"

namespace hierts {

/// Substream roles under (master seed, replication, role). Environment draws
/// (actions, instance, schedule, reward noise) are shared by every agent in a
/// replication; each agent additionally owns its own sampling stream.
namespace stream {
constexpr std::uint64_t kActions = 1;
constexpr std::uint64_t kInstance = 2;
constexpr std::uint64_t kSchedule = 3;
constexpr std::uint64_t kNoise = 4;
constexpr std::uint64_t kAgentBase = 100;
}  // namespace stream

/// Aggregated per-round regret of one agent across replications.
struct AgentTrace {
    std::string agent;
    std::vector<double> mean_instant;
    std::vector<double> mean_cumulative;
    std::vector<double> stderr_cumulative;
    std::optional<BoundReport> bound;

    double final_mean_cumulative() const {
        return mean_cumulative.empty() ? 0.0 : mean_cumulative.back();
    }
    double final_stderr_cumulative() const {
        return stderr_cumulative.empty() ? 0.0 : stderr_cumulative.back();
    }
};

/// Belief-level quantities recorded during the run (for HierTS, when the
/// bound report is enabled): the largest marginal-posterior eigenvalue seen,
/// its analytic cap, the concurrent hyper-precision ratios with their cap,
/// and the empirical posterior-variance sum with its cap.
struct HierDiagnostics {
    bool enabled = false;
    double max_marginal_eig = 0.0;
    double sigma_max_sq = 0.0;
    double max_concurrent_ratio = 0.0;
    double concurrent_ratio_cap = std::numeric_limits<double>::infinity();
    double mean_variance_sum = 0.0;
    double variance_sum_cap = 0.0;
    double min_eta = std::numeric_limits<double>::infinity();
};

struct ExperimentResult {
    std::vector<AgentTrace> traces;
    HierDiagnostics diagnostics;
    int num_rounds = 0;
};

namespace detail {

inline std::uint64_t fnv1a_bytes(std::uint64_t hash, const void* data, std::size_t size) {
    const auto* bytes = static_cast<const unsigned char*>(data);
    for (std::size_t i = 0; i < size; ++i) {
        hash ^= bytes[i];
        hash *= 0x100000001b3ULL;
    }
    return hash;
}

inline std::uint64_t fingerprint(const EnvInstance& instance, const Schedule& schedule) {
    std::uint64_t hash = 0xcbf29ce484222325ULL;
    auto mix_vector = [&hash](const RealVector& v) {
        hash = fnv1a_bytes(hash, v.data(), sizeof(double) * static_cast<std::size_t>(v.size()));
    };
    mix_vector(instance.mu_star());
    for (int s = 0; s < instance.num_tasks(); ++s) mix_vector(instance.theta_star(s));
    for (const auto& round : schedule.rounds()) {
        hash = fnv1a_bytes(hash, round.data(), sizeof(int) * round.size());
    }
    return hash;
}

inline ActionSet materialize_actions(const ExperimentConfig& cfg, Rng& rng) {
    switch (cfg.actions.kind) {
        case ActionSetKind::StandardBasis:
            return ActionSet::standard_basis(cfg.d);
        case ActionSetKind::Explicit:
            return ActionSet::finite(cfg.actions.explicit_actions);
        case ActionSetKind::UniformRandom: {
            std::vector<RealVector> actions;
            actions.reserve(static_cast<std::size_t>(cfg.actions.num_actions));
            for (int i = 0; i < cfg.actions.num_actions; ++i) {
                RealVector a(cfg.d);
                for (int j = 0; j < cfg.d; ++j) {
                    a(j) = (2.0 * uniform_unit(rng) - 1.0) * cfg.actions.halfwidth;
                }
                actions.push_back(std::move(a));
            }
            return ActionSet::finite(std::move(actions));
        }
    }
    throw BadValue("model.actions", "unhandled action set kind");
}

inline Schedule build_schedule(const ExperimentConfig& cfg, Rng& rng) {
    switch (cfg.schedule) {
        case ScheduleKind::SequentialRoundRobin:
            return build_sequential_schedule(cfg.m, cfg.n, SequentialOrder::RoundRobin, rng);
        case ScheduleKind::SequentialRandom:
            return build_sequential_schedule(cfg.m, cfg.n, SequentialOrder::RandomPermutation,
                                             rng);
        case ScheduleKind::Meta:
            return build_meta_schedule(cfg.m, cfg.n);
        case ScheduleKind::Concurrent:
            return build_concurrent_schedule(cfg.m, cfg.n, cfg.L, rng);
    }
    throw BadValue("schedule.kind", "unhandled schedule kind");
}

struct ReplicationOutput {
    std::vector<std::vector<double>> instant;  // [agent][round]
    double max_marginal_eig = 0.0;
    double variance_sum = 0.0;
    double max_concurrent_ratio = 0.0;
    double eta = std::numeric_limits<double>::quiet_NaN();
};

/// Per-task precision contribution to the hyper-posterior, in the
/// inversion-free form G - G (Sigma_0^-1 + G)^-1 G.
inline Matrix hyper_precision_term(const Matrix& s0_inv, const Matrix& gram) {
    const CovMatrix inner = symmetrize(s0_inv + gram);
    Matrix term = gram - gram * solve_pd(inner, gram);
    return 0.5 * (term + term.transpose());
}

/// Tracks lambda_1(within-round hyper precision * round-start hyper
/// covariance) over a concurrent round, walking sufficiently-explored tasks
/// first so each prefix stays sufficiently explored.
class ConcurrentRatioProbe {
  public:
    ConcurrentRatioProbe(const ModelConfig& model, double eta)
        : model_(model),
          s0_inv_(pd_inverse(model.sigma_0)),
          sq_inv_(pd_inverse(model.sigma_q)),
          explored_floor_(eta / (model.sigma * model.sigma) * (1.0 - 1e-9)) {}

    /// Largest ratio over the explored prefix of this round. `chosen` maps
    /// positions in `tasks` to the taken action vectors.
    double round_max(const HierTs& agent, const std::vector<int>& tasks,
                     const std::vector<RealVector>& chosen) const {
        Matrix base = sq_inv_;
        for (int s = 0; s < model_.num_tasks; ++s) {
            base += hyper_precision_term(s0_inv_, agent.stats(s).gram());
        }
        const CovMatrix start_precision = symmetrize(base);

        // Explored tasks first, ascending ids inside each group.
        std::vector<std::size_t> order;
        for (std::size_t pass = 0; pass < 2; ++pass) {
            for (std::size_t i = 0; i < tasks.size(); ++i) {
                const bool explored =
                    lambda_min(agent.stats(tasks[i]).gram()) >= explored_floor_;
                if ((pass == 0) == explored) order.push_back(i);
            }
        }

        double worst = 1.0;
        Matrix with_updates = base;
        const double inv_var = 1.0 / (model_.sigma * model_.sigma);
        for (std::size_t pos = 0; pos < order.size(); ++pos) {
            const int task = tasks[order[pos]];
            if (lambda_min(agent.stats(task).gram()) < explored_floor_) break;
            const double ratio = concurrent_ratio_diagnostic(symmetrize(with_updates),
                                                             start_precision);
            worst = std::max(worst, ratio);
            // Fold this task's in-round observation for the next position.
            const Matrix& gram = agent.stats(task).gram();
            const RealVector& action = chosen[order[pos]];
            const Matrix updated = gram + inv_var * (action * action.transpose());
            with_updates += hyper_precision_term(s0_inv_, updated) -
                            hyper_precision_term(s0_inv_, gram);
        }
        return worst;
    }

  private:
    const ModelConfig& model_;
    Matrix s0_inv_;
    Matrix sq_inv_;
    double explored_floor_;
};

inline ReplicationOutput run_replication(const ExperimentConfig& cfg, int rep) {
    Rng rng_actions = derive_rng(cfg.seed, {static_cast<std::uint64_t>(rep), stream::kActions});
    const ActionSet action_set = materialize_actions(cfg, rng_actions);

    const ModelConfig model(cfg.mu_q, CovMatrix(cfg.Sigma_q), CovMatrix(cfg.Sigma_0), cfg.sigma,
                            cfg.m, cfg.n, cfg.L, action_set, cfg.reward_kind);

    Rng rng_instance = derive_rng(cfg.seed, {static_cast<std::uint64_t>(rep), stream::kInstance});
    const EnvInstance instance = sample_instance(model, rng_instance);

    Rng rng_schedule = derive_rng(cfg.seed, {static_cast<std::uint64_t>(rep), stream::kSchedule});
    const Schedule schedule = build_schedule(cfg, rng_schedule);

    std::vector<double> best_value(static_cast<std::size_t>(cfg.m));
    for (int s = 0; s < cfg.m; ++s) {
        best_value[static_cast<std::size_t>(s)] =
            action_set[optimal_action(instance, s)].dot(instance.theta_star(s));
    }

    const bool wrap_hierts = cfg.forced_exploration_active();
    const bool need_eta = wrap_hierts || (cfg.bounds_enabled &&
                                          cfg.schedule == ScheduleKind::Concurrent);

    ReplicationOutput out;
    out.instant.resize(cfg.agents.size());
    std::optional<std::uint64_t> expected_fingerprint;

    for (std::size_t agent_idx = 0; agent_idx < cfg.agents.size(); ++agent_idx) {
        Rng rng_agent = derive_rng(
            cfg.seed, {static_cast<std::uint64_t>(rep), stream::kAgentBase + agent_idx});
        Rng rng_noise = derive_rng(cfg.seed, {static_cast<std::uint64_t>(rep), stream::kNoise});

        HierTs* hier = nullptr;
        std::unique_ptr<Agent> agent;
        switch (cfg.agents[agent_idx]) {
            case AgentKind::HierTs: {
                auto owned = std::make_unique<HierTs>(model);
                hier = owned.get();
                if (wrap_hierts) {
                    auto wrapper = std::make_unique<ForcedExploration>(
                        std::move(owned), select_spanning_basis(action_set), action_set, cfg.m);
                    out.eta = wrapper->eta();
                    agent = std::move(wrapper);
                } else {
                    agent = std::move(owned);
                }
                break;
            }
            case AgentKind::OracleTs:
                agent = std::make_unique<OracleTs>(model, instance.mu_star());
                break;
            case AgentKind::MarginalTs:
                agent = std::make_unique<MarginalTs>(model);
                break;
        }

        if (need_eta && std::isnan(out.eta)) {
            Matrix outer_sum = Matrix::Zero(cfg.d, cfg.d);
            for (int idx : select_spanning_basis(action_set)) {
                outer_sum += action_set[idx] * action_set[idx].transpose();
            }
            out.eta = lambda_min(outer_sum);
        }

        const std::uint64_t print = fingerprint(instance, schedule);
        if (expected_fingerprint && *expected_fingerprint != print) {
            throw std::logic_error("environment fingerprint mismatch across agents");
        }
        expected_fingerprint = print;

        const bool diagnose = cfg.bounds_enabled && hier != nullptr;
        std::optional<ConcurrentRatioProbe> probe;
        if (diagnose && cfg.schedule == ScheduleKind::Concurrent && wrap_hierts) {
            probe.emplace(model, out.eta);
        }
        std::vector<VarianceEntry> variance_entries;

        auto& regret_per_round = out.instant[agent_idx];
        regret_per_round.reserve(static_cast<std::size_t>(schedule.num_rounds()));
        for (const std::vector<int>& tasks : schedule.rounds()) {
            const std::vector<int> acts = agent->act(tasks, rng_agent);

            std::vector<RealVector> chosen;
            chosen.reserve(tasks.size());
            for (int a : acts) chosen.push_back(action_set[a]);

            if (diagnose) {
                for (std::size_t i = 0; i < tasks.size(); ++i) {
                    const MarginalPosterior marg =
                        marginal_posterior(hier->hyper(), model.sigma_0, hier->stats(tasks[i]));
                    out.max_marginal_eig =
                        std::max(out.max_marginal_eig, lambda_max(marg.cov.matrix()));
                    variance_entries.push_back({chosen[i], marg.cov.matrix()});
                }
                if (probe) {
                    out.max_concurrent_ratio = std::max(
                        out.max_concurrent_ratio, probe->round_max(*hier, tasks, chosen));
                }
            }

            std::vector<Observation> observations;
            observations.reserve(tasks.size());
            double round_regret = 0.0;
            for (std::size_t i = 0; i < tasks.size(); ++i) {
                const int task = tasks[i];
                const double y = reward(instance, task, chosen[i], rng_noise);
                observations.push_back({task, acts[i], y});
                round_regret += best_value[static_cast<std::size_t>(task)] -
                                chosen[i].dot(instance.theta_star(task));
            }
            regret_per_round.push_back(round_regret);
            agent->update(observations);
        }

        if (diagnose) {
            out.variance_sum = posterior_variance_sum(variance_entries);
        }
    }
    return out;
}

}  // namespace detail

/// Model eigen-summary used to evaluate the bound formulas for this config.
inline BoundInputs bound_inputs_for(const ExperimentConfig& cfg, double eta) {
    BoundInputs in;
    in.lambda1_sigma0 = lambda_max(cfg.Sigma_0);
    in.lambdad_sigma0 = lambda_min(cfg.Sigma_0);
    in.lambda1_sigmaq = lambda_max(cfg.Sigma_q);
    in.sigma = cfg.sigma;
    in.d = cfg.d;
    in.m = cfg.m;
    in.n = cfg.n;
    in.L = cfg.L;
    in.eta = eta;
    in.K = cfg.actions.num_actions;
    const CovMatrix marginal = symmetrize(cfg.Sigma_q + cfg.Sigma_0);
    in.mu_q_prior_norm = std::sqrt(cfg.mu_q.dot(solve_pd(marginal, cfg.mu_q)));
    return in;
}

/// Bound report for one agent under this config. HierTS gets the full
/// formula matching the schedule regime; the baselines get the
/// sequential-form variants: the oracle drops the hyper-learning term
/// (c2 = 0), the flat agent additionally pays the marginal prior width
/// lambda_1(Sigma_q + Sigma_0) in its per-task term.
inline BoundReport bound_report_for_agent(const ExperimentConfig& cfg, AgentKind kind,
                                          double eta) {
    BoundInputs in = bound_inputs_for(cfg, eta);
    const bool karmed = cfg.actions.kind == ActionSetKind::StandardBasis &&
                        detail::is_isotropic(cfg.Sigma_q) &&
                        detail::is_isotropic(cfg.Sigma_0);
    const bool concurrent = cfg.schedule == ScheduleKind::Concurrent;
    switch (kind) {
        case AgentKind::HierTs:
            break;
        case AgentKind::OracleTs:
            in.lambda1_sigmaq = 0.0;
            break;
        case AgentKind::MarginalTs: {
            const Matrix marginal = cfg.Sigma_q + cfg.Sigma_0;
            in.lambda1_sigma0 = lambda_max(marginal);
            in.lambdad_sigma0 = lambda_min(marginal);
            in.lambda1_sigmaq = 0.0;
            break;
        }
    }
    const bool use_concurrent = concurrent && kind == AgentKind::HierTs;
    if (karmed) return karmed_bounds(in, use_concurrent);
    return use_concurrent ? concurrent_linear_bound(in) : sequential_linear_bound(in);
}

/// Runs every configured agent over cfg.replications shared environments and
/// aggregates per-round regret (mean and standard error of the cumulative).
/// Replications are independent work units; aggregation always walks them in
/// replication order, so results do not depend on the thread count.
inline ExperimentResult run_experiment(const ExperimentConfig& cfg) {
    if (cfg.agents.empty()) throw BadValue("agents.agents", "need at least one agent");
    if (cfg.replications < 1) throw BadValue("run.replications", "must be >= 1");
    const int reps = cfg.replications;
    std::vector<detail::ReplicationOutput> outputs(static_cast<std::size_t>(reps));

    const int workers = std::max(1, std::min(cfg.threads, reps));
    if (workers == 1) {
        for (int r = 0; r < reps; ++r) {
            outputs[static_cast<std::size_t>(r)] = detail::run_replication(cfg, r);
        }
    } else {
        std::atomic<int> next{0};
        std::exception_ptr failure;
        std::mutex failure_mutex;
        auto work = [&]() {
            try {
                for (int r = next.fetch_add(1); r < reps; r = next.fetch_add(1)) {
                    outputs[static_cast<std::size_t>(r)] = detail::run_replication(cfg, r);
                }
            } catch (...) {
                std::scoped_lock lock(failure_mutex);
                if (!failure) failure = std::current_exception();
            }
        };
        std::vector<std::thread> pool;
        pool.reserve(static_cast<std::size_t>(workers));
        for (int w = 0; w < workers; ++w) pool.emplace_back(work);
        for (std::thread& t : pool) t.join();
        if (failure) std::rethrow_exception(failure);
    }

    const auto num_rounds = outputs.front().instant.front().size();
    ExperimentResult result;
    result.num_rounds = static_cast<int>(num_rounds);

    HierDiagnostics diag;
    for (const auto& rep : outputs) {
        diag.max_marginal_eig = std::max(diag.max_marginal_eig, rep.max_marginal_eig);
        diag.max_concurrent_ratio =
            std::max(diag.max_concurrent_ratio, rep.max_concurrent_ratio);
        if (!std::isnan(rep.eta)) diag.min_eta = std::min(diag.min_eta, rep.eta);
    }

    for (std::size_t agent_idx = 0; agent_idx < cfg.agents.size(); ++agent_idx) {
        AgentTrace trace;
        trace.agent = to_string(cfg.agents[agent_idx]);
        trace.mean_instant.assign(num_rounds, 0.0);
        trace.mean_cumulative.assign(num_rounds, 0.0);
        trace.stderr_cumulative.assign(num_rounds, 0.0);

        std::vector<std::vector<double>> cumulative(
            static_cast<std::size_t>(reps), std::vector<double>(num_rounds, 0.0));
        for (int r = 0; r < reps; ++r) {
            const auto& inst = outputs[static_cast<std::size_t>(r)].instant[agent_idx];
            double acc = 0.0;
            for (std::size_t t = 0; t < num_rounds; ++t) {
                acc += inst[t];
                cumulative[static_cast<std::size_t>(r)][t] = acc;
                trace.mean_instant[t] += inst[t];
            }
        }
        for (std::size_t t = 0; t < num_rounds; ++t) {
            trace.mean_instant[t] /= reps;
            double mean = 0.0;
            for (int r = 0; r < reps; ++r) mean += cumulative[static_cast<std::size_t>(r)][t];
            mean /= reps;
            trace.mean_cumulative[t] = mean;
            if (reps > 1) {
                double ss = 0.0;
                for (int r = 0; r < reps; ++r) {
                    const double delta = cumulative[static_cast<std::size_t>(r)][t] - mean;
                    ss += delta * delta;
                }
                trace.stderr_cumulative[t] =
                    std::sqrt(ss / (reps - 1)) / std::sqrt(static_cast<double>(reps));
            }
        }

        if (cfg.bounds_enabled) {
            trace.bound = bound_report_for_agent(cfg, cfg.agents[agent_idx], diag.min_eta);
        }
        if (cfg.agents[agent_idx] == AgentKind::HierTs && cfg.bounds_enabled) {
            diag.enabled = true;
            diag.sigma_max_sq = sigma_max_squared(lambda_max(cfg.Sigma_0),
                                                  lambda_min(cfg.Sigma_0),
                                                  lambda_max(cfg.Sigma_q));
            double vsum = 0.0;
            for (const auto& rep : outputs) vsum += rep.variance_sum;
            diag.mean_variance_sum = vsum / reps;
            const BoundInputs in = bound_inputs_for(cfg, diag.min_eta);
            const bool concurrent = cfg.schedule == ScheduleKind::Concurrent &&
                                    cfg.forced_exploration_active();
            diag.variance_sum_cap = posterior_variance_cap(in, concurrent);
            if (concurrent) diag.concurrent_ratio_cap = trace.bound->c4;
        }
        result.traces.push_back(std::move(trace));
    }
    result.diagnostics = diag;
    return result;
}

/// One point of the concurrency sweep.
struct SweepPoint {
    int L = 1;
    std::vector<std::string> agent;
    std::vector<double> final_mean_cumulative;
    std::vector<double> final_stderr_cumulative;
};

/// Reruns the experiment for each concurrency level, holding the per-task
/// interaction budget fixed, so final regrets are comparable across L.
inline std::vector<SweepPoint> sweep_concurrency(const ExperimentConfig& base,
                                                 const std::vector<int>& l_values) {
    std::vector<SweepPoint> points;
    for (int l : l_values) {
        ExperimentConfig cfg = base;
        cfg.schedule = ScheduleKind::Concurrent;
        cfg.L = l;
        if (l < 1 || l > cfg.m) throw BadValue("sweep.L", "must satisfy 1 <= L <= m");
        if ((static_cast<long>(cfg.m) * cfg.n) % l != 0) {
            throw BadValue("sweep.L", "m * n must be divisible by each L");
        }
        const ExperimentResult result = run_experiment(cfg);
        SweepPoint point;
        point.L = l;
        for (const AgentTrace& trace : result.traces) {
            point.agent.push_back(trace.agent);
            point.final_mean_cumulative.push_back(trace.final_mean_cumulative());
            point.final_stderr_cumulative.push_back(trace.final_stderr_cumulative());
        }
        points.push_back(std::move(point));
    }
    return points;
}

// ---------------------------------------------------------------------------
// Brute-force joint-Gaussian oracle for the posterior formulas.
// ---------------------------------------------------------------------------

/// One recorded interaction for the oracle battery.
struct ObservationRecord {
    int task = 0;
    RealVector action;
    double reward = 0.0;
};

/// Builds the dense joint Gaussian over (mu_*, theta_1..theta_m, all rewards)
/// implied by the hierarchical model and a fixed list of actions.
inline JointGaussian build_hierarchical_joint(const RealVector& mu_q, const CovMatrix& sigma_q,
                                              const CovMatrix& sigma_0, double sigma,
                                              int num_tasks,
                                              std::span<const ObservationRecord> observations) {
    const int d = static_cast<int>(mu_q.size());
    const int num_obs = static_cast<int>(observations.size());
    const int total = d * (1 + num_tasks) + num_obs;

    RealVector mean(total);
    Matrix cov = Matrix::Zero(total, total);
    const Matrix& sq = sigma_q.matrix();
    const Matrix& s0 = sigma_0.matrix();

    auto theta_offset = [d](int s) { return d * (1 + s); };
    const int y_offset = d * (1 + num_tasks);

    mean.segment(0, d) = mu_q;
    for (int s = 0; s < num_tasks; ++s) mean.segment(theta_offset(s), d) = mu_q;
    for (int j = 0; j < num_obs; ++j) {
        mean(y_offset + j) = observations[static_cast<std::size_t>(j)].action.dot(mu_q);
    }

    cov.block(0, 0, d, d) = sq;
    for (int s = 0; s < num_tasks; ++s) {
        cov.block(0, theta_offset(s), d, d) = sq;
        cov.block(theta_offset(s), 0, d, d) = sq;
        for (int u = 0; u < num_tasks; ++u) {
            cov.block(theta_offset(s), theta_offset(u), d, d) = s == u ? Matrix(sq + s0) : sq;
        }
    }
    for (int j = 0; j < num_obs; ++j) {
        const auto& obs_j = observations[static_cast<std::size_t>(j)];
        const RealVector sq_a = sq * obs_j.action;
        cov.block(0, y_offset + j, d, 1) = sq_a;
        cov.block(y_offset + j, 0, 1, d) = sq_a.transpose();
        for (int s = 0; s < num_tasks; ++s) {
            const RealVector col = sq_a + (s == obs_j.task ? RealVector(s0 * obs_j.action)
                                                           : RealVector(RealVector::Zero(d)));
            cov.block(theta_offset(s), y_offset + j, d, 1) = col;
            cov.block(y_offset + j, theta_offset(s), 1, d) = col.transpose();
        }
        for (int k = 0; k < num_obs; ++k) {
            const auto& obs_k = observations[static_cast<std::size_t>(k)];
            double value = obs_j.action.dot(sq * obs_k.action);
            if (obs_j.task == obs_k.task) value += obs_j.action.dot(s0 * obs_k.action);
            if (j == k) value += sigma * sigma;
            cov(y_offset + j, y_offset + k) = value;
        }
    }

    std::vector<Block> blocks;
    blocks.push_back({"mu", 0, d});
    for (int s = 0; s < num_tasks; ++s) {
        blocks.push_back({"theta" + std::to_string(s), theta_offset(s), d});
    }
    if (num_obs > 0) blocks.push_back({"y", y_offset, num_obs});
    return JointGaussian(std::move(mean), symmetrize(cov), std::move(blocks));
}

/// Worst absolute deviations between the closed-form posteriors and the
/// conditioning oracle over a battery of instances.
struct OracleCheckStats {
    int instances = 0;
    double max_hyper_mean_err = 0.0;
    double max_hyper_cov_err = 0.0;
    double max_marginal_mean_err = 0.0;
    double max_marginal_cov_err = 0.0;

    double worst() const {
        return std::max(std::max(max_hyper_mean_err, max_hyper_cov_err),
                        std::max(max_marginal_mean_err, max_marginal_cov_err));
    }
};

namespace detail {

/// Random well-conditioned covariance: random orthogonal basis, eigenvalues
/// uniform in [0.3, 2].
inline CovMatrix random_covariance(int d, Rng& rng) {
    Matrix gauss(d, d);
    for (int i = 0; i < d; ++i) {
        for (int j = 0; j < d; ++j) gauss(i, j) = standard_normal(rng);
    }
    const Matrix q = Eigen::HouseholderQR<Matrix>(gauss).householderQ();
    RealVector eigs(d);
    for (int i = 0; i < d; ++i) eigs(i) = 0.3 + 1.7 * uniform_unit(rng);
    return symmetrize(q * eigs.asDiagonal() * q.transpose());
}

inline void compare_against_oracle(const RealVector& mu_q, const CovMatrix& sigma_q,
                                   const CovMatrix& sigma_0, double sigma, int num_tasks,
                                   const std::vector<ObservationRecord>& observations,
                                   OracleCheckStats& stats) {
    const int d = static_cast<int>(mu_q.size());
    std::vector<TaskStats> task_stats(static_cast<std::size_t>(num_tasks), TaskStats(d));
    for (const ObservationRecord& obs : observations) {
        auto& entry = task_stats[static_cast<std::size_t>(obs.task)];
        entry = update_task_stats(entry, obs.action, obs.reward, sigma);
    }

    const JointGaussian joint =
        build_hierarchical_joint(mu_q, sigma_q, sigma_0, sigma, num_tasks, observations);
    JointGaussian conditioned = joint;
    if (!observations.empty()) {
        auto [offset, size] = joint.block_range("y");
        std::vector<int> indices;
        RealVector values(size);
        for (int j = 0; j < size; ++j) {
            indices.push_back(offset + j);
            values(j) = observations[static_cast<std::size_t>(j)].reward;
        }
        conditioned = condition_joint_gaussian(joint, indices, values);
    }

    const HyperPosterior hyper = hyper_posterior_linear(mu_q, sigma_q, sigma_0, task_stats);
    stats.max_hyper_mean_err =
        std::max(stats.max_hyper_mean_err,
                 (hyper.mean - conditioned.block_mean("mu")).cwiseAbs().maxCoeff());
    stats.max_hyper_cov_err =
        std::max(stats.max_hyper_cov_err,
                 (hyper.cov.matrix() - conditioned.block_cov("mu")).cwiseAbs().maxCoeff());

    for (int s = 0; s < num_tasks; ++s) {
        const MarginalPosterior marginal =
            marginal_posterior(hyper, sigma_0, task_stats[static_cast<std::size_t>(s)]);
        const std::string block = "theta" + std::to_string(s);
        stats.max_marginal_mean_err =
            std::max(stats.max_marginal_mean_err,
                     (marginal.mean - conditioned.block_mean(block)).cwiseAbs().maxCoeff());
        stats.max_marginal_cov_err =
            std::max(stats.max_marginal_cov_err,
                     (marginal.cov.matrix() - conditioned.block_cov(block)).cwiseAbs().maxCoeff());
    }
    ++stats.instances;
}

}  // namespace detail

/// Compares the closed-form posteriors against exact joint conditioning on
/// randomly drawn small models (d <= 3, m <= 4, up to 10 observations).
inline OracleCheckStats oracle_check_random_models(int instances, std::uint64_t seed) {
    OracleCheckStats stats;
    for (int i = 0; i < instances; ++i) {
        Rng rng = derive_rng(seed, {static_cast<std::uint64_t>(i), 7});
        const int d = 1 + static_cast<int>(uniform_index(rng, 3));
        const int m = 1 + static_cast<int>(uniform_index(rng, 4));
        const int num_obs = static_cast<int>(uniform_index(rng, 11));

        RealVector mu_q(d);
        for (int j = 0; j < d; ++j) mu_q(j) = standard_normal(rng);
        const CovMatrix sigma_q = detail::random_covariance(d, rng);
        const CovMatrix sigma_0 = detail::random_covariance(d, rng);
        const double sigma = 0.3 + 1.2 * uniform_unit(rng);

        std::vector<ObservationRecord> observations;
        for (int j = 0; j < num_obs; ++j) {
            RealVector a(d);
            for (int c = 0; c < d; ++c) a(c) = standard_normal(rng);
            const double norm = a.norm();
            if (norm > 0.0) a *= (0.2 + 0.8 * uniform_unit(rng)) / norm;
            observations.push_back({static_cast<int>(uniform_index(rng, m)), a,
                                    standard_normal(rng)});
        }
        detail::compare_against_oracle(mu_q, sigma_q, sigma_0, sigma, m, observations, stats);
    }
    return stats;
}

/// Same battery on the configured model: random histories on its action set.
inline OracleCheckStats oracle_check_model(const ExperimentConfig& cfg, int instances,
                                           int max_observations, std::uint64_t seed) {
    OracleCheckStats stats;
    const CovMatrix sigma_q(cfg.Sigma_q);
    const CovMatrix sigma_0(cfg.Sigma_0);
    for (int i = 0; i < instances; ++i) {
        Rng rng = derive_rng(seed, {static_cast<std::uint64_t>(i), 11});
        const ActionSet actions = detail::materialize_actions(cfg, rng);
        const int num_obs = static_cast<int>(
            uniform_index(rng, static_cast<std::uint64_t>(max_observations) + 1));
        std::vector<ObservationRecord> observations;
        for (int j = 0; j < num_obs; ++j) {
            const int task = static_cast<int>(uniform_index(rng, cfg.m));
            const int action =
                static_cast<int>(uniform_index(rng, static_cast<std::uint64_t>(actions.size())));
            observations.push_back({task, actions[action], standard_normal(rng)});
        }
        detail::compare_against_oracle(cfg.mu_q, sigma_q, sigma_0, cfg.sigma, cfg.m,
                                       observations, stats);
    }
    return stats;
}

}  // namespace hierts
