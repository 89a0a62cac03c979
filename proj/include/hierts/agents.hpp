#pragma once

#include <cmath>
#include <memory>
#include <string>
#include <utility>
#include <vector>

#include "hierts/env.hpp"
#include "hierts/errors.hpp"
#include "hierts/gaussian.hpp"
#include "hierts/posterior.hpp"
#include "hierts/random.hpp"

namespace hierts {

/// One (task, action index, reward) triple from a finished round.
struct Observation {
    int task = 0;
    int action = 0;
    double reward = 0.0;
};

/// A decision policy. act() returns one action index per task in the round's
/// task set; update() folds in the round's observations afterwards. Beliefs
/// are never refreshed between the two calls, which is what makes concurrent
/// rounds concurrent.
class Agent {
  public:
    virtual ~Agent() = default;
    virtual std::vector<int> act(const std::vector<int>& tasks, Rng& rng) = 0;
    virtual void update(const std::vector<Observation>& observations) = 0;
    virtual const std::string& name() const = 0;
};

namespace detail {

inline bool is_isotropic(const Matrix& m) {
    const double first = m(0, 0);
    for (Eigen::Index i = 0; i < m.rows(); ++i) {
        for (Eigen::Index j = 0; j < m.cols(); ++j) {
            if (i == j ? m(i, j) != first : m(i, j) != 0.0) return false;
        }
    }
    return true;
}

}  // namespace detail

/// Hierarchical Thompson sampling. Maintains the hyper-posterior over mu_*
/// from all tasks' statistics; each round draws one hyper-parameter sample and
/// then, per task, a task parameter from the conditional given that sample.
/// With a standard-basis action set and isotropic priors the per-arm formulas
/// are used; otherwise the dense linear ones. Both produce the same beliefs.
class HierTs final : public Agent {
  public:
    explicit HierTs(const ModelConfig& model)
        : model_(model),
          stats_(static_cast<std::size_t>(model.num_tasks), TaskStats(model.dim())),
          per_arm_path_(model.action_set.is_standard_basis() &&
                        detail::is_isotropic(model.sigma_q.matrix()) &&
                        detail::is_isotropic(model.sigma_0.matrix())),
          hyper_{model.mu_q, model.sigma_q} {}

    std::vector<int> act(const std::vector<int>& tasks, Rng& rng) override {
        std::vector<int> actions;
        if (tasks.empty()) return actions;
        actions.reserve(tasks.size());
        const RealVector mu = sample_mvn(hyper_.mean, hyper_.cov, rng);  // once per round
        for (int task : tasks) {
            const RealVector theta = sample_task_parameter(task, mu, rng);
            actions.push_back(argmax_action(model_.action_set, theta));
        }
        return actions;
    }

    void update(const std::vector<Observation>& observations) override {
        if (observations.empty()) return;
        for (const Observation& obs : observations) {
            check_task(obs.task);
            auto& stats = stats_[static_cast<std::size_t>(obs.task)];
            stats = update_task_stats(stats, model_.action_set[obs.action], obs.reward,
                                      model_.sigma);
        }
        refresh_hyper();
    }

    const std::string& name() const override {
        static const std::string id = "HierTS";
        return id;
    }

    const HyperPosterior& hyper() const { return hyper_; }
    const TaskStats& stats(int task) const {
        check_task(task);
        return stats_[static_cast<std::size_t>(task)];
    }
    const ModelConfig& model() const { return model_; }

    /// Draws theta for one task given a hyper-parameter sample; the sampling
    /// step inside act(), exposed so its distribution can be audited.
    RealVector sample_task_parameter(int task, const RealVector& mu, Rng& rng) const {
        check_task(task);
        const TaskConditional cond = conditional(task, mu);
        return sample_mvn(cond.mean, cond.cov, rng);
    }

    TaskConditional conditional(int task, const RealVector& mu) const {
        check_task(task);
        const TaskStats& stats = stats_[static_cast<std::size_t>(task)];
        if (per_arm_path_) {
            return task_conditional_karmed(mu, std::sqrt(model_.sigma_0.matrix()(0, 0)),
                                           model_.sigma, stats);
        }
        return task_conditional_linear(mu, model_.sigma_0, stats);
    }

  private:
    void refresh_hyper() {
        if (per_arm_path_) {
            hyper_ = hyper_posterior_karmed(model_.mu_q, std::sqrt(model_.sigma_q.matrix()(0, 0)),
                                            std::sqrt(model_.sigma_0.matrix()(0, 0)),
                                            model_.sigma, stats_);
        } else {
            hyper_ = hyper_posterior_linear(model_.mu_q, model_.sigma_q, model_.sigma_0, stats_);
        }
    }

    void check_task(int task) const {
        if (task < 0 || task >= static_cast<int>(stats_.size())) {
            throw UnknownTask("task " + std::to_string(task) + " unknown to agent");
        }
    }

    ModelConfig model_;
    std::vector<TaskStats> stats_;
    bool per_arm_path_;
    HyperPosterior hyper_;
};

/// Thompson sampling with the true task prior N(mu_*, Sigma_0). Each task is
/// solved in isolation; no statistic of any other task is ever read.
class OracleTs final : public Agent {
  public:
    OracleTs(const ModelConfig& model, RealVector mu_star)
        : model_(model),
          mu_star_(std::move(mu_star)),
          stats_(static_cast<std::size_t>(model.num_tasks), TaskStats(model.dim())) {}

    std::vector<int> act(const std::vector<int>& tasks, Rng& rng) override {
        std::vector<int> actions;
        actions.reserve(tasks.size());
        for (int task : tasks) {
            check_task(task);
            const TaskConditional cond = task_conditional_linear(
                mu_star_, model_.sigma_0, stats_[static_cast<std::size_t>(task)]);
            const RealVector theta = sample_mvn(cond.mean, cond.cov, rng);
            actions.push_back(argmax_action(model_.action_set, theta));
        }
        return actions;
    }

    void update(const std::vector<Observation>& observations) override {
        for (const Observation& obs : observations) {
            check_task(obs.task);
            auto& stats = stats_[static_cast<std::size_t>(obs.task)];
            stats = update_task_stats(stats, model_.action_set[obs.action], obs.reward,
                                      model_.sigma);
        }
    }

    const std::string& name() const override {
        static const std::string id = "OracleTS";
        return id;
    }

  private:
    void check_task(int task) const {
        if (task < 0 || task >= static_cast<int>(stats_.size())) {
            throw UnknownTask("task " + std::to_string(task) + " unknown to agent");
        }
    }

    ModelConfig model_;
    RealVector mu_star_;
    std::vector<TaskStats> stats_;
};

/// Thompson sampling that ignores the shared hyper-parameter and treats each
/// task as an independent linear bandit with the marginal prior
/// N(mu_q, Sigma_q + Sigma_0). Never forms a hyper-posterior.
class MarginalTs final : public Agent {
  public:
    explicit MarginalTs(const ModelConfig& model)
        : model_(model),
          marginal_prior_(symmetrize(model.sigma_q.matrix() + model.sigma_0.matrix())),
          stats_(static_cast<std::size_t>(model.num_tasks), TaskStats(model.dim())) {}

    std::vector<int> act(const std::vector<int>& tasks, Rng& rng) override {
        std::vector<int> actions;
        actions.reserve(tasks.size());
        for (int task : tasks) {
            check_task(task);
            const TaskConditional cond = task_conditional_linear(
                model_.mu_q, marginal_prior_, stats_[static_cast<std::size_t>(task)]);
            const RealVector theta = sample_mvn(cond.mean, cond.cov, rng);
            actions.push_back(argmax_action(model_.action_set, theta));
        }
        return actions;
    }

    void update(const std::vector<Observation>& observations) override {
        for (const Observation& obs : observations) {
            check_task(obs.task);
            auto& stats = stats_[static_cast<std::size_t>(obs.task)];
            stats = update_task_stats(stats, model_.action_set[obs.action], obs.reward,
                                      model_.sigma);
        }
    }

    const std::string& name() const override {
        static const std::string id = "MarginalTS";
        return id;
    }

  private:
    void check_task(int task) const {
        if (task < 0 || task >= static_cast<int>(stats_.size())) {
            throw UnknownTask("task " + std::to_string(task) + " unknown to agent");
        }
    }

    ModelConfig model_;
    CovMatrix marginal_prior_;
    std::vector<TaskStats> stats_;
};

/// Greedily picks dim() action indices with maximal residual norm after
/// projecting out the span of the ones already picked. Ties go to the lowest
/// index; throws if the action set does not span the space.
inline std::vector<int> select_spanning_basis(const ActionSet& actions) {
    const int dim = actions.dim();
    if (actions.size() < dim) {
        throw BasisDoesNotSpan("need at least d actions to span the action space");
    }
    std::vector<int> chosen;
    std::vector<RealVector> ortho;
    for (int step = 0; step < dim; ++step) {
        int best = -1;
        double best_norm = 1e-7;
        RealVector best_residual;
        for (int i = 0; i < actions.size(); ++i) {
            RealVector residual = actions[i];
            for (const RealVector& q : ortho) residual -= q.dot(residual) * q;
            const double norm = residual.norm();
            if (norm > best_norm) {
                best = i;
                best_norm = norm;
                best_residual = std::move(residual);
            }
        }
        if (best < 0) {
            throw BasisDoesNotSpan("action set does not span the action space");
        }
        chosen.push_back(best);
        ortho.push_back(best_residual / best_norm);
    }
    return chosen;
}

/// Plays a fixed spanning basis for each task's first d interactions, then
/// delegates to the wrapped agent. After the forced plays of a task,
/// lambda_min of its feature Gram matrix is at least eta / sigma^2.
class ForcedExploration final : public Agent {
  public:
    ForcedExploration(std::unique_ptr<Agent> inner, std::vector<int> basis_actions,
                      const ActionSet& actions, int num_tasks)
        : inner_(std::move(inner)),
          basis_(std::move(basis_actions)),
          plays_(static_cast<std::size_t>(num_tasks), 0) {
        const int dim = actions.dim();
        if (static_cast<int>(basis_.size()) != dim) {
            throw BasisDoesNotSpan("forced-exploration basis must have exactly d actions");
        }
        Matrix outer_sum = Matrix::Zero(dim, dim);
        for (int idx : basis_) {
            if (idx < 0 || idx >= actions.size()) {
                throw BasisDoesNotSpan("basis action index out of range");
            }
            outer_sum += actions[idx] * actions[idx].transpose();
        }
        eta_ = lambda_min(outer_sum);
        if (eta_ <= 1e-10) {
            throw BasisDoesNotSpan("basis outer-product sum is numerically singular");
        }
    }

    std::vector<int> act(const std::vector<int>& tasks, Rng& rng) override {
        std::vector<int> actions(tasks.size(), -1);
        std::vector<int> delegated;
        std::vector<std::size_t> delegated_pos;
        for (std::size_t i = 0; i < tasks.size(); ++i) {
            auto& count = plays_.at(static_cast<std::size_t>(tasks[i]));
            if (count < static_cast<int>(basis_.size())) {
                actions[i] = basis_[static_cast<std::size_t>(count)];
                ++count;
            } else {
                delegated.push_back(tasks[i]);
                delegated_pos.push_back(i);
            }
        }
        const std::vector<int> inner_actions = inner_->act(delegated, rng);
        for (std::size_t k = 0; k < delegated.size(); ++k) {
            actions[delegated_pos[k]] = inner_actions[k];
        }
        return actions;
    }

    void update(const std::vector<Observation>& observations) override {
        inner_->update(observations);
    }

    const std::string& name() const override { return inner_->name(); }

    double eta() const { return eta_; }
    Agent& inner() { return *inner_; }

  private:
    std::unique_ptr<Agent> inner_;
    std::vector<int> basis_;
    std::vector<int> plays_;
    double eta_ = 0.0;
};

}  // namespace hierts
