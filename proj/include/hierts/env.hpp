#pragma once

#include <algorithm>
#include <cmath>
#include <string>
#include <utility>
#include <vector>

#include "hierts/errors.hpp"
#include "hierts/gaussian.hpp"
#include "hierts/random.hpp"

namespace hierts {

/// A fixed finite set of actions, each inside the unit ball. The standard-basis
/// form models the K-armed bandit (arm i is e_i, d = K).
class ActionSet {
  public:
    static ActionSet finite(std::vector<RealVector> actions) {
        return ActionSet(std::move(actions), false);
    }

    static ActionSet standard_basis(int num_arms) {
        std::vector<RealVector> actions;
        actions.reserve(static_cast<std::size_t>(num_arms));
        for (int i = 0; i < num_arms; ++i) {
            RealVector e = RealVector::Zero(num_arms);
            e(i) = 1.0;
            actions.push_back(std::move(e));
        }
        return ActionSet(std::move(actions), true);
    }

    int size() const { return static_cast<int>(actions_.size()); }
    int dim() const { return static_cast<int>(actions_.front().size()); }
    bool is_standard_basis() const { return is_standard_basis_; }
    const RealVector& operator[](int i) const { return actions_[static_cast<std::size_t>(i)]; }
    const std::vector<RealVector>& actions() const { return actions_; }

  private:
    ActionSet(std::vector<RealVector> actions, bool basis)
        : actions_(std::move(actions)), is_standard_basis_(basis) {
        if (actions_.empty()) throw BadValue("action_set", "must be non-empty");
        const Eigen::Index d = actions_.front().size();
        for (const RealVector& a : actions_) {
            if (a.size() != d) throw BadValue("action_set", "inconsistent action dimensions");
            if (a.norm() > 1.0 + 1e-12) {
                throw UnitBallViolation("action norm " + std::to_string(a.norm()) +
                                        " exceeds 1");
            }
        }
    }

    std::vector<RealVector> actions_;
    bool is_standard_basis_;
};

enum class RewardKind { Gaussian, BernoulliMisspecified };

/// Full generative model: hyper-prior N(mu_q, Sigma_q), task prior
/// N(mu_*, Sigma_0), reward noise sigma, plus task/interaction counts and the
/// action set.
struct ModelConfig {
    RealVector mu_q;
    CovMatrix sigma_q;
    CovMatrix sigma_0;
    double sigma = 1.0;
    int num_tasks = 1;              // m
    int interactions_per_task = 1;  // n
    int max_concurrent = 1;         // L
    ActionSet action_set;
    RewardKind reward_kind = RewardKind::Gaussian;

    ModelConfig(RealVector mu_q_in, CovMatrix sigma_q_in, CovMatrix sigma_0_in,
                double sigma_in, int m, int n, int concurrent, ActionSet actions,
                RewardKind kind = RewardKind::Gaussian)
        : mu_q(std::move(mu_q_in)),
          sigma_q(std::move(sigma_q_in)),
          sigma_0(std::move(sigma_0_in)),
          sigma(sigma_in),
          num_tasks(m),
          interactions_per_task(n),
          max_concurrent(concurrent),
          action_set(std::move(actions)),
          reward_kind(kind) {
        const Eigen::Index d = mu_q.size();
        if (sigma_q.dim() != d || sigma_0.dim() != d || action_set.dim() != d) {
            throw BadValue("model", "dimension mismatch between prior and actions");
        }
        if (!(sigma > 0.0)) throw BadValue("model.sigma", "must be > 0");
        if (num_tasks < 1) throw BadValue("model.m", "must be >= 1");
        if (interactions_per_task < 1) throw BadValue("model.n", "must be >= 1");
        if (max_concurrent < 1 || max_concurrent > num_tasks) {
            throw BadValue("model.L", "must satisfy 1 <= L <= m");
        }
    }

    int dim() const { return static_cast<int>(mu_q.size()); }
};

/// One draw of the environment: the hyper-parameter and all task parameters.
class EnvInstance {
  public:
    EnvInstance(ModelConfig config, RealVector mu_star, std::vector<RealVector> theta_star)
        : config_(std::move(config)),
          mu_star_(std::move(mu_star)),
          theta_star_(std::move(theta_star)) {}

    const ModelConfig& config() const { return config_; }
    const RealVector& mu_star() const { return mu_star_; }
    const RealVector& theta_star(int task) const {
        check_task(task);
        return theta_star_[static_cast<std::size_t>(task)];
    }
    int num_tasks() const { return static_cast<int>(theta_star_.size()); }

    void check_task(int task) const {
        if (task < 0 || task >= num_tasks()) {
            throw UnknownTask("task " + std::to_string(task) + " outside [0, " +
                              std::to_string(num_tasks()) + ")");
        }
    }

  private:
    ModelConfig config_;
    RealVector mu_star_;
    std::vector<RealVector> theta_star_;
};

/// Draws mu_* from the hyper-prior and each task parameter from N(mu_*, Sigma_0).
inline EnvInstance sample_instance(const ModelConfig& config, Rng& rng) {
    RealVector mu_star = sample_mvn(config.mu_q, config.sigma_q, rng);
    std::vector<RealVector> theta;
    theta.reserve(static_cast<std::size_t>(config.num_tasks));
    for (int s = 0; s < config.num_tasks; ++s) {
        theta.push_back(sample_mvn(mu_star, config.sigma_0, rng));
    }
    return EnvInstance(config, std::move(mu_star), std::move(theta));
}

/// Stochastic reward for playing action a in the given task. Gaussian rewards
/// consume one normal draw; the misspecified Bernoulli variant consumes one
/// uniform draw and clamps the linear mean into [0, 1].
inline double reward(const EnvInstance& inst, int task, const RealVector& a, Rng& rng) {
    inst.check_task(task);
    const double mean = a.dot(inst.theta_star(task));
    if (inst.config().reward_kind == RewardKind::BernoulliMisspecified) {
        const double p = std::clamp(mean, 0.0, 1.0);
        return uniform_unit(rng) < p ? 1.0 : 0.0;
    }
    return mean + inst.config().sigma * standard_normal(rng);
}

/// Index of the argmax action for a parameter vector; ties go to the lowest index.
inline int argmax_action(const ActionSet& actions, const RealVector& theta) {
    int best = 0;
    double best_value = actions[0].dot(theta);
    for (int i = 1; i < actions.size(); ++i) {
        const double v = actions[i].dot(theta);
        if (v > best_value) {
            best = i;
            best_value = v;
        }
    }
    return best;
}

/// Index of the optimal action in the given task.
inline int optimal_action(const EnvInstance& inst, int task) {
    inst.check_task(task);
    return argmax_action(inst.config().action_set, inst.theta_star(task));
}

}  // namespace hierts
