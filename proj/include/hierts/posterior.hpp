#pragma once

#include <cmath>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include "hierts/errors.hpp"
#include "hierts/gaussian.hpp"

namespace hierts {

/// Sufficient statistics of one task's interaction history. The dense path
/// keeps the noise-scaled feature Gram matrix and reward-weighted feature sum;
/// when an action is exactly a standard basis vector, per-arm pull counts and
/// raw reward sums are maintained as well, so the two inference paths can be
/// cross-checked against each other.
class TaskStats {
  public:
    explicit TaskStats(int dim)
        : gram_(Matrix::Zero(dim, dim)),
          weighted_rewards_(RealVector::Zero(dim)),
          arm_counts_(RealVector::Zero(dim)),
          arm_reward_sums_(RealVector::Zero(dim)) {}

    const Matrix& gram() const { return gram_; }                      // sigma^-2 sum a a^T
    const RealVector& weighted_rewards() const { return weighted_rewards_; }  // sigma^-2 sum a y
    const RealVector& arm_counts() const { return arm_counts_; }
    const RealVector& arm_reward_sums() const { return arm_reward_sums_; }
    long interaction_count() const { return interaction_count_; }
    int dim() const { return static_cast<int>(weighted_rewards_.size()); }

    friend TaskStats update_task_stats(TaskStats stats, const RealVector& action,
                                       double reward_value, double sigma);

  private:
    Matrix gram_;
    RealVector weighted_rewards_;
    RealVector arm_counts_;
    RealVector arm_reward_sums_;
    long interaction_count_ = 0;
};

/// Folds one (action, reward) pair into the statistics.
inline TaskStats update_task_stats(TaskStats stats, const RealVector& action,
                                   double reward_value, double sigma) {
    if (action.norm() > 1.0 + 1e-12) {
        throw UnitBallViolation("action norm exceeds 1 in update_task_stats");
    }
    const double inv_var = 1.0 / (sigma * sigma);
    stats.gram_ += inv_var * (action * action.transpose());
    stats.weighted_rewards_ += inv_var * reward_value * action;
    const int arm = standard_basis_index(action);
    if (arm >= 0) {
        stats.arm_counts_(arm) += 1.0;
        stats.arm_reward_sums_(arm) += reward_value;
    }
    ++stats.interaction_count_;
    return stats;
}

/// Belief over the shared hyper-parameter mu_*.
struct HyperPosterior {
    RealVector mean;
    CovMatrix cov;
};

/// Belief over one task parameter given a fixed hyper-parameter value. The
/// covariance does not depend on that value.
struct TaskConditional {
    RealVector mean;
    CovMatrix cov;
};

/// Belief over one task parameter with the hyper-parameter integrated out.
struct MarginalPosterior {
    RealVector mean;
    CovMatrix cov;
};

/// Hyper-posterior for the linear model. Each task enters as one pseudo
/// observation; the precision contribution is accumulated in the
/// inversion-free form G - G (Sigma_0^-1 + G)^-1 G, which is zero for tasks
/// without data and needs no pseudo-inverse for singular G.
inline HyperPosterior hyper_posterior_linear(const RealVector& mu_q, const CovMatrix& sigma_q,
                                             const CovMatrix& sigma_0,
                                             std::span<const TaskStats> stats) {
    const Matrix s0_inv = pd_inverse(sigma_0);
    Matrix precision = pd_inverse(sigma_q);
    RealVector rhs = solve_pd(sigma_q, mu_q);
    for (const TaskStats& task : stats) {
        if (task.interaction_count() == 0) continue;
        const Matrix& g = task.gram();
        const CovMatrix inner = symmetrize(s0_inv + g);
        precision += g - g * solve_pd(inner, g);
        rhs += task.weighted_rewards() - g * solve_pd(inner, task.weighted_rewards());
    }
    const CovMatrix prec = symmetrize(precision);
    return {solve_pd(prec, rhs), symmetrize(pd_inverse(prec))};
}

/// Hyper-posterior for the K-armed model with isotropic priors; factors across
/// arms. Arms a task never pulled contribute nothing to that arm's sums.
inline HyperPosterior hyper_posterior_karmed(const RealVector& mu_q, double sigma_q,
                                             double sigma_0, double sigma,
                                             std::span<const TaskStats> stats) {
    const auto num_arms = mu_q.size();
    RealVector mean(num_arms);
    Matrix cov = Matrix::Zero(num_arms, num_arms);
    for (Eigen::Index i = 0; i < num_arms; ++i) {
        double precision = 1.0 / (sigma_q * sigma_q);
        double weighted = mu_q(i) / (sigma_q * sigma_q);
        for (const TaskStats& task : stats) {
            const double pulls = task.arm_counts()(i);
            if (pulls == 0.0) continue;
            const double obs_var = pulls * sigma_0 * sigma_0 + sigma * sigma;
            precision += pulls / obs_var;
            weighted += task.arm_reward_sums()(i) / obs_var;
        }
        const double variance = 1.0 / precision;
        mean(i) = variance * weighted;
        cov(i, i) = variance;
    }
    return {std::move(mean), CovMatrix(cov)};
}

/// Posterior of a linear model with prior N(mu_value, Sigma_0) and the task's
/// Gaussian observations.
inline TaskConditional task_conditional_linear(const RealVector& mu_value,
                                               const CovMatrix& sigma_0,
                                               const TaskStats& stats) {
    const Matrix s0_inv = pd_inverse(sigma_0);
    const CovMatrix prec = symmetrize(s0_inv + stats.gram());
    RealVector mean = solve_pd(prec, RealVector(s0_inv * mu_value + stats.weighted_rewards()));
    return {std::move(mean), symmetrize(pd_inverse(prec))};
}

/// Per-arm form of the task conditional for isotropic priors.
inline TaskConditional task_conditional_karmed(const RealVector& mu_value, double sigma_0,
                                               double sigma, const TaskStats& stats) {
    const auto num_arms = mu_value.size();
    RealVector mean(num_arms);
    Matrix cov = Matrix::Zero(num_arms, num_arms);
    for (Eigen::Index i = 0; i < num_arms; ++i) {
        const double precision =
            1.0 / (sigma_0 * sigma_0) + stats.arm_counts()(i) / (sigma * sigma);
        const double variance = 1.0 / precision;
        mean(i) = variance * (mu_value(i) / (sigma_0 * sigma_0) +
                              stats.arm_reward_sums()(i) / (sigma * sigma));
        cov(i, i) = variance;
    }
    return {std::move(mean), CovMatrix(cov)};
}

/// Marginal posterior of one task parameter. The covariance is the law of
/// total covariance instantiated for this model: the conditional covariance
/// plus the hyper-uncertainty mapped through the conditional gain; the mean is
/// the conditional mean evaluated at the hyper-posterior mean.
inline MarginalPosterior marginal_posterior(const HyperPosterior& hyper,
                                            const CovMatrix& sigma_0, const TaskStats& stats) {
    const Matrix s0_inv = pd_inverse(sigma_0);
    const CovMatrix prec = symmetrize(s0_inv + stats.gram());  // Sigma_0^-1 + G
    const Matrix gain = solve_pd(prec, s0_inv);                // (Sigma_0^-1 + G)^-1 Sigma_0^-1
    Matrix cov = pd_inverse(prec) + gain * hyper.cov.matrix() * gain.transpose();
    RealVector mean = solve_pd(prec, RealVector(s0_inv * hyper.mean + stats.weighted_rewards()));
    return {std::move(mean), symmetrize(cov)};
}

/// Rank-one increment of the hyper-posterior precision caused by one more
/// observation in a task: sigma^-2 Sigma_0^-1 M^-1 (a a^T / (1 + v^T v)) M^-1
/// Sigma_0^-1 with M = Sigma_0^-1 + G and v = sigma^-1 M^-1/2 a. Equals the
/// precision difference across rounds when only this task acts; kept as a
/// verification primitive, not the update path.
inline Matrix telescoping_increment(const CovMatrix& sigma_0, const TaskStats& stats_before,
                                    const RealVector& action, double sigma) {
    const Matrix s0_inv = pd_inverse(sigma_0);
    const CovMatrix m = symmetrize(s0_inv + stats_before.gram());
    const RealVector m_inv_a = solve_pd(m, action);
    const double vtv = action.dot(m_inv_a) / (sigma * sigma);
    const RealVector w = s0_inv * m_inv_a;
    return (w * w.transpose()) / ((sigma * sigma) * (1.0 + vtv));
}

}  // namespace hierts
