#pragma once

#include <Eigen/Dense>
#include <algorithm>
#include <cmath>
#include <string>
#include <utility>
#include <vector>

#include "hierts/errors.hpp"
#include "hierts/random.hpp"

namespace hierts {

using RealVector = Eigen::VectorXd;
using Matrix = Eigen::MatrixXd;

namespace detail {

inline double max_abs(const Matrix& m) {
    return m.size() == 0 ? 0.0 : m.cwiseAbs().maxCoeff();
}

/// Plain lower Cholesky with a scale-aware pivot floor. The floor has an
/// absolute component so that numerically degenerate covariances (e.g. 1e-18 * I)
/// are rejected rather than factored into garbage.
inline Matrix cholesky_lower_checked(const Matrix& m) {
    const Eigen::Index d = m.rows();
    const double tol = 1e-12 * std::max(1.0, m.trace() / static_cast<double>(d));
    Matrix lower = Matrix::Zero(d, d);
    for (Eigen::Index j = 0; j < d; ++j) {
        double pivot = m(j, j);
        for (Eigen::Index k = 0; k < j; ++k) pivot -= lower(j, k) * lower(j, k);
        if (!(pivot > tol)) {
            throw NotPositiveDefinite("cholesky pivot " + std::to_string(pivot) +
                                      " at index " + std::to_string(j) +
                                      " below tolerance " + std::to_string(tol));
        }
        lower(j, j) = std::sqrt(pivot);
        for (Eigen::Index i = j + 1; i < d; ++i) {
            double acc = m(i, j);
            for (Eigen::Index k = 0; k < j; ++k) acc -= lower(i, k) * lower(j, k);
            lower(i, j) = acc / lower(j, j);
        }
    }
    return lower;
}

}  // namespace detail

/// Symmetric positive definite matrix. Construction validates finiteness,
/// symmetry (to 1e-12 relative), and positive definiteness via Cholesky pivots;
/// the stored matrix is exactly symmetric and the lower factor is cached.
class CovMatrix {
  public:
    explicit CovMatrix(Matrix m) {
        if (m.rows() != m.cols() || m.rows() == 0) {
            throw NotPositiveDefinite("covariance must be square and non-empty");
        }
        if (!m.allFinite()) {
            throw NotPositiveDefinite("covariance has non-finite entries");
        }
        const double asym = detail::max_abs(m - m.transpose());
        if (asym > 1e-12 * std::max(1.0, detail::max_abs(m))) {
            throw AsymmetryTooLarge("covariance asymmetry " + std::to_string(asym) +
                                    " exceeds 1e-12 relative");
        }
        matrix_ = 0.5 * (m + m.transpose());
        lower_ = detail::cholesky_lower_checked(matrix_);
    }

    Eigen::Index dim() const { return matrix_.rows(); }
    const Matrix& matrix() const { return matrix_; }
    const Matrix& cholesky_lower() const { return lower_; }

  private:
    Matrix matrix_;
    Matrix lower_;
};

/// Averages away floating-point asymmetry and validates the result. Rejects
/// anything further than 1e-8 relative from symmetric.
inline CovMatrix symmetrize(const Matrix& m) {
    const double asym = detail::max_abs(m - m.transpose());
    if (asym > 1e-8 * std::max(1.0, detail::max_abs(m))) {
        throw AsymmetryTooLarge("asymmetry " + std::to_string(asym) +
                                " exceeds 1e-8 relative");
    }
    return CovMatrix(0.5 * (m + m.transpose()));
}

/// Lower-triangular L with L * L^T = m.
inline const Matrix& cholesky_factor(const CovMatrix& m) { return m.cholesky_lower(); }

/// Solves m * x = b through the cached Cholesky factor.
inline RealVector solve_pd(const CovMatrix& m, const RealVector& b) {
    const Matrix& lower = m.cholesky_lower();
    RealVector y = lower.triangularView<Eigen::Lower>().solve(b);
    return lower.transpose().triangularView<Eigen::Upper>().solve(y);
}

/// Multi-right-hand-side variant of solve_pd.
inline Matrix solve_pd(const CovMatrix& m, const Matrix& b) {
    const Matrix& lower = m.cholesky_lower();
    Matrix y = lower.triangularView<Eigen::Lower>().solve(b);
    return lower.transpose().triangularView<Eigen::Upper>().solve(y);
}

/// Materializes m^-1 through factorized solves with an identity right-hand side.
inline Matrix pd_inverse(const CovMatrix& m) {
    return solve_pd(m, Matrix(Matrix::Identity(m.dim(), m.dim())));
}

/// Eigenvalues of a symmetric matrix, ascending.
inline RealVector sym_eigenvalues(const Matrix& m) {
    Eigen::SelfAdjointEigenSolver<Matrix> solver(m, Eigen::EigenvaluesOnly);
    return solver.eigenvalues();
}

inline double lambda_max(const Matrix& m) { return sym_eigenvalues(m).maxCoeff(); }
inline double lambda_min(const Matrix& m) { return sym_eigenvalues(m).minCoeff(); }

/// Index i when v equals the standard basis vector e_i exactly, else -1.
inline int standard_basis_index(const RealVector& v) {
    int hit = -1;
    for (Eigen::Index i = 0; i < v.size(); ++i) {
        if (v(i) == 1.0) {
            if (hit >= 0) return -1;
            hit = static_cast<int>(i);
        } else if (v(i) != 0.0) {
            return -1;
        }
    }
    return hit;
}

/// Draws mean + L * z with z standard normal; z entries are consumed in
/// coordinate order, two raw generator draws per entry.
inline RealVector sample_mvn(const RealVector& mean, const CovMatrix& cov, Rng& rng) {
    RealVector z(cov.dim());
    for (Eigen::Index i = 0; i < z.size(); ++i) z(i) = standard_normal(rng);
    return mean + cov.cholesky_lower() * z;
}

/// One labeled coordinate range inside a JointGaussian.
struct Block {
    std::string name;
    int offset = 0;
    int size = 0;
};

/// A dense joint Gaussian over labeled coordinate blocks. Used as the
/// brute-force conditioning oracle for the hierarchical posteriors.
class JointGaussian {
  public:
    JointGaussian(RealVector mean, CovMatrix cov, std::vector<Block> blocks)
        : mean_(std::move(mean)), cov_(std::move(cov)), blocks_(std::move(blocks)) {
        if (mean_.size() != cov_.dim()) {
            throw NotPositiveDefinite("joint mean/covariance dimension mismatch");
        }
        std::vector<bool> covered(static_cast<std::size_t>(mean_.size()), false);
        for (const Block& b : blocks_) {
            for (int i = b.offset; i < b.offset + b.size; ++i) {
                if (i < 0 || i >= mean_.size() || covered[static_cast<std::size_t>(i)]) {
                    throw NotPositiveDefinite("block ranges must be disjoint and in range");
                }
                covered[static_cast<std::size_t>(i)] = true;
            }
        }
        if (std::find(covered.begin(), covered.end(), false) != covered.end()) {
            throw NotPositiveDefinite("block ranges must cover all coordinates");
        }
    }

    const RealVector& mean() const { return mean_; }
    const CovMatrix& cov() const { return cov_; }
    const std::vector<Block>& blocks() const { return blocks_; }

    /// Coordinate range of the named block.
    std::pair<int, int> block_range(const std::string& name) const {
        for (const Block& b : blocks_) {
            if (b.name == name) return {b.offset, b.size};
        }
        throw std::out_of_range("no block named " + name);
    }

    RealVector block_mean(const std::string& name) const {
        auto [off, size] = block_range(name);
        return mean_.segment(off, size);
    }

    Matrix block_cov(const std::string& name) const {
        auto [off, size] = block_range(name);
        return cov_.matrix().block(off, off, size, size);
    }

  private:
    RealVector mean_;
    CovMatrix cov_;
    std::vector<Block> blocks_;
};

/// Exact Gaussian conditioning: observes the given coordinates and returns the
/// joint over the remaining ones. Blocks shrink or disappear as their
/// coordinates are observed.
inline JointGaussian condition_joint_gaussian(const JointGaussian& joint,
                                              const std::vector<int>& observed_indices,
                                              const RealVector& observed_values) {
    const Eigen::Index total = joint.mean().size();
    if (static_cast<Eigen::Index>(observed_indices.size()) != observed_values.size()) {
        throw std::invalid_argument("observed index/value count mismatch");
    }
    if (observed_indices.empty()) return joint;

    std::vector<bool> is_observed(static_cast<std::size_t>(total), false);
    for (int idx : observed_indices) {
        if (idx < 0 || idx >= total || is_observed[static_cast<std::size_t>(idx)]) {
            throw std::invalid_argument("observed indices must be unique and in range");
        }
        is_observed[static_cast<std::size_t>(idx)] = true;
    }
    std::vector<int> rest;
    rest.reserve(static_cast<std::size_t>(total) - observed_indices.size());
    for (int i = 0; i < total; ++i) {
        if (!is_observed[static_cast<std::size_t>(i)]) rest.push_back(i);
    }

    const Matrix& full = joint.cov().matrix();
    const auto nb = static_cast<Eigen::Index>(observed_indices.size());
    const auto na = static_cast<Eigen::Index>(rest.size());
    Matrix cov_bb(nb, nb), cov_ab(na, nb), cov_aa(na, na);
    RealVector mean_a(na), mean_b(nb);
    for (Eigen::Index i = 0; i < nb; ++i) {
        mean_b(i) = joint.mean()(observed_indices[static_cast<std::size_t>(i)]);
        for (Eigen::Index j = 0; j < nb; ++j) {
            cov_bb(i, j) = full(observed_indices[static_cast<std::size_t>(i)],
                                observed_indices[static_cast<std::size_t>(j)]);
        }
    }
    for (Eigen::Index i = 0; i < na; ++i) {
        mean_a(i) = joint.mean()(rest[static_cast<std::size_t>(i)]);
        for (Eigen::Index j = 0; j < nb; ++j) {
            cov_ab(i, j) = full(rest[static_cast<std::size_t>(i)],
                                observed_indices[static_cast<std::size_t>(j)]);
        }
        for (Eigen::Index j = 0; j < na; ++j) {
            cov_aa(i, j) = full(rest[static_cast<std::size_t>(i)],
                                rest[static_cast<std::size_t>(j)]);
        }
    }

    CovMatrix observed_block{cov_bb};  // NotPositiveDefinite if singular
    const Matrix gain = solve_pd(observed_block, Matrix(cov_ab.transpose())).transpose();
    RealVector new_mean = mean_a + gain * (observed_values - mean_b);
    Matrix new_cov = cov_aa - gain * cov_ab.transpose();

    // Rebuild the block map over the surviving coordinates. Surviving
    // coordinates keep their original order, so blocks are walked by offset.
    std::vector<Block> ordered = joint.blocks();
    std::sort(ordered.begin(), ordered.end(),
              [](const Block& a, const Block& b) { return a.offset < b.offset; });
    std::vector<Block> new_blocks;
    int cursor = 0;
    for (const Block& b : ordered) {
        int kept = 0;
        for (int i = b.offset; i < b.offset + b.size; ++i) {
            if (!is_observed[static_cast<std::size_t>(i)]) ++kept;
        }
        if (kept > 0) {
            new_blocks.push_back({b.name, cursor, kept});
            cursor += kept;
        }
    }
    return JointGaussian(std::move(new_mean), symmetrize(new_cov), std::move(new_blocks));
}

}  // namespace hierts
