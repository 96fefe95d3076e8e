#pragma once

#include <algorithm>
#include <concepts>
#include <string>
#include <utility>
#include <vector>

#include <Eigen/Dense>

#include "lomv/errors.hpp"
#include "lomv/numeric.hpp"

namespace lomv {

using Eigen::Index;
using Eigen::MatrixXd;
using Eigen::VectorXd;

/// Relative pivot tolerance used when certifying positive definiteness.
inline constexpr double kPivotTolerance = 1e-12;
/// Above this eigenvalue ratio of the factor covariance, the Woodbury inner
/// solve switches to the (I + Omega B'D^-1 B) form that avoids inverting Omega.
inline constexpr double kFactorCovConditionLimit = 1e12;

/**
 * A strictly increasing list of asset indices drawn from a universe of size p.
 */
class AssetSubset {
 public:
  AssetSubset() = default;

  AssetSubset(std::vector<Index> indices, Index universe)
      : indices_(std::move(indices)), universe_(universe) {
    if (indices_.empty()) throw InvalidInput("asset subset must be non-empty");
    for (std::size_t i = 0; i < indices_.size(); ++i) {
      if (indices_[i] < 0 || indices_[i] >= universe_) {
        throw InvalidInput("asset index " + std::to_string(indices_[i]) +
                           " outside universe of size " + std::to_string(universe_));
      }
      if (i > 0 && indices_[i] <= indices_[i - 1]) {
        throw InvalidInput("asset subset indices must be strictly increasing");
      }
    }
  }

  static AssetSubset all(Index p) {
    std::vector<Index> idx(static_cast<std::size_t>(p));
    for (Index i = 0; i < p; ++i) idx[static_cast<std::size_t>(i)] = i;
    return {std::move(idx), p};
  }

  /// Indices i with mask[i] true.
  static AssetSubset from_mask(const std::vector<bool>& mask) {
    std::vector<Index> idx;
    for (std::size_t i = 0; i < mask.size(); ++i) {
      if (mask[i]) idx.push_back(static_cast<Index>(i));
    }
    return {std::move(idx), static_cast<Index>(mask.size())};
  }

  /// Sorts and deduplicates before validating.
  static AssetSubset from_unsorted(std::vector<Index> indices, Index universe) {
    std::sort(indices.begin(), indices.end());
    indices.erase(std::unique(indices.begin(), indices.end()), indices.end());
    return {std::move(indices), universe};
  }

  Index size() const noexcept { return static_cast<Index>(indices_.size()); }
  Index universe() const noexcept { return universe_; }
  bool empty() const noexcept { return indices_.empty(); }
  Index operator[](Index i) const { return indices_[static_cast<std::size_t>(i)]; }
  const std::vector<Index>& indices() const noexcept { return indices_; }
  auto begin() const noexcept { return indices_.begin(); }
  auto end() const noexcept { return indices_.end(); }

  bool contains(Index i) const { return std::binary_search(indices_.begin(), indices_.end(), i); }

  std::vector<bool> mask() const {
    std::vector<bool> m(static_cast<std::size_t>(universe_), false);
    for (Index i : indices_) m[static_cast<std::size_t>(i)] = true;
    return m;
  }

  std::vector<Index> complement() const {
    std::vector<Index> out;
    std::size_t j = 0;
    for (Index i = 0; i < universe_; ++i) {
      if (j < indices_.size() && indices_[j] == i) {
        ++j;
      } else {
        out.push_back(i);
      }
    }
    return out;
  }

  friend bool operator==(const AssetSubset&, const AssetSubset&) = default;

 private:
  std::vector<Index> indices_;
  Index universe_ = 0;
};

namespace detail {

inline void require_symmetric(const MatrixXd& m, const char* what) {
  const double scale = std::max(1.0, m.cwiseAbs().maxCoeff());
  if ((m - m.transpose()).cwiseAbs().maxCoeff() > 1e-12 * scale) {
    throw InvalidInput(std::string(what) + " is not symmetric");
  }
}

/// Cholesky-based PD check with pivot tolerance relative to the largest diagonal.
inline bool is_positive_definite(const MatrixXd& m) {
  if (m.rows() == 0) return false;
  const double max_diag = m.diagonal().maxCoeff();
  if (!(max_diag > 0.0)) return false;
  Eigen::LLT<MatrixXd> llt(m);
  if (llt.info() != Eigen::Success) return false;
  const VectorXd l = MatrixXd(llt.matrixL()).diagonal();
  return l.cwiseAbs2().minCoeff() > kPivotTolerance * max_diag;
}

inline MatrixXd select_rows(const MatrixXd& m, const AssetSubset& k) {
  MatrixXd out(k.size(), m.cols());
  for (Index r = 0; r < k.size(); ++r) out.row(r) = m.row(k[r]);
  return out;
}

inline VectorXd select(const VectorXd& v, const AssetSubset& k) {
  VectorXd out(k.size());
  for (Index r = 0; r < k.size(); ++r) out[r] = v[k[r]];
  return out;
}

inline void require_subset_of(const AssetSubset& k, Index p) {
  if (k.empty()) throw InvalidInput("asset subset must be non-empty");
  if (k.universe() != p) {
    throw InvalidInput("asset subset universe " + std::to_string(k.universe()) +
                       " does not match model size " + std::to_string(p));
  }
}

}  // namespace detail

/**
 * Covariance in factor form  Sigma = B * Omega * B' + diag(specific_var).
 *
 * Omega is stored as a general symmetric positive definite q x q matrix; it is
 * diagonal when the columns of B are principal components.
 */
struct FactorModel {
  MatrixXd exposures;                  ///< B, p x q
  MatrixXd factor_cov;                 ///< Omega, q x q
  VectorXd specific_var;               ///< diagonal of Delta, length p
  std::vector<std::string> asset_ids;  ///< empty or length p

  Index p() const noexcept { return exposures.rows(); }
  Index q() const noexcept { return exposures.cols(); }

  void validate() const {
    if (p() < 1 || q() < 1) throw InvalidInput("factor model needs p >= 1 and q >= 1");
    if (q() > p()) throw InvalidInput("factor model needs q <= p");
    if (factor_cov.rows() != q() || factor_cov.cols() != q()) {
      throw InvalidInput("factor covariance must be q x q");
    }
    if (specific_var.size() != p()) throw InvalidInput("specific variances must have length p");
    if (!asset_ids.empty() && static_cast<Index>(asset_ids.size()) != p()) {
      throw InvalidInput("asset_ids must be empty or have length p");
    }
    if (!exposures.allFinite() || !factor_cov.allFinite() || !specific_var.allFinite()) {
      throw InvalidInput("factor model contains non-finite entries");
    }
    for (Index i = 0; i < p(); ++i) {
      if (!(specific_var[i] > 0.0)) {
        throw InvalidInput("specific variance of asset " + std::to_string(i) + " must be > 0");
      }
    }
    detail::require_symmetric(factor_cov, "factor covariance");
    if (!detail::is_positive_definite(factor_cov)) {
      throw InvalidInput("factor covariance is not positive definite");
    }
  }

  /// Single-factor model  sigma_sq * beta beta' + diag(delta_sq).
  static FactorModel single_factor(const VectorXd& beta, double sigma_sq, const VectorXd& delta_sq,
                                   std::vector<std::string> ids = {}) {
    FactorModel m;
    m.exposures = beta;
    m.factor_cov = MatrixXd::Constant(1, 1, sigma_sq);
    m.specific_var = delta_sq;
    m.asset_ids = std::move(ids);
    return m;
  }
};

/// A plain symmetric positive definite covariance matrix.
struct DenseCovariance {
  MatrixXd sigma;
  std::vector<std::string> asset_ids;

  Index p() const noexcept { return sigma.rows(); }

  void validate() const {
    if (sigma.rows() < 1 || sigma.rows() != sigma.cols()) {
      throw InvalidInput("covariance must be a non-empty square matrix");
    }
    if (!sigma.allFinite()) throw InvalidInput("covariance contains non-finite entries");
    if (!asset_ids.empty() && static_cast<Index>(asset_ids.size()) != p()) {
      throw InvalidInput("asset_ids must be empty or have length p");
    }
    detail::require_symmetric(sigma, "covariance");
    if (!detail::is_positive_definite(sigma)) {
      throw InvalidInput("covariance is not positive definite");
    }
  }
};

// ---------------------------------------------------------------------------
// Dense assembly and subsetting

inline DenseCovariance assemble_dense(const FactorModel& model) {
  model.validate();
  MatrixXd sigma = model.exposures * model.factor_cov * model.exposures.transpose();
  sigma.diagonal() += model.specific_var;
  // Symmetrize away rounding so downstream symmetry checks are exact.
  sigma = 0.5 * (sigma + sigma.transpose()).eval();
  return {std::move(sigma), model.asset_ids};
}

inline FactorModel subset_model(const FactorModel& model, const AssetSubset& k) {
  detail::require_subset_of(k, model.p());
  FactorModel out;
  out.exposures = detail::select_rows(model.exposures, k);
  out.factor_cov = model.factor_cov;
  out.specific_var = detail::select(model.specific_var, k);
  if (!model.asset_ids.empty()) {
    for (Index i : k) out.asset_ids.push_back(model.asset_ids[static_cast<std::size_t>(i)]);
  }
  return out;
}

inline MatrixXd principal_submatrix(const MatrixXd& m, const AssetSubset& k) {
  MatrixXd out(k.size(), k.size());
  for (Index r = 0; r < k.size(); ++r) {
    for (Index c = 0; c < k.size(); ++c) out(r, c) = m(k[r], k[c]);
  }
  return out;
}

inline DenseCovariance subset_model(const DenseCovariance& cov, const AssetSubset& k) {
  detail::require_subset_of(k, cov.p());
  DenseCovariance out{principal_submatrix(cov.sigma, k), {}};
  if (!cov.asset_ids.empty()) {
    for (Index i : k) out.asset_ids.push_back(cov.asset_ids[static_cast<std::size_t>(i)]);
  }
  return out;
}

// ---------------------------------------------------------------------------
// Covariance-model interface shared by the solvers

inline Index dimension(const FactorModel& m) { return m.p(); }
inline Index dimension(const DenseCovariance& c) { return c.p(); }

/// Sigma * x in O(p q) without forming Sigma.
inline VectorXd multiply(const FactorModel& m, const VectorXd& x) {
  const VectorXd fx = m.factor_cov * (m.exposures.transpose() * x);
  return m.exposures * fx + m.specific_var.cwiseProduct(x);
}

inline VectorXd multiply(const DenseCovariance& c, const VectorXd& x) { return c.sigma * x; }

inline VectorXd covariance_diagonal(const FactorModel& m) {
  VectorXd d = m.specific_var;
  for (Index i = 0; i < m.p(); ++i) {
    d[i] += m.exposures.row(i) * m.factor_cov * m.exposures.row(i).transpose();
  }
  return d;
}

inline VectorXd covariance_diagonal(const DenseCovariance& c) { return c.sigma.diagonal(); }

inline double max_diagonal(const FactorModel& m) { return covariance_diagonal(m).maxCoeff(); }
inline double max_diagonal(const DenseCovariance& c) { return c.sigma.diagonal().maxCoeff(); }

/**
 * (Sigma^K)^{-1} 1_k via the Woodbury identity, O(k q^2), without forming Sigma^K:
 *
 *   x = D^-1 1 - D^-1 B (Omega^-1 + B' D^-1 B)^-1 B' D^-1 1.
 *
 * When Omega is ill conditioned the inner system is rewritten as
 * (I + Omega B' D^-1 B) y = Omega B' D^-1 1.
 */
inline VectorXd solve_inv_ones(const FactorModel& model, const AssetSubset& k) {
  detail::require_subset_of(k, model.p());
  const Index q = model.q();
  const MatrixXd bk = detail::select_rows(model.exposures, k);
  const VectorXd dinv = detail::select(model.specific_var, k).cwiseInverse();

  const MatrixXd db = dinv.asDiagonal() * bk;       // D^-1 B
  const MatrixXd inner = bk.transpose() * db;       // B' D^-1 B
  const VectorXd rhs = bk.transpose() * dinv;       // B' D^-1 1

  Eigen::SelfAdjointEigenSolver<MatrixXd> omega_eig(model.factor_cov, Eigen::EigenvaluesOnly);
  const double eig_min = omega_eig.eigenvalues().minCoeff();
  const double eig_max = omega_eig.eigenvalues().maxCoeff();
  if (!(eig_min > 0.0)) throw NumericalError("factor covariance is not positive definite");

  VectorXd y;
  if (eig_max / eig_min <= kFactorCovConditionLimit) {
    const MatrixXd omega_inv = model.factor_cov.llt().solve(MatrixXd::Identity(q, q));
    MatrixXd a = omega_inv + inner;
    a = 0.5 * (a + a.transpose()).eval();
    Eigen::LLT<MatrixXd> llt(a);
    const VectorXd l = MatrixXd(llt.matrixL()).diagonal();
    if (llt.info() != Eigen::Success ||
        l.cwiseAbs2().minCoeff() <= kPivotTolerance * a.diagonal().maxCoeff()) {
      throw NumericalError("Woodbury inner system is near-singular");
    }
    y = llt.solve(rhs);
  } else {
    const MatrixXd a = MatrixXd::Identity(q, q) + model.factor_cov * inner;
    Eigen::FullPivLU<MatrixXd> lu(a);
    if (lu.rank() < q || lu.rcond() < 1e-14) {
      throw NumericalError("Woodbury inner system is near-singular");
    }
    y = lu.solve(model.factor_cov * rhs);
  }
  return dinv - db * y;
}

inline VectorXd solve_inv_ones(const DenseCovariance& cov, const AssetSubset& k) {
  detail::require_subset_of(k, cov.p());
  const MatrixXd sub = principal_submatrix(cov.sigma, k);
  Eigen::LLT<MatrixXd> llt(sub);
  if (llt.info() != Eigen::Success) throw NumericalError("covariance submatrix is not positive definite");
  return llt.solve(VectorXd::Ones(k.size()));
}

/// Anything that can form Sigma * x.
template <class C>
concept CovarianceProduct = requires(const C& c, const VectorXd& x) {
  { dimension(c) } -> std::convertible_to<Index>;
  { multiply(c, x) } -> std::convertible_to<VectorXd>;
};

/// Any positive definite covariance representation the solvers can consume.
template <class C>
concept CovarianceModel = CovarianceProduct<C> && requires(const C& c, const AssetSubset& k) {
  { solve_inv_ones(c, k) } -> std::convertible_to<VectorXd>;
  { max_diagonal(c) } -> std::convertible_to<double>;
  { c.validate() };
};

/**
 * Fully invested long-short minimum variance weights on the subset K:
 * (Sigma^K)^-1 1 / (1' (Sigma^K)^-1 1). Entries sum to one and may be negative.
 */
template <CovarianceModel C>
VectorXd long_short_weights(const C& cov, const AssetSubset& k) {
  const VectorXd x = solve_inv_ones(cov, k);
  const double s = compensated_sum(x);
  if (!(s > 0.0)) throw NumericalError("1'(Sigma^K)^-1 1 is not positive");
  return x / s;
}

}  // namespace lomv
