#pragma once

#include <algorithm>
#include <cmath>
#include <functional>
#include <vector>

#include "lomv/factor_model.hpp"
#include "lomv/panel.hpp"

namespace lomv {

/// Specific-variance floor, relative to median(diag S).
inline constexpr double kSpecificFloorRatio = 1e-4;

/// Leading eigenpairs of S = Y Y' / n for a centered p x n panel.
struct Spectrum {
  VectorXd values;   ///< all eigenvalues of S on its row/column space, descending
  MatrixXd vectors;  ///< p x count unit eigenvectors, oriented with 1'h >= 0
  Index rank = 0;    ///< number of eigenvalues > 1e-10 * largest
};

namespace detail {

inline void orient_toward_ones(Eigen::Ref<VectorXd> h) {
  const double s = h.sum();
  if (std::abs(s) > 1e-12 * h.lpNorm<1>()) {
    if (s < 0.0) h = -h;
    return;
  }
  for (Index i = 0; i < h.size(); ++i) {
    if (h[i] != 0.0) {
      if (h[i] < 0.0) h = -h;
      return;
    }
  }
}

inline double specific_floor(const VectorXd& s_diag) {
  return kSpecificFloorRatio * median(s_diag);
}

/// Raises entries below floor to the floor; returns the clipped indices.
inline std::vector<Index> clip_below(VectorXd& v, double floor) {
  std::vector<Index> clipped;
  for (Index i = 0; i < v.size(); ++i) {
    if (!(v[i] > floor)) {
      v[i] = floor;
      clipped.push_back(i);
    }
  }
  return clipped;
}

}  // namespace detail

/**
 * Eigen-decomposition of Y Y'/n. When p > n the n x n Gram matrix Y'Y/n is
 * decomposed instead (same nonzero spectrum) and eigenvectors are mapped back
 * through Y.
 */
inline Spectrum leading_spectrum(const MatrixXd& y, Index count) {
  const Index p = y.rows();
  const Index n = y.cols();
  const double inv_n = 1.0 / static_cast<double>(n);
  Spectrum out;
  if (p > n) {
    const MatrixXd gram = (y.transpose() * y) * inv_n;
    Eigen::SelfAdjointEigenSolver<MatrixXd> eig(gram);
    if (eig.info() != Eigen::Success) throw NumericalError("eigen-decomposition failed");
    out.values = eig.eigenvalues().reverse();
    count = std::min(count, n);
    out.vectors.resize(p, count);
    for (Index j = 0; j < count; ++j) {
      VectorXd v = y * eig.eigenvectors().col(n - 1 - j);
      const double norm = v.norm();
      if (!(norm > 0.0)) throw DegenerateInput("panel has fewer nonzero eigenvalues than requested");
      out.vectors.col(j) = v / norm;
    }
  } else {
    const MatrixXd s = (y * y.transpose()) * inv_n;
    Eigen::SelfAdjointEigenSolver<MatrixXd> eig(s);
    if (eig.info() != Eigen::Success) throw NumericalError("eigen-decomposition failed");
    out.values = eig.eigenvalues().reverse();
    count = std::min(count, p);
    out.vectors.resize(p, count);
    for (Index j = 0; j < count; ++j) out.vectors.col(j) = eig.eigenvectors().col(p - 1 - j);
  }
  for (Index j = 0; j < out.vectors.cols(); ++j) detail::orient_toward_ones(out.vectors.col(j));
  const double top = out.values.size() > 0 ? out.values[0] : 0.0;
  out.rank = 0;
  for (Index j = 0; j < out.values.size(); ++j) {
    if (top > 0.0 && out.values[j] > 1e-10 * top) ++out.rank;
  }
  return out;
}

/// S = Y Y' / n after row-centering.
inline MatrixXd sample_covariance(const ReturnsPanel& panel) {
  panel.validate();
  const ReturnsPanel c = panel.centered_copy();
  return (c.data * c.data.transpose()) / static_cast<double>(c.n());
}

/// diag(S) without forming S.
inline VectorXd sample_variances(const ReturnsPanel& panel) {
  panel.validate();
  const ReturnsPanel c = panel.centered_copy();
  return c.data.rowwise().squaredNorm() / static_cast<double>(c.n());
}

// ---------------------------------------------------------------------------
// James-Stein shrinkage of the leading eigenvector

struct JseParams {
  double lambda_sq = 0.0;   ///< leading eigenvalue of S
  double ell_sq = 0.0;      ///< (tr S - lambda_sq) / (n - 1)
  double eta_sq = 0.0;      ///< lambda_sq - ell_sq
  VectorXd h;               ///< leading unit eigenvector, 1'h >= 0
  double h1_norm_sq = 0.0;  ///< squared norm of the projection of h on span(1)
  double c = 0.0;           ///< shrinkage constant
  VectorXd h_jse;           ///< shrunk unit vector
};

struct JseEstimate {
  FactorModel model;  ///< eta_sq h_jse h_jse' + diag(delta_sq), q = 1
  JseParams params;
  std::vector<Index> clipped;  ///< assets whose specific variance hit the floor
};

/**
 * Single-factor covariance  eta^2 h_jse h_jse' + diag(s_ii - eta^2 h_jse_i^2).
 *
 * h_jse shrinks the leading sample eigenvector h toward its projection h_1 on
 * the all-ones direction:  H = c h_1 + (1 - c) h,  h_jse = H / |H|,  with
 * c = ell^2 / (lambda^2 (1 - |h_1|^2)).
 */
inline JseEstimate jse_estimate(const ReturnsPanel& panel) {
  panel.validate();
  const ReturnsPanel c = panel.centered_copy();
  const Index p = c.p();
  const double n = static_cast<double>(c.n());

  const Spectrum spec = leading_spectrum(c.data, 1);
  JseParams prm;
  prm.lambda_sq = spec.values[0];
  const double trace = c.data.squaredNorm() / n;
  prm.ell_sq = (trace - prm.lambda_sq) / (n - 1.0);
  prm.eta_sq = prm.lambda_sq - prm.ell_sq;
  if (!(prm.eta_sq > 0.0)) throw DegenerateInput("leading sample eigengap is not positive");
  prm.h = spec.vectors.col(0);

  const double ones_dot = prm.h.sum();
  prm.h1_norm_sq = ones_dot * ones_dot / static_cast<double>(p);
  const double denom = 1.0 - prm.h1_norm_sq;
  if (!(denom > 1e-14)) throw DegenerateInput("leading eigenvector is parallel to the all-ones vector");
  prm.c = prm.ell_sq / (prm.lambda_sq * denom);
  const VectorXd h1 = VectorXd::Constant(p, ones_dot / static_cast<double>(p));
  const VectorXd shrunk = prm.c * h1 + (1.0 - prm.c) * prm.h;
  const double shrunk_norm = shrunk.norm();
  if (!(shrunk_norm > 0.0)) throw DegenerateInput("shrunk eigenvector vanished");
  prm.h_jse = shrunk / shrunk_norm;

  VectorXd delta_sq = c.data.rowwise().squaredNorm() / n;
  const double floor = detail::specific_floor(delta_sq);
  delta_sq -= prm.eta_sq * prm.h_jse.cwiseAbs2();
  JseEstimate out;
  out.clipped = detail::clip_below(delta_sq, floor);

  VectorXd loading = prm.h_jse;
  if (loading.cwiseQuotient(delta_sq).sum() < 0.0) loading = -loading;
  out.model = FactorModel::single_factor(loading, prm.eta_sq, delta_sq, panel.asset_ids);
  out.params = std::move(prm);
  return out;
}

// ---------------------------------------------------------------------------
// Single-index market models

struct MarketModelParams {
  VectorXd market_weights;
  double sigma_m_sq = 0.0;  ///< w_M' Sigma_hat w_M
  VectorXd beta_m;          ///< Sigma_hat w_M / sigma_m_sq
  VectorXd delta_m_sq;      ///< S_ii - beta_i^2 sigma_m_sq, floored
  double zeta_m_sq = 0.0;   ///< sigma_m_sq |beta_m|^2
  VectorXd b_m;             ///< beta_m / |beta_m|
  std::vector<Index> clipped;
};

struct MarketModel {
  FactorModel model;  ///< sigma_m_sq beta_m beta_m' + diag(delta_m_sq)
  MarketModelParams params;
};

/**
 * Market single-index covariance built from any estimate Sigma_hat and a
 * market portfolio w_M (which must sum to one). With Sigma_hat = Sigma^JSE this
 * is the MJSE model; with Sigma_hat = S it is MS.
 */
template <CovarianceProduct C>
MarketModel market_model(const C& sigma_hat, const VectorXd& market_weights, const VectorXd& s_diag) {
  const Index p = dimension(sigma_hat);
  if (market_weights.size() != p || s_diag.size() != p) {
    throw InvalidInput("market model: dimension mismatch");
  }
  if (std::abs(compensated_sum(market_weights) - 1.0) > 1e-10) {
    throw InvalidInput("market weights must sum to 1");
  }
  MarketModelParams prm;
  prm.market_weights = market_weights;
  const VectorXd sw = multiply(sigma_hat, market_weights);
  prm.sigma_m_sq = market_weights.dot(sw);
  if (!(prm.sigma_m_sq > 0.0)) throw DegenerateInput("market variance is not positive");
  prm.beta_m = sw / prm.sigma_m_sq;
  prm.delta_m_sq = s_diag - prm.sigma_m_sq * prm.beta_m.cwiseAbs2();
  prm.clipped = detail::clip_below(prm.delta_m_sq, detail::specific_floor(s_diag));
  prm.zeta_m_sq = prm.sigma_m_sq * prm.beta_m.squaredNorm();
  prm.b_m = prm.beta_m.normalized();

  MarketModel out;
  out.model = FactorModel::single_factor(prm.beta_m, prm.sigma_m_sq, prm.delta_m_sq);
  out.params = std::move(prm);
  return out;
}

/// S = Y Y'/n as a product-only view over centered data, for Sigma_hat = S when p > n.
struct SampleCovarianceView {
  const MatrixXd* y = nullptr;  ///< centered p x n data
};

inline Index dimension(const SampleCovarianceView& v) { return v.y->rows(); }
inline VectorXd multiply(const SampleCovarianceView& v, const VectorXd& x) {
  return (*v.y) * (v.y->transpose() * x) / static_cast<double>(v.y->cols());
}

// ---------------------------------------------------------------------------
// Multifactor James-Stein-Markowitz shrinkage

struct JsmParams {
  Index n_plus = 0;   ///< rank of S
  MatrixXd h;         ///< p x q, columns lambda_j h_j
  VectorXd delta;     ///< diag(S - H H'), floored
  MatrixXd h_w;       ///< leading q of the reweighted data Delta^-1/2 R
  MatrixXd h_bar;     ///< Delta^1/2 H_w
  MatrixXd m;         ///< shrinkage target
  MatrixXd j;         ///< (H_bar - M)' Delta^-1 (H_bar - M)
  double nu_sq = 0.0; ///< trace(Delta) / (n_plus - q)
  MatrixXd c;         ///< I - nu^2 J^-1
  MatrixXd h_jsm;     ///< H_bar C + M (I - C)
  MatrixXd b;         ///< orthonormal eigenvectors of H_jsm H_jsm'
  VectorXd omega;     ///< corresponding eigenvalues, non-increasing
};

struct JsmEstimate {
  FactorModel model;
  JsmParams params;
  std::vector<Index> clipped;
};

namespace detail {

/// p x q matrix with columns sqrt(eigenvalue_j) * h_j of Y Y'/n.
inline MatrixXd scaled_leading_vectors(const Spectrum& s, Index q) {
  MatrixXd out(s.vectors.rows(), q);
  for (Index j = 0; j < q; ++j) out.col(j) = std::sqrt(std::max(s.values[j], 0.0)) * s.vectors.col(j);
  return out;
}

}  // namespace detail

/**
 * q-factor covariance obtained by shrinking the PCA factor subspace toward a
 * Delta-weighted all-ones target. Requires q < n_+ = rank(S).
 */
inline JsmEstimate jsm_estimate(const ReturnsPanel& panel, Index q) {
  panel.validate();
  if (q < 1) throw InvalidInput("jsm needs q >= 1");
  const ReturnsPanel centered = panel.centered_copy();
  const MatrixXd& r = centered.data;
  const Index p = r.rows();
  const double n = static_cast<double>(r.cols());

  JsmParams prm;
  const Spectrum first = leading_spectrum(r, q);
  prm.n_plus = first.rank;
  if (q >= prm.n_plus) {
    throw InvalidInput("jsm needs q < rank of the sample covariance (q = " + std::to_string(q) +
                       ", rank = " + std::to_string(prm.n_plus) + ")");
  }
  prm.h = detail::scaled_leading_vectors(first, q);

  const VectorXd s_diag = r.rowwise().squaredNorm() / n;
  prm.delta = s_diag - prm.h.rowwise().squaredNorm();
  JsmEstimate out;
  out.clipped = detail::clip_below(prm.delta, detail::specific_floor(s_diag));

  const VectorXd dinv = prm.delta.cwiseInverse();
  const VectorXd dsqrt = prm.delta.cwiseSqrt();
  const MatrixXd rw = dsqrt.cwiseInverse().asDiagonal() * r;
  const Spectrum second = leading_spectrum(rw, q);
  prm.h_w = detail::scaled_leading_vectors(second, q);
  prm.h_bar = dsqrt.asDiagonal() * prm.h_w;

  // M = 1 (1'D^-1 1)^-1 1'D^-1 H_bar: every row is the D^-1-weighted mean row of H_bar.
  const Eigen::RowVectorXd mean_row = (dinv.transpose() * prm.h_bar) / dinv.sum();
  prm.m = VectorXd::Ones(p) * mean_row;

  const MatrixXd centered_h = prm.h_bar - prm.m;
  prm.j = centered_h.transpose() * dinv.asDiagonal() * centered_h;
  prm.j = 0.5 * (prm.j + prm.j.transpose()).eval();
  prm.nu_sq = prm.delta.sum() / static_cast<double>(prm.n_plus - q);
  Eigen::LLT<MatrixXd> jllt(prm.j);
  if (jllt.info() != Eigen::Success) throw NumericalError("jsm: matrix J is singular");
  const MatrixXd eye = MatrixXd::Identity(q, q);
  prm.c = eye - prm.nu_sq * jllt.solve(eye);
  prm.h_jsm = prm.h_bar * prm.c + prm.m * (eye - prm.c);

  // Eigenvectors of H_jsm H_jsm' through the q x q Gram matrix.
  MatrixXd gram = prm.h_jsm.transpose() * prm.h_jsm;
  gram = 0.5 * (gram + gram.transpose()).eval();
  Eigen::SelfAdjointEigenSolver<MatrixXd> eig(gram);
  if (eig.info() != Eigen::Success) throw NumericalError("jsm: eigen-decomposition failed");
  prm.omega = eig.eigenvalues().reverse();
  if (!(prm.omega.minCoeff() > 0.0)) throw NumericalError("jsm: shrunk factor matrix is rank deficient");
  const MatrixXd v = eig.eigenvectors().rowwise().reverse();
  prm.b = prm.h_jsm * v * prm.omega.cwiseSqrt().cwiseInverse().asDiagonal();
  for (Index j = 0; j < q; ++j) {
    if (prm.b.col(j).dot(dinv) < 0.0) prm.b.col(j) = -prm.b.col(j);
  }

  out.model.exposures = prm.b;
  out.model.factor_cov = prm.omega.asDiagonal();
  out.model.specific_var = prm.delta;
  out.model.asset_ids = panel.asset_ids;
  out.params = std::move(prm);
  return out;
}

// ---------------------------------------------------------------------------
// Large-p agreement between the JSE model and the market model built from it

struct ConsistencySample {
  ReturnsPanel panel;
  VectorXd market_weights;
};

/// Produces one Monte Carlo sample for universe size p and trial index.
using PanelGenerator = std::function<ConsistencySample(Index p, int trial)>;

struct ConsistencyRow {
  Index p = 0;
  Index n = 0;
  double beta_gap = 0.0;      ///< median |b^M - h^JSE|
  double variance_gap = 0.0;  ///< median |sigma_M^2 |beta^M|^2 - eta^2| / p
  double specific_gap = 0.0;  ///< median max_i |(delta^M_i)^2 - delta^JSE_i^2|
  bool out_of_regime = false; ///< p <= n
};

struct ConsistencyTrial {
  double beta_gap = 0.0;
  double variance_gap = 0.0;
  double specific_gap = 0.0;
};

inline ConsistencyTrial consistency_trial(const ConsistencySample& sample) {
  const JseEstimate jse = jse_estimate(sample.panel);
  const VectorXd s_diag = sample_variances(sample.panel);
  const MarketModel mm = market_model(jse.model, sample.market_weights, s_diag);

  const VectorXd h = jse.model.exposures.col(0);
  const VectorXd& bm = mm.params.b_m;
  ConsistencyTrial t;
  t.beta_gap = std::min((bm - h).norm(), (bm + h).norm());
  t.variance_gap = std::abs(mm.params.zeta_m_sq - jse.params.eta_sq) / static_cast<double>(h.size());
  t.specific_gap = (mm.params.delta_m_sq - jse.model.specific_var).cwiseAbs().maxCoeff();
  return t;
}

inline std::vector<ConsistencyRow> consistency_diagnostics(const PanelGenerator& generate,
                                                           const std::vector<Index>& p_list, int trials) {
  if (trials < 1) throw InvalidInput("consistency diagnostics need at least one trial");
  std::vector<ConsistencyRow> rows;
  for (Index p : p_list) {
    std::vector<double> beta;
    std::vector<double> variance;
    std::vector<double> specific;
    ConsistencyRow row;
    row.p = p;
    for (int trial = 0; trial < trials; ++trial) {
      const ConsistencySample sample = generate(p, trial);
      row.n = sample.panel.n();
      const ConsistencyTrial t = consistency_trial(sample);
      beta.push_back(t.beta_gap);
      variance.push_back(t.variance_gap);
      specific.push_back(t.specific_gap);
    }
    row.beta_gap = median(beta);
    row.variance_gap = median(variance);
    row.specific_gap = median(specific);
    row.out_of_regime = row.p <= row.n;
    rows.push_back(row);
  }
  return rows;
}

}  // namespace lomv
