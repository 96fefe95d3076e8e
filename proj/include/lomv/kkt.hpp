#pragma once

#include <algorithm>
#include <cmath>
#include <limits>
#include <string_view>
#include <vector>

#include "lomv/factor_model.hpp"

namespace lomv {

/// Weights at or below this value are treated as zero (outside the active set).
inline constexpr double kWeightCutoff = 1e-10;
/// Default KKT pass tolerance, scaled by max diag(Sigma) for the multiplier terms.
inline constexpr double kKktTolerance = 1e-8;

enum class SolverMethod { explicit_formula, active_set, projected_gradient, oracle };

inline std::string_view to_string(SolverMethod m) {
  switch (m) {
    case SolverMethod::explicit_formula: return "explicit";
    case SolverMethod::active_set: return "active-set";
    case SolverMethod::projected_gradient: return "projected-gradient";
    case SolverMethod::oracle: return "oracle";
  }
  return "unknown";
}

/**
 * Residuals of the optimality system for  min w'Sigma w  s.t.  1'w = 1, w >= 0:
 *
 *   2 Sigma w - lambda + nu 1 = 0,   1'w = 1,   lambda_i w_i = 0,   lambda, w >= 0.
 *
 * Stationarity, complementarity and dual feasibility are in covariance units and
 * are compared against tolerance * scale, where scale = max diag(Sigma).
 */
struct KktCertificate {
  double stationarity = 0.0;     ///< ||2 Sigma w - lambda + nu 1||_inf
  double feasibility = 0.0;      ///< max(|1'w - 1|, max(0, -min w))
  double complementarity = 0.0;  ///< max |lambda_i w_i|
  double dual_feasibility = 0.0; ///< min lambda_i (signed)
  double min_weight = 0.0;
  double tolerance = kKktTolerance;
  double scale = 1.0;
  bool passed = false;

  /// Largest violation, each term normalized to its own tolerance units.
  double max_residual() const {
    const double s = scale > 0.0 ? scale : 1.0;
    return std::max({stationarity / s, complementarity / s, std::max(0.0, -dual_feasibility) / s,
                     feasibility});
  }
};

struct LomvSolution {
  VectorXd weights;
  AssetSubset active;
  double nu = 0.0;
  VectorXd lambda;
  KktCertificate kkt;
  SolverMethod method = SolverMethod::active_set;
  /// Inactive assets whose multiplier is zero within tolerance (weak complementarity).
  std::vector<Index> boundary;
  Index iterations = 0;
  double objective = 0.0;

  double kkt_residual() const { return kkt.max_residual(); }
};

template <CovarianceModel C>
KktCertificate verify_kkt(const C& sigma, const VectorXd& w, double nu, const VectorXd& lambda,
                          double tol = kKktTolerance) {
  const Index p = dimension(sigma);
  if (w.size() != p || lambda.size() != p) throw InvalidInput("verify_kkt: dimension mismatch");

  KktCertificate c;
  c.tolerance = tol;
  c.scale = max_diagonal(sigma);
  const VectorXd grad = 2.0 * multiply(sigma, w);
  c.stationarity = (grad - lambda + VectorXd::Constant(p, nu)).cwiseAbs().maxCoeff();
  c.min_weight = w.minCoeff();
  c.feasibility = std::max(std::abs(compensated_sum(w) - 1.0), std::max(0.0, -c.min_weight));
  c.complementarity = lambda.cwiseProduct(w).cwiseAbs().maxCoeff();
  c.dual_feasibility = lambda.minCoeff();

  const double tol_s = tol * c.scale;
  c.passed = c.stationarity <= tol_s && c.complementarity <= tol_s && c.dual_feasibility >= -tol_s &&
             c.feasibility <= tol && c.min_weight >= -tol;
  return c;
}

template <CovarianceModel C>
KktCertificate verify_kkt(const C& sigma, const LomvSolution& s, double tol = kKktTolerance) {
  return verify_kkt(sigma, s.weights, s.nu, s.lambda, tol);
}

struct Multipliers {
  AssetSubset support;
  double nu = 0.0;
  VectorXd lambda;
};

/**
 * Multipliers implied by a weight vector: K = {w_i > cutoff},
 * nu = -2 / (1'(Sigma^K)^-1 1), lambda = 0 on K and 2 (Sigma w)_i + nu off K.
 */
template <CovarianceModel C>
Multipliers recover_multipliers(const C& sigma, const VectorXd& w, double cutoff = kWeightCutoff) {
  const Index p = dimension(sigma);
  std::vector<bool> mask(static_cast<std::size_t>(p));
  bool any = false;
  for (Index i = 0; i < p; ++i) {
    mask[static_cast<std::size_t>(i)] = w[i] > cutoff;
    any = any || w[i] > cutoff;
  }
  if (!any) throw InvalidInput("weight vector has no positive entry");

  Multipliers m;
  m.support = AssetSubset::from_mask(mask);
  m.nu = -2.0 / compensated_sum(solve_inv_ones(sigma, m.support));
  const VectorXd sw = multiply(sigma, w);
  m.lambda = VectorXd::Zero(p);
  for (Index i = 0; i < p; ++i) {
    if (!mask[static_cast<std::size_t>(i)]) m.lambda[i] = 2.0 * sw[i] + m.nu;
  }
  return m;
}

/// Inactive assets with |lambda_i| <= tol * max diag(Sigma).
inline std::vector<Index> boundary_assets(const AssetSubset& active, const VectorXd& lambda,
                                          double tol_scaled) {
  std::vector<Index> out;
  for (Index i : active.complement()) {
    if (std::abs(lambda[i]) <= tol_scaled) out.push_back(i);
  }
  return out;
}

/// Wraps a weight vector into a full solution with recovered multipliers and a certificate.
template <CovarianceModel C>
LomvSolution certify(const C& sigma, const VectorXd& w, SolverMethod method, double tol = kKktTolerance,
                     double cutoff = kWeightCutoff) {
  LomvSolution s;
  s.weights = w;
  for (Index i = 0; i < w.size(); ++i) {
    if (!(w[i] > cutoff)) s.weights[i] = 0.0;
  }
  const double total = compensated_sum(s.weights);
  if (!(total > 0.0)) throw InvalidInput("weight vector has no positive entry");
  s.weights /= total;
  Multipliers m = recover_multipliers(sigma, s.weights, cutoff);
  s.active = std::move(m.support);
  s.nu = m.nu;
  s.lambda = std::move(m.lambda);
  s.method = method;
  s.kkt = verify_kkt(sigma, s.weights, s.nu, s.lambda, tol);
  s.boundary = boundary_assets(s.active, s.lambda, tol * s.kkt.scale);
  s.objective = s.weights.dot(multiply(sigma, s.weights));
  return s;
}

}  // namespace lomv
