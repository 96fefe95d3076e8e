#pragma once

#include <cmath>
#include <numbers>

#include "lomv/factor_model.hpp"

namespace lomv {

enum class HyperplaneVariant { hk, hl };

/**
 * Separating hyperplane {x in R^q : x'h = 1} for the exposures of a q-factor
 * model. For the active set K of the long-only solution, asset i is held iff
 * its exposure row B_i lies on the origin side, i.e. margin_i = B_i h - 1 < 0.
 */
struct Hyperplane {
  VectorXd h;
  VectorXd margins;  ///< B_i h - 1 for every asset
  HyperplaneVariant variant = HyperplaneVariant::hk;
  bool full_rank = true;  ///< rank(B^K) == q; hk and hl coincide only then
};

namespace detail {

inline bool full_column_rank(const MatrixXd& bk) {
  if (bk.rows() < bk.cols()) return false;
  Eigen::ColPivHouseholderQR<MatrixXd> qr(bk);
  qr.setThreshold(1e-10);
  return qr.rank() == bk.cols();
}

}  // namespace detail

/// h^K = Omega (B^K)' (Sigma^K)^-1 1_k.
inline Hyperplane hyperplane_hk(const FactorModel& model, const AssetSubset& k) {
  model.validate();
  const MatrixXd bk = detail::select_rows(model.exposures, k);
  Hyperplane hp;
  hp.variant = HyperplaneVariant::hk;
  hp.h = model.factor_cov * (bk.transpose() * solve_inv_ones(model, k));
  hp.margins = model.exposures * hp.h - VectorXd::Ones(model.p());
  hp.full_rank = detail::full_column_rank(bk);
  return hp;
}

/// h^L = (Omega^-1 + (B^K)'(Delta^K)^-1 B^K)^-1 (B^K)'(Delta^K)^-1 1_k.
inline Hyperplane hyperplane_hl(const FactorModel& model, const AssetSubset& k) {
  model.validate();
  detail::require_subset_of(k, model.p());
  const Index q = model.q();
  const MatrixXd bk = detail::select_rows(model.exposures, k);
  const VectorXd dinv = detail::select(model.specific_var, k).cwiseInverse();
  const MatrixXd omega_inv = model.factor_cov.llt().solve(MatrixXd::Identity(q, q));
  MatrixXd a = omega_inv + bk.transpose() * dinv.asDiagonal() * bk;
  a = 0.5 * (a + a.transpose()).eval();
  Eigen::LLT<MatrixXd> llt(a);
  if (llt.info() != Eigen::Success) {
    throw NumericalError("Omega^-1 + B'D^-1 B is singular; exposures are degenerate");
  }
  Hyperplane hp;
  hp.variant = HyperplaneVariant::hl;
  hp.h = llt.solve(bk.transpose() * dinv);
  hp.margins = model.exposures * hp.h - VectorXd::Ones(model.p());
  hp.full_rank = detail::full_column_rank(bk);
  return hp;
}

/// Perpendicular distance from exposure row x to the hyperplane, positive on the origin side.
inline double signed_distance(const Hyperplane& hp, const VectorXd& x) {
  const double norm = hp.h.norm();
  if (!(norm > 0.0)) throw InvalidInput("hyperplane normal is zero");
  return (1.0 - x.dot(hp.h)) / norm;
}

/**
 * Angle between a two-factor separating line and a vertical single-factor
 * threshold line (x_1 = const), as a fraction of a right angle in [0, 1].
 */
inline double hyperplane_angle(const Hyperplane& hp) {
  if (hp.h.size() != 2) throw InvalidInput("hyperplane angle is defined for q = 2 only");
  const double norm = hp.h.norm();
  if (!(norm > 0.0)) throw InvalidInput("hyperplane angle undefined for h = 0");
  return std::atan2(std::abs(hp.h[1]), std::abs(hp.h[0])) / (0.5 * std::numbers::pi);
}

}  // namespace lomv
