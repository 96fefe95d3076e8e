#pragma once

#include <algorithm>
#include <cmath>
#include <functional>
#include <numeric>
#include <vector>

#include "lomv/factor_model.hpp"
#include "lomv/kkt.hpp"

namespace lomv {

struct ActiveSetOptions {
  double weight_cutoff = kWeightCutoff;
  double kkt_tol = kKktTolerance;
  /// Pivot budget before falling back to projected gradient; <= 0 means 10 p.
  Index max_pivots = 0;
  Index gradient_max_iterations = 100000;
};

/// Euclidean projection onto the probability simplex {w >= 0, 1'w = 1}.
inline VectorXd project_to_simplex(const VectorXd& v) {
  const Index n = v.size();
  if (n == 0) throw InvalidInput("cannot project an empty vector");
  std::vector<double> sorted(v.data(), v.data() + n);
  std::sort(sorted.begin(), sorted.end(), std::greater<>());
  double running = 0.0;
  double theta = 0.0;
  for (Index j = 0; j < n; ++j) {
    running += sorted[static_cast<std::size_t>(j)];
    const double t = (running - 1.0) / static_cast<double>(j + 1);
    if (sorted[static_cast<std::size_t>(j)] - t > 0.0) theta = t;
  }
  return (v.array() - theta).cwiseMax(0.0).matrix();
}

namespace detail {

/// Power-iteration estimate of the largest eigenvalue of Sigma.
template <CovarianceModel C>
double largest_eigenvalue(const C& sigma, int iterations = 50) {
  const Index p = dimension(sigma);
  VectorXd x = VectorXd::Ones(p) / std::sqrt(static_cast<double>(p));
  double est = max_diagonal(sigma);
  for (int it = 0; it < iterations; ++it) {
    const VectorXd y = multiply(sigma, x);
    const double norm = y.norm();
    if (!(norm > 0.0)) break;
    est = std::max(est, x.dot(y));
    x = y / norm;
  }
  return est;
}

}  // namespace detail

/**
 * Projected gradient with Armijo backtracking on the simplex, started from
 * `start` (projected first). Stops when the recovered multipliers certify the
 * iterate at opts.kkt_tol or after opts.gradient_max_iterations steps.
 */
template <CovarianceModel C>
LomvSolution solve_projected_gradient(const C& sigma, const VectorXd& start, const ActiveSetOptions& opts = {}) {
  sigma.validate();
  const Index p = dimension(sigma);
  if (start.size() != p) throw InvalidInput("projected gradient: start has wrong dimension");

  VectorXd w = project_to_simplex(start);
  VectorXd sw = multiply(sigma, w);
  double f = w.dot(sw);
  double step = 0.5 / detail::largest_eigenvalue(sigma);

  Index it = 0;
  LomvSolution best = certify(sigma, w, SolverMethod::projected_gradient, opts.kkt_tol, 0.0);
  for (; it < opts.gradient_max_iterations && !best.kkt.passed; ++it) {
    const VectorXd grad = 2.0 * sw;
    VectorXd next;
    VectorXd snext;
    double fnext = 0.0;
    for (int backtrack = 0; backtrack < 60; ++backtrack) {
      next = project_to_simplex(w - step * grad);
      snext = multiply(sigma, next);
      fnext = next.dot(snext);
      const VectorXd d = next - w;
      if (fnext <= f + grad.dot(d) + d.squaredNorm() / (2.0 * step) + 1e-18 * std::abs(f)) break;
      step *= 0.5;
    }
    const bool stalled = (next - w).lpNorm<Eigen::Infinity>() == 0.0;
    w = std::move(next);
    sw = std::move(snext);
    f = fnext;
    step *= 1.25;
    if (stalled || it % 10 == 9) {
      best = certify(sigma, w, SolverMethod::projected_gradient, opts.kkt_tol, 0.0);
      if (stalled) break;
    }
  }
  best = certify(sigma, w, SolverMethod::projected_gradient, opts.kkt_tol, 0.0);
  best.iterations = it;
  return best;
}

/**
 * Long-only minimum variance portfolio for any positive definite covariance.
 *
 * Primal active-set iteration starting from equal weights with K = all assets:
 * each step moves toward the long-short solution on K and, if that solution
 * has nonpositive entries, stops at the first weight to hit zero (ratio test)
 * and removes it from K. Once the long-short solution on K is strictly
 * positive, the inactive asset with the most negative multiplier re-enters;
 * the loop ends when every multiplier is nonnegative within tolerance.
 * Positive weights therefore always equal long_short_weights(Sigma, K).
 */
template <CovarianceModel C>
LomvSolution solve_active_set(const C& sigma, const ActiveSetOptions& opts = {}) {
  sigma.validate();
  const Index p = dimension(sigma);
  const Index max_pivots = opts.max_pivots > 0 ? opts.max_pivots : 10 * p;
  const double tol_scaled = opts.kkt_tol * max_diagonal(sigma);

  std::vector<bool> in_set(static_cast<std::size_t>(p), true);
  VectorXd w = VectorXd::Constant(p, 1.0 / static_cast<double>(p));
  Index last_added = -1;

  for (Index pivot = 0; pivot < max_pivots; ++pivot) {
    const AssetSubset k = AssetSubset::from_mask(in_set);
    const VectorXd raw = solve_inv_ones(sigma, k);
    const double total = compensated_sum(raw);
    if (!(total > 0.0)) throw NumericalError("1'(Sigma^K)^-1 1 is not positive");
    const VectorXd x = raw / total;

    // Ratio test over entries that the long-short target pushes to zero or below.
    double alpha = 1.0;
    Index blocker = -1;
    for (Index r = 0; r < k.size(); ++r) {
      if (x[r] > opts.weight_cutoff) continue;
      const double wi = w[k[r]];
      const double gap = wi - std::min(x[r], 0.0);
      const double ai = gap > 0.0 ? wi / gap : 0.0;
      if (blocker < 0 || ai < alpha) {
        alpha = ai;
        blocker = k[r];
      }
    }

    if (blocker >= 0) {
      if (blocker == last_added && alpha == 0.0) {
        // The entering asset cannot take positive weight: its multiplier was
        // negative only at rounding level. Keep the previous set.
        in_set[static_cast<std::size_t>(blocker)] = false;
        break;
      }
      for (Index r = 0; r < k.size(); ++r) w[k[r]] += alpha * (x[r] - w[k[r]]);
      w[blocker] = 0.0;
      in_set[static_cast<std::size_t>(blocker)] = false;
      for (Index i : k) {
        if (w[i] <= 0.0) {
          w[i] = 0.0;
          in_set[static_cast<std::size_t>(i)] = false;
        }
      }
      w /= compensated_sum(w);
      last_added = -1;
      continue;
    }

    w.setZero();
    for (Index r = 0; r < k.size(); ++r) w[k[r]] = x[r];
    if (k.size() == p) {
      LomvSolution s = certify(sigma, w, SolverMethod::active_set, opts.kkt_tol, opts.weight_cutoff);
      s.iterations = pivot + 1;
      return s;
    }

    const double nu = -2.0 / total;
    const VectorXd sw = multiply(sigma, w);
    Index entering = -1;
    double most_negative = -tol_scaled;
    for (Index i = 0; i < p; ++i) {
      if (in_set[static_cast<std::size_t>(i)]) continue;
      const double lambda = 2.0 * sw[i] + nu;
      if (lambda < most_negative) {
        most_negative = lambda;
        entering = i;
      }
    }
    if (entering < 0) {
      LomvSolution s = certify(sigma, w, SolverMethod::active_set, opts.kkt_tol, opts.weight_cutoff);
      s.iterations = pivot + 1;
      return s;
    }
    in_set[static_cast<std::size_t>(entering)] = true;
    last_added = entering;
  }

  // Either the pivot budget ran out or a degenerate re-entry was rejected.
  LomvSolution current = certify(sigma, w, SolverMethod::active_set, opts.kkt_tol, opts.weight_cutoff);
  if (current.kkt.passed) {
    current.iterations = max_pivots;
    return current;
  }
  LomvSolution pg = solve_projected_gradient(sigma, w, opts);
  // Polish: exact long-short weights on the projected-gradient support.
  const VectorXd polished_raw = solve_inv_ones(sigma, pg.active);
  const VectorXd polished = polished_raw / compensated_sum(polished_raw);
  if (polished.minCoeff() > opts.weight_cutoff) {
    VectorXd full = VectorXd::Zero(p);
    for (Index r = 0; r < pg.active.size(); ++r) full[pg.active[r]] = polished[r];
    LomvSolution s = certify(sigma, full, SolverMethod::projected_gradient, opts.kkt_tol, opts.weight_cutoff);
    if (s.kkt.passed) {
      s.iterations = max_pivots + pg.iterations;
      return s;
    }
  }
  pg.iterations += max_pivots;
  return pg;
}

}  // namespace lomv
