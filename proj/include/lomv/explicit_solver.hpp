#pragma once

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>
#include <span>
#include <vector>

#include "lomv/factor_model.hpp"
#include "lomv/kkt.hpp"

namespace lomv {

/// Parameters of the single-factor covariance  sigma_sq * beta beta' + diag(delta_sq).
struct SingleFactorInputs {
  VectorXd beta;
  VectorXd delta_sq;
  double sigma_sq = 0.0;

  Index p() const noexcept { return beta.size(); }

  void validate() const {
    if (beta.size() < 1) throw InvalidInput("single-factor inputs need p >= 1");
    if (delta_sq.size() != beta.size()) throw InvalidInput("beta and delta_sq lengths differ");
    if (!(sigma_sq > 0.0) || !std::isfinite(sigma_sq)) throw InvalidInput("factor variance must be > 0");
    if (!beta.allFinite() || !delta_sq.allFinite()) throw InvalidInput("non-finite single-factor inputs");
    if (!(delta_sq.minCoeff() > 0.0)) throw InvalidInput("specific variances must be > 0");
  }

  static SingleFactorInputs from_model(const FactorModel& m) {
    if (m.q() != 1) throw InvalidInput("single-factor inputs require q = 1");
    return {m.exposures.col(0), m.specific_var, m.factor_cov(0, 0)};
  }

  FactorModel to_model(std::vector<std::string> ids = {}) const {
    return FactorModel::single_factor(beta, sigma_sq, delta_sq, std::move(ids));
  }
};

struct SignNormalized {
  SingleFactorInputs inputs;
  bool flipped = false;
};

/// Sum of beta_i / delta_i^2, compensated.
inline double beta_over_delta_sum(const SingleFactorInputs& in) {
  CompensatedSum s;
  for (Index i = 0; i < in.p(); ++i) s += in.beta[i] / in.delta_sq[i];
  return s.value();
}

/**
 * Chooses the sign of beta so that sum beta_i / delta_i^2 > 0. Sigma is
 * unchanged by beta -> -beta. Throws DegenerateInput when the sum vanishes
 * relative to sum |beta_i| / delta_i^2.
 */
inline SignNormalized normalize_sign(const SingleFactorInputs& in) {
  in.validate();
  CompensatedSum abs_sum;
  for (Index i = 0; i < in.p(); ++i) abs_sum += std::abs(in.beta[i]) / in.delta_sq[i];
  const double sum = beta_over_delta_sum(in);
  if (abs_sum.value() == 0.0) return {in, false};  // beta = 0: Sigma = Delta, nothing to orient
  if (!(std::abs(sum) > 1e-12 * abs_sum.value())) {
    throw DegenerateInput("sum of beta_i / delta_i^2 is zero; the long-only set is not determined by beta order");
  }
  SignNormalized out{in, false};
  if (sum < 0.0) {
    out.inputs.beta = -in.beta;
    out.flipped = true;
  }
  return out;
}

/// Stable ascending sort of beta; ties keep original index order.
inline std::vector<Index> beta_order(const VectorXd& beta) {
  std::vector<Index> order(static_cast<std::size_t>(beta.size()));
  std::iota(order.begin(), order.end(), Index{0});
  std::stable_sort(order.begin(), order.end(), [&](Index a, Index b) { return beta[a] < beta[b]; });
  return order;
}

/**
 * The sequence R_1..R_p over assets sorted by ascending beta,
 *
 *   R_i = 1/sigma^2 + sum_{j<i} (beta_j / delta_j^2)(beta_j - beta_i),
 *
 * together with the number k of leading strictly positive terms (the size of
 * the long-only active set) and the peak index.
 */
struct RSequence {
  std::vector<Index> order;  ///< order[r] = original index of the r-th smallest beta
  VectorXd values;           ///< R in sorted order
  Index k = 0;               ///< max{i : R_i > 0}, 1-based count
  Index peak = 0;            ///< 0-based index s of the maximum (first C_i > 0)
};

/**
 * Last strictly positive index (as a count) of a unimodal sequence with
 * values[0] > 0. The positive entries form a prefix, so the crossing is found
 * by bisection in O(log p).
 */
inline Index find_k(std::span<const double> values) {
  if (values.empty() || !(values[0] > 0.0)) throw InvalidInput("find_k requires R_1 > 0");
  // Invariant: values[lo] > 0, and values[hi] <= 0 or hi == size.
  std::size_t lo = 0;
  std::size_t hi = values.size();
  while (hi - lo > 1) {
    const std::size_t mid = lo + (hi - lo) / 2;
    if (values[mid] > 0.0) {
      lo = mid;
    } else {
      hi = mid;
    }
  }
  return static_cast<Index>(lo + 1);
}

inline Index find_k(const RSequence& seq) {
  return find_k(std::span<const double>(seq.values.data(), static_cast<std::size_t>(seq.values.size())));
}

/**
 * Builds the R-sequence for sign-normalized inputs (sum beta/delta^2 > 0).
 * Uses the recurrence R_{i+1} = R_i + (beta_i - beta_{i+1}) C_i with
 * C_i = sum_{j<=i} beta_j / delta_j^2 accumulated with compensation, so every
 * increment has the sign of -C_i exactly and the computed sequence is unimodal.
 */
inline RSequence compute_r_sequence(const SingleFactorInputs& in) {
  in.validate();
  if (!(beta_over_delta_sum(in) > 0.0) && !in.beta.isZero(0.0)) {
    throw InvalidInput("compute_r_sequence requires sign-normalized inputs");
  }
  RSequence seq;
  seq.order = beta_order(in.beta);
  const Index p = in.p();
  seq.values.resize(p);
  seq.values[0] = 1.0 / in.sigma_sq;

  CompensatedSum c;
  bool peak_found = false;
  for (Index r = 0; r + 1 < p; ++r) {
    const Index i = seq.order[static_cast<std::size_t>(r)];
    const Index next = seq.order[static_cast<std::size_t>(r + 1)];
    c += in.beta[i] / in.delta_sq[i];
    const double ci = c.value();
    if (!peak_found && ci > 0.0) {
      seq.peak = r;
      peak_found = true;
    }
    seq.values[r + 1] = seq.values[r] + (in.beta[i] - in.beta[next]) * ci;
  }
  if (!peak_found) seq.peak = p - 1;
  seq.k = find_k(seq);
  return seq;
}

/// B_K = 1/sigma^2 + sum_K beta^2/delta^2 and C_K = sum_K beta/delta^2.
struct ThresholdSums {
  double b = 0.0;
  double c = 0.0;
};

inline ThresholdSums threshold_sums(const SingleFactorInputs& in, std::span<const Index> active) {
  CompensatedSum b;
  CompensatedSum c;
  b += 1.0 / in.sigma_sq;
  for (Index i : active) {
    const double t = in.beta[i] / in.delta_sq[i];
    b += t * in.beta[i];
    c += t;
  }
  return {b.value(), c.value()};
}

/**
 * The beta threshold B_K / C_K: asset i is held iff beta_i < threshold.
 * Requires C_K > 0, which holds for the true active set of sign-normalized inputs.
 */
inline double threshold(const SingleFactorInputs& in, std::span<const Index> active) {
  const ThresholdSums s = threshold_sums(in, active);
  if (!(s.c > 0.0)) throw DegenerateInput("threshold undefined: sum of beta/delta^2 over K is not positive");
  return s.b / s.c;
}

inline double threshold(const SingleFactorInputs& in, const RSequence& seq) {
  return threshold(in, std::span<const Index>(seq.order.data(), static_cast<std::size_t>(seq.k)));
}

struct ExplicitSolution {
  LomvSolution solution;
  RSequence r_sequence;   ///< computed on the sign-normalized inputs
  double threshold = 0.0; ///< in sign-normalized beta units
  bool flipped = false;
};

/**
 * Closed-form long-only minimum variance portfolio for a single-factor model.
 * The active set is the k lowest-beta assets; their weights are
 *
 *   v_i = (1/delta_i^2)(1 - beta_i C_K / B_K),   w = v / sum v.
 */
inline ExplicitSolution solve_explicit(const SingleFactorInputs& raw, double tol = kKktTolerance) {
  const SignNormalized norm = normalize_sign(raw);
  const SingleFactorInputs& in = norm.inputs;
  const Index p = in.p();

  ExplicitSolution out;
  out.flipped = norm.flipped;
  out.r_sequence = compute_r_sequence(in);
  const std::span<const Index> prefix(out.r_sequence.order.data(), static_cast<std::size_t>(out.r_sequence.k));
  const ThresholdSums sums = threshold_sums(in, prefix);
  // With beta = 0 every asset is held and no finite threshold exists.
  out.threshold = sums.c > 0.0 ? sums.b / sums.c : std::numeric_limits<double>::infinity();

  LomvSolution& s = out.solution;
  s.method = SolverMethod::explicit_formula;
  s.active = AssetSubset::from_unsorted(std::vector<Index>(prefix.begin(), prefix.end()), p);
  s.weights = VectorXd::Zero(p);
  const double ratio = sums.c / sums.b;
  CompensatedSum total;
  for (Index i : s.active) {
    const double v = (1.0 - in.beta[i] * ratio) / in.delta_sq[i];
    s.weights[i] = v;
    total += v;
  }
  const double vsum = total.value();
  s.weights /= vsum;

  // nu = -2 / 1'(Sigma^K)^-1 1; off K, lambda_i = 2 sigma^2 beta_i (beta_K' w_K) + nu.
  s.nu = -2.0 / vsum;
  CompensatedSum exposure;
  for (Index i : s.active) exposure += in.beta[i] * s.weights[i];
  s.lambda = VectorXd::Zero(p);
  for (Index i : s.active.complement()) {
    s.lambda[i] = 2.0 * in.sigma_sq * in.beta[i] * exposure.value() + s.nu;
  }

  const FactorModel model = in.to_model();
  s.kkt = verify_kkt(model, s.weights, s.nu, s.lambda, tol);
  s.boundary = boundary_assets(s.active, s.lambda, tol * s.kkt.scale);
  s.objective = s.weights.dot(multiply(model, s.weights));
  s.iterations = 1;
  return out;
}

inline ExplicitSolution solve_explicit(const FactorModel& model, double tol = kKktTolerance) {
  model.validate();
  return solve_explicit(SingleFactorInputs::from_model(model), tol);
}

}  // namespace lomv
