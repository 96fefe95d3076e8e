#pragma once

#include <cmath>
#include <cstdint>
#include <cstdio>
#include <limits>
#include <numbers>
#include <string>
#include <vector>

#include "lomv/factor_model.hpp"
#include "lomv/kkt.hpp"
#include "lomv/panel.hpp"

namespace lomv {

inline constexpr Index kOracleMaxAssets = 20;

/**
 * Every non-empty subset K whose long-short weights are all strictly positive
 * and whose implied multipliers off K are >= -tol * max diag(Sigma).
 * Exhaustive over 2^p - 1 subsets; dense Cholesky on each principal submatrix.
 */
inline std::vector<AssetSubset> kkt_verified_subsets(const DenseCovariance& cov, double tol = 1e-10) {
  cov.validate();
  const Index p = cov.p();
  if (p > kOracleMaxAssets) {
    throw InvalidInput("brute-force oracle supports p <= " + std::to_string(kOracleMaxAssets));
  }
  const double tol_s = tol * cov.sigma.diagonal().maxCoeff();
  std::vector<AssetSubset> out;
  const std::uint64_t count = std::uint64_t{1} << p;
  std::vector<Index> idx;
  for (std::uint64_t mask = 1; mask < count; ++mask) {
    idx.clear();
    for (Index i = 0; i < p; ++i) {
      if (mask & (std::uint64_t{1} << i)) idx.push_back(i);
    }
    const Index k = static_cast<Index>(idx.size());
    MatrixXd sub(k, k);
    for (Index r = 0; r < k; ++r) {
      for (Index c = 0; c < k; ++c) sub(r, c) = cov.sigma(idx[r], idx[c]);
    }
    Eigen::LLT<MatrixXd> llt(sub);
    if (llt.info() != Eigen::Success) continue;
    const VectorXd x = llt.solve(VectorXd::Ones(k));
    const double s = x.sum();
    if (!(s > 0.0) || !(x.minCoeff() > 0.0)) continue;
    const VectorXd wk = x / s;
    const double nu = -2.0 / s;
    bool ok = true;
    for (Index i = 0; i < p && ok; ++i) {
      if (mask & (std::uint64_t{1} << i)) continue;
      double sw = 0.0;
      for (Index r = 0; r < k; ++r) sw += cov.sigma(i, idx[r]) * wk[r];
      ok = 2.0 * sw + nu >= -tol_s;
    }
    if (ok) out.emplace_back(idx, p);
  }
  return out;
}

/**
 * Exact long-only minimum variance solution by enumerating active sets.
 * Among verified subsets the lowest variance wins (unique by strict convexity).
 */
inline LomvSolution brute_force_lomv(const DenseCovariance& cov, double tol = kKktTolerance) {
  const std::vector<AssetSubset> verified = kkt_verified_subsets(cov);
  if (verified.empty()) throw NumericalError("brute-force oracle found no KKT point");
  const Index p = cov.p();

  double best_obj = std::numeric_limits<double>::infinity();
  VectorXd best_w;
  const AssetSubset* best_k = nullptr;
  for (const AssetSubset& k : verified) {
    const MatrixXd sub = principal_submatrix(cov.sigma, k);
    const VectorXd x = sub.llt().solve(VectorXd::Ones(k.size()));
    const double obj = 1.0 / x.sum();
    if (obj < best_obj || (obj == best_obj && best_k != nullptr && k.size() < best_k->size())) {
      best_obj = obj;
      best_k = &k;
      best_w = VectorXd::Zero(p);
      const VectorXd wk = x / x.sum();
      for (Index r = 0; r < k.size(); ++r) best_w[k[r]] = wk[r];
    }
  }

  LomvSolution s;
  s.method = SolverMethod::oracle;
  s.weights = best_w;
  s.active = *best_k;
  s.nu = -2.0 * best_obj;
  const VectorXd sw = cov.sigma * best_w;
  s.lambda = VectorXd::Zero(p);
  for (Index i : s.active.complement()) s.lambda[i] = 2.0 * sw[i] + s.nu;
  s.kkt = verify_kkt(cov, s.weights, s.nu, s.lambda, tol);
  s.boundary = boundary_assets(s.active, s.lambda, tol * s.kkt.scale);
  s.objective = best_w.dot(sw);
  s.iterations = static_cast<Index>(verified.size());
  return s;
}

// ---------------------------------------------------------------------------
// Synthetic returns

namespace detail {

inline std::uint64_t splitmix64(std::uint64_t x) {
  x += 0x9e3779b97f4a7c15ULL;
  x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
  x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
  return x ^ (x >> 31);
}

}  // namespace detail

/**
 * Stateless random numbers addressed by (seed, trial, stream, index). Any
 * draw can be regenerated independently, so parallel trials reproduce exactly.
 */
class CounterRng {
 public:
  CounterRng(std::uint64_t seed, std::uint64_t trial) : key_(detail::splitmix64(detail::splitmix64(seed) ^ trial)) {}

  std::uint64_t bits(std::uint64_t stream, std::uint64_t index) const {
    return detail::splitmix64(detail::splitmix64(key_ ^ stream) ^ (index * 0xd1b54a32d192ed03ULL));
  }

  /// Uniform on the open interval (0, 1).
  double uniform(std::uint64_t stream, std::uint64_t index) const {
    return (static_cast<double>(bits(stream, index) >> 11) + 0.5) * 0x1.0p-53;
  }

  /// Standard normal via Box-Muller on two independent counters.
  double normal(std::uint64_t stream, std::uint64_t index) const {
    const double u1 = uniform(stream, 2 * index);
    const double u2 = uniform(stream, 2 * index + 1);
    return std::sqrt(-2.0 * std::log(u1)) * std::cos(2.0 * std::numbers::pi * u2);
  }

 private:
  std::uint64_t key_;
};

inline std::vector<std::string> make_asset_ids(Index p, const std::string& prefix = "A") {
  std::vector<std::string> ids;
  ids.reserve(static_cast<std::size_t>(p));
  const int width = p < 10000 ? 4 : static_cast<int>(std::to_string(p - 1).size());
  for (Index i = 0; i < p; ++i) {
    std::string num = std::to_string(i);
    if (static_cast<int>(num.size()) < width) num.insert(0, static_cast<std::size_t>(width) - num.size(), '0');
    ids.push_back(prefix + num);
  }
  return ids;
}

struct SimulatorSpec {
  FactorModel model;
  Index n = 0;
  std::uint64_t seed = 0;
  std::uint64_t trial = 0;
  bool include_specific = true;  ///< false draws r = B f only
};

/// Stream ids: assets use 0..p-1, factors use kFactorStreamBase + j.
inline constexpr std::uint64_t kFactorStreamBase = std::uint64_t{1} << 40;

/// Gaussian panel r_t = B f_t + eps_t with f ~ N(0, Omega), eps ~ N(0, Delta).
inline ReturnsPanel simulate_panel(const SimulatorSpec& spec) {
  spec.model.validate();
  if (spec.n < 2) throw InvalidInput("simulator needs n >= 2");
  const Index p = spec.model.p();
  const Index q = spec.model.q();
  const CounterRng rng(spec.seed, spec.trial);
  const MatrixXd chol = spec.model.factor_cov.llt().matrixL();

  MatrixXd z(q, spec.n);
  for (Index j = 0; j < q; ++j) {
    for (Index t = 0; t < spec.n; ++t) {
      z(j, t) = rng.normal(kFactorStreamBase + static_cast<std::uint64_t>(j), static_cast<std::uint64_t>(t));
    }
  }
  ReturnsPanel panel;
  panel.data = spec.model.exposures * (chol * z);
  if (spec.include_specific) {
    for (Index i = 0; i < p; ++i) {
      const double sd = std::sqrt(spec.model.specific_var[i]);
      for (Index t = 0; t < spec.n; ++t) {
        panel.data(i, t) += sd * rng.normal(static_cast<std::uint64_t>(i), static_cast<std::uint64_t>(t));
      }
    }
  }
  panel.asset_ids = spec.model.asset_ids.empty() ? make_asset_ids(p) : spec.model.asset_ids;
  for (Index t = 0; t < spec.n; ++t) panel.period_labels.push_back(std::to_string(t + 1));
  return panel;
}

/**
 * Market-like q-factor population: first-factor exposures ~ N(1, 0.5^2),
 * further factors ~ N(0, 0.5^2); daily-scale factor variances
 * (1e-4, 0.5e-4, 0.25e-4, ...); specific volatilities uniform on [0.01, 0.03].
 */
inline FactorModel synthetic_factor_model(Index p, Index q, std::uint64_t seed) {
  if (p < 1 || q < 1 || q > p) throw InvalidInput("synthetic model needs 1 <= q <= p");
  const CounterRng rng(seed, 0xfac7u);
  FactorModel m;
  m.exposures.resize(p, q);
  for (Index i = 0; i < p; ++i) {
    for (Index j = 0; j < q; ++j) {
      const double z = rng.normal(static_cast<std::uint64_t>(j), static_cast<std::uint64_t>(i));
      m.exposures(i, j) = (j == 0 ? 1.0 : 0.0) + 0.5 * z;
    }
  }
  m.factor_cov = MatrixXd::Zero(q, q);
  for (Index j = 0; j < q; ++j) m.factor_cov(j, j) = 1e-4 * std::pow(0.5, static_cast<double>(j));
  m.specific_var.resize(p);
  for (Index i = 0; i < p; ++i) {
    const double vol = 0.01 + 0.02 * rng.uniform(1000, static_cast<std::uint64_t>(i));
    m.specific_var[i] = vol * vol;
  }
  m.asset_ids = make_asset_ids(p);
  return m;
}

/// Cap-weighted market portfolio with log-normal capitalizations; sums to one.
inline VectorXd synthetic_market_weights(Index p, std::uint64_t seed) {
  const CounterRng rng(seed, 0xca95u);
  VectorXd w(p);
  for (Index i = 0; i < p; ++i) w[i] = std::exp(rng.normal(0, static_cast<std::uint64_t>(i)));
  return w / compensated_sum(w);
}

}  // namespace lomv
