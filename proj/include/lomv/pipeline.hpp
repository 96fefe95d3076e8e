#pragma once

#include <map>
#include <optional>
#include <sstream>
#include <string>
#include <utility>
#include <vector>

#include "lomv/active_set.hpp"
#include "lomv/estimators.hpp"
#include "lomv/explicit_solver.hpp"
#include "lomv/hyperplane.hpp"
#include "lomv/io.hpp"
#include "lomv/oracle.hpp"

namespace lomv {

enum class EstimatorKind { sample, jse, mjse, ms, jsm };
enum class SolverChoice { automatic, explicit_formula, active_set, oracle };

inline EstimatorKind parse_estimator(const std::string& s) {
  if (s == "sample") return EstimatorKind::sample;
  if (s == "jse") return EstimatorKind::jse;
  if (s == "mjse") return EstimatorKind::mjse;
  if (s == "ms") return EstimatorKind::ms;
  if (s == "jsm") return EstimatorKind::jsm;
  throw InvalidInput("unknown estimator '" + s + "' (expected sample, jse, mjse, ms or jsm)");
}

inline SolverChoice parse_solver(const std::string& s) {
  if (s == "auto") return SolverChoice::automatic;
  if (s == "explicit") return SolverChoice::explicit_formula;
  if (s == "active-set") return SolverChoice::active_set;
  if (s == "oracle") return SolverChoice::oracle;
  throw InvalidInput("unknown solver '" + s + "' (expected explicit, active-set or oracle)");
}

struct EstimateOutput {
  io::ModelFile file;
  std::string summary;  ///< one line: p, n, q, scale parameter, clip count
};

/**
 * Fits a covariance model to a returns panel. mjse and ms need market weights
 * aligned to the panel's asset order; jsm uses q factors.
 */
inline EstimateOutput run_estimate(const ReturnsPanel& panel, EstimatorKind kind, Index q,
                                   const std::optional<VectorXd>& market_weights, io::ModelMeta meta) {
  panel.validate();
  const bool needs_market = kind == EstimatorKind::mjse || kind == EstimatorKind::ms;
  if (needs_market && !market_weights) {
    throw InvalidInput("estimator " + meta.estimator + " requires --market-weights");
  }
  if (market_weights && market_weights->size() != panel.p()) {
    throw InvalidInput("market weights have " + std::to_string(market_weights->size()) + " entries, panel has " +
                       std::to_string(panel.p()) + " assets");
  }
  std::vector<std::string> ids = panel.asset_ids.empty() ? make_asset_ids(panel.p()) : panel.asset_ids;

  EstimateOutput out;
  out.file.meta = std::move(meta);
  std::ostringstream summary;
  summary << "p=" << panel.p() << " n=" << panel.n();

  switch (kind) {
    case EstimatorKind::sample: {
      out.file.dense = true;
      out.file.covariance.sigma = sample_covariance(panel);
      out.file.covariance.asset_ids = ids;
      summary << " q=dense trace=" << io::format_double(out.file.covariance.sigma.trace()) << " clipped=0";
      break;
    }
    case EstimatorKind::jse: {
      const JseEstimate e = jse_estimate(panel);
      out.file.factor = e.model;
      summary << " q=1 eta_sq=" << io::format_double(e.params.eta_sq) << " clipped=" << e.clipped.size();
      break;
    }
    case EstimatorKind::mjse: {
      const JseEstimate e = jse_estimate(panel);
      const MarketModel mm = market_model(e.model, *market_weights, sample_variances(panel));
      out.file.factor = mm.model;
      summary << " q=1 sigma_m_sq=" << io::format_double(mm.params.sigma_m_sq)
              << " clipped=" << mm.params.clipped.size();
      break;
    }
    case EstimatorKind::ms: {
      const ReturnsPanel c = panel.centered_copy();
      const MarketModel mm = market_model(SampleCovarianceView{&c.data}, *market_weights, sample_variances(panel));
      out.file.factor = mm.model;
      summary << " q=1 sigma_m_sq=" << io::format_double(mm.params.sigma_m_sq)
              << " clipped=" << mm.params.clipped.size();
      break;
    }
    case EstimatorKind::jsm: {
      const JsmEstimate e = jsm_estimate(panel, q);
      out.file.factor = e.model;
      summary << " q=" << q << " omega_1=" << io::format_double(e.params.omega[0]) << " clipped=" << e.clipped.size();
      break;
    }
  }
  if (!out.file.dense) {
    out.file.factor.asset_ids = ids;
    out.file.factor.validate();
  }
  out.summary = summary.str();
  return out;
}

/**
 * Solves the long-only problem for a model file and attaches the diagnostics
 * written to the solution file: the R-sequence and threshold when q = 1 and
 * both separating hyperplanes for factor models.
 */
inline io::SolutionFile run_solve(const io::ModelFile& model, SolverChoice choice, double tol = kKktTolerance) {
  io::SolutionFile out;
  out.asset_ids = model.asset_ids();
  const bool single = !model.dense && model.factor.q() == 1;
  if (choice == SolverChoice::automatic) choice = single ? SolverChoice::explicit_formula : SolverChoice::active_set;

  ActiveSetOptions opts;
  opts.kkt_tol = tol;
  std::optional<ExplicitSolution> ex;
  if (single) {
    try {
      ex = solve_explicit(model.factor, tol);
    } catch (const DegenerateInput&) {
      if (choice == SolverChoice::explicit_formula) throw;
    }
  }

  switch (choice) {
    case SolverChoice::explicit_formula:
      if (!single) throw InvalidInput("explicit solver requires a single-factor model (q = 1)");
      out.solution = ex->solution;
      break;
    case SolverChoice::active_set:
      out.solution = model.dense ? solve_active_set(model.covariance, opts) : solve_active_set(model.factor, opts);
      break;
    case SolverChoice::oracle: {
      if (model.p() > kOracleMaxAssets) {
        throw InvalidInput("oracle solver requires p <= " + std::to_string(kOracleMaxAssets));
      }
      out.solution = brute_force_lomv(model.dense ? model.covariance : assemble_dense(model.factor), tol);
      break;
    }
    case SolverChoice::automatic:
      break;
  }

  if (ex) {
    if (std::isfinite(ex->threshold)) out.threshold = ex->threshold;
    out.flipped = ex->flipped;
    io::RSequenceRecord rec;
    for (Index i : ex->r_sequence.order) rec.order.push_back(out.asset_ids[static_cast<std::size_t>(i)]);
    rec.values = ex->r_sequence.values;
    rec.k = ex->r_sequence.k;
    rec.peak = ex->r_sequence.peak;
    out.r_sequence = std::move(rec);
  }
  if (!model.dense) {
    io::HyperplaneRecord hp;
    hp.hk = hyperplane_hk(model.factor, out.solution.active);
    hp.hl = hyperplane_hl(model.factor, out.solution.active);
    if (model.factor.q() == 2) hp.angle = hyperplane_angle(hp.hk);
    out.hyperplane = std::move(hp);
  }
  return out;
}

/// Plot-ready CSV tables keyed by file name.
using PlotTables = std::map<std::string, std::string>;

/**
 * Joins a model and a solution by asset id into CSV tables, one row per asset
 * in model order:
 *   exposures.csv  asset, B1..Bq, delta, active, weight, margin[, threshold]
 *   hyperplane.csv key, value (h, h^L, rank flag, angle or threshold, k)
 * and for q = 1 also beta_weight.csv, delta_weight.csv and beta_delta.csv.
 */
inline PlotTables plot_tables(const io::ModelFile& model, const io::SolutionFile& sol) {
  const std::vector<std::string>& ids = model.asset_ids();
  const Index p = model.p();
  if (static_cast<Index>(sol.asset_ids.size()) != p) {
    throw InvalidInput("model has " + std::to_string(p) + " assets, solution has " +
                       std::to_string(sol.asset_ids.size()));
  }
  std::map<std::string, Index> pos;
  for (Index i = 0; i < p; ++i) pos[sol.asset_ids[static_cast<std::size_t>(i)]] = i;
  std::vector<Index> map_to_sol(static_cast<std::size_t>(p));
  for (Index i = 0; i < p; ++i) {
    const auto it = pos.find(ids[static_cast<std::size_t>(i)]);
    if (it == pos.end()) throw InvalidInput("asset '" + ids[static_cast<std::size_t>(i)] + "' missing from solution");
    map_to_sol[static_cast<std::size_t>(i)] = it->second;
  }
  const std::vector<bool> active_mask = sol.solution.active.mask();
  auto weight = [&](Index i) { return sol.solution.weights[map_to_sol[static_cast<std::size_t>(i)]]; };
  auto active = [&](Index i) { return active_mask[static_cast<std::size_t>(map_to_sol[static_cast<std::size_t>(i)])]; };

  PlotTables tables;
  std::ostringstream ex;
  if (model.dense) {
    ex << "asset,variance,active,weight\n";
    for (Index i = 0; i < p; ++i) {
      ex << ids[static_cast<std::size_t>(i)] << ',' << io::format_double(model.covariance.sigma(i, i)) << ','
         << (active(i) ? 1 : 0) << ',' << io::format_double(weight(i)) << '\n';
    }
    tables["exposures.csv"] = ex.str();
    std::ostringstream hp;
    hp << "key,value\nk," << sol.solution.active.size() << '\n';
    tables["hyperplane.csv"] = hp.str();
    return tables;
  }

  const FactorModel& fm = model.factor;
  const Index q = fm.q();
  VectorXd margins;
  if (sol.hyperplane) {
    margins.resize(p);
    for (Index i = 0; i < p; ++i) margins[i] = sol.hyperplane->hk.margins[map_to_sol[static_cast<std::size_t>(i)]];
  } else {
    std::vector<Index> act;
    for (Index i = 0; i < p; ++i) {
      if (active(i)) act.push_back(i);
    }
    margins = hyperplane_hk(fm, AssetSubset(act, p)).margins;
  }

  ex << "asset";
  for (Index j = 0; j < q; ++j) ex << ",B" << (j + 1);
  ex << ",delta,active,weight,margin";
  if (sol.threshold) ex << ",threshold";
  ex << '\n';
  for (Index i = 0; i < p; ++i) {
    ex << ids[static_cast<std::size_t>(i)];
    for (Index j = 0; j < q; ++j) ex << ',' << io::format_double(fm.exposures(i, j));
    ex << ',' << io::format_double(std::sqrt(fm.specific_var[i])) << ',' << (active(i) ? 1 : 0) << ','
       << io::format_double(weight(i)) << ',' << io::format_double(margins[i]);
    if (sol.threshold) ex << ',' << io::format_double(*sol.threshold);
    ex << '\n';
  }
  tables["exposures.csv"] = ex.str();

  if (q == 1) {
    std::ostringstream bw;
    std::ostringstream dw;
    std::ostringstream bd;
    bw << "asset,beta,weight\n";
    dw << "asset,delta,weight\n";
    bd << "asset,beta,delta\n";
    for (Index i = 0; i < p; ++i) {
      const std::string& id = ids[static_cast<std::size_t>(i)];
      const std::string beta = io::format_double(fm.exposures(i, 0));
      const std::string delta = io::format_double(std::sqrt(fm.specific_var[i]));
      const std::string w = io::format_double(weight(i));
      bw << id << ',' << beta << ',' << w << '\n';
      dw << id << ',' << delta << ',' << w << '\n';
      bd << id << ',' << beta << ',' << delta << '\n';
    }
    tables["beta_weight.csv"] = bw.str();
    tables["delta_weight.csv"] = dw.str();
    tables["beta_delta.csv"] = bd.str();
  }

  std::ostringstream hp;
  hp << "key,value\n";
  if (sol.hyperplane) {
    for (Index j = 0; j < sol.hyperplane->hk.h.size(); ++j) {
      hp << "hK" << (j + 1) << ',' << io::format_double(sol.hyperplane->hk.h[j]) << '\n';
    }
    for (Index j = 0; j < sol.hyperplane->hl.h.size(); ++j) {
      hp << "hL" << (j + 1) << ',' << io::format_double(sol.hyperplane->hl.h[j]) << '\n';
    }
    hp << "full_rank," << (sol.hyperplane->hk.full_rank ? 1 : 0) << '\n';
    if (sol.hyperplane->angle) hp << "angle," << io::format_double(*sol.hyperplane->angle) << '\n';
  }
  if (sol.threshold) hp << "threshold," << io::format_double(*sol.threshold) << '\n';
  if (sol.flipped) hp << "flipped," << (*sol.flipped ? 1 : 0) << '\n';
  hp << "k," << sol.solution.active.size() << '\n';
  tables["hyperplane.csv"] = hp.str();
  return tables;
}

}  // namespace lomv
