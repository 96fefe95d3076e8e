// lomv: estimate covariance models, solve long-only minimum variance
// portfolios, and export plot tables.
//
// Exit codes: 0 success, 1 numerical failure, 2 KKT certificate failed,
// 3 invalid input (bad flags, unreadable or malformed files).

#include <cstdlib>
#include <filesystem>
#include <iostream>
#include <optional>
#include <sstream>
#include <string>

#include "CLI11.hpp"
#include "lomv/lomv.hpp"

namespace {

constexpr int kExitOk = 0;
constexpr int kExitNumerical = 1;
constexpr int kExitCertificate = 2;
constexpr int kExitInput = 3;

constexpr const char* kOutDirEnv = "LOMV_OUTPUT_DIR";

struct RunConfig {
  std::string input;
  std::string market_weights;
  std::string solution;
  std::string estimator = "jse";
  std::string solver = "auto";
  std::string format = "json";
  std::string out;
  std::string model_out;
  std::string market_weights_out;
  long long q = 1;
  double tol = lomv::kKktTolerance;
  std::optional<std::uint64_t> seed;
  long long p = 100;
  long long n = 60;
};

/// Explicit --out wins; otherwise $LOMV_OUTPUT_DIR/<fallback>; otherwise stdout ("").
std::string resolve_output(const std::string& out, const std::string& fallback) {
  if (!out.empty()) return out;
  if (const char* dir = std::getenv(kOutDirEnv); dir != nullptr && *dir != '\0') {
    return (std::filesystem::path(dir) / fallback).string();
  }
  return {};
}

void emit(const std::string& path, const std::string& content) {
  if (path.empty() || path == "-") {
    std::cout << content;
  } else {
    lomv::io::write_file(path, content);
  }
}

int cmd_estimate(const RunConfig& cfg) {
  auto in = lomv::io::open_input(cfg.input);
  const lomv::ReturnsPanel panel = lomv::io::read_returns_csv(in);
  const lomv::EstimatorKind kind = lomv::parse_estimator(cfg.estimator);

  std::optional<lomv::VectorXd> mw;
  if (!cfg.market_weights.empty()) {
    auto win = lomv::io::open_input(cfg.market_weights);
    const lomv::io::MarketWeights raw = lomv::io::read_market_weights_csv(win);
    if (raw.renormalized) {
      std::cerr << "warning: market weights sum to " << lomv::io::format_double(raw.original_sum)
                << "; normalized to 1\n";
    }
    mw = lomv::io::align_market_weights(raw, panel.asset_ids);
  }

  lomv::io::ModelMeta meta;
  meta.estimator = cfg.estimator;
  meta.seed = cfg.seed;
  meta.created = "lomv estimate --estimator " + cfg.estimator +
                 (kind == lomv::EstimatorKind::jsm ? " --q " + std::to_string(cfg.q) : std::string());
  const lomv::EstimateOutput est = lomv::run_estimate(panel, kind, cfg.q, mw, std::move(meta));
  emit(resolve_output(cfg.out, "model.json"), lomv::io::model_json(est.file));
  std::cerr << est.summary << '\n';
  return kExitOk;
}

int cmd_solve(const RunConfig& cfg) {
  auto in = lomv::io::open_input(cfg.input);
  const lomv::io::ModelFile model = lomv::io::read_model_json(in);
  const lomv::io::SolutionFile sol = lomv::run_solve(model, lomv::parse_solver(cfg.solver), cfg.tol);

  std::string content;
  if (cfg.format == "json") {
    content = lomv::io::solution_json(sol);
  } else {
    std::ostringstream csv;
    csv << "asset,weight,active,lambda" << (sol.hyperplane ? ",margin" : "") << '\n';
    const std::vector<bool> mask = sol.solution.active.mask();
    for (std::size_t i = 0; i < sol.asset_ids.size(); ++i) {
      const auto r = static_cast<lomv::Index>(i);
      csv << sol.asset_ids[i] << ',' << lomv::io::format_double(sol.solution.weights[r]) << ',' << (mask[i] ? 1 : 0)
          << ',' << lomv::io::format_double(sol.solution.lambda[r]);
      if (sol.hyperplane) csv << ',' << lomv::io::format_double(sol.hyperplane->hk.margins[r]);
      csv << '\n';
    }
    content = csv.str();
  }
  emit(resolve_output(cfg.out, cfg.format == "json" ? "solution.json" : "solution.csv"), content);

  const lomv::KktCertificate& kkt = sol.solution.kkt;
  std::cerr << "method=" << lomv::to_string(sol.solution.method) << " p=" << sol.asset_ids.size()
            << " k=" << sol.solution.active.size() << " variance=" << lomv::io::format_double(sol.solution.objective)
            << " kkt=" << (kkt.passed ? "pass" : "FAIL") << " residual=" << lomv::io::format_double(kkt.max_residual())
            << '\n';
  return kkt.passed ? kExitOk : kExitCertificate;
}

int cmd_plotdata(const RunConfig& cfg) {
  if (cfg.solution.empty()) throw lomv::InvalidInput("plotdata requires --solution");
  auto min = lomv::io::open_input(cfg.input);
  const lomv::io::ModelFile model = lomv::io::read_model_json(min);
  auto sin = lomv::io::open_input(cfg.solution);
  const lomv::io::SolutionFile sol = lomv::io::read_solution_json(sin);
  const lomv::PlotTables tables = lomv::plot_tables(model, sol);

  std::string dir = cfg.out;
  if (dir.empty()) {
    const char* env = std::getenv(kOutDirEnv);
    dir = env != nullptr && *env != '\0' ? env : ".";
  }
  std::filesystem::create_directories(dir);
  for (const auto& [name, content] : tables) {
    lomv::io::write_file((std::filesystem::path(dir) / name).string(), content);
  }
  std::cerr << "wrote " << tables.size() << " tables to " << dir << '\n';
  return kExitOk;
}

int cmd_simulate(const RunConfig& cfg) {
  if (cfg.p < 1 || cfg.n < 2 || cfg.q < 1 || cfg.q > cfg.p) {
    throw lomv::InvalidInput("simulate needs p >= 1, n >= 2 and 1 <= q <= p");
  }
  const std::uint64_t seed = cfg.seed.value_or(0);
  lomv::SimulatorSpec spec;
  spec.model = lomv::synthetic_factor_model(cfg.p, cfg.q, seed);
  spec.n = cfg.n;
  spec.seed = seed;
  const lomv::ReturnsPanel panel = lomv::simulate_panel(spec);

  std::ostringstream csv;
  lomv::io::write_returns_csv(csv, panel);
  emit(resolve_output(cfg.out, "returns.csv"), csv.str());
  if (!cfg.model_out.empty()) {
    lomv::io::ModelFile truth;
    truth.factor = spec.model;
    truth.meta.estimator = "truth";
    truth.meta.seed = seed;
    truth.meta.created = "lomv simulate";
    lomv::io::write_file(cfg.model_out, lomv::io::model_json(truth));
  }
  if (!cfg.market_weights_out.empty()) {
    std::ostringstream mw;
    lomv::io::write_market_weights_csv(mw, panel.asset_ids, lomv::synthetic_market_weights(cfg.p, seed));
    lomv::io::write_file(cfg.market_weights_out, mw.str());
  }
  std::cerr << "p=" << cfg.p << " n=" << cfg.n << " q=" << cfg.q << " seed=" << seed << '\n';
  return kExitOk;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Long-only minimum variance portfolios under factor-model covariance"};
  app.require_subcommand(1);
  RunConfig cfg;
  std::uint64_t seed = 0;

  auto* estimate = app.add_subcommand("estimate", "Fit a covariance model to a returns CSV");
  estimate->add_option("--input", cfg.input, "Returns CSV (header of asset ids, one row per period)")->required();
  estimate->add_option("--estimator", cfg.estimator, "sample | jse | mjse | ms | jsm")
      ->check(CLI::IsMember({"sample", "jse", "mjse", "ms", "jsm"}));
  estimate->add_option("--market-weights", cfg.market_weights, "Two-column CSV: asset id, weight");
  estimate->add_option("--q", cfg.q, "Number of factors for jsm")->check(CLI::PositiveNumber);
  estimate->add_option("--seed", seed, "Recorded in the model metadata");
  estimate->add_option("--out", cfg.out, "Model JSON path");

  auto* solve = app.add_subcommand("solve", "Solve the long-only minimum variance problem");
  solve->add_option("--input", cfg.input, "Model JSON")->required();
  solve->add_option("--solver", cfg.solver, "auto | explicit | active-set | oracle")
      ->check(CLI::IsMember({"auto", "explicit", "active-set", "oracle"}));
  solve->add_option("--tol", cfg.tol, "KKT tolerance")->check(CLI::PositiveNumber);
  solve->add_option("--format", cfg.format, "json | csv")->check(CLI::IsMember({"json", "csv"}));
  solve->add_option("--out", cfg.out, "Solution path");

  auto* plot = app.add_subcommand("plotdata", "Write plot-ready CSV tables");
  plot->add_option("--input", cfg.input, "Model JSON")->required();
  plot->add_option("--solution", cfg.solution, "Solution JSON")->required();
  plot->add_option("--out", cfg.out, "Output directory");

  auto* sim = app.add_subcommand("simulate", "Simulate a factor-model returns panel");
  sim->add_option("--p", cfg.p, "Number of assets");
  sim->add_option("--n", cfg.n, "Number of periods");
  sim->add_option("--q", cfg.q, "Number of factors");
  sim->add_option("--seed", seed, "Random seed");
  sim->add_option("--out", cfg.out, "Returns CSV path");
  sim->add_option("--model-out", cfg.model_out, "Write the true model JSON here");
  sim->add_option("--market-weights-out", cfg.market_weights_out, "Write synthetic market weights here");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? kExitOk : kExitInput;
  }
  if (estimate->count("--seed") > 0 || sim->count("--seed") > 0) cfg.seed = seed;

  try {
    if (*estimate) return cmd_estimate(cfg);
    if (*solve) return cmd_solve(cfg);
    if (*plot) return cmd_plotdata(cfg);
    if (*sim) return cmd_simulate(cfg);
  } catch (const lomv::InvalidInput& e) {
    std::cerr << "error: " << e.what() << '\n';
    return kExitInput;
  } catch (const lomv::DegenerateInput& e) {
    std::cerr << "error: " << e.what() << '\n';
    return kExitInput;
  } catch (const nlohmann::json::exception& e) {
    // Well-formed JSON with a field of the wrong type.
    std::cerr << "error: " << e.what() << '\n';
    return kExitInput;
  } catch (const lomv::Error& e) {
    std::cerr << "error: " << e.what() << '\n';
    return kExitNumerical;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << '\n';
    return kExitNumerical;
  }
  return kExitInput;
}
