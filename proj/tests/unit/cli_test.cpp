#include <gtest/gtest.h>
#include <sys/wait.h>

#include <filesystem>
#include <fstream>
#include <sstream>

#include "lomv/io.hpp"
#include "test_util.hpp"

namespace lomv {
namespace {

namespace fs = std::filesystem;

class CliTest : public ::testing::Test {
 protected:
  void SetUp() override {
    const auto* info = ::testing::UnitTest::GetInstance()->current_test_info();
    dir_ = fs::temp_directory_path() / (std::string("lomv_cli_") + info->name());
    fs::remove_all(dir_);
    fs::create_directories(dir_);
  }
  void TearDown() override { fs::remove_all(dir_); }

  std::string path(const std::string& name) const { return (dir_ / name).string(); }

  int run(const std::string& args, const std::string& env = "") const {
    const std::string cmd = env + " '" + std::string(LOMV_CLI_PATH) + "' " + args + " 2>" + path("stderr.txt");
    const int status = std::system(cmd.c_str());
    return WIFEXITED(status) ? WEXITSTATUS(status) : -1;
  }

  static std::string slurp(const std::string& p) {
    std::ifstream in(p, std::ios::binary);
    std::ostringstream s;
    s << in.rdbuf();
    return s.str();
  }

  void write(const std::string& name, const std::string& content) const { io::write_file(path(name), content); }

  io::ModelFile model(const std::string& name) const {
    std::ifstream in(path(name));
    return io::read_model_json(in);
  }

  io::SolutionFile solution(const std::string& name) const {
    std::ifstream in(path(name));
    return io::read_solution_json(in);
  }

  void write_model(const std::string& name, const FactorModel& m) const {
    io::ModelFile f;
    f.factor = m;
    if (f.factor.asset_ids.empty()) f.factor.asset_ids = make_asset_ids(m.p());
    write(name, io::model_json(f));
  }

  fs::path dir_;
};

/// Rows of a CSV file as cells, header included.
std::vector<std::vector<std::string>> read_csv(const std::string& p) {
  std::ifstream in(p);
  std::vector<std::vector<std::string>> rows;
  std::string line;
  while (std::getline(in, line)) {
    std::vector<std::string> cells;
    std::stringstream ss(line);
    std::string cell;
    while (std::getline(ss, cell, ',')) cells.push_back(cell);
    rows.push_back(cells);
  }
  return rows;
}

std::size_t column(const std::vector<std::string>& header, const std::string& name) {
  const auto it = std::find(header.begin(), header.end(), name);
  if (it == header.end()) throw std::runtime_error("missing column " + name);
  return static_cast<std::size_t>(it - header.begin());
}

TEST_F(CliTest, EstimateWritesAReloadableModel) {
  ASSERT_EQ(run("simulate --p 40 --n 30 --q 1 --seed 3 --out " + path("r.csv")), 0);
  ASSERT_EQ(run("estimate --input " + path("r.csv") + " --estimator jse --out " + path("m.json")), 0);
  std::ifstream in(path("r.csv"));
  const ReturnsPanel panel = io::read_returns_csv(in);
  const JseEstimate direct = jse_estimate(panel);
  const io::ModelFile file = model("m.json");
  EXPECT_EQ(file.meta.estimator, "jse");
  EXPECT_LE((assemble_dense(file.factor).sigma - assemble_dense(direct.model).sigma).cwiseAbs().maxCoeff(), 1e-15);
}

TEST_F(CliTest, MarketModelWithoutWeightsIsAnInputError) {
  ASSERT_EQ(run("simulate --p 10 --n 20 --seed 1 --out " + path("r.csv")), 0);
  EXPECT_EQ(run("estimate --input " + path("r.csv") + " --estimator mjse"), 3);
  EXPECT_NE(slurp(path("stderr.txt")).find("--market-weights"), std::string::npos);
}

TEST_F(CliTest, MarketModelEstimatorsRun) {
  ASSERT_EQ(run("simulate --p 30 --n 20 --seed 2 --out " + path("r.csv") + " --market-weights-out " + path("w.csv")), 0);
  for (const std::string est : {"mjse", "ms"}) {
    ASSERT_EQ(run("estimate --input " + path("r.csv") + " --estimator " + est + " --market-weights " + path("w.csv") +
                  " --out " + path(est + ".json")),
              0);
    EXPECT_EQ(model(est + ".json").factor.q(), 1);
    EXPECT_EQ(run("solve --input " + path(est + ".json") + " --out " + path(est + "_s.json")), 0);
  }
}

TEST_F(CliTest, DiagonalModelSolvesToInverseVarianceWeights) {
  FactorModel m = FactorModel::single_factor(VectorXd::Zero(3), 1.0, (VectorXd(3) << 1, 2, 4).finished());
  m.asset_ids = {"A", "B", "C"};
  write_model("m.json", m);
  ASSERT_EQ(run("solve --input " + path("m.json") + " --out " + path("s.json")), 0);
  const io::SolutionFile s = solution("s.json");
  EXPECT_NEAR(s.solution.weights[0], 4.0 / 7.0, 1e-12);
  EXPECT_NEAR(s.solution.weights[1], 2.0 / 7.0, 1e-12);
  EXPECT_NEAR(s.solution.weights[2], 1.0 / 7.0, 1e-12);
}

TEST_F(CliTest, ExplicitAndActiveSetAgree) {
  test::Rng rng(91);
  write_model("m.json", test::random_single_factor(rng, 60, true).to_model());
  ASSERT_EQ(run("solve --input " + path("m.json") + " --solver explicit --out " + path("e.json")), 0);
  ASSERT_EQ(run("solve --input " + path("m.json") + " --solver active-set --out " + path("a.json")), 0);
  const io::SolutionFile e = solution("e.json");
  const io::SolutionFile a = solution("a.json");
  EXPECT_EQ(e.solution.method, SolverMethod::explicit_formula);
  EXPECT_LE((e.solution.weights - a.solution.weights).lpNorm<Eigen::Infinity>(), 1e-8);
}

TEST_F(CliTest, TwoFactorMarginsPartitionTheActiveSet) {
  write_model("m.json", synthetic_factor_model(80, 2, 4));
  ASSERT_EQ(run("solve --input " + path("m.json") + " --out " + path("s.json")), 0);
  const io::SolutionFile s = solution("s.json");
  ASSERT_TRUE(s.hyperplane.has_value());
  ASSERT_TRUE(s.hyperplane->angle.has_value());
  for (Index i = 0; i < 80; ++i) {
    if (s.solution.active.contains(i)) {
      EXPECT_LT(s.hyperplane->hk.margins[i], 0.0);
    } else {
      EXPECT_GE(s.hyperplane->hk.margins[i], -1e-9);
    }
  }
}

TEST_F(CliTest, PlotTablesMatchTheSolution) {
  write_model("m2.json", synthetic_factor_model(50, 2, 5));
  ASSERT_EQ(run("solve --input " + path("m2.json") + " --out " + path("s2.json")), 0);
  ASSERT_EQ(run("plotdata --input " + path("m2.json") + " --solution " + path("s2.json") + " --out " + path("p2")), 0);
  const io::SolutionFile s2 = solution("s2.json");
  const auto rows = read_csv(path("p2/exposures.csv"));
  ASSERT_EQ(rows.size(), 51u);
  const std::size_t margin = column(rows[0], "margin");
  const std::size_t active = column(rows[0], "active");
  int active_rows = 0;
  for (std::size_t r = 1; r < rows.size(); ++r) {
    const auto i = static_cast<Index>(r - 1);
    EXPECT_EQ(*io::parse_double(rows[r][margin]), s2.hyperplane->hk.margins[i]);
    active_rows += rows[r][active] == "1";
  }
  EXPECT_GE(active_rows, 1);
  EXPECT_TRUE(fs::exists(path("p2/hyperplane.csv")));

  test::Rng rng(92);
  write_model("m1.json", test::random_single_factor(rng, 40, true).to_model());
  ASSERT_EQ(run("solve --input " + path("m1.json") + " --out " + path("s1.json")), 0);
  ASSERT_EQ(run("plotdata --input " + path("m1.json") + " --solution " + path("s1.json") + " --out " + path("p1")), 0);
  const io::SolutionFile s1 = solution("s1.json");
  ASSERT_TRUE(s1.threshold.has_value());
  const auto rows1 = read_csv(path("p1/exposures.csv"));
  const std::size_t thr = column(rows1[0], "threshold");
  for (std::size_t r = 1; r < rows1.size(); ++r) EXPECT_EQ(*io::parse_double(rows1[r][thr]), *s1.threshold);
  for (const char* f : {"beta_weight.csv", "delta_weight.csv", "beta_delta.csv"}) {
    EXPECT_TRUE(fs::exists(path(std::string("p1/") + f))) << f;
  }
}

TEST_F(CliTest, PlotdataRejectsMismatchedAssets) {
  write_model("a.json", synthetic_factor_model(5, 1, 1));
  FactorModel other = synthetic_factor_model(5, 1, 1);
  other.asset_ids = {"X1", "X2", "X3", "X4", "X5"};
  write_model("b.json", other);
  ASSERT_EQ(run("solve --input " + path("b.json") + " --out " + path("s.json")), 0);
  EXPECT_EQ(run("plotdata --input " + path("a.json") + " --solution " + path("s.json") + " --out " + path("p")), 3);
}

TEST_F(CliTest, SolverRestrictionsAreInputErrors) {
  write_model("q2.json", synthetic_factor_model(10, 2, 2));
  EXPECT_EQ(run("solve --input " + path("q2.json") + " --solver explicit"), 3);
  write_model("big.json", synthetic_factor_model(21, 1, 2));
  EXPECT_EQ(run("solve --input " + path("big.json") + " --solver oracle"), 3);
  write_model("small.json", synthetic_factor_model(8, 1, 2));
  EXPECT_EQ(run("solve --input " + path("small.json") + " --solver oracle --out " + path("o.json")), 0);
  EXPECT_EQ(run("solve --input " + path("missing.json")), 3);
  EXPECT_EQ(run("solve --input " + path("q2.json") + " --solver bogus"), 3);
  write("bad.json", "{\"assets\": [\"A\"], \"q\": \"one\"}");
  EXPECT_EQ(run("solve --input " + path("bad.json")), 3);
}

TEST_F(CliTest, UnreachableToleranceFailsTheCertificate) {
  write_model("m.json", synthetic_factor_model(30, 2, 3));
  EXPECT_EQ(run("solve --input " + path("m.json") + " --tol 1e-30 --out " + path("s.json")), 2);
}

TEST_F(CliTest, EnvironmentSetsDefaultOutputDirectory) {
  write_model("m.json", synthetic_factor_model(12, 1, 3));
  const std::string env = "LOMV_OUTPUT_DIR='" + path("out") + "'";
  fs::create_directories(path("out"));
  ASSERT_EQ(run("solve --input " + path("m.json"), env), 0);
  EXPECT_TRUE(fs::exists(path("out/solution.json")));
  ASSERT_EQ(run("solve --input " + path("m.json") + " --format csv", env), 0);
  EXPECT_TRUE(fs::exists(path("out/solution.csv")));
}

TEST_F(CliTest, RepeatedRunsAreByteIdentical) {
  for (const std::string tag : {"1", "2"}) {
    ASSERT_EQ(run("simulate --p 50 --n 30 --q 2 --seed 8 --out " + path("r" + tag + ".csv")), 0);
    ASSERT_EQ(run("estimate --input " + path("r" + tag + ".csv") + " --estimator jsm --q 2 --out " +
                  path("m" + tag + ".json")),
              0);
    ASSERT_EQ(run("solve --input " + path("m" + tag + ".json") + " --out " + path("s" + tag + ".json")), 0);
  }
  EXPECT_EQ(slurp(path("r1.csv")), slurp(path("r2.csv")));
  EXPECT_EQ(slurp(path("m1.json")), slurp(path("m2.json")));
  EXPECT_EQ(slurp(path("s1.json")), slurp(path("s2.json")));
}

}  // namespace
}  // namespace lomv
