#include <gtest/gtest.h>

#include "test_util.hpp"

namespace lomv {
namespace {

using test::Rng;

TEST(ProjectToSimplex, KnownProjections) {
  EXPECT_EQ(project_to_simplex((VectorXd(3) << 0.2, 0.3, 0.5).finished()), (VectorXd(3) << 0.2, 0.3, 0.5).finished());
  const VectorXd a = project_to_simplex((VectorXd(2) << 2, 0).finished());
  EXPECT_DOUBLE_EQ(a[0], 1.0);
  EXPECT_DOUBLE_EQ(a[1], 0.0);
  const VectorXd b = project_to_simplex((VectorXd(3) << 1, 1, 1).finished());
  for (Index i = 0; i < 3; ++i) EXPECT_NEAR(b[i], 1.0 / 3.0, 1e-15);
  const VectorXd c = project_to_simplex((VectorXd(3) << -5, 0.5, 0.7).finished());
  EXPECT_EQ(c[0], 0.0);
  EXPECT_NEAR(c[1], 0.4, 1e-15);
  EXPECT_NEAR(c[2], 0.6, 1e-15);
}

TEST(ActiveSet, MatchesExplicitSolverOnSingleFactorModels) {
  Rng rng(41);
  for (int trial = 0; trial < 300; ++trial) {
    const Index p = test::uniform_int(rng, 2, 50);
    const SingleFactorInputs in = test::random_single_factor(rng, p, trial % 5 == 0);
    const ExplicitSolution ex = solve_explicit(in);
    const LomvSolution g = solve_active_set(in.to_model());
    ASSERT_TRUE(g.kkt.passed);
    EXPECT_LE((g.weights - ex.solution.weights).lpNorm<Eigen::Infinity>(), 1e-8);
  }
}

TEST(ActiveSet, PositiveEntriesEqualLongShortWeightsOnK) {
  Rng rng(42);
  for (int trial = 0; trial < 200; ++trial) {
    const Index p = test::uniform_int(rng, 2, 30);
    const FactorModel m = test::random_factor_model(rng, p, test::uniform_int(rng, 1, std::min<Index>(3, p)));
    const LomvSolution s = solve_active_set(m);
    ASSERT_TRUE(s.kkt.passed);
    const std::vector<Index> k = s.active.indices();
    const VectorXd x = test::dense_inv_ones(test::dense_sigma(m), k);
    const VectorXd want = x / x.sum();
    for (std::size_t r = 0; r < k.size(); ++r) EXPECT_NEAR(s.weights[k[r]], want[static_cast<Index>(r)], 1e-10);
    for (Index i : s.active.complement()) EXPECT_EQ(s.weights[i], 0.0);
  }
}

TEST(ActiveSet, DenseAndFactorRepresentationsAgree) {
  Rng rng(43);
  for (int trial = 0; trial < 50; ++trial) {
    const FactorModel m = test::random_factor_model(rng, 15, 2);
    const LomvSolution a = solve_active_set(m);
    const LomvSolution b = solve_active_set(DenseCovariance{test::dense_sigma(m), {}});
    EXPECT_EQ(a.active, b.active);
    EXPECT_LE((a.weights - b.weights).lpNorm<Eigen::Infinity>(), 1e-10);
  }
}

TEST(ActiveSet, UnstructuredCovariancesCertify) {
  Rng rng(44);
  for (int trial = 0; trial < 100; ++trial) {
    const DenseCovariance c = test::random_dense(rng, test::uniform_int(rng, 2, 25));
    const LomvSolution s = solve_active_set(c);
    EXPECT_TRUE(s.kkt.passed) << "residual " << s.kkt.max_residual();
    EXPECT_EQ(s.method, SolverMethod::active_set);
  }
}

TEST(ActiveSet, FallsBackToProjectedGradientWhenPivotBudgetRunsOut) {
  Rng rng(45);
  const FactorModel m = test::random_factor_model(rng, 30, 2);
  const LomvSolution reference = solve_active_set(m);
  ActiveSetOptions opts;
  opts.max_pivots = 1;
  const LomvSolution s = solve_active_set(m, opts);
  EXPECT_EQ(s.method, SolverMethod::projected_gradient);
  EXPECT_TRUE(s.kkt.passed);
  EXPECT_LE((s.weights - reference.weights).lpNorm<Eigen::Infinity>(), 1e-8);
}

TEST(ProjectedGradient, AgreesWithActiveSet) {
  Rng rng(46);
  for (int trial = 0; trial < 30; ++trial) {
    const DenseCovariance c = test::random_dense(rng, test::uniform_int(rng, 2, 10));
    const LomvSolution a = solve_active_set(c);
    const LomvSolution g = solve_projected_gradient(c, VectorXd::Constant(c.p(), 1.0 / static_cast<double>(c.p())));
    EXPECT_TRUE(g.kkt.passed);
    EXPECT_NEAR(a.objective, g.objective, 1e-10);
  }
}

TEST(ActiveSet, SingleAssetUniverse) {
  const DenseCovariance c{MatrixXd::Constant(1, 1, 0.3), {}};
  const LomvSolution s = solve_active_set(c);
  EXPECT_EQ(s.weights[0], 1.0);
  EXPECT_TRUE(s.kkt.passed);
}

TEST(ActiveSet, RejectsInvalidCovariance) {
  const DenseCovariance c{(MatrixXd(2, 2) << 1, 2, 2, 1).finished(), {}};
  EXPECT_THROW(solve_active_set(c), InvalidInput);
}

}  // namespace
}  // namespace lomv
