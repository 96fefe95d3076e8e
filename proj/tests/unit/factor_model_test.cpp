#include <gtest/gtest.h>

#include "test_util.hpp"

namespace lomv {
namespace {

using test::Rng;

TEST(AssetSubset, RejectsInvalidIndexSets) {
  EXPECT_THROW(AssetSubset({}, 3), InvalidInput);
  EXPECT_THROW(AssetSubset({2, 1}, 3), InvalidInput);
  EXPECT_THROW(AssetSubset({0, 0}, 3), InvalidInput);
  EXPECT_THROW(AssetSubset({0, 3}, 3), InvalidInput);
  const AssetSubset k = AssetSubset::from_unsorted({2, 0}, 4);
  EXPECT_EQ(k.indices(), (std::vector<Index>{0, 2}));
  EXPECT_EQ(k.complement(), (std::vector<Index>{1, 3}));
  EXPECT_TRUE(k.contains(2));
  EXPECT_FALSE(k.contains(1));
}

TEST(FactorModel, ValidateRejectsBadParameters) {
  FactorModel m = FactorModel::single_factor(VectorXd::Ones(2), 1.0, VectorXd::Ones(2));
  EXPECT_NO_THROW(m.validate());
  m.specific_var[1] = 0.0;
  EXPECT_THROW(m.validate(), InvalidInput);
  m.specific_var[1] = 1.0;
  m.factor_cov(0, 0) = -1.0;
  EXPECT_THROW(m.validate(), InvalidInput);
  m.factor_cov(0, 0) = 1.0;
  m.exposures(0, 0) = std::nan("");
  EXPECT_THROW(m.validate(), InvalidInput);
}

TEST(AssembleDense, ZeroExposuresGiveDiagonal) {
  const FactorModel m = FactorModel::single_factor(VectorXd::Zero(2), 1.0, (VectorXd(2) << 1, 2).finished());
  const MatrixXd s = assemble_dense(m).sigma;
  EXPECT_EQ(s(0, 0), 1.0);
  EXPECT_EQ(s(1, 1), 2.0);
  EXPECT_EQ(s(0, 1), 0.0);
  EXPECT_EQ(s(1, 0), 0.0);
}

TEST(AssembleDense, ScalarSubstitution) {
  const FactorModel m = FactorModel::single_factor(VectorXd::Ones(1), 2.0, VectorXd::Constant(1, 3.0));
  EXPECT_EQ(assemble_dense(m).sigma(0, 0), 5.0);
}

TEST(AssembleDense, MatchesTripleLoopProduct) {
  Rng rng(11);
  for (int trial = 0; trial < 20; ++trial) {
    const FactorModel m = test::random_factor_model(rng, 5, 2);
    const MatrixXd got = assemble_dense(m).sigma;
    const MatrixXd want = test::dense_sigma(m);
    EXPECT_LE((got - want).cwiseAbs().maxCoeff(), 1e-12);
  }
}

TEST(SubsetModel, FullSubsetIsIdentity) {
  Rng rng(12);
  const FactorModel m = test::random_factor_model(rng, 6, 2);
  const FactorModel s = subset_model(m, AssetSubset::all(6));
  EXPECT_EQ(s.exposures, m.exposures);
  EXPECT_EQ(s.specific_var, m.specific_var);
  EXPECT_EQ(s.factor_cov, m.factor_cov);
}

TEST(SubsetModel, SelectsRows) {
  FactorModel m;
  m.exposures = (MatrixXd(3, 2) << 1, 2, 3, 4, 5, 6).finished();
  m.factor_cov = MatrixXd::Identity(2, 2);
  m.specific_var = (VectorXd(3) << 0.1, 0.2, 0.3).finished();
  m.asset_ids = {"a", "b", "c"};
  const FactorModel s = subset_model(m, AssetSubset({0, 2}, 3));
  EXPECT_EQ(s.exposures, (MatrixXd(2, 2) << 1, 2, 5, 6).finished());
  EXPECT_EQ(s.specific_var, (VectorXd(2) << 0.1, 0.3).finished());
  EXPECT_EQ(s.asset_ids, (std::vector<std::string>{"a", "c"}));
}

TEST(SubsetModel, CommutesWithDenseAssembly) {
  Rng rng(13);
  for (int trial = 0; trial < 50; ++trial) {
    const Index p = test::uniform_int(rng, 2, 12);
    const Index q = test::uniform_int(rng, 1, 2);
    const FactorModel m = test::random_factor_model(rng, p, q);
    std::vector<bool> mask(static_cast<std::size_t>(p));
    for (auto&& b : mask) b = test::uniform(rng, 0, 1) < 0.5;
    // Subsets must keep at least q assets to remain valid factor models.
    for (Index i = 0; i < q; ++i) mask[static_cast<std::size_t>(i)] = true;
    const AssetSubset k = AssetSubset::from_mask(mask);
    const MatrixXd a = assemble_dense(subset_model(m, k)).sigma;
    const MatrixXd b = principal_submatrix(assemble_dense(m).sigma, k);
    EXPECT_LE((a - b).cwiseAbs().maxCoeff(), 1e-15);
  }
}

TEST(SolveInvOnes, DiagonalInverse) {
  const FactorModel m = FactorModel::single_factor(VectorXd::Zero(2), 1.0, (VectorXd(2) << 1, 2).finished());
  const VectorXd x = solve_inv_ones(m, AssetSubset::all(2));
  EXPECT_NEAR(x[0], 1.0, 1e-15);
  EXPECT_NEAR(x[1], 0.5, 1e-15);
}

TEST(SolveInvOnes, HandEvaluatedSingleFactor) {
  // B_K = 1 + 1 + 0.5 = 2.5, C_K = 1 + 0.5 = 1.5: entries (1/d_i)(1 - C_K/B_K).
  const FactorModel m = FactorModel::single_factor(VectorXd::Ones(2), 1.0, (VectorXd(2) << 1, 2).finished());
  const VectorXd x = solve_inv_ones(m, AssetSubset::all(2));
  EXPECT_NEAR(x[0], 0.4, 1e-15);
  EXPECT_NEAR(x[1], 0.2, 1e-15);
}

TEST(SolveInvOnes, MatchesDenseSolve) {
  Rng rng(14);
  for (int trial = 0; trial < 50; ++trial) {
    const FactorModel m = test::random_factor_model(rng, 8, 2);
    const MatrixXd s = test::dense_sigma(m);
    std::vector<Index> all(8);
    std::iota(all.begin(), all.end(), Index{0});
    const VectorXd want = test::dense_inv_ones(s, all);
    const VectorXd got = solve_inv_ones(m, AssetSubset::all(8));
    EXPECT_LE((got - want).cwiseAbs().maxCoeff(), 1e-9 * want.cwiseAbs().maxCoeff());
    EXPECT_LE((solve_inv_ones(DenseCovariance{s, {}}, AssetSubset::all(8)) - want).cwiseAbs().maxCoeff(),
              1e-9 * want.cwiseAbs().maxCoeff());
  }
}

TEST(SolveInvOnes, IllConditionedFactorCovarianceUsesStableForm) {
  Rng rng(15);
  FactorModel m = test::random_factor_model(rng, 10, 2);
  m.factor_cov = (MatrixXd(2, 2) << 1e-2, 0, 0, 1e-16).finished();
  const MatrixXd s = test::dense_sigma(m);
  std::vector<Index> all(10);
  std::iota(all.begin(), all.end(), Index{0});
  const VectorXd want = test::dense_inv_ones(s, all);
  const VectorXd got = solve_inv_ones(m, AssetSubset::all(10));
  EXPECT_LE((got - want).cwiseAbs().maxCoeff(), 1e-9 * want.cwiseAbs().maxCoeff());
}

TEST(LongShortWeights, DiagonalCase) {
  const DenseCovariance c{(MatrixXd(2, 2) << 1, 0, 0, 4).finished(), {}};
  const VectorXd w = long_short_weights(c, AssetSubset::all(2));
  EXPECT_NEAR(w[0], 0.8, 1e-15);
  EXPECT_NEAR(w[1], 0.2, 1e-15);
}

TEST(LongShortWeights, SymmetricPairIsEqualWeight) {
  for (double rho : {-0.9, -0.3, 0.0, 0.5, 0.99}) {
    const DenseCovariance c{(MatrixXd(2, 2) << 1, rho, rho, 1).finished(), {}};
    const VectorXd w = long_short_weights(c, AssetSubset::all(2));
    EXPECT_NEAR(w[0], 0.5, 1e-14);
    EXPECT_NEAR(w[1], 0.5, 1e-14);
  }
}

TEST(LongShortWeights, HandInverted) {
  const DenseCovariance c{(MatrixXd(2, 2) << 1, 1.5, 1.5, 4).finished(), {}};
  const VectorXd w = long_short_weights(c, AssetSubset::all(2));
  EXPECT_NEAR(w[0], 1.25, 1e-14);
  EXPECT_NEAR(w[1], -0.25, 1e-14);
}

TEST(CovarianceDiagonal, FactorAndDenseAgree) {
  Rng rng(16);
  const FactorModel m = test::random_factor_model(rng, 7, 3);
  const VectorXd a = covariance_diagonal(m);
  const VectorXd b = test::dense_sigma(m).diagonal();
  EXPECT_LE((a - b).cwiseAbs().maxCoeff(), 1e-15);
  EXPECT_DOUBLE_EQ(max_diagonal(m), a.maxCoeff());
}

}  // namespace
}  // namespace lomv
