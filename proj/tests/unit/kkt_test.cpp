#include <gtest/gtest.h>

#include "test_util.hpp"

namespace lomv {
namespace {

const DenseCovariance kPair{(MatrixXd(2, 2) << 1, 1.5, 1.5, 4).finished(), {}};

TEST(Kkt, HandCheckedBoundarySolution) {
  const LomvSolution s = solve_active_set(kPair);
  EXPECT_NEAR(s.weights[0], 1.0, 1e-15);
  EXPECT_EQ(s.weights[1], 0.0);
  EXPECT_NEAR(s.nu, -2.0, 1e-14);
  EXPECT_NEAR(s.lambda[0], 0.0, 1e-15);
  EXPECT_NEAR(s.lambda[1], 1.0, 1e-14);
  EXPECT_TRUE(s.kkt.passed);
  EXPECT_NEAR(s.objective, 1.0, 1e-15);
}

TEST(Kkt, IdentityIsEqualWeight) {
  const DenseCovariance c{MatrixXd::Identity(4, 4), {}};
  const LomvSolution s = solve_active_set(c);
  for (Index i = 0; i < 4; ++i) EXPECT_NEAR(s.weights[i], 0.25, 1e-15);
  EXPECT_TRUE(s.kkt.passed);
}

TEST(VerifyKkt, AcceptsTheOptimum) {
  const VectorXd w = (VectorXd(2) << 1, 0).finished();
  const Multipliers m = recover_multipliers(kPair, w);
  EXPECT_DOUBLE_EQ(m.nu, -2.0);
  EXPECT_DOUBLE_EQ(m.lambda[1], 1.0);
  EXPECT_TRUE(verify_kkt(kPair, w, m.nu, m.lambda, 1e-8).passed);
}

TEST(VerifyKkt, RejectsEqualWeights) {
  const VectorXd w = (VectorXd(2) << 0.5, 0.5).finished();
  const Multipliers m = recover_multipliers(kPair, w);
  const KktCertificate c = verify_kkt(kPair, w, m.nu, m.lambda, 1e-8);
  EXPECT_FALSE(c.passed);
  EXPECT_GT(c.stationarity, 1e-3);
  // No multiplier choice rescues it: with both weights positive lambda must be 0,
  // and 2 Sigma w = (2.5, 5.5) is not a multiple of the ones vector.
  const KktCertificate zero = verify_kkt(kPair, w, -4.0, VectorXd::Zero(2), 1e-8);
  EXPECT_FALSE(zero.passed);
}

TEST(VerifyKkt, RejectsNegativeWeights) {
  const VectorXd w = (VectorXd(2) << 1.25, -0.25).finished();
  const KktCertificate c = verify_kkt(kPair, w, -2.0, VectorXd::Zero(2), 1e-8);
  EXPECT_FALSE(c.passed);
  EXPECT_DOUBLE_EQ(c.feasibility, 0.25);
}

TEST(VerifyKkt, ReportsScaledResiduals) {
  const DenseCovariance c{(MatrixXd(2, 2) << 4, 0, 0, 1).finished(), {}};
  const LomvSolution s = solve_active_set(c);
  EXPECT_DOUBLE_EQ(s.kkt.scale, 4.0);
  EXPECT_LE(s.kkt.max_residual(), 1e-14);
}

TEST(Certify, ZeroesTinyWeightsAndRenormalizes) {
  const VectorXd w = (VectorXd(2) << 1.0, 1e-12).finished();
  const LomvSolution s = certify(kPair, w, SolverMethod::active_set);
  EXPECT_EQ(s.weights[1], 0.0);
  EXPECT_DOUBLE_EQ(s.weights[0], 1.0);
  EXPECT_EQ(s.active.size(), 1);
  EXPECT_TRUE(s.kkt.passed);
}

TEST(BoundaryAssets, FlagsZeroMultipliersOffTheActiveSet) {
  const AssetSubset k({0}, 3);
  const VectorXd lambda = (VectorXd(3) << 0, 1e-13, 0.5).finished();
  EXPECT_EQ(boundary_assets(k, lambda, 1e-10), (std::vector<Index>{1}));
}

TEST(Kkt, FactorAndDenseCertificatesAgree) {
  test::Rng rng(31);
  for (int trial = 0; trial < 30; ++trial) {
    const FactorModel m = test::random_factor_model(rng, 12, 2);
    const DenseCovariance d{test::dense_sigma(m), {}};
    const LomvSolution s = solve_active_set(m);
    const KktCertificate a = verify_kkt(m, s);
    const KktCertificate b = verify_kkt(d, s);
    EXPECT_TRUE(a.passed);
    EXPECT_TRUE(b.passed);
    EXPECT_NEAR(a.stationarity, b.stationarity, 1e-12);
  }
}

}  // namespace
}  // namespace lomv
