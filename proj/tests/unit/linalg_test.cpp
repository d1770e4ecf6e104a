#include <gtest/gtest.h>

#include <random>

#include "robustbf/errors.hpp"
#include "robustbf/linalg.hpp"
#include "test_support.hpp"

namespace robustbf {
namespace {

using testing::gauss_solve;
using testing::random_cvec;
using testing::random_pd;

TEST(HermitianSolve, IdentityReturnsRightHandSide) {
  CVec b(2);
  b << cdouble(1, 0), cdouble(0, 2);
  const CVec x = hermitian_solve(CMat::Identity(2, 2), b);
  EXPECT_EQ(x(0), cdouble(1, 0));
  EXPECT_EQ(x(1), cdouble(0, 2));
}

TEST(HermitianSolve, ScalarMatrixHalvesRightHandSide) {
  const CVec x = hermitian_solve(CMat(2.0 * CMat::Identity(2, 2)), CVec(CVec::Ones(2)));
  EXPECT_DOUBLE_EQ(x(0).real(), 0.5);
  EXPECT_DOUBLE_EQ(x(1).real(), 0.5);
  EXPECT_EQ(x(0).imag(), 0.0);
  EXPECT_EQ(x(1).imag(), 0.0);
}

TEST(HermitianSolve, MatchesGaussianEliminationOracle) {
  std::mt19937_64 rng(11);
  for (int trial = 0; trial < 50; ++trial) {
    const CMat a = random_pd(4, rng);
    const CVec b = random_cvec(4, rng);
    const CVec x = hermitian_solve(a, b);
    const CVec oracle = gauss_solve(a, b);
    EXPECT_LE((x - oracle).cwiseAbs().maxCoeff(), 1e-9) << "trial " << trial;
  }
}

TEST(HermitianSolve, ResidualBoundOnRandomInstances) {
  std::mt19937_64 rng(12);
  for (int m : {2, 4, 8}) {
    double worst = 0.0;
    for (int trial = 0; trial < 1000; ++trial) {
      const CMat a = random_pd(m, rng, 0.1);
      const CVec b = random_cvec(m, rng);
      const CVec x = hermitian_solve(a, b);
      const double residual = (a * x - b).cwiseAbs().maxCoeff() / b.cwiseAbs().maxCoeff();
      worst = std::max(worst, residual);
    }
    EXPECT_LE(worst, 1e-10) << "M = " << m;
  }
}

TEST(HermitianSolve, MultipleRightHandSidesMatchColumnwise) {
  std::mt19937_64 rng(13);
  const CMat a = random_pd(3, rng);
  const CMat b = testing::random_cmat(3, 4, rng);
  const CMat x = hermitian_solve(a, b);
  for (Eigen::Index c = 0; c < b.cols(); ++c)
    EXPECT_LE((x.col(c) - hermitian_solve(a, CVec(b.col(c)))).norm(), 1e-14);
}

TEST(Cholesky, RejectsIndefiniteMatrix) {
  CMat a(2, 2);
  a << 1.0, 2.0, 2.0, 1.0;  // eigenvalues 3 and -1
  EXPECT_THROW(Cholesky{a}, FactorizationError);
}

TEST(Cholesky, RejectsZeroMatrix) {
  EXPECT_THROW(Cholesky{CMat::Zero(3, 3)}, FactorizationError);
}

TEST(Cholesky, FactorReproducesMatrix) {
  std::mt19937_64 rng(14);
  const CMat a = random_pd(5, rng);
  const Cholesky chol(a);
  EXPECT_LE((chol.lower() * chol.lower().adjoint() - a).cwiseAbs().maxCoeff(), 1e-12);
}

TEST(Cholesky, ReadsOnlyLowerTriangle) {
  std::mt19937_64 rng(15);
  const CMat a = random_pd(4, rng);
  CMat scrambled = a;
  scrambled(0, 3) = cdouble(99, -7);
  const CVec b = random_cvec(4, rng);
  EXPECT_EQ(Cholesky(a).solve(b), Cholesky(scrambled).solve(b));
}

TEST(WeightedGram, MatchesExplicitSum) {
  std::mt19937_64 rng(16);
  const CMat h = testing::random_cmat(3, 2, rng);
  RVec w(2);
  w << 0.5, 2.0;
  CMat expected = 1.5 * CMat::Identity(3, 3);
  for (int j = 0; j < 2; ++j) expected += w(j) * h.col(j) * h.col(j).adjoint();
  EXPECT_LE((weighted_gram(h, w, 1.5) - expected).cwiseAbs().maxCoeff(), 1e-14);
  EXPECT_TRUE(is_hermitian(weighted_gram(h, w, 1.5)));
}

TEST(ComplexArithmetic, ProductQuotientRoundTrip) {
  std::mt19937_64 rng(17);
  std::normal_distribution<double> n(0.0, 3.0);
  for (int trial = 0; trial < 10000; ++trial) {
    const cdouble a(n(rng), n(rng));
    const cdouble b(n(rng), n(rng));
    if (std::abs(b) == 0.0) continue;
    EXPECT_LE(std::abs((a * b) / b - a), 1e-12 * std::max(1.0, std::abs(a)));
  }
}

TEST(Packing, RoundTripsAndUsesInterleavedColumnLayout) {
  std::mt19937_64 rng(18);
  const CMat m = testing::random_cmat(3, 2, rng);
  RowVec row(12);
  pack_columns(m, row);
  EXPECT_EQ(row(2 * (1 * 3 + 2)), m(2, 1).real());
  EXPECT_EQ(row(2 * (1 * 3 + 2) + 1), m(2, 1).imag());
  EXPECT_EQ(unpack_columns(row, 3, 2), m);
}

TEST(Types, FinitenessAndHermitianChecks) {
  CMat a = CMat::Identity(2, 2);
  EXPECT_TRUE(all_finite(a));
  EXPECT_TRUE(is_hermitian(a));
  a(0, 1) = cdouble(0, 1);
  EXPECT_FALSE(is_hermitian(a));
  a(1, 0) = cdouble(0, -1);
  EXPECT_TRUE(is_hermitian(a));
  a(1, 1) = std::numeric_limits<double>::quiet_NaN();
  EXPECT_FALSE(all_finite(a));
}

}  // namespace
}  // namespace robustbf
