#include <gtest/gtest.h>

#include <random>

#include "lowrank_var/errors.hpp"
#include "lowrank_var/matrix_core.hpp"
#include "oracles.hpp"

using namespace lrvar;

namespace {

Matrix diag(std::initializer_list<double> d) {
  Vector v(static_cast<Index>(d.size()));
  Index i = 0;
  for (double x : d) v(i++) = x;
  return v.asDiagonal();
}

}  // namespace

TEST(Svd, IdentityAndDiagonal) {
  EXPECT_TRUE(svd(Matrix::Identity(3, 3)).singular_values.isApprox(Vector::Ones(3)));
  const Vector s = svd(diag({1.0, 3.0})).singular_values;
  EXPECT_DOUBLE_EQ(s(0), 3.0);
  EXPECT_DOUBLE_EQ(s(1), 1.0);
}

TEST(Svd, RecoversConstructedSingularValues) {
  std::mt19937_64 gen(11);
  const Matrix m = oracle::with_singular_values(5, {0.9, 0.5}, gen);
  const Vector s = svd(m).singular_values;
  EXPECT_NEAR(s(0), 0.9, 1e-8);
  EXPECT_NEAR(s(1), 0.5, 1e-8);
  for (Index i = 2; i < 5; ++i) EXPECT_NEAR(s(i), 0.0, 1e-8);
}

TEST(Svd, FactorInvariantsOnRandomMatrices) {
  std::mt19937_64 gen(12);
  for (int k = 0; k < 20; ++k) {
    const int rows = 2 + k % 5;
    const int cols = 2 + (k * 3) % 6;
    const Matrix m = oracle::random_gaussian(rows, cols, gen) * (1.0 + k);
    const SvdDecomposition d = svd(m);
    const Index r = d.rank_bound();
    EXPECT_EQ(r, std::min(rows, cols));
    EXPECT_LE((d.u.transpose() * d.u - Matrix::Identity(r, r)).norm(), 1e-8);
    EXPECT_LE((d.v.transpose() * d.v - Matrix::Identity(r, r)).norm(), 1e-8);
    for (Index i = 0; i + 1 < r; ++i) {
      EXPECT_GE(d.singular_values(i), d.singular_values(i + 1));
    }
    EXPECT_GE(d.singular_values.minCoeff(), 0.0);
    EXPECT_LE((d.reconstruct() - m).norm(), 1e-8 * std::max(1.0, m.norm()));
  }
}

TEST(Svd, NonFiniteInputNamesDimensions) {
  Matrix m = Matrix::Zero(3, 4);
  m(1, 2) = std::numeric_limits<double>::quiet_NaN();
  try {
    svd(m);
    FAIL() << "expected NumericalError";
  } catch (const NumericalError& e) {
    EXPECT_NE(std::string(e.what()).find("3x4"), std::string::npos) << e.what();
  }
}

TEST(Svd, TruncatedKeepsLeadingTriplets) {
  const SvdDecomposition d = truncated_svd(diag({1.0, 4.0, 2.0}), 2);
  ASSERT_EQ(d.rank_bound(), 2);
  EXPECT_DOUBLE_EQ(d.singular_values(0), 4.0);
  EXPECT_DOUBLE_EQ(d.singular_values(1), 2.0);
}

TEST(SchattenNorm, DiagonalCases) {
  const Matrix m = diag({1.0, 2.0, 3.0});
  EXPECT_NEAR(schatten_norm(m, 1.0), 6.0, 1e-12);
  EXPECT_NEAR(schatten_norm(m, kInfinity), 3.0, 1e-12);
  EXPECT_NEAR(nuclear_norm(m), 6.0, 1e-12);
  EXPECT_NEAR(spectral_norm(m), 3.0, 1e-12);
  EXPECT_NEAR(schatten_norm(m, 3.0), std::cbrt(36.0), 1e-12);
}

TEST(SchattenNorm, TwoNormIsEntrywiseFrobenius) {
  std::mt19937_64 gen(13);
  for (int k = 0; k < 10; ++k) {
    const Matrix m = oracle::random_gaussian(4, 4, gen);
    EXPECT_NEAR(schatten_norm(m, 2.0), oracle::frobenius(m), 1e-10);
  }
}

TEST(SchattenNorm, RejectsPBelowOne) {
  EXPECT_THROW(schatten_norm(Matrix::Identity(2, 2), 0.5), DomainError);
}

TEST(SchattenNorm, ZeroMatrix) {
  EXPECT_EQ(schatten_norm(Matrix::Zero(3, 3), 1.5), 0.0);
}

TEST(NormOrdering, SpectralFrobeniusRank) {
  std::mt19937_64 gen(14);
  for (int k = 0; k < 30; ++k) {
    const int r = 1 + k % 4;
    const Matrix m = oracle::random_gaussian(6, r, gen) *
                     oracle::random_gaussian(r, 6, gen);
    const double s = spectral_norm(m);
    const double f = frobenius_norm(m);
    EXPECT_LE(s, f * (1 + 1e-12));
    EXPECT_LE(f, numerical_rank(m) * s * (1 + 1e-12));
    EXPECT_EQ(numerical_rank(m), r);
  }
}

TEST(NumericalRank, RelativeThreshold) {
  EXPECT_EQ(numerical_rank(diag({1.0, 1e-9, 1e-11})), 2);
  EXPECT_EQ(numerical_rank(diag({1e6, 1e-3})), 2);
  EXPECT_EQ(numerical_rank(diag({1e6, 1e-5})), 1);
  EXPECT_EQ(numerical_rank(Matrix(Matrix::Zero(3, 3))), 0);
}

TEST(ProjectSpectralBall, ClipsSingularValues) {
  EXPECT_TRUE(project_spectral_ball(diag({2.0, 0.5}), 1.0)
                  .isApprox(diag({1.0, 0.5}), 1e-12));
}

TEST(ProjectSpectralBall, InteriorUnchanged) {
  const Matrix m = diag({0.3, -0.7});
  EXPECT_EQ(project_spectral_ball(m, 1.0), m);
}

TEST(ProjectSpectralBall, Idempotent) {
  std::mt19937_64 gen(15);
  for (int k = 0; k < 20; ++k) {
    const Matrix m = 3.0 * oracle::random_gaussian(5, 5, gen);
    const Matrix p = project_spectral_ball(m, 0.8);
    EXPECT_LE(spectral_norm(p), 0.8 * (1 + 1e-12));
    EXPECT_LE((project_spectral_ball(p, 0.8) - p).norm(), 1e-10);
  }
}

TEST(ProjectSpectralBall, NonexpansiveTowardBallPoints) {
  // ||p(m) - y|| <= ||m - y|| for every y in the convex ball.
  std::mt19937_64 gen(16);
  const Matrix m = 2.0 * oracle::random_gaussian(6, 6, gen);
  const double rho = 1.0;
  const Matrix p = project_spectral_ball(m, rho);
  std::uniform_real_distribution<double> u(0.0, 1.0);
  for (int k = 0; k < 100; ++k) {
    Matrix y = oracle::random_gaussian(6, 6, gen);
    y *= rho * u(gen) / spectral_norm(y);
    EXPECT_LE((p - y).norm(), (m - y).norm() + 1e-12);
  }
}

TEST(ProjectSpectralBall, Preconditions) {
  EXPECT_THROW(project_spectral_ball(Matrix::Zero(2, 3), 1.0), DomainError);
  EXPECT_THROW(project_spectral_ball(Matrix::Zero(2, 2), 0.0), DomainError);
}

TEST(SingularValueThreshold, ShrinksDiagonal) {
  EXPECT_TRUE(singular_value_threshold(diag({3.0, 1.0}), 2.0)
                  .isApprox(diag({1.0, 0.0}), 1e-12));
}

TEST(SingularValueThreshold, ZeroTauIsIdentityMap) {
  std::mt19937_64 gen(17);
  const Matrix m = oracle::random_gaussian(4, 4, gen);
  EXPECT_LE((singular_value_threshold(m, 0.0) - m).norm(), 1e-12);
}

TEST(SingularValueThreshold, NuclearNormOfOutput) {
  std::mt19937_64 gen(18);
  for (int k = 0; k < 20; ++k) {
    const Matrix m = oracle::random_gaussian(5, 5, gen);
    const double tau = 0.1 * k;
    const Vector s = singular_values(m);
    const double expected = (s.array() - tau).cwiseMax(0.0).sum();
    EXPECT_NEAR(nuclear_norm(singular_value_threshold(m, tau)), expected, 1e-10);
  }
}

TEST(SingularValueThreshold, BeatsCoarseGridOracle) {
  // Reduced-size version of the acceptance check (step 0.25).
  std::mt19937_64 gen(19);
  std::uniform_real_distribution<double> u(-2.0, 2.0);
  for (int k = 0; k < 5; ++k) {
    Eigen::Matrix2d m;
    m << u(gen), u(gen), u(gen), u(gen);
    const double tau = 0.3 * (k + 1);
    const Matrix x = singular_value_threshold(m, tau);
    const double f = 0.5 * (x - m).squaredNorm() + tau * nuclear_norm(x);
    EXPECT_LE(f, oracle::prox_grid_minimum(m, tau, -4.0, 4.0, 0.25) + 1e-12);
  }
}

TEST(SingularValueThreshold, NegativeTau) {
  EXPECT_THROW(singular_value_threshold(Matrix::Identity(2, 2), -1.0),
               DomainError);
}

TEST(OrthonormalizeColumns, SignConvention) {
  std::mt19937_64 gen(20);
  const Matrix m = oracle::random_gaussian(6, 3, gen);
  const Matrix q = orthonormalize_columns(m);
  EXPECT_LE((q.transpose() * q - Matrix::Identity(3, 3)).norm(), 1e-12);
  // q^T m is upper triangular with a nonnegative diagonal.
  const Matrix r = q.transpose() * m;
  for (Index j = 0; j < 3; ++j) {
    EXPECT_GE(r(j, j), 0.0);
    for (Index i = j + 1; i < 3; ++i) EXPECT_NEAR(r(i, j), 0.0, 1e-12);
  }
}

TEST(LowRankFactorization, ProductAndCachedSingularValues) {
  std::mt19937_64 gen(21);
  const Matrix b = oracle::random_gaussian(7, 2, gen);
  const Matrix c = oracle::random_gaussian(7, 2, gen);
  const LowRankFactorization f(b, c);
  const Vector direct = singular_values(b * c.transpose());
  EXPECT_EQ(f.rank_bound(), 2);
  EXPECT_NEAR(f.singular_values()(0), direct(0), 1e-10);
  EXPECT_NEAR(f.singular_values()(1), direct(1), 1e-10);
  EXPECT_LE(numerical_rank(f.product()), 2);
}

TEST(LowRankFactorization, BallMembership) {
  std::mt19937_64 gen(22);
  const Matrix a = oracle::with_singular_values(6, {0.8, 0.3}, gen);
  const auto f = LowRankFactorization::from_matrix(a, 2);
  EXPECT_LE((f.product() - a).norm(), 1e-10);
  EXPECT_TRUE(f.within_ball(0.8));
  EXPECT_FALSE(f.within_ball(0.7));
}

TEST(LowRankFactorization, ShapeMismatch) {
  EXPECT_THROW(LowRankFactorization(Matrix::Zero(3, 2), Matrix::Zero(4, 2)),
               DomainError);
}
