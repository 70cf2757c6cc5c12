#include <gtest/gtest.h>

#include <numbers>
#include <random>

#include "lowrank_var/errors.hpp"
#include "lowrank_var/losses_risk.hpp"
#include "oracles.hpp"

using namespace lrvar;

namespace {

std::vector<LossFunction> lipschitz_losses(int m = 5) {
  std::vector<double> levels;
  for (int i = 0; i < m; ++i) levels.push_back((i + 0.5) / m);
  return {LossFunction::euclidean(), LossFunction::max_norm(),
          LossFunction::quantile(0.5), LossFunction::quantile(0.1),
          LossFunction::quantile(levels)};
}

// Independent sample-size condition: n >= 1 + 16 delta0^2 factor r log(9rn)/V0.
bool condition(double factor, int r, long n, double c, double d, double rho) {
  const double delta0 = 2.0 * c / (1.0 - rho);
  const double v0 = 8.0 * std::exp(1.0) * c * c * d * (2.0 - rho) /
                    std::pow(1.0 - rho, 3);
  return static_cast<double>(n) - 1.0 -
             16.0 * delta0 * delta0 * factor * r *
                 std::log(9.0 * r * static_cast<double>(n)) / v0 >=
         0.0;
}

}  // namespace

TEST(Loss, Values) {
  Vector x(2);
  x << 3.0, -4.0;
  EXPECT_DOUBLE_EQ(LossFunction::squared_euclidean()(x), 25.0);
  EXPECT_DOUBLE_EQ(LossFunction::euclidean()(x), 5.0);
  EXPECT_DOUBLE_EQ(LossFunction::max_norm()(x), 4.0);
  // (0.3 * 3 + 0.7 * 4) / sqrt(2)
  EXPECT_NEAR(LossFunction::quantile(0.3)(x), 3.7 / std::sqrt(2.0), 1e-15);
  for (const auto& l : lipschitz_losses()) {
    EXPECT_EQ(l(Vector::Zero(5)), 0.0) << l.name();
  }
}

TEST(Loss, LipschitzOnRandomPairs) {
  std::mt19937_64 gen(41);
  std::normal_distribution<double> n(0.0, 3.0);
  for (const auto& loss : lipschitz_losses()) {
    EXPECT_TRUE(loss.is_lipschitz());
    for (int k = 0; k < 1000; ++k) {
      Vector x(5), y(5);
      for (int i = 0; i < 5; ++i) {
        x(i) = n(gen);
        y(i) = n(gen);
      }
      EXPECT_LE(std::abs(loss(x) - loss(y)), (x - y).norm() * (1 + 1e-12))
          << loss.name();
    }
  }
  EXPECT_FALSE(LossFunction::squared_euclidean().is_lipschitz());
}

TEST(Loss, SubgradientInequality) {
  // Convexity: l(y) >= l(x) + g(x)^T (y - x).
  std::mt19937_64 gen(42);
  std::normal_distribution<double> n(0.0, 1.0);
  auto losses = lipschitz_losses();
  losses.push_back(LossFunction::squared_euclidean());
  for (const auto& loss : losses) {
    for (int k = 0; k < 200; ++k) {
      Vector x(5), y(5);
      for (int i = 0; i < 5; ++i) {
        x(i) = n(gen);
        y(i) = n(gen);
      }
      EXPECT_GE(loss(y), loss(x) + loss.subgradient(x).dot(y - x) - 1e-12)
          << loss.name();
    }
  }
}

TEST(Loss, FromStringAndValidation) {
  EXPECT_EQ(loss_from_string("max-norm").kind(), LossKind::max_norm);
  EXPECT_EQ(loss_from_string("quantile", 0.2).alpha()[0], 0.2);
  EXPECT_THROW(loss_from_string("huber"), DomainError);
  EXPECT_THROW(LossFunction::quantile(1.0), DomainError);
  EXPECT_THROW(LossFunction::quantile(std::vector<double>{}), DomainError);
  const auto q = LossFunction::quantile(std::vector<double>{0.2, 0.8});
  EXPECT_THROW(q(Vector::Zero(3)), DomainError);
}

TEST(EmpiricalRisk, ZeroOnNoiselessPath) {
  std::mt19937_64 gen(43);
  Matrix a = oracle::random_gaussian(4, 4, gen);
  a *= 0.9 / spectral_norm(a);
  Matrix x(4, 30);
  x.col(0) = oracle::random_gaussian(4, 1, gen);
  for (Index t = 1; t < 30; ++t) x.col(t) = a * x.col(t - 1);
  const Trajectory traj(x);
  for (const auto& loss : lipschitz_losses(4)) {
    EXPECT_NEAR(empirical_risk(a, traj, loss), 0.0, 1e-12);
  }
  EXPECT_NEAR(empirical_risk(a, traj, LossFunction{}), 0.0, 1e-24);
}

TEST(EmpiricalRisk, ZeroMatrixIsMeanSquaredNorm) {
  std::mt19937_64 gen(44);
  const Matrix x = oracle::random_gaussian(3, 10, gen);
  double expected = 0.0;
  for (Index t = 1; t < 10; ++t) expected += x.col(t).squaredNorm();
  EXPECT_NEAR(empirical_risk(Matrix::Zero(3, 3), Trajectory(x), LossFunction{}),
              expected / 9.0, 1e-13);
}

TEST(EmpiricalRisk, ThreePointScalar) {
  Matrix x(1, 3);
  x << 1.0, 2.0, 1.0;
  Matrix q(1, 1);
  q << 0.5;
  EXPECT_DOUBLE_EQ(empirical_risk(q, Trajectory(x), LossFunction{}), 1.125);
}

TEST(EmpiricalRisk, PermutingPairsLeavesValue) {
  std::mt19937_64 gen(45);
  const Matrix x = oracle::random_gaussian(3, 40, gen);
  const LaggedPairs p = LaggedPairs::from_trajectory(Trajectory(x));
  Eigen::PermutationMatrix<Eigen::Dynamic> perm(p.count());
  perm.setIdentity();
  std::shuffle(perm.indices().data(), perm.indices().data() + p.count(), gen);
  const LaggedPairs shuffled{p.targets * perm, p.regressors * perm};
  const Matrix q = oracle::random_gaussian(3, 3, gen);
  for (const auto& loss : lipschitz_losses(3)) {
    EXPECT_NEAR(empirical_risk(q, p, loss), empirical_risk(q, shuffled, loss),
                1e-12);
  }
}

TEST(EmpiricalRisk, DimensionMismatch) {
  EXPECT_THROW(empirical_risk(Matrix::Zero(2, 2), Trajectory(Matrix::Zero(3, 5)),
                              LossFunction{}),
               DomainError);
}

TEST(ExcessRisk, ZeroAtTruthAndPositiveOnAverage) {
  const Matrix a = generate_transition(TransitionSpec{5, 2, 1.0, 1.0}, 3);
  std::mt19937_64 gen(46);
  const Matrix e = 0.05 * oracle::random_gaussian(5, 5, gen);
  NoiseSpec noise;
  double total = 0.0;
  for (std::uint64_t s = 0; s < 100; ++s) {
    const Trajectory fresh = simulate(a, noise, 200, 1000 + s, 100);
    EXPECT_EQ(excess_risk(a, a, fresh, LossFunction{}), 0.0);
    total += excess_risk(a + e, a, fresh, LossFunction{});
  }
  EXPECT_GT(total / 100.0, 0.0);
}

TEST(PenaltyConstants, DerivedValues) {
  const PenaltyConstants k(1.0, 1.0, 0.5);
  EXPECT_NEAR(k.v0(), 96.0 * std::numbers::e, 4e-16 * 96.0 * std::numbers::e);
  EXPECT_NEAR(k.v0(), 260.955, 1e-3);
  EXPECT_DOUBLE_EQ(k.delta0(), 4.0);
  EXPECT_EQ(k.v0(), PenaltyConstants::compute_v0(k.c(), k.d(), k.rho()));
  EXPECT_EQ(k.delta0(), PenaltyConstants::compute_delta0(k.c(), k.rho()));
  const auto d = PenaltyConstants::defaults();
  EXPECT_EQ(d.c(), 1.0);
  EXPECT_EQ(d.d(), std::numbers::e);
  EXPECT_EQ(d.rho(), 0.99);
}

TEST(PenaltyConstants, Validation) {
  EXPECT_THROW(PenaltyConstants(0.0, 1.0, 0.5), DomainError);
  EXPECT_THROW(PenaltyConstants(1.0, 0.5, 0.5), DomainError);
  EXPECT_THROW(PenaltyConstants(1.0, 1.0, 1.0), DomainError);
  EXPECT_THROW(PenaltyConstants(1.0, 1.0, 0.0), DomainError);
}

TEST(TheoreticalPenalty, ShapeInRank) {
  const PenaltyConstants k(1.0, 1.0, 0.5);
  for (long n : {50L, 1000L, 100000L}) {
    const double p1 = theoretical_penalty(1, 20, n, k);
    double prev = p1;
    for (int r = 2; r <= 50; ++r) {
      const double p = theoretical_penalty(r, 20, n, k);
      const double nn = static_cast<double>(n);
      EXPECT_NEAR(p / p1, std::sqrt(r * std::log(9.0 * r * nn) / std::log(9.0 * nn)),
                  1e-12);
      EXPECT_GT(p, prev);
      prev = p;
    }
  }
}

TEST(TheoreticalPenalty, LinearInDimension) {
  const auto k = PenaltyConstants::defaults();
  EXPECT_NEAR(theoretical_penalty(3, 40, 500, k), 2.0 * theoretical_penalty(3, 20, 500, k),
              1e-9);
}

TEST(TheoreticalPenalty, ExplicitValue) {
  const PenaltyConstants k(1.0, 1.0, 0.5);
  const double v0 = 96.0 * std::exp(1.0);
  const double expected = 2.0 * 1.5 * std::sqrt(4.0 * v0 * 100.0 * 2.0 * std::log(18.0 * 500.0) / 499.0);
  EXPECT_NEAR(theoretical_penalty(2, 10, 500, k), expected, 1e-10 * expected);
}

TEST(MaxAdmissibleRank, BruteForceBoundary) {
  const double c = 1.0, d = 1.0, rho = 0.5;
  const PenaltyConstants k(c, d, rho);
  for (long n : {5L, 8L, 20L, 100L, 1000L}) {
    for (int m : {1, 5, 50}) {
      const int r = max_admissible_rank(m, n, k);
      EXPECT_TRUE(condition(1.0, r, n, c, d, rho));
      if (r < m) {
        EXPECT_FALSE(condition(1.0, r + 1, n, c, d, rho));
      }
    }
  }
}

TEST(MaxAdmissibleRank, LargeSampleGivesM) {
  EXPECT_EQ(max_admissible_rank(30, 10000000, PenaltyConstants(1.0, 1.0, 0.5)), 30);
  EXPECT_EQ(max_admissible_rank(100, 1000, PenaltyConstants::defaults()), 100);
}

TEST(MaxAdmissibleRank, MonotoneInLength) {
  const PenaltyConstants k(2.0, 1.0, 0.3);
  int prev = 0;
  for (long n = 10; n < 3000; n += 37) {
    int r = 0;
    try {
      r = max_admissible_rank(40, n, k);
    } catch (const SampleTooSmallError&) {
      r = 0;
    }
    EXPECT_GE(r, prev);
    prev = r;
  }
  EXPECT_GT(prev, 0);
}

TEST(MaxAdmissibleRank, SampleTooSmallNamesMinimalLength) {
  const double c = 1.0, d = 1.0, rho = 0.5;
  long minimal = 2;
  while (!condition(1.0, 1, minimal, c, d, rho)) ++minimal;
  try {
    max_admissible_rank(10, 2, PenaltyConstants(c, d, rho));
    FAIL() << "expected SampleTooSmallError";
  } catch (const SampleTooSmallError& e) {
    EXPECT_EQ(e.minimal_length(), minimal);
    EXPECT_NE(std::string(e.what()).find(std::to_string(minimal)), std::string::npos);
  }
}

TEST(Assumption4, Cases) {
  const PenaltyConstants k(1.0, 1.0, 0.5);
  EXPECT_FALSE(check_assumption4(10, 100, 2, k));
  EXPECT_TRUE(check_assumption4(10, 100, 100000000, k));
  for (long n : {10L, 100L, 1000L, 5000L}) {
    for (int r : {1, 3, 10}) {
      EXPECT_EQ(check_assumption4(r, 20, n, k), condition(20.0, r, n, 1.0, 1.0, 0.5));
    }
  }
}
