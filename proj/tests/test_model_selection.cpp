#include <gtest/gtest.h>

#include <random>
#include <sstream>

#include "lowrank_var/csv_io.hpp"
#include "lowrank_var/errors.hpp"
#include "lowrank_var/model_selection.hpp"
#include "oracles.hpp"

using namespace lrvar;

namespace {

RankPath path_of(std::initializer_list<int> ranks) {
  RankPath p;
  double c = 1.0;
  for (int r : ranks) {
    p.entries.push_back({c, r, 0.0});
    c *= 2.0;
  }
  return p;
}

std::map<int, double> random_convex_profile(std::mt19937_64& gen, int m) {
  // Decreasing risks with decreasing gains, like a rank sweep.
  std::uniform_real_distribution<double> u(0.0, 1.0);
  std::vector<double> gains;
  for (int r = 1; r < m; ++r) gains.push_back(u(gen) * u(gen));
  std::sort(gains.rbegin(), gains.rend());
  std::map<int, double> risks;
  double v = 10.0 + u(gen);
  for (int r = 1; r <= m; ++r) {
    risks[r] = v;
    if (r < m) v -= gains[static_cast<size_t>(r - 1)];
  }
  return risks;
}

}  // namespace

TEST(GeometricGrid, EndpointsAndRatio) {
  const auto g = geometric_grid({0.01, 100.0, 5});
  ASSERT_EQ(g.size(), 5u);
  EXPECT_EQ(g.front(), 0.01);
  EXPECT_EQ(g.back(), 100.0);
  for (size_t i = 1; i < g.size(); ++i) EXPECT_NEAR(g[i] / g[i - 1], 10.0, 1e-12);
  EXPECT_THROW(geometric_grid({0.0, 1.0, 5}), DomainError);
  EXPECT_THROW(geometric_grid({1.0, 0.5, 5}), DomainError);
  EXPECT_THROW(geometric_grid({1.0, 2.0, 0}), DomainError);
}

TEST(DefaultRankGrid, BracketsRiskRange) {
  const std::map<int, double> risks{{1, 5.0}, {2, 3.0}, {4, 2.0}};
  const GridSpec g = default_rank_grid(risks, sqrt_rank_shape());
  EXPECT_EQ(g.num_points, 200);
  EXPECT_NEAR(g.c_min, 3.0 / (2.0 * 1e3), 1e-15);
  EXPECT_NEAR(g.c_max, 30.0, 1e-12);
}

TEST(SelectRank, ConstantRiskSelectsRankOne) {
  std::map<int, double> risks;
  for (int r = 1; r <= 10; ++r) risks[r] = 3.0;
  for (double c : {1e-6, 1e-2, 1.0, 1e3}) {
    EXPECT_EQ(select_rank(risks, sqrt_rank_shape(), c), 1);
  }
}

TEST(SelectRank, ZeroPenaltyPicksBestRisk) {
  std::map<int, double> risks;
  for (int r = 1; r <= 10; ++r) risks[r] = -r;
  EXPECT_EQ(select_rank(risks, sqrt_rank_shape(), 0.0), 10);
}

TEST(SelectRank, NearTiesGoToSmallerRank) {
  const std::map<int, double> risks{{1, 1.0}, {2, 1.0 - 1e-13}, {3, 0.5}};
  EXPECT_EQ(select_rank(risks, [](int) { return 0.0; }, 0.0), 3);
  const std::map<int, double> tied{{1, 1.0}, {2, 1.0 - 1e-13}};
  EXPECT_EQ(select_rank(tied, [](int) { return 0.0; }, 0.0), 1);
}

TEST(SelectRank, Errors) {
  EXPECT_THROW(select_rank({}, sqrt_rank_shape(), 1.0), DomainError);
  EXPECT_THROW(select_rank({{1, std::nan("")}}, sqrt_rank_shape(), 1.0),
               DomainError);
}

TEST(RankPath, MatchesBruteForceArgmin) {
  const std::map<int, double> risks{{1, 10.0}, {2, 5.0}, {4, 2.5}, {8, 1.25}};
  const GridSpec grid{1e-3, 1e2, 1000};
  const RankPath path = compute_rank_path(risks, sqrt_rank_shape(), grid);
  ASSERT_EQ(path.entries.size(), 1000u);
  for (const auto& e : path.entries) {
    EXPECT_EQ(e.rank, oracle::argmin_rank(risks, e.c)) << "c = " << e.c;
  }
  EXPECT_EQ(path.entries.front().rank, 8);
  EXPECT_EQ(path.entries.back().rank, 1);
}

TEST(RankPath, MonotoneOnRandomProfiles) {
  std::mt19937_64 gen(51);
  for (int k = 0; k < 200; ++k) {
    const auto risks = random_convex_profile(gen, 1 + k % 30);
    const auto path = compute_rank_path(
        risks, sqrt_rank_shape(), default_rank_grid(risks, sqrt_rank_shape()));
    for (size_t i = 1; i < path.entries.size(); ++i) {
      EXPECT_GT(path.entries[i].c, path.entries[i - 1].c);
      EXPECT_LE(path.entries[i].rank, path.entries[i - 1].rank);
    }
  }
}

TEST(RankPath, InvariantUnderCommonRescaling) {
  std::mt19937_64 gen(52);
  const auto risks = random_convex_profile(gen, 12);
  const GridSpec grid = default_rank_grid(risks, sqrt_rank_shape());
  const auto base = compute_rank_path(risks, sqrt_rank_shape(), grid);
  const double k = 7.5;
  std::map<int, double> scaled;
  for (const auto& [r, v] : risks) scaled[r] = k * v;
  const PenaltyShape scaled_shape = [k](int r) { return k * std::sqrt(double(r)); };
  const auto other = compute_rank_path(scaled, scaled_shape, grid);
  for (size_t i = 0; i < base.entries.size(); ++i) {
    EXPECT_EQ(base.entries[i].rank, other.entries[i].rank);
  }
}

TEST(SelectConstant, LargestDrop) {
  const RankPath p = path_of({10, 10, 10, 3, 3, 1});
  const SlopeSelection s = select_constant(p);
  EXPECT_EQ(s.c_star, p.entries[3].c);
  EXPECT_EQ(s.working_c, 2.0 * s.c_star);
  EXPECT_EQ(s.rank_before, 10);
  EXPECT_EQ(s.rank_after, 3);
}

TEST(SelectConstant, EarliestOfEqualDrops) {
  const RankPath p = path_of({9, 6, 6, 3, 1});
  const SlopeSelection s = select_constant(p);
  EXPECT_EQ(s.c_star, p.entries[1].c);
}

TEST(SelectConstant, NoJump) {
  EXPECT_THROW(select_constant(path_of({4, 4, 4})), NoJumpError);
  EXPECT_THROW(select_constant(path_of({4})), NoJumpError);
}

TEST(SelectConstant, PureFunctionOfPath) {
  const RankPath p = path_of({7, 5, 5, 2, 1});
  const auto a = select_constant(p);
  const auto b = select_constant(RankPath(p));
  EXPECT_EQ(a.c_star, b.c_star);
  EXPECT_EQ(a.rank_before, b.rank_before);
}

TEST(RankPathCsv, RoundTripExact) {
  const std::map<int, double> risks{{1, 3.0}, {2, 2.0 / 3.0}, {3, 0.1}};
  const auto path = compute_rank_path(risks, sqrt_rank_shape(), {0.001, 10.0, 7});
  std::stringstream ss;
  write_rank_path_csv(path, ss);
  std::string line;
  std::getline(ss, line);
  EXPECT_EQ(line, "c,rank,objective");
  for (const auto& e : path.entries) {
    ASSERT_TRUE(std::getline(ss, line));
    const auto f = split_csv_line(line);
    ASSERT_EQ(f.size(), 3u);
    EXPECT_EQ(*parse_double(f[0]), e.c);
    EXPECT_EQ(std::stoi(f[1]), e.rank);
    EXPECT_EQ(*parse_double(f[2]), e.objective);
  }
}
