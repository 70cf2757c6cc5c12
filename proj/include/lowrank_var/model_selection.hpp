#pragma once

#include <functional>
#include <iosfwd>
#include <map>
#include <vector>

namespace lrvar {

// Penalty shape as a function of rank, e.g. sqrt(r).
using PenaltyShape = std::function<double(int)>;

PenaltyShape sqrt_rank_shape();

// Geometric grid of penalty constants.
struct GridSpec {
  double c_min = 0.0;
  double c_max = 0.0;
  int num_points = 200;
};

std::vector<double> geometric_grid(const GridSpec& grid);

struct RankPathEntry {
  double c = 0.0;
  int rank = 0;
  double objective = 0.0;  // penalized objective of the selected rank
};

struct RankPath {
  std::vector<RankPathEntry> entries;  // c strictly increasing
  GridSpec grid;
};

inline constexpr int kDefaultRankGridPoints = 200;
inline constexpr int kDefaultNuclearGridPoints = 30;

// [range / (shape(r_max) * 1e3), 10 * range] with range = max - min risk.
// A flat risk profile uses range = max(1, |risk|).
GridSpec default_rank_grid(const std::map<int, double>& risk_by_rank,
                           const PenaltyShape& shape,
                           int num_points = kDefaultRankGridPoints);

// argmin_r risk(r) + c * shape(r); objectives within 1e-12 (relative to
// max(1, |objective|)) tie and resolve to the smaller rank.
int select_rank(const std::map<int, double>& risk_by_rank,
                const PenaltyShape& shape, double c,
                double* objective = nullptr);

RankPath compute_rank_path(const std::map<int, double>& risk_by_rank,
                           const PenaltyShape& shape, const GridSpec& grid);

struct SlopeSelection {
  double c_star = 0.0;     // grid value at which the largest drop completes
  double working_c = 0.0;  // 2 * c_star
  int rank_before = 0;
  int rank_after = 0;
};

// Largest drop in selected rank between consecutive grid points (absolute
// rank units; earliest on ties). Throws NoJumpError on a constant path.
SlopeSelection select_constant(const RankPath& path);

// "c,rank,objective" header plus one round-trip-exact row per grid point.
void write_rank_path_csv(const RankPath& path, std::ostream& out);

}  // namespace lrvar
