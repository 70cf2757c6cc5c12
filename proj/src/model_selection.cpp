#include "lowrank_var/model_selection.hpp"

#include <algorithm>
#include <cmath>
#include <ostream>

#include "lowrank_var/csv_io.hpp"
#include "lowrank_var/errors.hpp"

namespace lrvar {

PenaltyShape sqrt_rank_shape() {
  return [](int r) { return std::sqrt(static_cast<double>(r)); };
}

std::vector<double> geometric_grid(const GridSpec& grid) {
  if (grid.num_points < 1) throw DomainError("grid: no points requested");
  if (!(grid.c_min > 0.0) || !(grid.c_max >= grid.c_min) ||
      !std::isfinite(grid.c_max)) {
    throw DomainError("grid: need 0 < c_min <= c_max < inf");
  }
  std::vector<double> out(static_cast<size_t>(grid.num_points));
  if (grid.num_points == 1) {
    out[0] = grid.c_min;
    return out;
  }
  const double log_lo = std::log(grid.c_min);
  const double step =
      (std::log(grid.c_max) - log_lo) / (grid.num_points - 1);
  for (int i = 0; i < grid.num_points; ++i) {
    out[static_cast<size_t>(i)] = std::exp(log_lo + step * i);
  }
  out.front() = grid.c_min;
  out.back() = grid.c_max;
  return out;
}

GridSpec default_rank_grid(const std::map<int, double>& risks,
                           const PenaltyShape& shape, int num_points) {
  if (risks.empty()) throw DomainError("default_rank_grid: no risks");
  double lo = risks.begin()->second, hi = lo;
  for (const auto& [r, v] : risks) {
    lo = std::min(lo, v);
    hi = std::max(hi, v);
  }
  double range = hi - lo;
  if (!(range > 0.0)) range = std::max(1.0, std::abs(hi));
  const double top_shape = shape(risks.rbegin()->first);
  return {range / (top_shape * 1e3), range * 10.0, num_points};
}

int select_rank(const std::map<int, double>& risks, const PenaltyShape& shape,
                double c, double* objective) {
  if (risks.empty()) throw DomainError("select_rank: empty candidate set");
  int best_rank = 0;
  double best = 0.0;
  for (const auto& [r, risk] : risks) {
    if (!std::isfinite(risk)) {
      throw DomainError("select_rank: non-finite risk at rank " +
                        std::to_string(r));
    }
    const double value = risk + c * shape(r);
    if (best_rank == 0 ||
        value < best - 1e-12 * std::max(1.0, std::abs(best))) {
      best_rank = r;
      best = value;
    }
  }
  if (objective) *objective = best;
  return best_rank;
}

RankPath compute_rank_path(const std::map<int, double>& risks,
                           const PenaltyShape& shape, const GridSpec& grid) {
  RankPath path;
  path.grid = grid;
  for (double c : geometric_grid(grid)) {
    RankPathEntry e;
    e.c = c;
    e.rank = select_rank(risks, shape, c, &e.objective);
    path.entries.push_back(e);
  }
  return path;
}

SlopeSelection select_constant(const RankPath& path) {
  if (path.entries.size() < 2) {
    throw NoJumpError("select_constant: rank path needs at least two points");
  }
  int best_drop = 0;
  size_t at = 0;
  for (size_t i = 1; i < path.entries.size(); ++i) {
    const int drop = path.entries[i - 1].rank - path.entries[i].rank;
    if (drop > best_drop) {
      best_drop = drop;
      at = i;
    }
  }
  if (best_drop == 0) {
    throw NoJumpError(
        "select_constant: selected rank never decreases along the grid; "
        "widen the range of penalty constants");
  }
  SlopeSelection s;
  s.c_star = path.entries[at].c;
  s.working_c = 2.0 * s.c_star;
  s.rank_before = path.entries[at - 1].rank;
  s.rank_after = path.entries[at].rank;
  return s;
}

void write_rank_path_csv(const RankPath& path, std::ostream& out) {
  out << "c,rank,objective\n";
  for (const auto& e : path.entries) {
    out << format_double(e.c) << ',' << e.rank << ','
        << format_double(e.objective) << '\n';
  }
}

}  // namespace lrvar
