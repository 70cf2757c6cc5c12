#include "lowrank_var/experiments.hpp"

#include <algorithm>
#include <atomic>
#include <chrono>
#include <cmath>
#include <limits>
#include <map>
#include <mutex>
#include <set>
#include <sstream>
#include <thread>
#include <tuple>

#include "json.hpp"
#include "lowrank_var/csv_io.hpp"
#include "lowrank_var/errors.hpp"
#include "lowrank_var/losses_risk.hpp"
#include "lowrank_var/rng.hpp"

namespace lrvar {

namespace {

constexpr double kNaN = std::numeric_limits<double>::quiet_NaN();
constexpr const char* kReplicationHeader =
    "r0,n,lambda,estimator,replication,seed,excess_risk,selected_rank,wall_ms";

struct Unit {
  double lambda;
  long n;
  int r0;
  int replication;
};

std::vector<ReplicationRecord> run_unit(const SimulationGrid& grid,
                                        const Unit& u) {
  const ReplicationSeeds seeds = replication_seeds(
      grid.seed_base, grid.m_dim, u.r0, u.n, u.lambda, u.replication);
  std::vector<ReplicationRecord> out;
  out.reserve(grid.estimators.size());
  auto base_record = [&](const GridEstimator& e) {
    ReplicationRecord r;
    r.r0 = u.r0;
    r.n = u.n;
    r.lambda = u.lambda;
    r.estimator = e.label;
    r.replication = u.replication;
    r.seed = seeds.replication;
    return r;
  };

  Matrix a;
  Trajectory train;
  Trajectory fresh;
  try {
    a = generate_transition(
        TransitionSpec{grid.m_dim, u.r0, u.lambda, grid.spectral_bound},
        seeds.transition);
    train = simulate(a, grid.noise, u.n, seeds.train, grid.burn_in);
    fresh = simulate(a, grid.noise, u.n, seeds.fresh, grid.burn_in);
  } catch (const std::exception& ex) {
    for (const auto& e : grid.estimators) {
      auto r = base_record(e);
      r.excess_risk = kNaN;
      r.error = ex.what();
      out.push_back(std::move(r));
    }
    return out;
  }
  const LaggedPairs pairs = LaggedPairs::from_trajectory(train);

  for (const auto& e : grid.estimators) {
    auto r = base_record(e);
    EstimatorSpec spec = e.spec;
    if (e.oracle) spec.kind = FixedRank{u.r0};
    spec.optimizer.seed = derive_seed(seeds.estimator, {spec.optimizer.seed});
    const auto start = std::chrono::steady_clock::now();
    try {
      const FitResult fitted = fit(pairs, spec);
      if (grid.nonconvergence_is_failure && !fitted.converged) {
        r.excess_risk = kNaN;
        r.error = "did not converge";
      } else {
        r.excess_risk = excess_risk(fitted.matrix, a, fresh, spec.loss);
        r.selected_rank = fitted.selected_rank;
      }
    } catch (const std::exception& ex) {
      r.excess_risk = kNaN;
      r.selected_rank = -1;
      r.error = ex.what();
    }
    if (r.failed()) r.selected_rank = -1;
    if (grid.record_timing) {
      r.wall_ms = std::chrono::duration<double, std::milli>(
                      std::chrono::steady_clock::now() - start)
                      .count();
    }
    out.push_back(std::move(r));
  }
  return out;
}

std::string csv_field(const std::string& s) {
  if (s.find_first_of(",\"\n") == std::string::npos) return s;
  std::string q = "\"";
  for (char c : s) {
    if (c == '"') q += '"';
    q += c;
  }
  return q + "\"";
}

long parse_long(const std::string& s, const std::string& what, int line) {
  try {
    std::size_t pos = 0;
    const long v = std::stol(s, &pos);
    if (pos == s.size()) return v;
  } catch (const std::exception&) {
  }
  throw DataError("replications csv line " + std::to_string(line) + ": bad " +
                  what + " '" + s + "'");
}

}  // namespace

void SimulationGrid::validate() const {
  if (m_dim < 1) throw DomainError("grid: m_dim must be >= 1");
  if (ranks.empty() || lengths.empty() || lambdas.empty()) {
    throw DomainError("grid: ranks, lengths and lambdas must be nonempty");
  }
  for (int r : ranks) {
    if (r < 1 || r > m_dim) {
      throw DomainError("grid: rank " + std::to_string(r) + " outside 1.." +
                        std::to_string(m_dim));
    }
  }
  for (long n : lengths) {
    if (n < 2) throw DomainError("grid: trajectory lengths must be >= 2");
  }
  for (double l : lambdas) {
    if (!(l > 0.0) || !std::isfinite(l)) {
      throw DomainError("grid: lambdas must be positive");
    }
  }
  if (replications < 1) throw DomainError("grid: replications must be >= 1");
  if (estimators.empty()) throw DomainError("grid: no estimators");
  std::set<std::string> labels;
  for (const auto& e : estimators) {
    if (!labels.insert(e.label).second) {
      throw DomainError("grid: duplicate estimator label '" + e.label + "'");
    }
    e.spec.validate(m_dim);
  }
  noise.validate();
  if (!(spectral_bound > 0.0)) {
    throw DomainError("grid: spectral_bound must be positive");
  }
  if (burn_in < 0) throw DomainError("grid: burn_in must be >= 0");
}

ReplicationSeeds replication_seeds(std::uint64_t seed_base, int m_dim, int r0,
                                   long n, double lambda, int replication) {
  ReplicationSeeds s{};
  s.replication = derive_seed(
      seed_base, {static_cast<std::uint64_t>(m_dim),
                  static_cast<std::uint64_t>(r0), static_cast<std::uint64_t>(n),
                  double_bits(lambda), static_cast<std::uint64_t>(replication)});
  s.transition = derive_seed(s.replication, {1});
  s.train = derive_seed(s.replication, {2});
  s.fresh = derive_seed(s.replication, {3});
  s.estimator = derive_seed(s.replication, {4});
  return s;
}

bool ReplicationRecord::failed() const { return !std::isfinite(excess_risk); }

bool GridResult::any_cell_all_failed() const {
  return std::any_of(cells.begin(), cells.end(), [](const CellReport& c) {
    return c.excess_risks.empty() && c.failures > 0;
  });
}

GridResult run_simulation_grid(const SimulationGrid& grid,
                               const ProgressCallback& progress) {
  grid.validate();
  std::vector<Unit> units;
  for (double lambda : grid.lambdas) {
    for (long n : grid.lengths) {
      for (int r0 : grid.ranks) {
        for (int rep = 0; rep < grid.replications; ++rep) {
          units.push_back({lambda, n, r0, rep});
        }
      }
    }
  }
  std::vector<std::vector<ReplicationRecord>> results(units.size());
  std::atomic<std::size_t> next{0};
  std::atomic<std::size_t> done{0};
  std::mutex progress_mutex;
  auto worker = [&] {
    for (std::size_t i = next++; i < units.size(); i = next++) {
      results[i] = run_unit(grid, units[i]);
      const std::size_t d = ++done;
      if (progress) {
        std::lock_guard lock(progress_mutex);
        progress(d, units.size());
      }
    }
  };
  unsigned threads = grid.threads > 0 ? static_cast<unsigned>(grid.threads)
                                      : std::thread::hardware_concurrency();
  threads = std::clamp<unsigned>(threads, 1,
                                 static_cast<unsigned>(std::max<std::size_t>(
                                     units.size(), 1)));
  if (threads == 1) {
    worker();
  } else {
    std::vector<std::thread> pool;
    for (unsigned t = 0; t < threads; ++t) pool.emplace_back(worker);
    for (auto& th : pool) th.join();
  }

  GridResult out;
  for (auto& r : results) {
    for (auto& rec : r) out.records.push_back(std::move(rec));
  }
  out.cells = aggregate(out.records);
  return out;
}

double sample_quantile(const std::vector<double>& sorted, double q) {
  if (sorted.empty()) return kNaN;
  const double h = (static_cast<double>(sorted.size()) - 1.0) * q;
  const auto lo = static_cast<std::size_t>(std::floor(h));
  const std::size_t hi = std::min(lo + 1, sorted.size() - 1);
  return sorted[lo] + (h - static_cast<double>(lo)) * (sorted[hi] - sorted[lo]);
}

std::vector<CellReport> aggregate(const std::vector<ReplicationRecord>& records) {
  std::vector<CellReport> cells;
  std::map<std::tuple<int, long, std::uint64_t, std::string>, std::size_t> index;
  for (const auto& r : records) {
    const auto key = std::make_tuple(r.r0, r.n, double_bits(r.lambda), r.estimator);
    auto it = index.find(key);
    if (it == index.end()) {
      CellReport c;
      c.r0 = r.r0;
      c.n = r.n;
      c.lambda = r.lambda;
      c.estimator = r.estimator;
      it = index.emplace(key, cells.size()).first;
      cells.push_back(std::move(c));
    }
    CellReport& c = cells[it->second];
    if (r.failed()) {
      ++c.failures;
    } else {
      c.excess_risks.push_back(r.excess_risk);
    }
  }
  for (auto& c : cells) {
    const auto& v = c.excess_risks;
    if (v.empty()) {
      c.mean = c.sd = kNaN;
      c.quantiles.fill(kNaN);
      continue;
    }
    double sum = 0.0;
    for (double x : v) sum += x;
    c.mean = sum / static_cast<double>(v.size());
    if (v.size() < 2) {
      c.sd = kNaN;
    } else {
      double ss = 0.0;
      for (double x : v) ss += (x - c.mean) * (x - c.mean);
      c.sd = std::sqrt(ss / static_cast<double>(v.size() - 1));
    }
    std::vector<double> sorted = v;
    std::sort(sorted.begin(), sorted.end());
    for (std::size_t k = 0; k < kReportQuantiles.size(); ++k) {
      c.quantiles[k] = sample_quantile(sorted, kReportQuantiles[k]);
    }
  }
  return cells;
}

void write_replications_csv(const std::vector<ReplicationRecord>& records,
                            std::ostream& out) {
  out << kReplicationHeader << '\n';
  for (const auto& r : records) {
    out << r.r0 << ',' << r.n << ',' << format_double(r.lambda) << ','
        << csv_field(r.estimator) << ',' << r.replication << ',' << r.seed << ','
        << format_double(r.failed() ? kNaN : r.excess_risk) << ','
        << r.selected_rank << ',' << format_double(r.wall_ms) << '\n';
  }
}

std::vector<ReplicationRecord> read_replications_csv(std::istream& in) {
  std::string line;
  if (!std::getline(in, line) || trim(line) != kReplicationHeader) {
    throw DataError(std::string("replications csv: expected header '") +
                    kReplicationHeader + "'");
  }
  std::vector<ReplicationRecord> out;
  int line_no = 1;
  while (std::getline(in, line)) {
    ++line_no;
    if (trim(line).empty()) continue;
    const auto f = split_csv_line(line);
    if (f.size() != 9) {
      throw DataError("replications csv line " + std::to_string(line_no) +
                      ": expected 9 fields, got " + std::to_string(f.size()));
    }
    auto num = [&](std::size_t i, const char* what) {
      const auto v = parse_double(trim(f[i]));
      if (!v) {
        throw DataError("replications csv line " + std::to_string(line_no) +
                        ": bad " + what + " '" + f[i] + "'");
      }
      return *v;
    };
    ReplicationRecord r;
    r.r0 = static_cast<int>(parse_long(f[0], "r0", line_no));
    r.n = parse_long(f[1], "n", line_no);
    r.lambda = num(2, "lambda");
    r.estimator = f[3];
    r.replication = static_cast<int>(parse_long(f[4], "replication", line_no));
    try {
      r.seed = std::stoull(f[5]);
    } catch (const std::exception&) {
      throw DataError("replications csv line " + std::to_string(line_no) +
                      ": bad seed '" + f[5] + "'");
    }
    r.excess_risk = num(6, "excess_risk");
    r.selected_rank = static_cast<int>(parse_long(f[7], "selected_rank", line_no));
    r.wall_ms = num(8, "wall_ms");
    out.push_back(std::move(r));
  }
  return out;
}

void emit_reports(const std::vector<ReplicationRecord>& records,
                  const std::vector<CellReport>& cells,
                  const std::filesystem::path& out_dir) {
  {
    auto out = open_output(out_dir / "replications.csv");
    write_replications_csv(records, out);
  }
  {
    auto out = open_output(out_dir / "cells.csv");
    out << "r0,n,lambda,estimator,replications,failures,mean,sd,q05,q25,q50,"
           "q75,q95\n";
    for (const auto& c : cells) {
      out << c.r0 << ',' << c.n << ',' << format_double(c.lambda) << ','
          << csv_field(c.estimator) << ',' << c.replications() << ','
          << c.failures << ',' << format_double(c.mean) << ','
          << format_double(c.sd);
      for (double q : c.quantiles) out << ',' << format_double(q);
      out << '\n';
    }
  }
  {
    // One row per (lambda, n, estimator), one column per r0: the layout of
    // the published mean-excess-risk tables.
    std::set<int> ranks;
    for (const auto& c : cells) ranks.insert(c.r0);
    std::vector<std::tuple<double, long, std::string>> rows;
    std::map<std::tuple<std::uint64_t, long, std::string, int>, double> means;
    for (const auto& c : cells) {
      auto row = std::make_tuple(c.lambda, c.n, c.estimator);
      if (std::find(rows.begin(), rows.end(), row) == rows.end()) {
        rows.push_back(row);
      }
      means[{double_bits(c.lambda), c.n, c.estimator, c.r0}] = c.mean;
    }
    auto out = open_output(out_dir / "table.csv");
    out << "lambda,n,estimator";
    for (int r : ranks) out << ",r0=" << r;
    out << '\n';
    for (const auto& [lambda, n, est] : rows) {
      out << format_double(lambda) << ',' << n << ',' << csv_field(est);
      for (int r : ranks) {
        const auto it = means.find({double_bits(lambda), n, est, r});
        out << ',' << format_double(it == means.end() ? kNaN : it->second);
      }
      out << '\n';
    }
  }
  {
    // Dispersion data, one file per (n, lambda) panel.
    std::vector<std::pair<long, double>> panels;
    for (const auto& r : records) {
      const auto p = std::make_pair(r.n, r.lambda);
      if (std::find(panels.begin(), panels.end(), p) == panels.end()) {
        panels.push_back(p);
      }
    }
    for (const auto& [n, lambda] : panels) {
      auto out = open_output(out_dir / ("dispersion_n" + std::to_string(n) +
                                        "_lambda" + format_double(lambda) +
                                        ".csv"));
      out << "r0,estimator,replication,excess_risk\n";
      for (const auto& r : records) {
        if (r.n != n || double_bits(r.lambda) != double_bits(lambda) ||
            r.failed()) {
          continue;
        }
        out << r.r0 << ',' << csv_field(r.estimator) << ',' << r.replication
            << ',' << format_double(r.excess_risk) << '\n';
      }
    }
  }
  {
    nlohmann::json cells_json = nlohmann::json::array();
    for (const auto& c : cells) {
      nlohmann::json q;
      const char* names[] = {"q05", "q25", "q50", "q75", "q95"};
      for (std::size_t k = 0; k < c.quantiles.size(); ++k) {
        q[names[k]] = c.quantiles[k];
      }
      cells_json.push_back({{"r0", c.r0},
                            {"n", c.n},
                            {"lambda", c.lambda},
                            {"estimator", c.estimator},
                            {"replications", c.replications()},
                            {"failures", c.failures},
                            {"mean", c.mean},
                            {"sd", c.sd},
                            {"quantiles", q}});
    }
    auto out = open_output(out_dir / "summary.json");
    out << nlohmann::json{{"cells", cells_json}}.dump(2) << '\n';
  }
}

}  // namespace lrvar
