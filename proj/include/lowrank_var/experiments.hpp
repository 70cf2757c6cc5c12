#pragma once

#include <array>
#include <cstdint>
#include <filesystem>
#include <functional>
#include <string>
#include <vector>

#include "lowrank_var/estimators.hpp"
#include "lowrank_var/var_process.hpp"

namespace lrvar {

// One estimator column of a simulation grid. `oracle` entries are fixed-rank
// fits at each cell's true rank.
struct GridEstimator {
  std::string label;
  EstimatorSpec spec;
  bool oracle = false;
};

struct SimulationGrid {
  int m_dim = 100;
  std::vector<int> ranks;
  std::vector<long> lengths;
  std::vector<double> lambdas;
  int replications = 1;
  std::uint64_t seed_base = 0;
  std::vector<GridEstimator> estimators;
  NoiseSpec noise;
  double spectral_bound = 1.0;
  int burn_in = kDefaultBurnIn;
  int threads = 1;
  bool record_timing = true;  // wall_ms is written as 0 when false
  bool nonconvergence_is_failure = false;

  void validate() const;
};

// Seeds of one replication. All estimators of a replication share them, so
// comparisons inside a cell are paired.
struct ReplicationSeeds {
  std::uint64_t replication;
  std::uint64_t transition;
  std::uint64_t train;
  std::uint64_t fresh;
  std::uint64_t estimator;
};

ReplicationSeeds replication_seeds(std::uint64_t seed_base, int m_dim, int r0,
                                   long n, double lambda, int replication);

struct ReplicationRecord {
  int r0 = 0;
  long n = 0;
  double lambda = 0.0;
  std::string estimator;
  int replication = 0;
  std::uint64_t seed = 0;
  double excess_risk = 0.0;  // NaN marks a failed fit
  int selected_rank = -1;
  double wall_ms = 0.0;
  std::string error;  // not serialized

  bool failed() const;
};

inline constexpr std::array<double, 5> kReportQuantiles{0.05, 0.25, 0.5, 0.75,
                                                        0.95};

struct CellReport {
  int r0 = 0;
  long n = 0;
  double lambda = 0.0;
  std::string estimator;
  std::vector<double> excess_risks;  // successful replications, in order
  double mean = 0.0;
  double sd = 0.0;
  std::array<double, 5> quantiles{};
  int failures = 0;

  int replications() const {
    return static_cast<int>(excess_risks.size()) + failures;
  }
};

struct GridResult {
  std::vector<ReplicationRecord> records;
  std::vector<CellReport> cells;

  bool any_cell_all_failed() const;
};

using ProgressCallback = std::function<void(std::size_t done, std::size_t total)>;

// Runs every (lambda, n, r0, replication) unit on `grid.threads` workers.
// Records come back ordered by (lambda, n, r0, replication, estimator), so
// identical grids give identical results whatever the scheduling.
GridResult run_simulation_grid(const SimulationGrid& grid,
                               const ProgressCallback& progress = {});

// Groups records by (r0, n, lambda, estimator) in first-appearance order.
std::vector<CellReport> aggregate(const std::vector<ReplicationRecord>& records);

// Type-7 (linear interpolation) sample quantile of sorted values.
double sample_quantile(const std::vector<double>& sorted, double q);

// Writes replications.csv, cells.csv, table.csv, summary.json and one
// dispersion_n<n>_lambda<lambda>.csv per (n, lambda).
void emit_reports(const std::vector<ReplicationRecord>& records,
                  const std::vector<CellReport>& cells,
                  const std::filesystem::path& out_dir);

void write_replications_csv(const std::vector<ReplicationRecord>& records,
                            std::ostream& out);
std::vector<ReplicationRecord> read_replications_csv(std::istream& in);

}  // namespace lrvar
