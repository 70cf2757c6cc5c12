// lrvar: simulation grids, single fits, rank paths and forecasts from the
// command line. Exit codes: 0 ok, 1 other error, 2 config/usage error,
// 3 data error, 4 a grid cell had every replication fail.

#include <chrono>
#include <fstream>
#include <iostream>
#include <sstream>

#include "CLI11.hpp"
#include "lowrank_var/config.hpp"
#include "lowrank_var/csv_io.hpp"
#include "lowrank_var/errors.hpp"
#include "lowrank_var/experiments.hpp"
#include "lowrank_var/forecast.hpp"

namespace {

using namespace lrvar;

constexpr int kExitOther = 1;
constexpr int kExitConfig = 2;
constexpr int kExitData = 3;
constexpr int kExitAllFailed = 4;

std::string slurp(const std::string& path) {
  std::ifstream in;
  try {
    in = open_input(path);
  } catch (const DataError& e) {
    throw ConfigError(e.what());
  }
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

EstimatorSpec load_spec(const std::string& file, const std::string& inline_json) {
  if (!file.empty() && !inline_json.empty()) {
    throw ConfigError("give either --estimator or --spec, not both");
  }
  if (!file.empty()) return parse_estimator_spec(slurp(file));
  if (!inline_json.empty()) return parse_estimator_spec(inline_json);
  EstimatorSpec spec;
  spec.kind = RankPenalized{};
  spec.label = "rank-penalized";
  return spec;
}

// Trajectory CSVs ("t,x1,..") and dataset CSVs (optional date column) both
// load as an M x n matrix.
Trajectory load_series(const std::string& path) {
  auto in = open_input(path);
  std::string header;
  std::getline(in, header);
  in.seekg(0);
  const auto first = split_csv_line(header);
  if (!first.empty() && trim(first.front()) == "t") {
    return read_trajectory_csv(in);
  }
  return Trajectory(read_dataset_csv(in).values);
}

void write_matrix_csv(const Matrix& m, const std::string& path) {
  auto out = open_output(path);
  for (Index i = 0; i < m.rows(); ++i) {
    for (Index j = 0; j < m.cols(); ++j) {
      out << (j ? "," : "") << format_double(m(i, j));
    }
    out << '\n';
  }
}

void print_cells(const std::vector<CellReport>& cells) {
  std::cout << "r0\tn\tlambda\testimator\tmean\tsd\tfailures\n";
  for (const auto& c : cells) {
    std::cout << c.r0 << '\t' << c.n << '\t' << format_double(c.lambda) << '\t'
              << c.estimator << '\t' << format_double(c.mean) << '\t'
              << format_double(c.sd) << '\t' << c.failures << '/'
              << c.replications() << '\n';
  }
}

int run_simulate(const std::string& config, const std::string& out_dir,
                 int threads, bool no_timing, bool quiet) {
  SimulationGrid grid = load_simulation_grid(config);
  if (threads > 0) grid.threads = threads;
  if (no_timing) grid.record_timing = false;
  ProgressCallback progress;
  if (!quiet) {
    progress = [](std::size_t done, std::size_t total) {
      std::cerr << "\rreplications " << done << '/' << total << std::flush;
      if (done == total) std::cerr << '\n';
    };
  }
  const GridResult result = run_simulation_grid(grid, progress);
  emit_reports(result.records, result.cells, out_dir);
  for (const auto& r : result.records) {
    if (r.failed()) {
      std::cerr << "failed: r0=" << r.r0 << " n=" << r.n
                << " lambda=" << format_double(r.lambda) << ' ' << r.estimator
                << " rep " << r.replication << ": " << r.error << '\n';
    }
  }
  if (!quiet) print_cells(result.cells);
  return result.any_cell_all_failed() ? kExitAllFailed : 0;
}

int run_generate(int dim, int rank, double lambda, long length,
                 std::uint64_t seed, double sigma, double bound, int burn_in,
                 const std::string& out, const std::string& matrix_out) {
  const Matrix a = generate_transition(TransitionSpec{dim, rank, lambda, bound},
                                       derive_seed(seed, {1}));
  NoiseSpec noise;
  noise.sigma = sigma;
  const Trajectory traj = simulate(a, noise, length, derive_seed(seed, {2}), burn_in);
  auto file = open_output(out);
  write_trajectory_csv(traj, file);
  if (!matrix_out.empty()) write_matrix_csv(a, matrix_out);
  return 0;
}

int run_fit(const std::string& data, const std::string& est_file,
            const std::string& inline_json, const std::string& out,
            const std::string& matrix_out) {
  const EstimatorSpec spec = load_spec(est_file, inline_json);
  const Trajectory traj = load_series(data);
  const auto start = std::chrono::steady_clock::now();
  const FitResult result = fit(traj, spec);
  const double ms = std::chrono::duration<double, std::milli>(
                        std::chrono::steady_clock::now() - start)
                        .count();
  const std::string report =
      fit_report_json(result, spec, {data, spec.optimizer.seed, ms});
  if (out.empty()) {
    std::cout << report << '\n';
  } else {
    open_output(out) << report << '\n';
  }
  if (!matrix_out.empty()) write_matrix_csv(result.matrix, matrix_out);
  for (const auto& w : result.warnings) std::cerr << "warning: " << w << '\n';
  return 0;
}

int run_rank_path(const std::string& data, const std::string& est_file,
                  const std::string& inline_json, const std::string& out,
                  int grid_points) {
  EstimatorSpec spec = load_spec(est_file, inline_json);
  const Trajectory traj = load_series(data);
  const LaggedPairs pairs = LaggedPairs::from_trajectory(traj);
  RankPath path;
  if (std::holds_alternative<Nuclear>(spec.kind)) {
    path = nuclear_rank_path(
        pairs, grid_points > 0 ? grid_points : kDefaultNuclearGridPoints,
        spec.optimizer);
  } else if (auto* p = std::get_if<RankPenalized>(&spec.kind)) {
    p->penalty =
        SlopeHeuristic{grid_points > 0 ? grid_points : kDefaultRankGridPoints};
    path = *fit(pairs, spec).rank_path;
  } else {
    throw ConfigError("rank-path needs a rank-penalized or nuclear estimator");
  }
  if (out.empty()) {
    write_rank_path_csv(path, std::cout);
  } else {
    auto file = open_output(out);
    write_rank_path_csv(path, file);
  }
  try {
    const SlopeSelection s = select_constant(path);
    std::cerr << "largest drop " << s.rank_before << " -> " << s.rank_after
              << " at C* = " << format_double(s.c_star)
              << ", working C = " << format_double(s.working_c) << '\n';
  } catch (const NoJumpError& e) {
    std::cerr << "warning: " << e.what() << '\n';
  }
  return 0;
}

int run_forecast(const std::string& config, const std::string& out_dir,
                 const std::string& mode) {
  ForecastTask task = load_forecast_task(config);
  if (mode == "rolling") {
    task.mode = ForecastMode::rolling;
  } else if (mode == "iterated") {
    task.mode = ForecastMode::iterated;
  }
  const DataSet data = load_dataset(task.dataset);
  const ForecastReport report = run_forecast_task(task, data);
  write_forecast_report(report, out_dir);
  for (const auto& w : report.warnings) std::cerr << "warning: " << w << '\n';
  std::cout << "model\ttarget\tmse\n";
  for (const auto& s : report.scores) {
    std::cout << s.model << '\t' << s.target << '\t' << format_double(s.mse)
              << '\n';
  }
  return 0;
}

int run_report(const std::vector<std::string>& inputs, const std::string& out_dir) {
  std::vector<ReplicationRecord> records;
  for (const auto& path : inputs) {
    auto in = open_input(path);
    auto part = read_replications_csv(in);
    records.insert(records.end(), part.begin(), part.end());
  }
  const auto cells = aggregate(records);
  emit_reports(records, cells, out_dir);
  print_cells(cells);
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Low-rank VAR(1) estimation and experiments"};
  app.require_subcommand(1);

  std::string config, out, data, est_file, inline_json, matrix_out, mode;
  int threads = 0;
  bool no_timing = false;
  bool quiet = false;

  auto* sim = app.add_subcommand("simulate", "Run a simulation grid");
  sim->add_option("config", config, "Grid config (JSON)")->required();
  sim->add_option("-o,--out", out, "Output directory")->required();
  sim->add_option("-j,--threads", threads, "Worker threads (overrides config)");
  sim->add_flag("--no-timing", no_timing, "Write wall_ms as 0");
  sim->add_flag("-q,--quiet", quiet, "No progress or summary output");

  int dim = 10, rank = 2;
  double lambda = 1.0, sigma = 1.0, bound = 1.0;
  long length = 1000;
  std::uint64_t seed = 0;
  int burn_in = kDefaultBurnIn;
  auto* gen = app.add_subcommand("generate", "Simulate one trajectory");
  gen->add_option("--dim", dim, "Dimension M")->default_val(10);
  gen->add_option("--rank", rank, "Rank of A")->default_val(2);
  gen->add_option("--lambda", lambda, "Beta(lambda,1) singular-value law")
      ->default_val(1.0);
  gen->add_option("-n,--length", length, "Observations kept")->default_val(1000);
  gen->add_option("--seed", seed, "Seed")->default_val(0);
  gen->add_option("--sigma", sigma, "Noise scale")->default_val(1.0);
  gen->add_option("--spectral-bound", bound, "Spectral norm bound of A")
      ->default_val(1.0);
  gen->add_option("--burn-in", burn_in, "Discarded leading states")
      ->default_val(kDefaultBurnIn);
  gen->add_option("-o,--out", out, "Trajectory CSV")->required();
  gen->add_option("--matrix-out", matrix_out, "Write A as CSV");

  auto* fit_cmd = app.add_subcommand("fit", "Fit one estimator to one series");
  fit_cmd->add_option("data", data, "Trajectory or dataset CSV")->required();
  fit_cmd->add_option("-e,--estimator", est_file, "Estimator spec (JSON file)");
  fit_cmd->add_option("--spec", inline_json, "Estimator spec (inline JSON)");
  fit_cmd->add_option("-o,--out", out, "Report JSON (default stdout)");
  fit_cmd->add_option("--matrix-out", matrix_out, "Write the fitted matrix");

  int grid_points = 0;
  auto* path_cmd = app.add_subcommand("rank-path", "Emit the slope-heuristic path");
  path_cmd->add_option("data", data, "Trajectory or dataset CSV")->required();
  path_cmd->add_option("-e,--estimator", est_file, "Estimator spec (JSON file)");
  path_cmd->add_option("--spec", inline_json, "Estimator spec (inline JSON)");
  path_cmd->add_option("--grid-points", grid_points, "Grid size");
  path_cmd->add_option("-o,--out", out, "Path CSV (default stdout)");

  auto* fc = app.add_subcommand("forecast", "Run a forecasting comparison");
  fc->add_option("config", config, "Forecast config (JSON)")->required();
  fc->add_option("-o,--out", out, "Output directory")->required();
  fc->add_option("--mode", mode, "Override the forecast mode")
      ->check(CLI::IsMember({"rolling", "iterated"}));

  std::vector<std::string> inputs;
  auto* rep = app.add_subcommand("report", "Re-aggregate replication CSVs");
  rep->add_option("inputs", inputs, "replications.csv files")->required();
  rep->add_option("-o,--out", out, "Output directory")->required();

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    app.exit(e);
    return kExitConfig;
  }

  try {
    if (*sim) return run_simulate(config, out, threads, no_timing, quiet);
    if (*gen) {
      return run_generate(dim, rank, lambda, length, seed, sigma, bound, burn_in,
                          out, matrix_out);
    }
    if (*fit_cmd) return run_fit(data, est_file, inline_json, out, matrix_out);
    if (*path_cmd) {
      return run_rank_path(data, est_file, inline_json, out, grid_points);
    }
    if (*fc) return run_forecast(config, out, mode);
    if (*rep) return run_report(inputs, out);
  } catch (const ConfigError& e) {
    std::cerr << "config error: " << e.what() << '\n';
    return kExitConfig;
  } catch (const DataError& e) {
    std::cerr << "data error: " << e.what() << '\n';
    return kExitData;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << '\n';
    return kExitOther;
  }
  return kExitOther;
}
