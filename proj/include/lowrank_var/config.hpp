#pragma once

#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>
#include <string_view>

#include "lowrank_var/estimators.hpp"
#include "lowrank_var/experiments.hpp"
#include "lowrank_var/forecast.hpp"

namespace lrvar {

// JSON configuration documents. Every object rejects unknown keys with a
// ConfigError naming the key and its location.

EstimatorSpec parse_estimator_spec(std::string_view json_text);
std::string estimator_spec_to_json(const EstimatorSpec& spec);

SimulationGrid parse_simulation_grid(std::string_view json_text);
SimulationGrid load_simulation_grid(const std::filesystem::path& path);

// Relative dataset paths are resolved against `base_dir`.
ForecastTask parse_forecast_task(std::string_view json_text,
                                 const std::filesystem::path& base_dir = {});
ForecastTask load_forecast_task(const std::filesystem::path& path);

struct FitReportContext {
  std::string data_source;
  std::optional<std::uint64_t> seed;
  double wall_ms = 0.0;
};

// Structured report of a single fit: spec, selected rank, risks, iteration
// counts, timing, seed and deviation flags.
std::string fit_report_json(const FitResult& result, const EstimatorSpec& spec,
                            const FitReportContext& context);

}  // namespace lrvar
