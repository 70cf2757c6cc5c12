#include "lowrank_var/config.hpp"

#include <algorithm>
#include <initializer_list>
#include <sstream>

#include "json.hpp"
#include "lowrank_var/csv_io.hpp"
#include "lowrank_var/errors.hpp"

namespace lrvar {

namespace {

using json = nlohmann::json;

json parse_document(std::string_view text) {
  try {
    return json::parse(text.begin(), text.end());
  } catch (const json::parse_error& e) {
    throw ConfigError(std::string("invalid JSON: ") + e.what());
  }
}

void require_object(const json& j, const std::string& where) {
  if (!j.is_object()) throw ConfigError(where + ": expected an object");
}

void check_keys(const json& j, const std::string& where,
                std::initializer_list<std::string_view> allowed) {
  require_object(j, where);
  for (const auto& [key, value] : j.items()) {
    if (std::find(allowed.begin(), allowed.end(), key) == allowed.end()) {
      throw ConfigError(where + ": unknown key '" + key + "'");
    }
  }
}

template <typename T>
T get(const json& j, const std::string& key, const std::string& where) {
  if (!j.contains(key)) throw ConfigError(where + ": missing key '" + key + "'");
  try {
    return j.at(key).get<T>();
  } catch (const json::exception&) {
    throw ConfigError(where + ": key '" + key + "' has the wrong type");
  }
}

template <typename T>
T get_or(const json& j, const std::string& key, const std::string& where,
         T fallback) {
  return j.contains(key) ? get<T>(j, key, where) : fallback;
}

OptimizerOptions parse_optimizer(const json& j, const std::string& where) {
  check_keys(j, where,
             {"max_outer_iters", "tolerance", "restarts", "step_policy",
              "step_scale", "seed"});
  OptimizerOptions o;
  o.max_outer_iters = get_or(j, "max_outer_iters", where, o.max_outer_iters);
  o.tolerance = get_or(j, "tolerance", where, o.tolerance);
  o.restarts = get_or(j, "restarts", where, o.restarts);
  o.step_scale = get_or(j, "step_scale", where, o.step_scale);
  o.seed = get_or<std::uint64_t>(j, "seed", where, o.seed);
  const auto policy = get_or<std::string>(j, "step_policy", where, "inverse-sqrt");
  if (policy == "inverse-sqrt") {
    o.step_policy = StepSizePolicy::inverse_sqrt;
  } else if (policy == "constant") {
    o.step_policy = StepSizePolicy::constant;
  } else {
    throw ConfigError(where + ": unknown step_policy '" + policy + "'");
  }
  return o;
}

LossFunction parse_loss(const json& j, const std::string& where) {
  if (j.is_string()) {
    try {
      return loss_from_string(j.get<std::string>());
    } catch (const Error& e) {
      throw ConfigError(where + ": " + e.what());
    }
  }
  check_keys(j, where, {"kind", "alpha"});
  const auto kind = get<std::string>(j, "kind", where);
  try {
    if (kind == "quantile" && j.contains("alpha") && j["alpha"].is_array()) {
      return LossFunction::quantile(get<std::vector<double>>(j, "alpha", where));
    }
    if (j.contains("alpha") && kind != "quantile") {
      throw ConfigError(where + ": alpha only applies to the quantile loss");
    }
    return loss_from_string(kind, get_or(j, "alpha", where, 0.5));
  } catch (const ConfigError&) {
    throw;
  } catch (const Error& e) {
    throw ConfigError(where + ": " + e.what());
  }
}

RankPenalty parse_rank_penalty(const json& j, const std::string& where) {
  require_object(j, where);
  const auto mode = get<std::string>(j, "mode", where);
  if (mode == "slope-heuristic") {
    check_keys(j, where, {"mode", "grid_points"});
    return SlopeHeuristic{get_or(j, "grid_points", where, kDefaultRankGridPoints)};
  }
  if (mode == "practical") {
    check_keys(j, where, {"mode", "c"});
    return PracticalPenalty{get<double>(j, "c", where)};
  }
  if (mode == "theoretical") {
    check_keys(j, where, {"mode", "c", "d", "rho"});
    const auto d = PenaltyConstants::defaults();
    try {
      return TheoreticalPenalty{PenaltyConstants(get_or(j, "c", where, d.c()),
                                                 get_or(j, "d", where, d.d()),
                                                 get_or(j, "rho", where, d.rho()))};
    } catch (const DomainError& e) {
      throw ConfigError(where + ": " + e.what());
    }
  }
  throw ConfigError(where + ": unknown penalty mode '" + mode + "'");
}

NuclearPenalty parse_nuclear_penalty(const json& j, const std::string& where) {
  require_object(j, where);
  const auto mode = get<std::string>(j, "mode", where);
  if (mode == "slope-heuristic") {
    check_keys(j, where, {"mode", "grid_points"});
    return SlopeHeuristic{
        get_or(j, "grid_points", where, kDefaultNuclearGridPoints)};
  }
  if (mode == "fixed") {
    check_keys(j, where, {"mode", "c"});
    return NuclearFixed{get<double>(j, "c", where)};
  }
  throw ConfigError(where + ": unknown nuclear penalty mode '" + mode + "'");
}

// Kinds outside EstimatorSpec that grids and forecasts accept.
enum class Extra { none, oracle, constant_trend, independent_ar1 };

struct ParsedEstimator {
  EstimatorSpec spec;
  Extra extra = Extra::none;
};

ParsedEstimator parse_estimator(const json& j, const std::string& where,
                                bool allow_oracle, bool allow_baselines) {
  check_keys(j, where,
             {"kind", "label", "rank", "rho", "loss", "penalty", "max_rank",
              "inner", "optimizer"});
  ParsedEstimator out;
  EstimatorSpec& spec = out.spec;
  const auto kind = get<std::string>(j, "kind", where);
  spec.label = get_or<std::string>(j, "label", where, kind);
  spec.rho = get_or(j, "rho", where, 1.0);
  if (j.contains("loss")) spec.loss = parse_loss(j["loss"], where + ".loss");
  if (j.contains("optimizer")) {
    spec.optimizer = parse_optimizer(j["optimizer"], where + ".optimizer");
  }
  auto forbid = [&](std::initializer_list<const char*> keys) {
    for (const char* k : keys) {
      if (j.contains(k)) {
        throw ConfigError(where + ": key '" + k + "' does not apply to kind '" +
                          kind + "'");
      }
    }
  };

  if (kind == "full-rank") {
    forbid({"rank", "penalty", "max_rank", "inner"});
    spec.kind = FullRank{};
  } else if (kind == "fixed-rank") {
    forbid({"penalty", "max_rank", "inner"});
    spec.kind = FixedRank{get<int>(j, "rank", where)};
  } else if (kind == "oracle" && allow_oracle) {
    forbid({"rank", "penalty", "max_rank", "inner"});
    out.extra = Extra::oracle;
    spec.kind = FixedRank{1};  // rank set per cell
  } else if (kind == "rank-penalized") {
    forbid({"rank", "inner"});
    RankPenalized p;
    if (j.contains("penalty")) {
      p.penalty = parse_rank_penalty(j["penalty"], where + ".penalty");
    }
    if (j.contains("max_rank")) p.max_rank = get<int>(j, "max_rank", where);
    spec.kind = p;
  } else if (kind == "nuclear") {
    forbid({"rank", "max_rank", "inner"});
    Nuclear n;
    if (j.contains("penalty")) {
      n.penalty = parse_nuclear_penalty(j["penalty"], where + ".penalty");
    }
    spec.kind = n;
  } else if (kind == "d-plus-a") {
    forbid({"rank", "penalty", "max_rank"});
    EstimatorSpec inner;
    if (j.contains("inner")) {
      inner = parse_estimator(j["inner"], where + ".inner", false, false).spec;
    } else {
      inner.kind = RankPenalized{};
      inner.rho = 1.0 + spec.rho;
      inner.loss = spec.loss;
      inner.optimizer = spec.optimizer;
      inner.label = "rank-penalized";
    }
    spec.kind = DPlusA{std::make_shared<const EstimatorSpec>(std::move(inner))};
  } else if ((kind == "constant-trend" || kind == "independent-ar1") &&
             allow_baselines) {
    forbid({"rank", "penalty", "max_rank", "inner", "loss", "optimizer", "rho"});
    out.extra =
        kind == "constant-trend" ? Extra::constant_trend : Extra::independent_ar1;
  } else {
    throw ConfigError(where + ": unknown estimator kind '" + kind + "'");
  }
  return out;
}

json rank_penalty_json(const RankPenalty& p) {
  if (const auto* t = std::get_if<TheoreticalPenalty>(&p)) {
    return {{"mode", "theoretical"},
            {"c", t->constants.c()},
            {"d", t->constants.d()},
            {"rho", t->constants.rho()}};
  }
  if (const auto* c = std::get_if<PracticalPenalty>(&p)) {
    return {{"mode", "practical"}, {"c", c->c}};
  }
  return {{"mode", "slope-heuristic"},
          {"grid_points", std::get<SlopeHeuristic>(p).grid_points}};
}

json spec_json(const EstimatorSpec& spec) {
  json j;
  j["kind"] = spec.kind_name();
  j["label"] = spec.label.empty() ? spec.kind_name() : spec.label;
  j["rho"] = spec.rho;
  json loss{{"kind", spec.loss.name()}};
  if (spec.loss.kind() == LossKind::quantile) {
    if (spec.loss.alpha().size() == 1) {
      loss["alpha"] = spec.loss.alpha()[0];
    } else {
      loss["alpha"] = spec.loss.alpha();
    }
  }
  j["loss"] = loss;
  const auto& o = spec.optimizer;
  j["optimizer"] = {
      {"max_outer_iters", o.max_outer_iters},
      {"tolerance", o.tolerance},
      {"restarts", o.restarts},
      {"step_policy", o.step_policy == StepSizePolicy::constant ? "constant"
                                                                : "inverse-sqrt"},
      {"step_scale", o.step_scale},
      {"seed", o.seed}};
  if (const auto* f = std::get_if<FixedRank>(&spec.kind)) {
    j["rank"] = f->rank;
  } else if (const auto* p = std::get_if<RankPenalized>(&spec.kind)) {
    j["penalty"] = rank_penalty_json(p->penalty);
    if (p->max_rank) j["max_rank"] = *p->max_rank;
  } else if (const auto* n = std::get_if<Nuclear>(&spec.kind)) {
    if (const auto* c = std::get_if<NuclearFixed>(&n->penalty)) {
      j["penalty"] = {{"mode", "fixed"}, {"c", c->c}};
    } else {
      j["penalty"] = {
          {"mode", "slope-heuristic"},
          {"grid_points", std::get<SlopeHeuristic>(n->penalty).grid_points}};
    }
  } else if (const auto* d = std::get_if<DPlusA>(&spec.kind)) {
    if (d->inner) j["inner"] = spec_json(*d->inner);
  }
  return j;
}

std::string read_file(const std::filesystem::path& path) {
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

}  // namespace

EstimatorSpec parse_estimator_spec(std::string_view json_text) {
  return parse_estimator(parse_document(json_text), "estimator", false, false)
      .spec;
}

std::string estimator_spec_to_json(const EstimatorSpec& spec) {
  return spec_json(spec).dump(2);
}

SimulationGrid parse_simulation_grid(std::string_view json_text) {
  const json j = parse_document(json_text);
  const std::string where = "grid";
  check_keys(j, where,
             {"m_dim", "ranks", "lengths", "lambdas", "replications",
              "seed_base", "estimators", "noise", "spectral_bound", "burn_in",
              "threads", "record_timing", "nonconvergence_is_failure"});
  SimulationGrid g;
  g.m_dim = get<int>(j, "m_dim", where);
  g.ranks = get<std::vector<int>>(j, "ranks", where);
  g.lengths = get<std::vector<long>>(j, "lengths", where);
  g.lambdas = get<std::vector<double>>(j, "lambdas", where);
  g.replications = get<int>(j, "replications", where);
  g.seed_base = get<std::uint64_t>(j, "seed_base", where);
  g.spectral_bound = get_or(j, "spectral_bound", where, g.spectral_bound);
  g.burn_in = get_or(j, "burn_in", where, g.burn_in);
  g.threads = get_or(j, "threads", where, g.threads);
  g.record_timing = get_or(j, "record_timing", where, g.record_timing);
  g.nonconvergence_is_failure =
      get_or(j, "nonconvergence_is_failure", where, g.nonconvergence_is_failure);
  if (j.contains("noise")) {
    const json& nz = j["noise"];
    check_keys(nz, "grid.noise", {"family", "sigma", "truncation_bound"});
    g.noise.sigma = get_or(nz, "sigma", "grid.noise", g.noise.sigma);
    g.noise.truncation_bound =
        get_or(nz, "truncation_bound", "grid.noise", g.noise.truncation_bound);
    if (nz.contains("family")) {
      try {
        g.noise.family = noise_family_from_string(
            get<std::string>(nz, "family", "grid.noise"));
      } catch (const DomainError& e) {
        throw ConfigError(std::string("grid.noise: ") + e.what());
      }
    }
  }
  const json& ests = j.contains("estimators") ? j["estimators"] : json();
  if (!ests.is_array()) throw ConfigError("grid: 'estimators' must be an array");
  for (std::size_t i = 0; i < ests.size(); ++i) {
    const std::string w = "grid.estimators[" + std::to_string(i) + "]";
    auto parsed = parse_estimator(ests[i], w, true, false);
    g.estimators.push_back(GridEstimator{parsed.spec.label,
                                         std::move(parsed.spec),
                                         parsed.extra == Extra::oracle});
  }
  try {
    g.validate();
  } catch (const DomainError& e) {
    throw ConfigError(e.what());
  }
  return g;
}

SimulationGrid load_simulation_grid(const std::filesystem::path& path) {
  return parse_simulation_grid(read_file(path));
}

ForecastTask parse_forecast_task(std::string_view json_text,
                                 const std::filesystem::path& base_dir) {
  const json j = parse_document(json_text);
  const std::string where = "forecast";
  check_keys(j, where,
             {"dataset", "target_columns", "train_end", "horizon", "mode",
              "estimators"});
  ForecastTask t;
  std::filesystem::path data = get<std::string>(j, "dataset", where);
  t.dataset = data.is_relative() && !base_dir.empty() ? base_dir / data : data;
  t.target_columns = get<std::vector<std::string>>(j, "target_columns", where);
  if (!j.contains("train_end")) throw ConfigError("forecast: missing key 'train_end'");
  if (j["train_end"].is_string()) {
    t.train_end = j["train_end"].get<std::string>();
  } else if (j["train_end"].is_number_integer()) {
    t.train_end = j["train_end"].get<long>();
  } else {
    throw ConfigError("forecast: 'train_end' must be a row count or a date");
  }
  t.horizon = get_or(j, "horizon", where, 0L);
  const auto mode = get_or<std::string>(j, "mode", where, "rolling");
  if (mode == "rolling") {
    t.mode = ForecastMode::rolling;
  } else if (mode == "iterated") {
    t.mode = ForecastMode::iterated;
  } else {
    throw ConfigError("forecast: unknown mode '" + mode + "'");
  }
  const json& ests = j.contains("estimators") ? j["estimators"] : json();
  if (!ests.is_array()) {
    throw ConfigError("forecast: 'estimators' must be an array");
  }
  for (std::size_t i = 0; i < ests.size(); ++i) {
    const std::string w = "forecast.estimators[" + std::to_string(i) + "]";
    auto parsed = parse_estimator(ests[i], w, false, true);
    ForecastModel m;
    m.label = parsed.spec.label;
    m.spec = std::move(parsed.spec);
    m.kind = parsed.extra == Extra::constant_trend
                 ? ForecastModel::Kind::constant_trend
             : parsed.extra == Extra::independent_ar1
                 ? ForecastModel::Kind::independent_ar1
                 : ForecastModel::Kind::estimator;
    t.models.push_back(std::move(m));
  }
  try {
    t.validate();
  } catch (const DomainError& e) {
    throw ConfigError(e.what());
  }
  return t;
}

ForecastTask load_forecast_task(const std::filesystem::path& path) {
  return parse_forecast_task(read_file(path), path.parent_path());
}

std::string fit_report_json(const FitResult& result, const EstimatorSpec& spec,
                            const FitReportContext& context) {
  json j;
  j["estimator"] = spec_json(spec);
  j["data"] = context.data_source;
  j["dimension"] = result.matrix.rows();
  j["selected_rank"] = result.selected_rank;
  j["empirical_risk"] = result.empirical_risk;
  j["iterations"] = result.iterations;
  j["converged"] = result.converged;
  j["objective_trace_length"] = result.objective_trace.size();
  if (!result.objective_trace.empty()) {
    j["final_objective"] = result.objective_trace.back();
  }
  j["spectral_norm"] = spectral_norm(result.matrix);
  if (result.penalty_constant) j["penalty_constant"] = *result.penalty_constant;
  if (!result.risk_by_rank.empty()) j["risk_by_rank"] = result.risk_by_rank;
  if (result.slope) {
    j["slope"] = {{"c_star", result.slope->c_star},
                  {"working_c", result.slope->working_c},
                  {"rank_before", result.slope->rank_before},
                  {"rank_after", result.slope->rank_after}};
  }
  if (result.diagonal.size() > 0) {
    j["diagonal"] = std::vector<double>(result.diagonal.data(),
                                        result.diagonal.data() +
                                            result.diagonal.size());
  }
  if (context.seed) j["seed"] = *context.seed;
  j["wall_ms"] = context.wall_ms;
  j["deviations"] = {
      {"projected_onto_spectral_ball", result.projected},
      {"nominal_penalty_constants",
       spec.loss.is_quadratic() &&
           std::holds_alternative<RankPenalized>(spec.kind) &&
           std::holds_alternative<TheoreticalPenalty>(
               std::get<RankPenalized>(spec.kind).penalty)}};
  j["warnings"] = result.warnings;
  return j.dump(2);
}

}  // namespace lrvar
