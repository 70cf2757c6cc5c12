#include <pybind11/eigen.h>
#include <pybind11/pybind11.h>
#include <pybind11/stl.h>

#include "lowrank_var/config.hpp"
#include "lowrank_var/errors.hpp"
#include "lowrank_var/estimators.hpp"
#include "lowrank_var/experiments.hpp"
#include "lowrank_var/losses_risk.hpp"
#include "lowrank_var/matrix_core.hpp"
#include "lowrank_var/model_selection.hpp"
#include "lowrank_var/var_process.hpp"

namespace py = pybind11;
using namespace lrvar;

namespace {

py::dict fit_to_dict(const FitResult& r) {
  py::dict d;
  d["matrix"] = r.matrix;
  d["selected_rank"] = r.selected_rank;
  d["empirical_risk"] = r.empirical_risk;
  d["iterations"] = r.iterations;
  d["converged"] = r.converged;
  d["objective_trace"] = r.objective_trace;
  d["projected"] = r.projected;
  d["penalty_constant"] = r.penalty_constant;
  d["risk_by_rank"] = r.risk_by_rank;
  if (r.slope) {
    d["c_star"] = r.slope->c_star;
    d["working_c"] = r.slope->working_c;
  }
  if (r.diagonal.size() > 0) d["diagonal"] = r.diagonal;
  d["warnings"] = r.warnings;
  return d;
}

LossFunction make_loss(const std::string& name, double alpha) {
  return loss_from_string(name, alpha);
}

}  // namespace

PYBIND11_MODULE(_core, m) {
  m.doc() = "Low-rank VAR(1) estimation core";

  auto base = py::register_exception<Error>(m, "Error", PyExc_RuntimeError);
  py::register_exception<DomainError>(m, "DomainError", base.ptr());
  py::register_exception<NumericalError>(m, "NumericalError", base.ptr());
  py::register_exception<ContractionError>(m, "ContractionError", base.ptr());
  py::register_exception<SampleTooSmallError>(m, "SampleTooSmallError",
                                              base.ptr());
  py::register_exception<UnsupportedLossError>(m, "UnsupportedLossError",
                                               base.ptr());
  py::register_exception<NoJumpError>(m, "NoJumpError", base.ptr());
  py::register_exception<ConfigError>(m, "ConfigError", base.ptr());
  py::register_exception<DataError>(m, "DataError", base.ptr());

  m.def("spectral_norm", &spectral_norm);
  m.def("nuclear_norm", &nuclear_norm);
  m.def("schatten_norm", &schatten_norm, py::arg("m"), py::arg("p"));
  m.def("numerical_rank", py::overload_cast<const Matrix&>(&numerical_rank));
  m.def("project_spectral_ball", &project_spectral_ball, py::arg("m"),
        py::arg("rho"));
  m.def("singular_value_threshold",
        py::overload_cast<const Matrix&, double>(&singular_value_threshold),
        py::arg("m"), py::arg("tau"));

  m.def(
      "generate_transition",
      [](int dim, int rank, double lam, double bound, std::uint64_t seed) {
        return generate_transition(TransitionSpec{dim, rank, lam, bound}, seed);
      },
      py::arg("dim"), py::arg("rank"), py::arg("lam") = 1.0,
      py::arg("spectral_bound") = 1.0, py::arg("seed") = 0);

  m.def(
      "simulate",
      [](const Matrix& a, Index n, std::uint64_t seed, double sigma,
         double truncation_bound, int burn_in) {
        NoiseSpec noise;
        noise.sigma = sigma;
        noise.truncation_bound = truncation_bound;
        py::gil_scoped_release release;
        return simulate(a, noise, n, seed, burn_in).values();
      },
      py::arg("a"), py::arg("n"), py::arg("seed") = 0, py::arg("sigma") = 1.0,
      py::arg("truncation_bound") = 10.0, py::arg("burn_in") = kDefaultBurnIn,
      "Returns an M x n array; column t is X_{t+1}.");

  m.def("stationary_covariance", &stationary_covariance);
  m.def("fixed_point_covariance", &fixed_point_covariance);

  m.def(
      "empirical_risk",
      [](const Matrix& q, const Matrix& x, const std::string& loss,
         double alpha) {
        return empirical_risk(q, Trajectory(x), make_loss(loss, alpha));
      },
      py::arg("q"), py::arg("x"), py::arg("loss") = "squared-euclidean",
      py::arg("alpha") = 0.5);

  m.def(
      "excess_risk",
      [](const Matrix& fitted, const Matrix& truth, const Matrix& fresh,
         const std::string& loss, double alpha) {
        return excess_risk(fitted, truth, Trajectory(fresh),
                           make_loss(loss, alpha));
      },
      py::arg("fitted"), py::arg("truth"), py::arg("fresh"),
      py::arg("loss") = "squared-euclidean", py::arg("alpha") = 0.5);

  m.def(
      "fit",
      [](const Matrix& x, const std::string& spec_json) {
        const EstimatorSpec spec = parse_estimator_spec(spec_json);
        const Trajectory traj(x);
        FitResult r;
        {
          py::gil_scoped_release release;
          r = fit(traj, spec);
        }
        return fit_to_dict(r);
      },
      py::arg("x"), py::arg("spec_json"),
      "Fits the estimator described by a JSON spec to an M x n trajectory.");

  m.def(
      "fit_pairs",
      [](const Matrix& targets, const Matrix& regressors,
         const std::string& spec_json) {
        const EstimatorSpec spec = parse_estimator_spec(spec_json);
        const LaggedPairs pairs{targets, regressors};
        FitResult r;
        {
          py::gil_scoped_release release;
          r = fit(pairs, spec);
        }
        return fit_to_dict(r);
      },
      py::arg("targets"), py::arg("regressors"), py::arg("spec_json"));

  m.def("penalty_v0", &PenaltyConstants::compute_v0, py::arg("c"), py::arg("d"),
        py::arg("rho"));
  m.def("penalty_delta0", &PenaltyConstants::compute_delta0, py::arg("c"),
        py::arg("rho"));
  m.def(
      "theoretical_penalty",
      [](int r, int m_dim, long n, double c, double d, double rho) {
        return theoretical_penalty(r, m_dim, n, PenaltyConstants(c, d, rho));
      },
      py::arg("r"), py::arg("m_dim"), py::arg("n"), py::arg("c") = 1.0,
      py::arg("d") = std::exp(1.0), py::arg("rho") = 0.99);

  m.def(
      "rank_path",
      [](const std::map<int, double>& risks, int grid_points) {
        const auto shape = sqrt_rank_shape();
        const RankPath path = compute_rank_path(
            risks, shape, default_rank_grid(risks, shape, grid_points));
        py::list entries;
        for (const auto& e : path.entries) {
          entries.append(py::make_tuple(e.c, e.rank, e.objective));
        }
        return entries;
      },
      py::arg("risk_by_rank"), py::arg("grid_points") = kDefaultRankGridPoints,
      "(c, rank, objective) along the default grid for a sqrt(rank) penalty.");

  m.def(
      "select_constant",
      [](const std::vector<std::pair<double, int>>& c_rank) {
        RankPath path;
        for (const auto& [c, r] : c_rank) path.entries.push_back({c, r, 0.0});
        const SlopeSelection s = select_constant(path);
        return py::make_tuple(s.c_star, s.working_c);
      },
      py::arg("path"), "(c_star, working_c) from a list of (c, rank).");

  m.def(
      "run_grid",
      [](const std::string& grid_json) {
        const SimulationGrid grid = parse_simulation_grid(grid_json);
        GridResult result;
        {
          py::gil_scoped_release release;
          result = run_simulation_grid(grid);
        }
        py::list out;
        for (const auto& r : result.records) {
          py::dict d;
          d["r0"] = r.r0;
          d["n"] = r.n;
          d["lambda"] = r.lambda;
          d["estimator"] = r.estimator;
          d["replication"] = r.replication;
          d["seed"] = r.seed;
          d["excess_risk"] = r.excess_risk;
          d["selected_rank"] = r.selected_rank;
          out.append(d);
        }
        return out;
      },
      py::arg("grid_json"), "Per-replication records of a simulation grid.");
}
