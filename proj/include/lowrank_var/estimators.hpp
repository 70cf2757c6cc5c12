#pragma once

#include <cstdint>
#include <memory>
#include <optional>
#include <string>
#include <variant>
#include <vector>

#include "lowrank_var/losses_risk.hpp"
#include "lowrank_var/matrix_core.hpp"
#include "lowrank_var/model_selection.hpp"
#include "lowrank_var/var_process.hpp"

namespace lrvar {

enum class StepSizePolicy { inverse_sqrt, constant };

struct OptimizerOptions {
  int max_outer_iters = 500;
  double tolerance = 1e-8;  // relative objective decrease
  int restarts = 2;         // random initializations on top of the spectral one
  StepSizePolicy step_policy = StepSizePolicy::inverse_sqrt;
  double step_scale = 1.0;  // subgradient methods only
  std::uint64_t seed = 0;

  void validate() const;
};

struct FullRank {};

struct FixedRank {
  int rank = 1;
};

struct TheoreticalPenalty {
  PenaltyConstants constants = PenaltyConstants::defaults();
};

struct PracticalPenalty {
  double c = 0.0;  // R_n(Q) + c * sqrt(rank(Q))
};

struct SlopeHeuristic {
  int grid_points = kDefaultRankGridPoints;
};

using RankPenalty =
    std::variant<TheoreticalPenalty, PracticalPenalty, SlopeHeuristic>;

struct RankPenalized {
  RankPenalty penalty = SlopeHeuristic{};
  std::optional<int> max_rank;  // caps the candidate ranks
};

struct NuclearFixed {
  double c = 0.0;  // R_n(Q) + c * ||Q||_*
};

using NuclearPenalty = std::variant<NuclearFixed, SlopeHeuristic>;

struct Nuclear {
  NuclearPenalty penalty = SlopeHeuristic{kDefaultNuclearGridPoints};
};

struct EstimatorSpec;

struct DPlusA {
  std::shared_ptr<const EstimatorSpec> inner;
};

using EstimatorKind =
    std::variant<FullRank, FixedRank, RankPenalized, Nuclear, DPlusA>;

struct EstimatorSpec {
  EstimatorKind kind = FullRank{};
  double rho = 1.0;  // spectral-norm bound on the fitted matrix
  LossFunction loss;
  OptimizerOptions optimizer;
  std::string label;

  void validate(Index dimension) const;
  std::string kind_name() const;
};

struct FitResult {
  Matrix matrix;
  int selected_rank = 0;  // numerical rank of `matrix` (low-rank part for D+A)
  double empirical_risk = 0.0;
  int iterations = 0;
  bool converged = false;
  std::vector<double> objective_trace;  // accepted iterates only

  // The solve ignored the spectral constraint and a final projection onto
  // the rho-ball changed the answer.
  bool projected = false;
  std::optional<double> penalty_constant;
  std::vector<double> risk_by_rank;  // index r - 1; penalized fits only
  std::optional<RankPath> rank_path;
  std::optional<SlopeSelection> slope;
  Vector diagonal;  // D of a D+A fit
  std::vector<std::string> warnings;
};

FitResult fit_full_rank(const LaggedPairs& data, double rho,
                        const LossFunction& loss,
                        const OptimizerOptions& opts = {});

FitResult fit_fixed_rank(const LaggedPairs& data, int rank, double rho,
                         const LossFunction& loss,
                         const OptimizerOptions& opts = {});

FitResult fit_rank_penalized(const LaggedPairs& data,
                             const RankPenalized& penalty, double rho,
                             const LossFunction& loss,
                             const OptimizerOptions& opts = {});

// Quadratic loss only; UnsupportedLossError otherwise.
FitResult fit_nuclear(const LaggedPairs& data, const NuclearPenalty& penalty,
                      double rho, const LossFunction& loss,
                      const OptimizerOptions& opts = {});

// Per-coordinate AR(1) coefficients clipped to [-1, 1]; a coordinate with no
// lagged energy gets 0 and a warning appended to `warnings`.
Vector fit_diagonal_ar(const LaggedPairs& data,
                       std::vector<std::string>* warnings = nullptr);

FitResult fit_d_plus_a(const LaggedPairs& data, const EstimatorSpec& inner,
                       const OptimizerOptions& opts = {});

// Dispatches on spec.kind.
FitResult fit(const LaggedPairs& data, const EstimatorSpec& spec);
FitResult fit(const Trajectory& traj, const EstimatorSpec& spec);

Vector predict_one_step(const Matrix& matrix, const Vector& x_last);

// Rank of the nuclear-norm solution along a grid of constants, each solve
// warm-started from its neighbour. Used to calibrate C_nuc.
RankPath nuclear_rank_path(const LaggedPairs& data, int grid_points,
                           const OptimizerOptions& opts = {});

}  // namespace lrvar
