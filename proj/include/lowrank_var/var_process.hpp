#pragma once

#include <cstdint>
#include <functional>
#include <iosfwd>
#include <string>
#include <string_view>

#include "lowrank_var/matrix_core.hpp"
#include "lowrank_var/rng.hpp"

namespace lrvar {

// Receives non-fatal warnings (e.g. simulating at spectral norm exactly 1).
// Defaults to writing to stderr; pass an empty function to silence.
void set_warning_sink(std::function<void(std::string_view)> sink);
void emit_warning(std::string_view message);

// Law of the random transition matrix A = U D V^T.
struct TransitionSpec {
  int dimension = 1;
  int true_rank = 1;
  double singular_law_lambda = 1.0;  // D_jj ~ Beta(lambda, 1)
  double spectral_bound = 1.0;       // D is scaled by this bound

  void validate() const;
};

enum class NoiseFamily { truncated_gaussian, gaussian };

struct NoiseSpec {
  double sigma = 1.0;
  double truncation_bound = 10.0;  // support half-width, absolute units
  NoiseFamily family = NoiseFamily::truncated_gaussian;

  void validate() const;
  // One coordinate; truncated draws use rejection against N(0, sigma^2).
  double draw(Rng& rng) const;
};

std::string to_string(NoiseFamily family);
NoiseFamily noise_family_from_string(std::string_view name);

// M x n observations, column t holds X_{t+1}.
class Trajectory {
 public:
  Trajectory() = default;
  explicit Trajectory(Matrix values);

  Index dimension() const { return values_.rows(); }
  Index length() const { return values_.cols(); }
  const Matrix& values() const { return values_; }
  auto column(Index t) const { return values_.col(t); }

 private:
  Matrix values_;
};

// Regression view of a trajectory: targets X_2..X_n against regressors
// X_1..X_{n-1}. Estimators work on this so that modified targets
// (residuals of a diagonal stage, exact noiseless pairs) fit the same code.
struct LaggedPairs {
  Matrix targets;
  Matrix regressors;

  Index dimension() const { return targets.rows(); }
  Index count() const { return targets.cols(); }
  void validate() const;

  static LaggedPairs from_trajectory(const Trajectory& traj);
};

// A = U diag(d) V^T with U, V orthonormalized Uniform[0,1] matrices and
// d_j ~ spectral_bound * Beta(lambda, 1). Deterministic in the seed.
Matrix generate_transition(const TransitionSpec& spec, std::uint64_t seed);

// Covariance of the stationary law of X_t = A X_{t-1} + xi_t with
// Cov(xi) = noise_cov: the solution of S = A S A^T + noise_cov.
Matrix stationary_covariance(const Matrix& a, const Matrix& noise_cov);

// (I - A)^{-1} Sigma (I - A)^{-T}, the covariance of (I - A)^{-1} xi.
// This is not the stationary covariance of the recursion above (for scalar
// a = 0.5 and unit noise it gives 4 where the stationary variance is 4/3).
Matrix fixed_point_covariance(const Matrix& a, const Matrix& noise_cov);

inline constexpr int kDefaultBurnIn = 1000;

// Runs the recursion from X_0 = 0, drops `burn_in` leading states and keeps
// the next n. Deterministic in the seed.
Trajectory simulate(const Matrix& a, const NoiseSpec& noise, Index n,
                    std::uint64_t seed, int burn_in = kDefaultBurnIn);

// CSV with header "t,x1,...,xM" and one round-trip-exact row per time.
void write_trajectory_csv(const Trajectory& traj, std::ostream& out);
Trajectory read_trajectory_csv(std::istream& in);

}  // namespace lrvar
