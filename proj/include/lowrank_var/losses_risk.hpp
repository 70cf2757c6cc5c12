#pragma once

#include <string>
#include <vector>

#include "lowrank_var/matrix_core.hpp"
#include "lowrank_var/var_process.hpp"

namespace lrvar {

enum class LossKind { squared_euclidean, euclidean, max_norm, quantile };

// Loss l : R^M -> R applied to one-step residuals X_t - Q X_{t-1}.
//
// euclidean, max_norm and quantile are 1-Lipschitz for the Euclidean norm.
// The quantile loss is the coordinate sum of pinball losses scaled by
// 1/sqrt(M); alpha is either one level shared by all coordinates or one per
// coordinate. squared_euclidean is Lipschitz only on bounded sets, so the
// theoretical penalty constants are nominal under it.
class LossFunction {
 public:
  LossFunction() = default;

  static LossFunction squared_euclidean() { return LossFunction(); }
  static LossFunction euclidean();
  static LossFunction max_norm();
  static LossFunction quantile(double alpha);
  static LossFunction quantile(std::vector<double> alpha);

  LossKind kind() const { return kind_; }
  const std::vector<double>& alpha() const { return alpha_; }
  bool is_quadratic() const { return kind_ == LossKind::squared_euclidean; }
  bool is_lipschitz() const { return !is_quadratic(); }
  std::string name() const;

  double operator()(const Eigen::Ref<const Vector>& residual) const;
  // An element of the subdifferential at `residual`.
  Vector subgradient(const Eigen::Ref<const Vector>& residual) const;

 private:
  LossKind kind_ = LossKind::squared_euclidean;
  std::vector<double> alpha_;

  double alpha_at(Index i) const {
    return alpha_.size() == 1 ? alpha_[0] : alpha_[static_cast<size_t>(i)];
  }
  void check_dimension(Index m) const;
};

LossFunction loss_from_string(const std::string& name, double alpha = 0.5);

// R_n(Q) = mean over pairs of l(X_t - Q X_{t-1}).
double empirical_risk(const Matrix& q, const LaggedPairs& data,
                      const LossFunction& loss);
double empirical_risk(const Matrix& q, const Trajectory& traj,
                      const LossFunction& loss);

// R*_n(fitted) - R*_n(truth) on an independent trajectory driven by truth.
double excess_risk(const Matrix& fitted, const Matrix& truth,
                   const Trajectory& fresh, const LossFunction& loss);

// Noise-tail and contraction constants (c, d, rho) with the derived
// V0 = 8 e c^2 d (2 - rho) / (1 - rho)^3 and delta0 = 2 c / (1 - rho).
class PenaltyConstants {
 public:
  PenaltyConstants(double c, double d, double rho);

  // c = 1, d = e, rho = 0.99: a computable default for real data.
  static PenaltyConstants defaults();

  double c() const { return c_; }
  double d() const { return d_; }
  double rho() const { return rho_; }
  double v0() const { return v0_; }
  double delta0() const { return delta0_; }

  static double compute_v0(double c, double d, double rho);
  static double compute_delta0(double c, double rho);

 private:
  double c_, d_, rho_, v0_, delta0_;
};

// pen(r) = 2 (1 + rho) sqrt(4 V0 M^2 r log(9 r n) / (n - 1)).
double theoretical_penalty(int r, int m_dim, long n,
                           const PenaltyConstants& constants);

// Largest r <= M with n >= 1 + 16 delta0^2 r log(9 r n) / V0. Throws
// SampleTooSmallError (carrying the minimal n) when even r = 1 fails.
int max_admissible_rank(int m_dim, long n, const PenaltyConstants& constants);

// n >= 1 + 16 delta0^2 M r log(9 r n) / V0. Unlike the scan condition of
// max_admissible_rank this carries the factor M; both are exposed as stated.
bool check_assumption4(int r, int m_dim, long n,
                       const PenaltyConstants& constants);

}  // namespace lrvar
