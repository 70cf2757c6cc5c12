#include "lowrank_var/losses_risk.hpp"

#include <cmath>
#include <numbers>

#include "lowrank_var/errors.hpp"

namespace lrvar {

LossFunction LossFunction::euclidean() {
  LossFunction l;
  l.kind_ = LossKind::euclidean;
  return l;
}

LossFunction LossFunction::max_norm() {
  LossFunction l;
  l.kind_ = LossKind::max_norm;
  return l;
}

LossFunction LossFunction::quantile(double alpha) {
  return quantile(std::vector<double>{alpha});
}

LossFunction LossFunction::quantile(std::vector<double> alpha) {
  if (alpha.empty()) throw DomainError("quantile loss: empty alpha");
  for (double a : alpha) {
    if (!(a > 0.0 && a < 1.0)) {
      throw DomainError("quantile loss: alpha must lie in (0, 1)");
    }
  }
  LossFunction l;
  l.kind_ = LossKind::quantile;
  l.alpha_ = std::move(alpha);
  return l;
}

std::string LossFunction::name() const {
  switch (kind_) {
    case LossKind::squared_euclidean: return "squared-euclidean";
    case LossKind::euclidean: return "euclidean";
    case LossKind::max_norm: return "max-norm";
    case LossKind::quantile: return "quantile";
  }
  return "unknown";
}

LossFunction loss_from_string(const std::string& name, double alpha) {
  if (name == "squared-euclidean") return LossFunction::squared_euclidean();
  if (name == "euclidean") return LossFunction::euclidean();
  if (name == "max-norm") return LossFunction::max_norm();
  if (name == "quantile") return LossFunction::quantile(alpha);
  throw DomainError("unknown loss '" + name + "'");
}

void LossFunction::check_dimension(Index m) const {
  if (kind_ == LossKind::quantile && alpha_.size() != 1 &&
      static_cast<Index>(alpha_.size()) != m) {
    throw DomainError("quantile loss: alpha has " +
                      std::to_string(alpha_.size()) + " levels for dimension " +
                      std::to_string(m));
  }
}

double LossFunction::operator()(const Eigen::Ref<const Vector>& x) const {
  switch (kind_) {
    case LossKind::squared_euclidean: return x.squaredNorm();
    case LossKind::euclidean: return x.norm();
    case LossKind::max_norm:
      return x.size() ? x.cwiseAbs().maxCoeff() : 0.0;
    case LossKind::quantile: {
      check_dimension(x.size());
      double total = 0.0;
      for (Index i = 0; i < x.size(); ++i) {
        const double a = alpha_at(i);
        total += x(i) >= 0.0 ? a * x(i) : (a - 1.0) * x(i);
      }
      return total / std::sqrt(static_cast<double>(x.size()));
    }
  }
  return 0.0;
}

Vector LossFunction::subgradient(const Eigen::Ref<const Vector>& x) const {
  const Index m = x.size();
  switch (kind_) {
    case LossKind::squared_euclidean: return 2.0 * x;
    case LossKind::euclidean: {
      const double norm = x.norm();
      return norm > 0.0 ? Vector(x / norm) : Vector::Zero(m);
    }
    case LossKind::max_norm: {
      Vector g = Vector::Zero(m);
      if (m == 0) return g;
      Index arg = 0;
      x.cwiseAbs().maxCoeff(&arg);
      g(arg) = x(arg) > 0.0 ? 1.0 : (x(arg) < 0.0 ? -1.0 : 0.0);
      return g;
    }
    case LossKind::quantile: {
      check_dimension(m);
      Vector g(m);
      const double scale = 1.0 / std::sqrt(static_cast<double>(m));
      for (Index i = 0; i < m; ++i) {
        const double a = alpha_at(i);
        g(i) = (x(i) >= 0.0 ? a : a - 1.0) * scale;
      }
      return g;
    }
  }
  return Vector::Zero(m);
}

double empirical_risk(const Matrix& q, const LaggedPairs& data,
                      const LossFunction& loss) {
  data.validate();
  if (q.rows() != data.dimension() || q.cols() != data.dimension()) {
    throw DomainError("empirical_risk: matrix is " + std::to_string(q.rows()) +
                      "x" + std::to_string(q.cols()) + " but data has dimension " +
                      std::to_string(data.dimension()));
  }
  const Matrix residuals = data.targets - q * data.regressors;
  if (loss.is_quadratic()) {
    return residuals.squaredNorm() / static_cast<double>(data.count());
  }
  double total = 0.0;
  for (Index t = 0; t < residuals.cols(); ++t) total += loss(residuals.col(t));
  return total / static_cast<double>(data.count());
}

double empirical_risk(const Matrix& q, const Trajectory& traj,
                      const LossFunction& loss) {
  return empirical_risk(q, LaggedPairs::from_trajectory(traj), loss);
}

double excess_risk(const Matrix& fitted, const Matrix& truth,
                   const Trajectory& fresh, const LossFunction& loss) {
  const LaggedPairs pairs = LaggedPairs::from_trajectory(fresh);
  if (fitted.rows() != truth.rows() || fitted.cols() != truth.cols()) {
    throw DomainError("excess_risk: fitted and true matrices differ in shape");
  }
  return empirical_risk(fitted, pairs, loss) - empirical_risk(truth, pairs, loss);
}

double PenaltyConstants::compute_v0(double c, double d, double rho) {
  const double gap = 1.0 - rho;
  return 8.0 * std::numbers::e * c * c * d * (2.0 - rho) / (gap * gap * gap);
}

double PenaltyConstants::compute_delta0(double c, double rho) {
  return 2.0 * c / (1.0 - rho);
}

PenaltyConstants::PenaltyConstants(double c, double d, double rho)
    : c_(c), d_(d), rho_(rho) {
  if (!(c > 0.0)) throw DomainError("PenaltyConstants: c must be positive");
  if (!(d >= 1.0)) throw DomainError("PenaltyConstants: d must be >= 1");
  if (!(rho > 0.0 && rho < 1.0)) {
    throw DomainError("PenaltyConstants: rho must lie in (0, 1)");
  }
  v0_ = compute_v0(c, d, rho);
  delta0_ = compute_delta0(c, rho);
}

PenaltyConstants PenaltyConstants::defaults() {
  return PenaltyConstants(1.0, std::numbers::e, 0.99);
}

double theoretical_penalty(int r, int m_dim, long n,
                           const PenaltyConstants& k) {
  if (r < 1) throw DomainError("theoretical_penalty: rank must be >= 1");
  if (n < 2) throw DomainError("theoretical_penalty: length must be >= 2");
  const double rr = r, mm = m_dim, nn = static_cast<double>(n);
  return 2.0 * (1.0 + k.rho()) *
         std::sqrt(4.0 * k.v0() * mm * mm * rr * std::log(9.0 * rr * nn) /
                   (nn - 1.0));
}

namespace {

// Right-hand side of the sample-size condition, without the leading 1.
double scan_requirement(double factor, int r, long n,
                        const PenaltyConstants& k) {
  const double rr = r, nn = static_cast<double>(n);
  return 16.0 * k.delta0() * k.delta0() * factor * rr *
         std::log(9.0 * rr * nn) / k.v0();
}

bool scan_condition(int r, long n, const PenaltyConstants& k) {
  return static_cast<double>(n) >= 1.0 + scan_requirement(1.0, r, n, k);
}

}  // namespace

int max_admissible_rank(int m_dim, long n, const PenaltyConstants& k) {
  if (m_dim < 1) throw DomainError("max_admissible_rank: M must be >= 1");
  if (!scan_condition(1, n, k)) {
    // n - 1 - 16 delta0^2 log(9 n) / V0 is increasing for n >= 1, so the
    // smallest admissible length is found by doubling then bisection.
    long hi = std::max(2L, n);
    while (!scan_condition(1, hi, k)) hi *= 2;
    long lo = hi / 2;
    while (hi - lo > 1) {
      const long mid = lo + (hi - lo) / 2;
      (scan_condition(1, mid, k) ? hi : lo) = mid;
    }
    throw SampleTooSmallError(
        "max_admissible_rank: length " + std::to_string(n) +
            " is too small even for rank 1; need n >= " + std::to_string(hi),
        hi);
  }
  int best = 1;
  for (int r = 2; r <= m_dim; ++r) {
    if (!scan_condition(r, n, k)) break;
    best = r;
  }
  return best;
}

bool check_assumption4(int r, int m_dim, long n, const PenaltyConstants& k) {
  if (r < 1 || m_dim < 1 || n < 1) return false;
  return static_cast<double>(n) - 1.0 -
             scan_requirement(static_cast<double>(m_dim), r, n, k) >=
         0.0;
}

}  // namespace lrvar
