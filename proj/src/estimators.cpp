#include "lowrank_var/estimators.hpp"

#include <algorithm>
#include <cmath>
#include <functional>
#include <limits>
#include <optional>
#include <map>
#include <sstream>

#include "lowrank_var/errors.hpp"
#include "lowrank_var/rng.hpp"

namespace lrvar {

void OptimizerOptions::validate() const {
  if (max_outer_iters < 1) {
    throw DomainError("optimizer: max_outer_iters must be >= 1");
  }
  if (!(tolerance > 0.0)) throw DomainError("optimizer: tolerance must be > 0");
  if (restarts < 0) throw DomainError("optimizer: restarts must be >= 0");
  if (!(step_scale > 0.0)) {
    throw DomainError("optimizer: step_scale must be > 0");
  }
}

std::string EstimatorSpec::kind_name() const {
  struct Visitor {
    std::string operator()(const FullRank&) const { return "full-rank"; }
    std::string operator()(const FixedRank&) const { return "fixed-rank"; }
    std::string operator()(const RankPenalized&) const {
      return "rank-penalized";
    }
    std::string operator()(const Nuclear&) const { return "nuclear"; }
    std::string operator()(const DPlusA&) const { return "d-plus-a"; }
  };
  return std::visit(Visitor{}, kind);
}

void EstimatorSpec::validate(Index dimension) const {
  if (!(rho > 0.0)) throw DomainError("estimator: rho must be positive");
  optimizer.validate();
  if (const auto* f = std::get_if<FixedRank>(&kind)) {
    if (f->rank < 1 || f->rank > dimension) {
      throw DomainError("fixed-rank: rank " + std::to_string(f->rank) +
                        " outside 1.." + std::to_string(dimension));
    }
  } else if (const auto* p = std::get_if<RankPenalized>(&kind)) {
    if (p->max_rank && (*p->max_rank < 1)) {
      throw DomainError("rank-penalized: max_rank must be >= 1");
    }
    if (const auto* s = std::get_if<SlopeHeuristic>(&p->penalty)) {
      if (s->grid_points < 2) {
        throw DomainError("slope heuristic: need at least 2 grid points");
      }
    } else if (const auto* c = std::get_if<PracticalPenalty>(&p->penalty)) {
      if (!(c->c >= 0.0)) {
        throw DomainError("rank-penalized: constant must be >= 0");
      }
    }
  } else if (const auto* n = std::get_if<Nuclear>(&kind)) {
    if (const auto* c = std::get_if<NuclearFixed>(&n->penalty)) {
      if (!(c->c >= 0.0)) throw DomainError("nuclear: constant must be >= 0");
    } else if (std::get<SlopeHeuristic>(n->penalty).grid_points < 2) {
      throw DomainError("slope heuristic: need at least 2 grid points");
    }
  } else if (const auto* d = std::get_if<DPlusA>(&kind)) {
    if (!d->inner) throw DomainError("d-plus-a: missing inner estimator");
    if (std::holds_alternative<DPlusA>(d->inner->kind)) {
      throw DomainError("d-plus-a: inner estimator cannot be d-plus-a");
    }
    d->inner->validate(dimension);
  }
}

namespace {

// Sufficient statistics of the quadratic empirical risk:
// N R_n(Q) = tr(Y Y^T) - 2 tr(Q^T S_yz) + tr(Q S_zz Q^T).
class QuadraticProblem {
 public:
  explicit QuadraticProblem(const LaggedPairs& data)
      : pairs_(static_cast<double>(data.count())), dim_(data.dimension()) {
    data.validate();
    szz_ = data.regressors * data.regressors.transpose();
    syz_ = data.targets * data.regressors.transpose();
    yy_ = data.targets.squaredNorm();
    Eigen::LLT<Matrix> llt(szz_);
    const double trace = szz_.trace();
    if (llt.info() != Eigen::Success || llt.rcond() < 1e-13) {
      jitter_ = 1e-10 * std::max(trace, 1e-300) / static_cast<double>(dim_);
      szz_reg_ = szz_ + jitter_ * Matrix::Identity(dim_, dim_);
      llt.compute(szz_reg_);
    } else {
      szz_reg_ = szz_;
    }
    if (llt.info() != Eigen::Success) {
      throw NumericalError("lag covariance is not positive definite even "
                           "after ridge jitter");
    }
    ols_ = llt.solve(syz_.transpose()).transpose();
    floor_ = 1e-13 * std::max(yy_ / pairs_, 1e-300);
  }

  Index dimension() const { return dim_; }
  double pairs() const { return pairs_; }
  const Matrix& szz() const { return szz_reg_; }
  const Matrix& syz() const { return syz_; }
  const Matrix& ols() const { return ols_; }
  bool jittered() const { return jitter_ > 0.0; }
  // Absolute scale below which objective differences are rounding noise.
  double floor() const { return floor_; }

  double objective(const Matrix& q) const {
    const double cross = q.cwiseProduct(syz_).sum();
    const double quad = (q * szz_).cwiseProduct(q).sum();
    return (yy_ - 2.0 * cross + quad) / pairs_;
  }

  double objective(const Matrix& b, const Matrix& c) const {
    const Matrix sc = szz_ * c;
    const Matrix gram = c.transpose() * sc;
    const double cross = (syz_ * c).cwiseProduct(b).sum();
    const double quad = (b * gram).cwiseProduct(b).sum();
    return (yy_ - 2.0 * cross + quad) / pairs_;
  }

  Matrix gradient(const Matrix& q) const {
    return (2.0 / pairs_) * (q * szz_ - syz_);
  }

  double lipschitz() const {
    if (lipschitz_ < 0.0) {
      Eigen::SelfAdjointEigenSolver<Matrix> eig(szz_, Eigen::EigenvaluesOnly);
      lipschitz_ = (2.0 / pairs_) * eig.eigenvalues().maxCoeff();
    }
    return lipschitz_;
  }

  // Unconstrained rank-r least-squares minimizer: the OLS fit projected on
  // the top-r eigenvectors of the fitted-value covariance.
  Matrix reduced_rank(int r) const {
    if (!fitted_eigvecs_) {
      const Matrix fitted = ols_ * szz_reg_ * ols_.transpose();
      Eigen::SelfAdjointEigenSolver<Matrix> eig(0.5 *
                                                (fitted + fitted.transpose()));
      if (eig.info() != Eigen::Success) {
        throw NumericalError("eigen-decomposition of fitted values failed");
      }
      // Eigenvalues come in increasing order.
      fitted_eigvecs_ = eig.eigenvectors().rowwise().reverse();
    }
    const Matrix u = fitted_eigvecs_->leftCols(r);
    return u * (u.transpose() * ols_);
  }

 private:
  double pairs_;
  Index dim_;
  Matrix szz_, szz_reg_, syz_, ols_;
  double yy_ = 0.0;
  double jitter_ = 0.0;
  double floor_ = 0.0;
  mutable double lipschitz_ = -1.0;
  mutable std::optional<Matrix> fitted_eigvecs_;
};

// Clips the singular values of a tall matrix at `bound`, working through the
// r x r Gram matrix: X = U S W^T gives X W diag(min(1, bound / s)) W^T.
bool clip_spectral(Matrix& x, double bound) {
  if (x.size() == 0) return false;
  const Matrix gram = x.transpose() * x;
  Eigen::SelfAdjointEigenSolver<Matrix> eig(gram);
  if (eig.info() != Eigen::Success) {
    throw NumericalError("spectral clipping: eigen-decomposition failed");
  }
  const Vector& ev = eig.eigenvalues();
  if (ev.maxCoeff() <= bound * bound) return false;
  Vector scale(ev.size());
  for (Index j = 0; j < ev.size(); ++j) {
    const double s = std::sqrt(std::max(ev(j), 0.0));
    scale(j) = s > bound ? bound / s : 1.0;
  }
  const Matrix& w = eig.eigenvectors();
  x = x * (w * scale.asDiagonal() * w.transpose());
  return true;
}

// Moves the scale of C into B so that C has orthonormal columns; the product
// B C^T is unchanged.
void rebalance(Matrix& b, Matrix& c) {
  const Index r = c.cols();
  Eigen::HouseholderQR<Matrix> qr(c);
  const Matrix q = qr.householderQ() * Matrix::Identity(c.rows(), r);
  const Matrix upper = qr.matrixQR().topRows(r).triangularView<Eigen::Upper>();
  b = b * upper.transpose();
  c = q;
}

Matrix random_orthonormal(Index rows, Index cols, Rng& rng) {
  Matrix x(rows, cols);
  for (Index j = 0; j < cols; ++j)
    for (Index i = 0; i < rows; ++i) x(i, j) = rng.normal();
  return orthonormalize_columns(x);
}

struct FactorRun {
  Matrix b, c;
  double objective = 0.0;
  int iterations = 0;
  bool converged = false;
  bool stalled = false;
  std::vector<double> trace;
};

bool relative_small(double decrease, double value, double floor, double tol) {
  return decrease <= tol * std::max(std::abs(value), floor);
}

// Alternating exact least-squares solves on B then C, each followed by its
// spectral-ball projection (B onto rho, C onto 1). Iterates that would raise
// the objective are rejected and end the run.
FactorRun alternating_minimization(const QuadraticProblem& p, Matrix b,
                                   Matrix c, double rho,
                                   const OptimizerOptions& opts) {
  rebalance(b, c);
  FactorRun run;
  run.objective = p.objective(b, c);
  run.trace.push_back(run.objective);
  const Matrix ols_t = p.ols().transpose();
  for (int it = 0; it < opts.max_outer_iters; ++it) {
    const Matrix gram = c.transpose() * p.szz() * c;
    Matrix nb = gram.ldlt().solve((p.syz() * c).transpose()).transpose();
    clip_spectral(nb, rho);
    const Matrix hb = nb.transpose() * nb;
    Matrix nc = hb.completeOrthogonalDecomposition()
                    .solve((ols_t * nb).transpose())
                    .transpose();
    clip_spectral(nc, 1.0);
    rebalance(nb, nc);
    const double value = p.objective(nb, nc);
    if (!std::isfinite(value) || !nb.allFinite() || !nc.allFinite()) {
      throw NumericalError("alternating minimization produced non-finite "
                           "iterates");
    }
    ++run.iterations;
    if (value > run.objective) {
      // A rise at rounding level means no further progress; anything larger
      // is a genuine increase from the projections.
      if (value <= run.objective +
                       1e-12 * std::max(std::abs(run.objective), p.floor())) {
        run.converged = true;
      } else {
        run.stalled = true;
      }
      break;
    }
    const double decrease = run.objective - value;
    b = std::move(nb);
    c = std::move(nc);
    run.objective = value;
    run.trace.push_back(value);
    if (relative_small(decrease, value, p.floor(), opts.tolerance)) {
      run.converged = true;
      break;
    }
  }
  run.b = std::move(b);
  run.c = std::move(c);
  return run;
}

struct SpectralStart {
  Matrix b, c;
  bool clipped = false;  // the reduced-rank solution left the rho-ball
};

// Spectral start: reduced-rank solution clipped to the rho-ball, split as
// B = U diag(sigma), C = V. When nothing is clipped this is already the
// global minimizer of the rank-r problem.
SpectralStart spectral_start(const QuadraticProblem& p, int r, double rho) {
  const LowRankFactorization f =
      LowRankFactorization::from_matrix(p.reduced_rank(r), r);
  SpectralStart out{f.b(), f.c(), false};
  out.clipped = clip_spectral(out.b, rho);
  return out;
}

// Extends a rank-(r-1) factorization by a zero column in B and a fresh
// direction in C; the product is unchanged.
std::pair<Matrix, Matrix> extend_start(const Matrix& b, const Matrix& c,
                                       Rng& rng) {
  const Index m = b.rows();
  const Index r = b.cols() + 1;
  Matrix nb = Matrix::Zero(m, r);
  Matrix nc = Matrix::Zero(m, r);
  nb.leftCols(r - 1) = b;
  nc.leftCols(r - 1) = c;
  Vector dir(m);
  for (Index i = 0; i < m; ++i) dir(i) = rng.normal();
  if (c.cols() > 0) {
    const Matrix q = orthonormalize_columns(c);
    dir -= q * (q.transpose() * dir);
  }
  const double norm = dir.norm();
  if (norm > 0.0) dir /= norm;
  nc.col(r - 1) = dir;
  return {nb, nc};
}

struct SubgradientData {
  const LaggedPairs& data;
  const LossFunction& loss;
  double base_step;
};

double loss_objective(const Matrix& q, const SubgradientData& s) {
  return empirical_risk(q, s.data, s.loss);
}

Matrix loss_subgradients(const Matrix& residuals, const LossFunction& loss) {
  Matrix g(residuals.rows(), residuals.cols());
  for (Index t = 0; t < residuals.cols(); ++t) {
    g.col(t) = loss.subgradient(residuals.col(t));
  }
  return g;
}

double step_size(const OptimizerOptions& opts, double base, int k) {
  return opts.step_policy == StepSizePolicy::constant
             ? base
             : base / std::sqrt(static_cast<double>(k + 1));
}

SubgradientData make_subgradient_data(const LaggedPairs& data,
                                      const LossFunction& loss, double rho,
                                      const OptimizerOptions& opts) {
  double mean_norm = 0.0;
  for (Index t = 0; t < data.count(); ++t) {
    mean_norm += data.regressors.col(t).norm();
  }
  mean_norm /= static_cast<double>(data.count());
  const double base =
      mean_norm > 0.0 ? opts.step_scale * rho / mean_norm : opts.step_scale;
  return {data, loss, base};
}

constexpr int kStallWindow = 50;

// Projected subgradient descent on B and C with diminishing steps; keeps
// the best iterate seen. No convergence guarantee for these losses.
FactorRun factored_subgradient(const SubgradientData& s, Matrix b, Matrix c,
                               double rho, const OptimizerOptions& opts) {
  const double n = static_cast<double>(s.data.count());
  rebalance(b, c);
  FactorRun run;
  run.b = b;
  run.c = c;
  run.objective = loss_objective(b * c.transpose(), s);
  run.trace.push_back(run.objective);
  int since_improvement = 0;
  for (int k = 0; k < opts.max_outer_iters; ++k) {
    const double eta = step_size(opts, s.base_step, k);
    Matrix latent = c.transpose() * s.data.regressors;
    Matrix g = loss_subgradients(s.data.targets - b * latent, s.loss);
    b += (eta / n) * g * latent.transpose();
    clip_spectral(b, rho);
    g = loss_subgradients(s.data.targets - b * latent, s.loss);
    c += (eta / n) * s.data.regressors * g.transpose() * b;
    clip_spectral(c, 1.0);
    rebalance(b, c);
    const double value = loss_objective(b * c.transpose(), s);
    if (!std::isfinite(value)) {
      throw NumericalError("subgradient iteration produced non-finite risk");
    }
    ++run.iterations;
    if (value < run.objective - opts.tolerance * std::abs(run.objective)) {
      since_improvement = 0;
    } else if (++since_improvement >= kStallWindow) {
      run.converged = true;
    }
    if (value < run.objective) {
      run.objective = value;
      run.b = b;
      run.c = c;
    }
    run.trace.push_back(run.objective);
    if (run.converged) break;
  }
  return run;
}

FactorRun full_subgradient(const SubgradientData& s, Matrix q, double rho,
                           const OptimizerOptions& opts) {
  const double n = static_cast<double>(s.data.count());
  FactorRun run;
  run.b = q;
  run.objective = loss_objective(q, s);
  run.trace.push_back(run.objective);
  int since_improvement = 0;
  for (int k = 0; k < opts.max_outer_iters; ++k) {
    const double eta = step_size(opts, s.base_step, k);
    const Matrix g =
        loss_subgradients(s.data.targets - q * s.data.regressors, s.loss);
    q += (eta / n) * g * s.data.regressors.transpose();
    q = project_spectral_ball(q, rho);
    const double value = loss_objective(q, s);
    if (!std::isfinite(value)) {
      throw NumericalError("subgradient iteration produced non-finite risk");
    }
    ++run.iterations;
    if (value < run.objective - opts.tolerance * std::abs(run.objective)) {
      since_improvement = 0;
    } else if (++since_improvement >= kStallWindow) {
      run.converged = true;
    }
    if (value < run.objective) {
      run.objective = value;
      run.b = q;
    }
    run.trace.push_back(run.objective);
    if (run.converged) break;
  }
  return run;
}

FitResult make_result(Matrix matrix, const LaggedPairs& data,
                      const LossFunction& loss) {
  FitResult out;
  out.selected_rank = numerical_rank(matrix);
  out.empirical_risk = empirical_risk(matrix, data, loss);
  out.matrix = std::move(matrix);
  return out;
}

void require_rank(int rank, Index dim) {
  if (rank < 1 || rank > dim) {
    throw DomainError("fixed-rank: rank " + std::to_string(rank) +
                      " outside 1.." + std::to_string(dim));
  }
}

void require_rho(double rho) {
  if (!(rho > 0.0)) throw DomainError("rho must be positive");
}

// One fixed-rank fit given the candidate starting points; keeps the run with
// the lowest objective (earliest on ties).
FactorRun best_of(std::vector<std::pair<Matrix, Matrix>> starts,
                  const std::function<FactorRun(Matrix, Matrix)>& solve) {
  std::optional<FactorRun> best;
  for (auto& [b, c] : starts) {
    FactorRun run = solve(std::move(b), std::move(c));
    if (!best || run.objective < best->objective) best = std::move(run);
  }
  return std::move(*best);
}

// Fixed-rank fit shared by the public entry point and the rank sweep.
// `warm`, when given, is the rank-(r-1) fit; it is extended as an extra start
// only if the spectral run did not already improve on it.
FactorRun fixed_rank_run(const LaggedPairs& data, const QuadraticProblem& p,
                         int r, double rho, const LossFunction& loss,
                         const OptimizerOptions& opts, Rng& rng,
                         const FactorRun* warm) {
  SpectralStart spectral = spectral_start(p, r, rho);
  std::vector<std::pair<Matrix, Matrix>> starts;
  if (loss.is_quadratic()) {
    FactorRun best = alternating_minimization(p, std::move(spectral.b),
                                              std::move(spectral.c), rho, opts);
    // An unclipped reduced-rank start is the global optimum; other starts
    // cannot beat it.
    if (!spectral.clipped) return best;
    if (warm && warm->objective < best.objective) {
      starts.push_back(extend_start(warm->b, warm->c, rng));
    }
    for (int k = 0; k < opts.restarts; ++k) {
      starts.emplace_back(Matrix::Zero(p.dimension(), r),
                          random_orthonormal(p.dimension(), r, rng));
    }
    for (auto& [b, c] : starts) {
      FactorRun run =
          alternating_minimization(p, std::move(b), std::move(c), rho, opts);
      if (run.objective < best.objective) best = std::move(run);
    }
    return best;
  }
  starts.emplace_back(std::move(spectral.b), std::move(spectral.c));
  if (warm) starts.push_back(extend_start(warm->b, warm->c, rng));
  for (int k = 0; k < opts.restarts; ++k) {
    starts.emplace_back(Matrix::Zero(p.dimension(), r),
                        random_orthonormal(p.dimension(), r, rng));
  }
  const SubgradientData s = make_subgradient_data(data, loss, rho, opts);
  return best_of(std::move(starts), [&](Matrix b, Matrix c) {
    return factored_subgradient(s, std::move(b), std::move(c), rho, opts);
  });
}

FitResult result_from_run(FactorRun run, const LaggedPairs& data,
                          const LossFunction& loss) {
  FitResult out = make_result(run.b * run.c.transpose(), data, loss);
  out.iterations = run.iterations;
  out.converged = run.converged;
  out.objective_trace = std::move(run.trace);
  if (run.stalled) {
    out.warnings.push_back(
        "a projection step raised the objective; stopped at the last "
        "accepted iterate");
  }
  return out;
}

struct NuclearRun {
  Matrix q;
  double objective = 0.0;
  int iterations = 0;
  bool converged = false;
  std::vector<double> trace;
};

constexpr int kNuclearSmallSteps = 3;

// Accelerated proximal gradient on R_n(Q) + c ||Q||_*, restarting the
// momentum whenever a step would raise the objective.
NuclearRun solve_nuclear(const QuadraticProblem& p, double c, Matrix start,
                         const OptimizerOptions& opts) {
  NuclearRun run;
  const double lip = p.lipschitz();
  run.q = std::move(start);
  run.objective = p.objective(run.q) + c * nuclear_norm(run.q);
  run.trace.push_back(run.objective);
  if (!(lip > 0.0)) {
    run.converged = true;
    return run;
  }
  Matrix y = run.q;
  double t = 1.0;
  bool plain_step = true;
  int small_steps = 0;
  Vector shrunk;
  for (int it = 0; it < opts.max_outer_iters; ++it) {
    ++run.iterations;
    Matrix next = singular_value_threshold(y - p.gradient(y) / lip, c / lip,
                                           shrunk);
    const double value = p.objective(next) + c * shrunk.sum();
    if (!std::isfinite(value)) {
      throw NumericalError("nuclear solver produced a non-finite objective");
    }
    if (value > run.objective) {
      if (plain_step) {
        run.converged = true;  // no descent even without momentum
        break;
      }
      t = 1.0;
      y = run.q;
      plain_step = true;
      continue;
    }
    const double t_next = 0.5 * (1.0 + std::sqrt(1.0 + 4.0 * t * t));
    y = next + ((t - 1.0) / t_next) * (next - run.q);
    const double decrease = run.objective - value;
    run.q = std::move(next);
    run.objective = value;
    run.trace.push_back(value);
    t = t_next;
    plain_step = false;
    if (relative_small(decrease, value, p.floor(), opts.tolerance)) {
      if (++small_steps >= kNuclearSmallSteps) {
        run.converged = true;
        break;
      }
    } else {
      small_steps = 0;
    }
  }
  return run;
}

double nuclear_c_max(const QuadraticProblem& p) {
  return (2.0 / p.pairs()) * spectral_norm(p.syz());
}

struct NuclearPath {
  RankPath path;
  std::vector<Matrix> solutions;  // aligned with path.entries
};

NuclearPath compute_nuclear_path(const QuadraticProblem& p, int grid_points,
                                 const OptimizerOptions& opts) {
  const double c_max = nuclear_c_max(p);
  NuclearPath out;
  if (!(c_max > 0.0)) {
    throw NoJumpError("nuclear rank path: data carry no lagged signal");
  }
  out.path.grid = {c_max * 1e-3, c_max, grid_points};
  const std::vector<double> grid = geometric_grid(out.path.grid);
  out.path.entries.resize(grid.size());
  out.solutions.resize(grid.size());
  Matrix warm = Matrix::Zero(p.dimension(), p.dimension());
  for (size_t k = grid.size(); k-- > 0;) {
    NuclearRun run = solve_nuclear(p, grid[k], warm, opts);
    out.path.entries[k] = {grid[k], numerical_rank(run.q), run.objective};
    warm = run.q;
    out.solutions[k] = std::move(run.q);
  }
  return out;
}

}  // namespace

FitResult fit_full_rank(const LaggedPairs& data, double rho,
                        const LossFunction& loss,
                        const OptimizerOptions& opts) {
  data.validate();
  opts.validate();
  require_rho(rho);
  const QuadraticProblem p(data);
  Matrix q = p.ols();
  bool projected = false;
  if (spectral_norm(q) > rho) {
    q = project_spectral_ball(q, rho);
    projected = true;
  }
  if (loss.is_quadratic()) {
    FitResult out = make_result(std::move(q), data, loss);
    out.iterations = 1;
    out.converged = true;
    out.objective_trace = {p.objective(out.matrix)};
    out.projected = projected;
    if (projected) {
      out.warnings.push_back(
          "least-squares solution exceeded the spectral bound and was "
          "projected onto the rho-ball");
    }
    if (p.jittered()) {
      out.warnings.push_back("singular lag covariance; ridge jitter applied");
    }
    return out;
  }
  const SubgradientData s = make_subgradient_data(data, loss, rho, opts);
  FactorRun run = full_subgradient(s, std::move(q), rho, opts);
  FitResult out = make_result(std::move(run.b), data, loss);
  out.iterations = run.iterations;
  out.converged = run.converged;
  out.objective_trace = std::move(run.trace);
  return out;
}

FitResult fit_fixed_rank(const LaggedPairs& data, int rank, double rho,
                         const LossFunction& loss,
                         const OptimizerOptions& opts) {
  data.validate();
  opts.validate();
  require_rho(rho);
  require_rank(rank, data.dimension());
  const QuadraticProblem p(data);
  Rng rng(derive_seed(opts.seed, {static_cast<std::uint64_t>(rank)}));
  return result_from_run(
      fixed_rank_run(data, p, rank, rho, loss, opts, rng, nullptr), data,
      loss);
}

FitResult fit_rank_penalized(const LaggedPairs& data,
                             const RankPenalized& spec, double rho,
                             const LossFunction& loss,
                             const OptimizerOptions& opts) {
  data.validate();
  opts.validate();
  require_rho(rho);
  const int dim = static_cast<int>(data.dimension());
  const long n = static_cast<long>(data.count()) + 1;
  int top = std::min(dim, spec.max_rank.value_or(dim));
  if (const auto* th = std::get_if<TheoreticalPenalty>(&spec.penalty)) {
    top = std::min(top, max_admissible_rank(dim, n, th->constants));
  }
  if (top < 1) throw DomainError("rank-penalized: empty candidate set");

  const QuadraticProblem p(data);
  Rng rng(derive_seed(opts.seed, {0x70656eULL}));
  std::vector<FactorRun> runs;
  runs.reserve(static_cast<size_t>(top));
  std::map<int, double> risks;
  for (int r = 1; r <= top; ++r) {
    const FactorRun* warm = runs.empty() ? nullptr : &runs.back();
    runs.push_back(fixed_rank_run(data, p, r, rho, loss, opts, rng, warm));
    const FactorRun& run = runs.back();
    risks[r] = empirical_risk(run.b * run.c.transpose(), data, loss);
  }

  int chosen = 1;
  std::optional<double> constant;
  std::optional<RankPath> path;
  std::optional<SlopeSelection> slope;
  if (const auto* th = std::get_if<TheoreticalPenalty>(&spec.penalty)) {
    const PenaltyConstants k = th->constants;
    chosen = select_rank(
        risks, [&](int r) { return theoretical_penalty(r, dim, n, k); }, 1.0);
    constant = 1.0;
  } else if (const auto* pr = std::get_if<PracticalPenalty>(&spec.penalty)) {
    chosen = select_rank(risks, sqrt_rank_shape(), pr->c);
    constant = pr->c;
  } else {
    const auto& sh = std::get<SlopeHeuristic>(spec.penalty);
    const PenaltyShape shape = sqrt_rank_shape();
    path = compute_rank_path(risks, shape,
                             default_rank_grid(risks, shape, sh.grid_points));
    slope = select_constant(*path);
    chosen = select_rank(risks, shape, slope->working_c);
    constant = slope->working_c;
  }

  FitResult out = result_from_run(std::move(runs[static_cast<size_t>(chosen - 1)]),
                                  data, loss);
  out.penalty_constant = constant;
  out.rank_path = std::move(path);
  out.slope = slope;
  out.risk_by_rank.reserve(risks.size());
  for (const auto& [r, v] : risks) out.risk_by_rank.push_back(v);
  return out;
}

FitResult fit_nuclear(const LaggedPairs& data, const NuclearPenalty& penalty,
                      double rho, const LossFunction& loss,
                      const OptimizerOptions& opts) {
  if (!loss.is_quadratic()) {
    throw UnsupportedLossError("nuclear estimator supports the squared "
                               "euclidean loss only, got " + loss.name());
  }
  data.validate();
  opts.validate();
  require_rho(rho);
  const QuadraticProblem p(data);
  const Index m = p.dimension();
  double c = 0.0;
  Matrix start = Matrix::Zero(m, m);
  std::optional<RankPath> path;
  std::optional<SlopeSelection> slope;
  if (const auto* fixed = std::get_if<NuclearFixed>(&penalty)) {
    c = fixed->c;
  } else {
    NuclearPath np = compute_nuclear_path(
        p, std::get<SlopeHeuristic>(penalty).grid_points, opts);
    slope = select_constant(np.path);
    c = slope->working_c;
    // Warm start from the grid solution nearest to the working constant.
    size_t nearest = 0;
    double gap = kInfinity;
    for (size_t k = 0; k < np.path.entries.size(); ++k) {
      const double d = std::abs(std::log(np.path.entries[k].c / c));
      if (d < gap) {
        gap = d;
        nearest = k;
      }
    }
    start = np.solutions[nearest];
    path = std::move(np.path);
  }
  NuclearRun run = solve_nuclear(p, c, std::move(start), opts);
  Matrix q = std::move(run.q);
  bool projected = false;
  if (spectral_norm(q) > rho) {
    q = project_spectral_ball(q, rho);
    projected = true;
  }
  FitResult out = make_result(std::move(q), data, loss);
  out.iterations = run.iterations;
  out.converged = run.converged;
  out.objective_trace = std::move(run.trace);
  out.projected = projected;
  out.penalty_constant = c;
  out.rank_path = std::move(path);
  out.slope = slope;
  if (projected) {
    out.warnings.push_back(
        "nuclear solution exceeded the spectral bound; projected onto the "
        "rho-ball after convergence");
  }
  return out;
}

RankPath nuclear_rank_path(const LaggedPairs& data, int grid_points,
                           const OptimizerOptions& opts) {
  data.validate();
  opts.validate();
  const QuadraticProblem p(data);
  return compute_nuclear_path(p, grid_points, opts).path;
}

Vector fit_diagonal_ar(const LaggedPairs& data,
                       std::vector<std::string>* warnings) {
  data.validate();
  const Index m = data.dimension();
  Vector d(m);
  for (Index j = 0; j < m; ++j) {
    const double energy = data.regressors.row(j).squaredNorm();
    if (!(energy > 0.0)) {
      d(j) = 0.0;
      if (warnings) {
        warnings->push_back("series " + std::to_string(j + 1) +
                            " has zero lagged energy; AR coefficient set to 0");
      }
      continue;
    }
    const double coef = data.targets.row(j).dot(data.regressors.row(j)) / energy;
    d(j) = std::clamp(coef, -1.0, 1.0);
  }
  return d;
}

FitResult fit_d_plus_a(const LaggedPairs& data, const EstimatorSpec& inner,
                       const OptimizerOptions& opts) {
  data.validate();
  opts.validate();
  if (std::holds_alternative<DPlusA>(inner.kind)) {
    throw DomainError("d-plus-a: inner estimator cannot be d-plus-a");
  }
  std::vector<std::string> warnings;
  const Vector d = fit_diagonal_ar(data, &warnings);
  LaggedPairs residual{data.targets - d.asDiagonal() * data.regressors,
                       data.regressors};
  FitResult low = fit(residual, inner);
  FitResult out;
  out.matrix = Matrix(d.asDiagonal()) + low.matrix;
  out.selected_rank = low.selected_rank;
  out.empirical_risk = empirical_risk(out.matrix, data, inner.loss);
  out.iterations = low.iterations;
  out.converged = low.converged;
  out.objective_trace = std::move(low.objective_trace);
  out.projected = low.projected;
  out.penalty_constant = low.penalty_constant;
  out.risk_by_rank = std::move(low.risk_by_rank);
  out.rank_path = std::move(low.rank_path);
  out.slope = low.slope;
  out.diagonal = d;
  out.warnings = std::move(warnings);
  for (auto& w : low.warnings) out.warnings.push_back(std::move(w));
  return out;
}

FitResult fit(const LaggedPairs& data, const EstimatorSpec& spec) {
  data.validate();
  spec.validate(data.dimension());
  struct Visitor {
    const LaggedPairs& data;
    const EstimatorSpec& spec;
    FitResult operator()(const FullRank&) const {
      return fit_full_rank(data, spec.rho, spec.loss, spec.optimizer);
    }
    FitResult operator()(const FixedRank& f) const {
      return fit_fixed_rank(data, f.rank, spec.rho, spec.loss, spec.optimizer);
    }
    FitResult operator()(const RankPenalized& p) const {
      return fit_rank_penalized(data, p, spec.rho, spec.loss, spec.optimizer);
    }
    FitResult operator()(const Nuclear& n) const {
      return fit_nuclear(data, n.penalty, spec.rho, spec.loss, spec.optimizer);
    }
    FitResult operator()(const DPlusA& d) const {
      return fit_d_plus_a(data, *d.inner, spec.optimizer);
    }
  };
  return std::visit(Visitor{data, spec}, spec.kind);
}

FitResult fit(const Trajectory& traj, const EstimatorSpec& spec) {
  return fit(LaggedPairs::from_trajectory(traj), spec);
}

Vector predict_one_step(const Matrix& matrix, const Vector& x_last) {
  if (matrix.cols() != x_last.size()) {
    throw DomainError("predict_one_step: matrix has " +
                      std::to_string(matrix.cols()) + " columns but state has " +
                      std::to_string(x_last.size()) + " entries");
  }
  return matrix * x_last;
}

}  // namespace lrvar
