#include "lowrank_var/matrix_core.hpp"

#include <algorithm>
#include <cmath>
#include <sstream>

#include "lowrank_var/errors.hpp"

namespace lrvar {

namespace {

std::string dims(const Matrix& m) {
  std::ostringstream os;
  os << m.rows() << "x" << m.cols();
  return os.str();
}

}  // namespace

bool all_finite(const Matrix& m) { return m.allFinite(); }

Matrix SvdDecomposition::reconstruct() const {
  return u * singular_values.asDiagonal() * v.transpose();
}

SvdDecomposition svd(const Matrix& m) {
  if (!m.allFinite()) {
    throw NumericalError("svd: non-finite entries in " + dims(m) + " matrix");
  }
  if (m.size() == 0) {
    return {Matrix(m.rows(), 0), Vector(0), Matrix(m.cols(), 0)};
  }
  Eigen::BDCSVD<Matrix> solver(m, Eigen::ComputeThinU | Eigen::ComputeThinV);
  if (solver.info() != Eigen::Success) {
    throw NumericalError("svd: decomposition did not converge for " + dims(m) +
                         " matrix");
  }
  SvdDecomposition out{solver.matrixU(), solver.singularValues(),
                       solver.matrixV()};
  if (!out.u.allFinite() || !out.v.allFinite() ||
      !out.singular_values.allFinite()) {
    throw NumericalError("svd: non-finite factors for " + dims(m) + " matrix");
  }
  return out;
}

SvdDecomposition truncated_svd(const Matrix& m, Index rank) {
  SvdDecomposition full = svd(m);
  const Index k = std::clamp<Index>(rank, 0, full.rank_bound());
  return {full.u.leftCols(k), full.singular_values.head(k),
          full.v.leftCols(k)};
}

Vector singular_values(const Matrix& m) {
  if (!m.allFinite()) {
    throw NumericalError("singular_values: non-finite entries in " + dims(m) +
                         " matrix");
  }
  if (m.size() == 0) return Vector(0);
  Eigen::BDCSVD<Matrix> solver(m);
  if (solver.info() != Eigen::Success) {
    throw NumericalError("singular_values: no convergence for " + dims(m) +
                         " matrix");
  }
  return solver.singularValues();
}

double schatten_norm(const Matrix& m, double p) {
  if (!(p >= 1.0)) {
    throw DomainError("schatten_norm: p must be >= 1");
  }
  const Vector s = singular_values(m);
  if (s.size() == 0) return 0.0;
  if (std::isinf(p)) return s(0);
  if (p == 1.0) return s.sum();
  if (p == 2.0) return s.norm();
  // Scale by sigma_1 to keep s^p in range.
  const double top = s(0);
  if (top == 0.0) return 0.0;
  return top * std::pow((s / top).array().pow(p).sum(), 1.0 / p);
}

double spectral_norm(const Matrix& m) { return schatten_norm(m, kInfinity); }
double nuclear_norm(const Matrix& m) { return schatten_norm(m, 1.0); }
double frobenius_norm(const Matrix& m) { return m.norm(); }

int numerical_rank(const Vector& s) {
  if (s.size() == 0) return 0;
  const double top = s.maxCoeff();
  if (top <= 0.0) return 0;
  const double cutoff = kNumericalRankTolerance * top;
  return static_cast<int>((s.array() > cutoff).count());
}

int numerical_rank(const Matrix& m) { return numerical_rank(singular_values(m)); }

Matrix project_spectral_ball(const Matrix& m, double rho) {
  if (m.rows() != m.cols()) {
    throw DomainError("project_spectral_ball: matrix must be square, got " +
                      dims(m));
  }
  if (!(rho > 0.0)) {
    throw DomainError("project_spectral_ball: rho must be positive");
  }
  SvdDecomposition d = svd(m);
  if (d.singular_values.size() == 0 || d.singular_values(0) <= rho) return m;
  d.singular_values = d.singular_values.cwiseMin(rho);
  return d.reconstruct();
}

Matrix singular_value_threshold(const Matrix& m, double tau, Vector& shrunk) {
  if (!(tau >= 0.0)) {
    throw DomainError("singular_value_threshold: tau must be nonnegative");
  }
  SvdDecomposition d = svd(m);
  shrunk = (d.singular_values.array() - tau).cwiseMax(0.0).matrix();
  const Index k = (shrunk.array() > 0.0).count();
  if (k == 0) return Matrix::Zero(m.rows(), m.cols());
  return d.u.leftCols(k) * shrunk.head(k).asDiagonal() *
         d.v.leftCols(k).transpose();
}

Matrix singular_value_threshold(const Matrix& m, double tau) {
  Vector unused;
  return singular_value_threshold(m, tau, unused);
}

Matrix orthonormalize_columns(const Matrix& m) {
  const Index k = std::min(m.rows(), m.cols());
  Eigen::HouseholderQR<Matrix> qr(m);
  Matrix q = qr.householderQ() * Matrix::Identity(m.rows(), k);
  const Matrix& packed = qr.matrixQR();
  for (Index j = 0; j < k; ++j) {
    if (packed(j, j) < 0.0) q.col(j) = -q.col(j);
  }
  return q;
}

LowRankFactorization::LowRankFactorization(Matrix b, Matrix c)
    : b_(std::move(b)), c_(std::move(c)) {
  if (b_.rows() != c_.rows() || b_.cols() != c_.cols()) {
    throw DomainError("LowRankFactorization: B is " + dims(b_) + " but C is " +
                      dims(c_));
  }
  // sigma(B C^T) = sigma(R_b R_c^T) where B = Q_b R_b and C = Q_c R_c.
  if (b_.cols() == 0) {
    singular_values_ = Vector(0);
    return;
  }
  Eigen::HouseholderQR<Matrix> qb(b_);
  Eigen::HouseholderQR<Matrix> qc(c_);
  const Index k = std::min(b_.rows(), b_.cols());
  const Matrix rb = qb.matrixQR().topRows(k).triangularView<Eigen::Upper>();
  const Matrix rc = qc.matrixQR().topRows(k).triangularView<Eigen::Upper>();
  singular_values_ = lrvar::singular_values(rb * rc.transpose());
}

LowRankFactorization LowRankFactorization::from_matrix(const Matrix& m,
                                                       Index rank) {
  SvdDecomposition d = truncated_svd(m, rank);
  Matrix b = Matrix::Zero(m.rows(), rank);
  Matrix c = Matrix::Zero(m.cols(), rank);
  const Index k = d.rank_bound();
  b.leftCols(k) = d.u * d.singular_values.asDiagonal();
  c.leftCols(k) = d.v;
  return LowRankFactorization(std::move(b), std::move(c));
}

}  // namespace lrvar
