#pragma once

#include <Eigen/Dense>
#include <limits>

namespace lrvar {

using Matrix = Eigen::MatrixXd;
using Vector = Eigen::VectorXd;
using Index = Eigen::Index;

inline constexpr double kInfinity = std::numeric_limits<double>::infinity();

// Relative cutoff below which a singular value counts as zero.
inline constexpr double kNumericalRankTolerance = 1e-10;

// Thin SVD m = u * diag(singular_values) * v^T, singular values nonincreasing.
// Columns of u and v are unspecified inside a block of tied singular values.
struct SvdDecomposition {
  Matrix u;
  Vector singular_values;
  Matrix v;

  Index rank_bound() const { return singular_values.size(); }
  Matrix reconstruct() const;
};

// Throws NumericalError (carrying the dimensions) on non-finite input or
// when the underlying iteration does not converge.
SvdDecomposition svd(const Matrix& m);

// Leading `rank` triplets of svd(m).
SvdDecomposition truncated_svd(const Matrix& m, Index rank);

Vector singular_values(const Matrix& m);

// Schatten-p norm for p >= 1; pass kInfinity for the spectral norm.
double schatten_norm(const Matrix& m, double p);
double spectral_norm(const Matrix& m);
double nuclear_norm(const Matrix& m);
double frobenius_norm(const Matrix& m);

// Count of singular values above kNumericalRankTolerance * sigma_1.
int numerical_rank(const Vector& singular_values);
int numerical_rank(const Matrix& m);

// Frobenius projection onto {X : ||X||_{S_inf} <= rho}: clips singular values.
Matrix project_spectral_ball(const Matrix& m, double rho);

// Proximal operator of tau * ||.||_*: soft-thresholds singular values.
Matrix singular_value_threshold(const Matrix& m, double tau);

// Same, also reporting the thresholded singular values.
Matrix singular_value_threshold(const Matrix& m, double tau, Vector& shrunk);

// Orthonormal basis of the column span via Householder QR, with column signs
// chosen so that diag(R) >= 0.
Matrix orthonormalize_columns(const Matrix& m);

bool all_finite(const Matrix& m);

// Transition matrix stored as B * C^T with B, C of width r.
class LowRankFactorization {
 public:
  LowRankFactorization(Matrix b, Matrix c);

  const Matrix& b() const { return b_; }
  const Matrix& c() const { return c_; }
  Index rank_bound() const { return b_.cols(); }
  Index dimension() const { return b_.rows(); }

  Matrix product() const { return b_ * c_.transpose(); }
  const Vector& singular_values() const { return singular_values_; }
  double spectral_norm() const {
    return singular_values_.size() ? singular_values_(0) : 0.0;
  }
  // Membership in M(rho, r) up to 1e-8 slack on the spectral norm.
  bool within_ball(double rho) const { return spectral_norm() <= rho + 1e-8; }

  // Rank-r factorization of the best rank-r approximation of m.
  static LowRankFactorization from_matrix(const Matrix& m, Index rank);

 private:
  Matrix b_;
  Matrix c_;
  Vector singular_values_;
};

}  // namespace lrvar
