#pragma once

// Reference computations used as test oracles. Each one is deliberately
// written differently from the library code it checks.

#include <Eigen/Dense>
#include <algorithm>
#include <cmath>
#include <map>
#include <random>
#include <vector>

namespace oracle {

using Matrix = Eigen::MatrixXd;
using Vector = Eigen::VectorXd;

inline Matrix random_gaussian(int rows, int cols, std::mt19937_64& gen) {
  std::normal_distribution<double> n(0.0, 1.0);
  Matrix m(rows, cols);
  for (int j = 0; j < cols; ++j) {
    for (int i = 0; i < rows; ++i) m(i, j) = n(gen);
  }
  return m;
}

inline Matrix random_orthonormal(int rows, int cols, std::mt19937_64& gen) {
  Eigen::HouseholderQR<Matrix> qr(random_gaussian(rows, cols, gen));
  return qr.householderQ() * Matrix::Identity(rows, cols);
}

// Matrix with prescribed singular values.
inline Matrix with_singular_values(int m, const std::vector<double>& s,
                                   std::mt19937_64& gen) {
  const int r = static_cast<int>(s.size());
  const Matrix u = random_orthonormal(m, r, gen);
  const Matrix v = random_orthonormal(m, r, gen);
  Vector d(r);
  for (int i = 0; i < r; ++i) d(i) = s[static_cast<size_t>(i)];
  return u * d.asDiagonal() * v.transpose();
}

// Least squares Y ~ Q Z through a column-pivoted QR of Z^T, never forming
// Z Z^T.
inline Matrix least_squares(const Matrix& y, const Matrix& z) {
  return z.transpose().colPivHouseholderQr().solve(y.transpose()).transpose();
}

// Fixed point of S <- A S A^T + Sigma by plain iteration.
inline Matrix lyapunov_iteration(const Matrix& a, const Matrix& sigma,
                                 int iters = 500) {
  Matrix s = sigma;
  for (int k = 0; k < iters; ++k) s = a * s * a.transpose() + sigma;
  return s;
}

inline double frobenius(const Matrix& m) {
  double s = 0.0;
  for (int i = 0; i < m.rows(); ++i) {
    for (int j = 0; j < m.cols(); ++j) s += m(i, j) * m(i, j);
  }
  return std::sqrt(s);
}

// Nuclear norm of a 2x2 matrix: sqrt(||X||_F^2 + 2 |det X|).
inline double nuclear_2x2(double a, double b, double c, double d) {
  return std::sqrt(a * a + b * b + c * c + d * d + 2.0 * std::abs(a * d - b * c));
}

// Minimum of 0.5 ||X - M||_F^2 + tau ||X||_* over the grid {lo + k step}^4.
// Exhaustive, with branch-and-bound on the quadratic part (the nuclear term
// is nonnegative so partial quadratic sums are valid lower bounds).
inline double prox_grid_minimum(const Eigen::Matrix2d& m, double tau,
                                double lo = -4.0, double hi = 4.0,
                                double step = 0.05) {
  const int count = static_cast<int>(std::lround((hi - lo) / step)) + 1;
  std::vector<double> g(static_cast<size_t>(count));
  for (int k = 0; k < count; ++k) g[static_cast<size_t>(k)] = lo + k * step;
  auto objective = [&](double a, double b, double c, double d) {
    const double q = (a - m(0, 0)) * (a - m(0, 0)) + (b - m(0, 1)) * (b - m(0, 1)) +
                     (c - m(1, 0)) * (c - m(1, 0)) + (d - m(1, 1)) * (d - m(1, 1));
    return 0.5 * q + tau * nuclear_2x2(a, b, c, d);
  };
  // Upper bound from a coarse pass over every 10th grid value.
  double best = objective(0.0, 0.0, 0.0, 0.0);
  for (int i = 0; i < count; i += 10) {
    for (int j = 0; j < count; j += 10) {
      for (int k = 0; k < count; k += 10) {
        for (int l = 0; l < count; l += 10) {
          best = std::min(best, objective(g[i], g[j], g[k], g[l]));
        }
      }
    }
  }
  for (double a : g) {
    const double pa = 0.5 * (a - m(0, 0)) * (a - m(0, 0));
    if (pa >= best) continue;
    for (double b : g) {
      const double pb = pa + 0.5 * (b - m(0, 1)) * (b - m(0, 1));
      if (pb >= best) continue;
      for (double c : g) {
        const double pc = pb + 0.5 * (c - m(1, 0)) * (c - m(1, 0));
        if (pc >= best) continue;
        for (double d : g) {
          const double pd = pc + 0.5 * (d - m(1, 1)) * (d - m(1, 1));
          if (pd >= best) continue;
          best = std::min(best, objective(a, b, c, d));
        }
      }
    }
  }
  return best;
}

// Brute-force argmin_r risk(r) + c * sqrt(r), smallest r on exact ties.
inline int argmin_rank(const std::map<int, double>& risks, double c) {
  int best_r = -1;
  double best = 0.0;
  for (const auto& [r, risk] : risks) {
    const double v = risk + c * std::sqrt(static_cast<double>(r));
    if (best_r < 0 || v < best) {
      best = v;
      best_r = r;
    }
  }
  return best_r;
}

// Kolmogorov-Smirnov statistic of a sample against Uniform[0, 1].
inline double ks_uniform(std::vector<double> x) {
  std::sort(x.begin(), x.end());
  const double n = static_cast<double>(x.size());
  double d = 0.0;
  for (size_t i = 0; i < x.size(); ++i) {
    const double f = std::clamp(x[i], 0.0, 1.0);
    d = std::max({d, (static_cast<double>(i) + 1.0) / n - f,
                  f - static_cast<double>(i) / n});
  }
  return d;
}

// Sample covariance with divisor n (rows are coordinates, columns time).
inline Matrix covariance(const Matrix& x) {
  const Vector mean = x.rowwise().mean();
  const Matrix c = x.colwise() - mean;
  return c * c.transpose() / static_cast<double>(x.cols());
}

}  // namespace oracle
