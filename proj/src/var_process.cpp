#include "lowrank_var/var_process.hpp"

#include <cmath>
#include <iostream>
#include <mutex>
#include <sstream>
#include <string>

#include "lowrank_var/csv_io.hpp"
#include "lowrank_var/errors.hpp"

namespace lrvar {

namespace {

std::mutex& sink_mutex() {
  static std::mutex m;
  return m;
}

std::function<void(std::string_view)>& sink() {
  static std::function<void(std::string_view)> s = [](std::string_view msg) {
    std::cerr << "warning: " << msg << '\n';
  };
  return s;
}

void require_square(const Matrix& a, const char* who) {
  if (a.rows() != a.cols() || a.rows() == 0) {
    std::ostringstream os;
    os << who << ": transition matrix must be square and nonempty, got "
       << a.rows() << "x" << a.cols();
    throw DomainError(os.str());
  }
}

void require_contraction(const Matrix& a, const char* who) {
  const double norm = spectral_norm(a);
  if (!(norm < 1.0)) {
    std::ostringstream os;
    os << who << ": spectral norm " << norm << " is not below 1";
    throw ContractionError(os.str());
  }
}

}  // namespace

void set_warning_sink(std::function<void(std::string_view)> s) {
  std::lock_guard lock(sink_mutex());
  sink() = std::move(s);
}

void emit_warning(std::string_view message) {
  std::lock_guard lock(sink_mutex());
  if (sink()) sink()(message);
}

void TransitionSpec::validate() const {
  if (dimension < 1) throw DomainError("TransitionSpec: dimension must be >= 1");
  if (true_rank < 1 || true_rank > dimension) {
    throw DomainError("TransitionSpec: true rank " + std::to_string(true_rank) +
                      " outside 1.." + std::to_string(dimension));
  }
  if (!(singular_law_lambda > 0.0)) {
    throw DomainError("TransitionSpec: lambda must be positive");
  }
  if (!(spectral_bound > 0.0 && spectral_bound <= 1.0)) {
    throw DomainError("TransitionSpec: spectral bound must lie in (0, 1]");
  }
}

void NoiseSpec::validate() const {
  if (!(sigma > 0.0)) throw DomainError("NoiseSpec: sigma must be positive");
  if (family == NoiseFamily::truncated_gaussian && !(truncation_bound > 0.0)) {
    throw DomainError("NoiseSpec: truncation bound must be positive");
  }
}

double NoiseSpec::draw(Rng& rng) const {
  if (family == NoiseFamily::gaussian) return sigma * rng.normal();
  for (;;) {
    const double x = sigma * rng.normal();
    if (std::abs(x) <= truncation_bound) return x;
  }
}

std::string to_string(NoiseFamily family) {
  return family == NoiseFamily::gaussian ? "gaussian" : "truncated-gaussian";
}

NoiseFamily noise_family_from_string(std::string_view name) {
  if (name == "gaussian") return NoiseFamily::gaussian;
  if (name == "truncated-gaussian") return NoiseFamily::truncated_gaussian;
  throw DomainError("unknown noise family '" + std::string(name) + "'");
}

Trajectory::Trajectory(Matrix values) : values_(std::move(values)) {
  if (!values_.allFinite()) {
    throw DomainError("Trajectory: non-finite observations");
  }
}

void LaggedPairs::validate() const {
  if (targets.rows() != regressors.rows() ||
      targets.cols() != regressors.cols()) {
    throw DomainError("LaggedPairs: targets and regressors differ in shape");
  }
  if (targets.cols() < 1) {
    throw DomainError("LaggedPairs: need at least one (X_{t-1}, X_t) pair");
  }
  if (!targets.allFinite() || !regressors.allFinite()) {
    throw DomainError("LaggedPairs: non-finite values");
  }
}

LaggedPairs LaggedPairs::from_trajectory(const Trajectory& traj) {
  if (traj.length() < 2) {
    throw DomainError("trajectory length " + std::to_string(traj.length()) +
                      " is below 2");
  }
  const Index pairs = traj.length() - 1;
  return {traj.values().rightCols(pairs), traj.values().leftCols(pairs)};
}

Matrix generate_transition(const TransitionSpec& spec, std::uint64_t seed) {
  spec.validate();
  const Index m = spec.dimension;
  const Index r = spec.true_rank;
  Rng rng(seed);
  auto uniform_matrix = [&] {
    Matrix x(m, r);
    for (Index j = 0; j < r; ++j)
      for (Index i = 0; i < m; ++i) x(i, j) = rng.uniform();
    return x;
  };
  const Matrix u = orthonormalize_columns(uniform_matrix());
  const Matrix v = orthonormalize_columns(uniform_matrix());
  Vector d(r);
  for (Index j = 0; j < r; ++j) {
    d(j) = spec.spectral_bound * rng.beta_lambda_one(spec.singular_law_lambda);
  }
  return u * d.asDiagonal() * v.transpose();
}

Matrix stationary_covariance(const Matrix& a, const Matrix& noise_cov) {
  require_square(a, "stationary_covariance");
  if (noise_cov.rows() != a.rows() || noise_cov.cols() != a.cols()) {
    throw DomainError("stationary_covariance: noise covariance shape mismatch");
  }
  require_contraction(a, "stationary_covariance");
  // Doubling: after k rounds s = sum_{j < 2^k} A^j Sigma (A^j)^T.
  Matrix s = noise_cov;
  Matrix power = a;
  for (int round = 0; round < 64; ++round) {
    const Matrix increment = power * s * power.transpose();
    s += increment;
    if (increment.norm() <= 1e-16 * s.norm()) break;
    power = power * power;
  }
  return 0.5 * (s + s.transpose());
}

Matrix fixed_point_covariance(const Matrix& a, const Matrix& noise_cov) {
  require_square(a, "fixed_point_covariance");
  if (noise_cov.rows() != a.rows() || noise_cov.cols() != a.cols()) {
    throw DomainError("fixed_point_covariance: noise covariance shape mismatch");
  }
  require_contraction(a, "fixed_point_covariance");
  const Index m = a.rows();
  const Matrix inv = (Matrix::Identity(m, m) - a).partialPivLu().inverse();
  return inv * noise_cov * inv.transpose();
}

Trajectory simulate(const Matrix& a, const NoiseSpec& noise, Index n,
                    std::uint64_t seed, int burn_in) {
  require_square(a, "simulate");
  noise.validate();
  if (n < 2) throw DomainError("simulate: length must be at least 2");
  if (burn_in < 0) throw DomainError("simulate: burn-in must be nonnegative");
  const double norm = spectral_norm(a);
  if (norm > 1.0 + 1e-12) {
    std::ostringstream os;
    os << "simulate: spectral norm " << norm << " exceeds 1";
    throw ContractionError(os.str());
  }
  if (norm >= 1.0) {
    emit_warning("simulate: transition matrix has spectral norm 1; the "
                 "process is not a strict contraction");
  }
  const Index m = a.rows();
  Rng rng(seed);
  Vector state = Vector::Zero(m);
  Vector shock(m);
  Matrix out(m, n);
  const Index total = burn_in + n;
  for (Index t = 0; t < total; ++t) {
    for (Index i = 0; i < m; ++i) shock(i) = noise.draw(rng);
    state = a * state + shock;
    if (t >= burn_in) out.col(t - burn_in) = state;
  }
  return Trajectory(std::move(out));
}

void write_trajectory_csv(const Trajectory& traj, std::ostream& out) {
  out << 't';
  for (Index i = 0; i < traj.dimension(); ++i) out << ",x" << (i + 1);
  out << '\n';
  for (Index t = 0; t < traj.length(); ++t) {
    out << (t + 1);
    for (Index i = 0; i < traj.dimension(); ++i) {
      out << ',' << format_double(traj.values()(i, t));
    }
    out << '\n';
  }
}

Trajectory read_trajectory_csv(std::istream& in) {
  std::string line;
  if (!std::getline(in, line)) throw DataError("trajectory CSV: empty input");
  const auto header = split_csv_line(line);
  if (header.empty() || trim(header[0]) != "t") {
    throw DataError("trajectory CSV: header must start with 't'");
  }
  const Index m = static_cast<Index>(header.size()) - 1;
  if (m < 1) throw DataError("trajectory CSV: no series columns");
  std::vector<double> values;
  Index rows = 0;
  long line_no = 1;
  while (std::getline(in, line)) {
    ++line_no;
    if (trim(line).empty()) continue;
    const auto fields = split_csv_line(line);
    if (static_cast<Index>(fields.size()) != m + 1) {
      throw DataError("trajectory CSV: line " + std::to_string(line_no) +
                      " has " + std::to_string(fields.size()) + " fields");
    }
    for (Index i = 1; i <= m; ++i) {
      const auto v = parse_double(fields[i]);
      if (!v || !std::isfinite(*v)) {
        throw DataError("trajectory CSV: non-numeric value on line " +
                        std::to_string(line_no));
      }
      values.push_back(*v);
    }
    ++rows;
  }
  Matrix data(m, rows);
  for (Index t = 0; t < rows; ++t)
    for (Index i = 0; i < m; ++i) data(i, t) = values[t * m + i];
  return Trajectory(std::move(data));
}

}  // namespace lrvar
