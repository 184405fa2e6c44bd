#pragma once

// Small dense complex linear algebra shared by every module, plus the
// error types thrown across the library.

#include <Eigen/Dense>

#include <complex>
#include <numbers>
#include <stdexcept>
#include <string>

namespace reqc {

using cd = std::complex<double>;
using Matrix = Eigen::MatrixXcd;
using Vector = Eigen::VectorXcd;

inline constexpr double pi = std::numbers::pi;
inline constexpr cd I{0.0, 1.0};

/// Raised for invalid parameters, malformed programs and bad configuration.
class ConfigError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Raised when a matrix or state has the wrong dimension for an operation.
class DimensionError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Raised when the numerical integrator cannot make progress. Carries the
/// program time at which the step size collapsed.
class IntegrationError : public std::runtime_error {
 public:
  IntegrationError(const std::string& what, double time)
      : std::runtime_error(what + " (t = " + std::to_string(time) + " us)"), time_(time) {}
  double time() const noexcept { return time_; }

 private:
  double time_;
};

inline Matrix kron(const Matrix& a, const Matrix& b) {
  Matrix out(a.rows() * b.rows(), a.cols() * b.cols());
  for (Eigen::Index i = 0; i < a.rows(); ++i)
    for (Eigen::Index j = 0; j < a.cols(); ++j)
      out.block(i * b.rows(), j * b.cols(), b.rows(), b.cols()) = a(i, j) * b;
  return out;
}

/// Outer product |ket><bra| of two basis indices in dimension n.
inline Matrix projector(Eigen::Index n, Eigen::Index ket, Eigen::Index bra) {
  Matrix m = Matrix::Zero(n, n);
  m(ket, bra) = 1.0;
  return m;
}

inline double max_abs(const Matrix& m) { return m.cwiseAbs().maxCoeff(); }

inline double hermiticity_defect(const Matrix& m) { return max_abs(m - m.adjoint()); }

inline double unitarity_defect(const Matrix& u) {
  return max_abs(u.adjoint() * u - Matrix::Identity(u.cols(), u.cols()));
}

/// Operator distance up to a global phase: min over phi of ||a - e^{i phi} b||_F,
/// normalised by sqrt(dim) so that it is comparable across dimensions.
inline double distance_up_to_phase(const Matrix& a, const Matrix& b) {
  if (a.rows() != b.rows() || a.cols() != b.cols())
    throw DimensionError("distance_up_to_phase: shape mismatch");
  const cd overlap = (b.adjoint() * a).trace();
  const double norm2 = a.squaredNorm() + b.squaredNorm() - 2.0 * std::abs(overlap);
  return std::sqrt(std::max(norm2, 0.0) / static_cast<double>(a.cols()));
}

}  // namespace reqc
