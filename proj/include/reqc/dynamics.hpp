#pragma once

// Numerical propagation: Schrodinger equation for states and propagators,
// Lindblad master equation for density matrices.
//
// The stepper is Boost.Odeint's controlled Runge-Kutta-Fehlberg 7(8) driven
// by a manual step loop so that step-size collapse is reported with the time
// at which it happened and so that density matrices can be re-symmetrised
// after every accepted step.
//
// Master equation sign: drho/dt = i[rho, H] + L(rho), which is the same as
// -i[H, rho] + L(rho), so the closed-system limit agrees with i dpsi/dt = H psi.

#include "reqc/ion_model.hpp"
#include "reqc/linalg.hpp"

#include <boost/numeric/odeint/stepper/controlled_runge_kutta.hpp>
#include <boost/numeric/odeint/stepper/generation.hpp>
#include <boost/numeric/odeint/stepper/runge_kutta_fehlberg78.hpp>

#include <algorithm>
#include <cmath>
#include <functional>
#include <utility>
#include <vector>

namespace reqc {

/// H(t) evaluated into a caller-owned buffer. `breakpoints` lists times at
/// which H is discontinuous (pulse window edges); integration never steps
/// across one.
struct TimeDependentHamiltonian {
  Eigen::Index dim = 0;
  std::function<void(double, Matrix&)> fill;
  std::vector<double> breakpoints;

  Matrix operator()(double t) const {
    Matrix h(dim, dim);
    fill(t, h);
    return h;
  }

  static TimeDependentHamiltonian constant(const Matrix& h) {
    return {h.rows(), [h](double, Matrix& out) { out = h; }, {}};
  }

  static TimeDependentHamiltonian from_function(Eigen::Index dim, std::function<Matrix(double)> f,
                                                std::vector<double> breakpoints = {}) {
    return {dim, [f = std::move(f)](double t, Matrix& out) { out = f(t); },
            std::move(breakpoints)};
  }
};

struct Tolerances {
  double abs = 1e-9;
  double rel = 1e-9;
  double min_step = 1e-13;           ///< us; smaller accepted steps count as failure
  std::size_t max_steps = 50'000'000;

  static Tolerances uniform(double tol) { return {tol, tol}; }
};

struct QuantumState {
  Vector psi;

  Eigen::Index dim() const { return psi.size(); }
  double norm() const { return psi.norm(); }

  static QuantumState basis(Eigen::Index dim, Eigen::Index k) {
    Vector v = Vector::Zero(dim);
    v(k) = 1.0;
    return {std::move(v)};
  }
};

struct DensityMatrix {
  Matrix rho;

  Eigen::Index dim() const { return rho.rows(); }
  cd trace() const { return rho.trace(); }

  static DensityMatrix pure(const Vector& psi) { return {psi * psi.adjoint()}; }

  double min_eigenvalue() const {
    Eigen::SelfAdjointEigenSolver<Matrix> es(0.5 * (rho + rho.adjoint()), Eigen::EigenvaluesOnly);
    return es.eigenvalues().minCoeff();
  }

  /// <psi|rho|psi>
  double overlap(const Vector& psi) const { return std::real(psi.dot(rho * psi)); }
};

/// A collapse operator C. Jump operators contribute C rho C^dag; sink
/// operators (recycles = false) only damp, removing population from the
/// simulated manifold.
struct CollapseOperator {
  Matrix op;
  bool recycles = true;
};

namespace detail {

using ode_state = std::vector<cd>;

inline std::vector<double> segment_points(const TimeDependentHamiltonian& h, double t0, double t1) {
  std::vector<double> pts{t0};
  std::vector<double> inner;
  for (double b : h.breakpoints)
    if (b > t0 && b < t1) inner.push_back(b);
  std::sort(inner.begin(), inner.end());
  for (double b : inner)
    if (b - pts.back() > 1e-12) pts.push_back(b);
  if (t1 - pts.back() > 1e-12 || pts.size() == 1) pts.push_back(t1);
  else pts.back() = t1;
  return pts;
}

/// Adaptive integration of dx/dt = rhs(x, t) from t0 to t1 honoring the
/// breakpoints of `h`. `after_step` may modify the state after each accepted
/// step; `at_breakpoint` is called at every segment end.
template <class Rhs, class AfterStep, class AtBreakpoint>
void integrate(Rhs&& rhs, ode_state& x, const TimeDependentHamiltonian& h, double t0, double t1,
               const Tolerances& tol, AfterStep&& after_step, AtBreakpoint&& at_breakpoint) {
  namespace odeint = boost::numeric::odeint;
  if (t1 < t0) throw ConfigError("propagation: t1 must be >= t0");
  if (t1 == t0) return;
  auto stepper = odeint::make_controlled(tol.abs, tol.rel, odeint::runge_kutta_fehlberg78<ode_state>());
  // H is evaluated strictly inside the current segment so that a pulse
  // starting exactly at a segment end never leaks into it.
  double seg_lo = t0;
  double seg_hi = t1;
  auto system = [&](const ode_state& y, ode_state& dy, double t) {
    const double eps = 1e-12 * std::max(1.0, std::abs(seg_hi));
    const double te = seg_hi - seg_lo > 4.0 * eps ? std::clamp(t, seg_lo + eps, seg_hi - eps) : 0.5 * (seg_lo + seg_hi);
    rhs(y, dy, te);
  };

  const auto pts = segment_points(h, t0, t1);
  double dt = std::min(1e-3, t1 - t0);
  std::size_t steps = 0;
  for (std::size_t s = 0; s + 1 < pts.size(); ++s) {
    double t = pts[s];
    const double end = pts[s + 1];
    seg_lo = t;
    seg_hi = end;
    while (end - t > 1e-14 * std::max(1.0, std::abs(end))) {
      const bool clamped = t + dt > end;
      const double saved_dt = dt;
      if (clamped) dt = end - t;
      const auto result = stepper.try_step(system, x, t, dt);
      if (result == odeint::success) {
        for (const cd& v : x)
          if (!std::isfinite(v.real()) || !std::isfinite(v.imag())) throw IntegrationError("non-finite state", t);
        after_step(x);
        if (clamped) dt = std::max(dt, saved_dt);
        if (++steps > tol.max_steps) throw IntegrationError("step budget exhausted", t);
      } else if (dt < tol.min_step) {
        throw IntegrationError("step size underflow", t);
      }
    }
    at_breakpoint(x, end);
  }
}

inline auto no_op_step = [](ode_state&) {};
inline auto no_op_break = [](ode_state&, double) {};

}  // namespace detail

/// Solves i dY/dt = H(t) Y for a block of column states.
inline Matrix propagate_columns(const TimeDependentHamiltonian& h, const Matrix& y0, double t0,
                                double t1, const Tolerances& tol = {}) {
  if (y0.rows() != h.dim) throw DimensionError("propagate: state dimension does not match H");
  const Eigen::Index n = y0.rows();
  const Eigen::Index k = y0.cols();
  detail::ode_state x(y0.data(), y0.data() + n * k);
  Matrix hbuf(n, n);
  auto rhs = [&](const detail::ode_state& y, detail::ode_state& dy, double t) {
    h.fill(t, hbuf);
    Eigen::Map<const Matrix> ym(y.data(), n, k);
    Eigen::Map<Matrix> dym(dy.data(), n, k);
    dym.noalias() = hbuf * ym;
    dym *= -I;
  };
  detail::integrate(rhs, x, h, t0, t1, tol, detail::no_op_step, detail::no_op_break);
  return Eigen::Map<const Matrix>(x.data(), n, k);
}

inline QuantumState propagate_state(const TimeDependentHamiltonian& h, const QuantumState& psi0,
                                    double t0, double t1, const Tolerances& tol = {}) {
  if (std::abs(psi0.norm() - 1.0) > 1e-9) throw ConfigError("propagate_state: psi0 is not normalized");
  Matrix out = propagate_columns(h, psi0.psi, t0, t1, tol);
  return {out.col(0)};
}

/// States at every grid time, integrating interval by interval from grid[0].
inline std::vector<Vector> propagate_on_grid(const TimeDependentHamiltonian& h, const Vector& psi0,
                                             std::span<const double> grid, const Tolerances& tol = {}) {
  if (grid.empty()) throw ConfigError("propagate_on_grid: empty grid");
  std::vector<Vector> out;
  out.reserve(grid.size());
  out.push_back(psi0);
  for (std::size_t i = 1; i < grid.size(); ++i)
    out.push_back(propagate_columns(h, out.back(), grid[i - 1], grid[i], tol).col(0));
  return out;
}

inline Matrix propagate_unitary(const TimeDependentHamiltonian& h, double t0, double t1,
                                const Tolerances& tol = {}) {
  return propagate_columns(h, Matrix::Identity(h.dim, h.dim), t0, t1, tol);
}

/// i[rho, H] + sum_m (C rho C^dag - 1/2 {C^dag C, rho})
inline Matrix lindblad_rhs(const Matrix& rho, const Matrix& h, std::span<const CollapseOperator> channels) {
  if (rho.rows() != rho.cols() || h.rows() != rho.rows() || h.cols() != rho.cols())
    throw DimensionError("lindblad_rhs: dimension mismatch");
  Matrix out = I * (rho * h - h * rho);
  for (const auto& c : channels) {
    if (c.op.rows() != rho.rows() || c.op.cols() != rho.cols())
      throw DimensionError("lindblad_rhs: collapse operator dimension mismatch");
    const Matrix cdc = c.op.adjoint() * c.op;
    out -= 0.5 * (cdc * rho + rho * cdc);
    if (c.recycles) out += c.op * rho * c.op.adjoint();
  }
  return out;
}

/// Spontaneous decay operators of one ion: sqrt(b0 G)|0><e|, sqrt(b1 G)|1><e|,
/// and the optional loss sink.
inline std::vector<CollapseOperator> decay_operators(const DecayChannel& decay) {
  decay.validate();
  std::vector<CollapseOperator> ops;
  if (decay.gamma == 0.0) return ops;
  ops.push_back({std::sqrt(decay.b0 * decay.gamma) * projector(kIonDim, 0, 2), true});
  ops.push_back({std::sqrt(decay.b1 * decay.gamma) * projector(kIonDim, 1, 2), true});
  if (decay.loss && decay.loss_fraction() > 0.0)
    ops.push_back({std::sqrt(decay.loss_fraction() * decay.gamma) * projector(kIonDim, 2, 2), false});
  return ops;
}

/// Decay channels of both ions, each acting on its own tensor factor.
inline std::vector<CollapseOperator> pair_decay_operators(const IonParams& control, const IonParams& target) {
  const Matrix id = Matrix::Identity(kIonDim, kIonDim);
  std::vector<CollapseOperator> ops;
  if (control.decay)
    for (auto& c : decay_operators(*control.decay)) ops.push_back({kron(c.op, id), c.recycles});
  if (target.decay)
    for (auto& c : decay_operators(*target.decay)) ops.push_back({kron(id, c.op), c.recycles});
  return ops;
}

struct MasterResult {
  DensityMatrix state;
  double min_eigenvalue = 0.0;  ///< smallest eigenvalue seen at segment ends
  double trace_drift = 0.0;     ///< |tr rho(t1) - tr rho(t0)|
};

/// Raised when the density matrix loses positivity beyond the allowed slack.
class PositivityError : public IntegrationError {
 public:
  using IntegrationError::IntegrationError;
};

inline MasterResult propagate_master(const TimeDependentHamiltonian& h, const DensityMatrix& rho0,
                                     std::span<const CollapseOperator> channels, double t0, double t1,
                                     const Tolerances& tol = Tolerances::uniform(1e-8),
                                     double positivity_slack = 1e-6) {
  const Eigen::Index n = rho0.dim();
  if (n != h.dim) throw DimensionError("propagate_master: rho dimension does not match H");
  for (const auto& c : channels)
    if (c.op.rows() != n || c.op.cols() != n)
      throw DimensionError("propagate_master: collapse operator dimension mismatch");

  // drho = -i (Heff rho - rho Heff^dag) + sum_jump C rho C^dag, Heff = H - i/2 sum C^dag C
  Matrix damping = Matrix::Zero(n, n);
  std::vector<Matrix> jumps;
  for (const auto& c : channels) {
    damping += c.op.adjoint() * c.op;
    if (c.recycles) jumps.push_back(c.op);
  }
  Matrix hbuf(n, n);
  Matrix heff(n, n);
  Matrix tmp(n, n);
  auto rhs = [&](const detail::ode_state& y, detail::ode_state& dy, double t) {
    h.fill(t, hbuf);
    heff = hbuf - 0.5 * I * damping;
    Eigen::Map<const Matrix> r(y.data(), n, n);
    Eigen::Map<Matrix> d(dy.data(), n, n);
    tmp.noalias() = heff * r;
    d = -I * tmp;
    d += (-I * tmp).adjoint();  // i rho Heff^dag for Hermitian rho
    for (const auto& c : jumps) {
      tmp.noalias() = c * r;
      d.noalias() += tmp * c.adjoint();
    }
  };

  detail::ode_state x(rho0.rho.data(), rho0.rho.data() + n * n);
  auto symmetrize = [n](detail::ode_state& y) {
    Eigen::Map<Matrix> r(y.data(), n, n);
    Matrix s = 0.5 * (r + r.adjoint());
    r = s;
  };
  double min_eig = rho0.min_eigenvalue();
  auto check = [&](detail::ode_state& y, double t) {
    DensityMatrix dm{Matrix(Eigen::Map<const Matrix>(y.data(), n, n))};
    const double e = dm.min_eigenvalue();
    min_eig = std::min(min_eig, e);
    if (e < -positivity_slack) throw PositivityError("density matrix lost positivity", t);
  };
  detail::integrate(rhs, x, h, t0, t1, tol, symmetrize, check);

  MasterResult out;
  out.state.rho = Eigen::Map<const Matrix>(x.data(), n, n);
  out.min_eigenvalue = min_eig;
  out.trace_drift = std::abs(out.state.trace() - rho0.trace());
  return out;
}

}  // namespace reqc
