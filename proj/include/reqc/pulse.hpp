#pragma once

// Complex hyperbolic secant pulse.
//
//   Omega(t) = Omega0 sech(beta tau)^(1 - i mu),   tau = t - t_center
//            = Omega_R(tau) exp(i [phase + mu ln cosh(beta tau)])
//
// All rates are angular (rad/us); times are in microseconds. The envelope is
// hard-truncated to the window [t_start, t_start + duration].

#include "reqc/linalg.hpp"

#include <cmath>
#include <string>

namespace reqc {

/// Multiplier applied to frequency-typed inputs quoted in MHz: 2 pi when the
/// quoted numbers are cyclic frequencies, 1 when they are taken as rad/us.
inline double frequency_scale(bool apply_2pi) { return apply_2pi ? 2.0 * pi : 1.0; }

struct SechPulseParams {
  double omega0 = 4.0;    ///< peak Rabi frequency (rad/us)
  double mu = 3.0;        ///< chirp parameter
  double beta = 1.28;     ///< envelope rate (1/us)
  double duration = 1.5;  ///< window length T (us)
  double phase = 0.0;     ///< constant phase offset (rad)
  double t_start = 0.0;   ///< window start in program time (us)

  double t_center() const { return t_start + 0.5 * duration; }
  double t_end() const { return t_start + duration; }
  bool in_window(double t) const { return t >= t_start && t <= t_end(); }

  void validate() const {
    if (!(omega0 > 0.0)) throw ConfigError("sech pulse: omega0 must be > 0");
    if (!(beta > 0.0)) throw ConfigError("sech pulse: beta must be > 0");
    if (!(duration > 0.0)) throw ConfigError("sech pulse: duration must be > 0");
    if (!(mu >= 0.0)) throw ConfigError("sech pulse: mu must be >= 0");
  }

  /// Same envelope with every rate multiplied by `s` (frequency convention).
  SechPulseParams scaled(double s) const {
    SechPulseParams p = *this;
    p.omega0 *= s;
    p.beta *= s;
    return p;
  }
};

namespace detail {

// ln cosh(x) without overflow for large |x|.
inline double log_cosh(double x) {
  const double a = std::abs(x);
  return a + std::log1p(std::exp(-2.0 * a)) - std::numbers::ln2;
}

inline double sech(double x) { return 1.0 / std::cosh(x); }

}  // namespace detail

/// Omega0 sech(beta (t - t_center)) inside the window, zero outside.
inline double rabi_envelope(const SechPulseParams& p, double t) {
  if (!p.in_window(t)) return 0.0;
  return p.omega0 * detail::sech(p.beta * (t - p.t_center()));
}

/// d/dt of the chirp phase: mu beta tanh(beta (t - t_center)).
/// Not truncated; the chirp is only meaningful where the envelope is nonzero.
inline double instantaneous_detuning(const SechPulseParams& p, double t) {
  return p.mu * p.beta * std::tanh(p.beta * (t - p.t_center()));
}

/// Chirp phase mu ln cosh(beta (t - t_center)), zero at the pulse center.
inline double chirp_phase(const SechPulseParams& p, double t) {
  return p.mu * detail::log_cosh(p.beta * (t - p.t_center()));
}

/// Analytic time derivative of the (untruncated) envelope.
inline double rabi_envelope_rate(const SechPulseParams& p, double t) {
  const double x = p.beta * (t - p.t_center());
  return -p.omega0 * p.beta * detail::sech(x) * std::tanh(x);
}

/// Analytic second derivative of the chirp phase.
inline double chirp_acceleration(const SechPulseParams& p, double t) {
  const double s = detail::sech(p.beta * (t - p.t_center()));
  return p.mu * p.beta * p.beta * s * s;
}

inline cd complex_rabi(const SechPulseParams& p, double t) {
  const double r = rabi_envelope(p, t);
  if (r == 0.0) return {0.0, 0.0};
  return std::polar(r, p.phase + chirp_phase(p, t));
}

/// Integral of Omega_R^2 over the window: (2 Omega0^2 / beta) tanh(beta T / 2).
inline double pulse_energy(const SechPulseParams& p) {
  return 2.0 * p.omega0 * p.omega0 / p.beta * std::tanh(0.5 * p.beta * p.duration);
}

}  // namespace reqc
