#pragma once

// Dressed-state analysis of one sech-driven transition and first-order
// perturbation theory around adiabatic following.
//
// Everything here works in the accelerated frame of the pulse, where the
// two-level block (|e>, |i>) reads
//
//   H = x(t) |e><e| + Omega_R(t)/2 (|i><e| + h.c.),   x = Delta_eff + phidot.
//
// Phase integrals run from the pulse center; perturbative integrals start at
// the window start.

#include "reqc/ion_model.hpp"
#include "reqc/linalg.hpp"
#include "reqc/pulse.hpp"

#include <boost/math/quadrature/gauss.hpp>
#include <boost/math/quadrature/gauss_kronrod.hpp>

#include <array>
#include <cmath>
#include <limits>
#include <span>
#include <stdexcept>
#include <vector>

namespace reqc {

class DegenerateInputError : public std::domain_error {
 public:
  using std::domain_error::domain_error;
};

struct DressedEnergies {
  double e_minus;
  double e_plus;
};

/// E_+- = (x +- sqrt(x^2 + Omega_R^2)) / 2, evaluated without cancellation.
inline DressedEnergies dressed_energies(double x, double omega_r) {
  const double r = std::hypot(x, omega_r);
  const double w2 = 0.25 * omega_r * omega_r;
  if (x >= 0.0) {
    const double ep = 0.5 * (x + r);
    return {ep > 0.0 ? -w2 / ep : 0.0, ep};
  }
  const double em = 0.5 * (x - r);
  return {em, -w2 / em};
}

/// Instantaneous eigenpair data. Components are ordered (|e>, |i>);
/// |+> = (cos t, sin t), |-> = (-sin t, cos t) with tan 2t = Omega_R / x.
struct DressedPoint {
  double e_minus;
  double e_plus;
  std::array<double, 2> plus;
  std::array<double, 2> minus;
};

inline DressedPoint dressed_states(double x, double omega_r) {
  if (x == 0.0 && omega_r == 0.0) throw DegenerateInputError("dressed_states: x and Omega_R both zero");
  const auto e = dressed_energies(x, omega_r);
  const double theta = 0.5 * std::atan2(omega_r, x);
  const double c = std::cos(theta);
  const double s = std::sin(theta);
  return {e.e_minus, e.e_plus, {c, s}, {-s, c}};
}

/// One sech pulse acting on one transition of one ion, reduced to a
/// two-level problem. The hyperfine shift of |1> is absorbed into the
/// effective detuning of the 1<->e transition.
struct TwoLevelDrive {
  SechPulseParams pulse;
  double detuning = 0.0;  ///< effective optical detuning Delta_eff (rad/us)

  static TwoLevelDrive make(const SechPulseParams& pulse, const IonParams& ion, Transition tr) {
    pulse.validate();
    const double d = tr == Transition::g0 ? ion.delta_opt : ion.delta_opt + ion.delta_hf;
    return {pulse, d};
  }

  double sweep(double t) const { return detuning + instantaneous_detuning(pulse, t); }
  double omega(double t) const {
    return pulse.omega0 * detail::sech(pulse.beta * (t - pulse.t_center()));
  }
  DressedEnergies energies(double t) const { return dressed_energies(sweep(t), omega(t)); }
};

/// xi = (dOmega_R/dt x - phi'' Omega_R) / (2 (x^2 + Omega_R^2)), analytic derivatives.
inline double diabatic_coupling_xi(const TwoLevelDrive& d, double t) {
  const double x = d.sweep(t);
  const double w = d.omega(t);
  const double wdot = rabi_envelope_rate(d.pulse, t);
  const double xdot = chirp_acceleration(d.pulse, t);
  const double den = 2.0 * (x * x + w * w);
  if (den == 0.0) return 0.0;
  return (wdot * x - xdot * w) / den;
}

namespace detail {

inline constexpr double kQuadTol = 1e-11;

template <class F>
double gk_integrate(F&& f, double a, double b) {
  if (a == b) return 0.0;
  return boost::math::quadrature::gauss_kronrod<double, 31>::integrate(f, a, b, 10, kQuadTol);
}

// Short smooth spans (at most one grid cell): fixed 20-point Gauss is at
// machine precision there and keeps the nested integrals cheap.
template <class F>
double gauss_short(F&& f, double a, double b) {
  if (a == b) return 0.0;
  return boost::math::quadrature::gauss<double, 20>::integrate(f, a, b);
}

template <class F>
cd gk_integrate_complex(F&& f, double a, double b) {
  const double re = gk_integrate([&](double t) { return std::real(f(t)); }, a, b);
  const double im = gk_integrate([&](double t) { return std::imag(f(t)); }, a, b);
  return {re, im};
}

inline void check_grid(std::span<const double> grid) {
  if (grid.empty()) throw ConfigError("perturbative trajectory: empty time grid");
  for (std::size_t i = 1; i < grid.size(); ++i)
    if (!(grid[i] > grid[i - 1])) throw ConfigError("perturbative trajectory: grid must be increasing");
}

/// Phase integrals of E_- and E_+ from the pulse center to every grid time.
inline std::vector<std::array<double, 2>> dressed_phases(const TwoLevelDrive& d, std::span<const double> grid) {
  auto em = [&](double t) { return d.energies(t).e_minus; };
  auto ep = [&](double t) { return d.energies(t).e_plus; };
  std::vector<std::array<double, 2>> out(grid.size());
  const double tc = d.pulse.t_center();
  out[0] = {gk_integrate(em, tc, grid[0]), gk_integrate(ep, tc, grid[0])};
  for (std::size_t k = 1; k < grid.size(); ++k)
    out[k] = {out[k - 1][0] + gk_integrate(em, grid[k - 1], grid[k]),
              out[k - 1][1] + gk_integrate(ep, grid[k - 1], grid[k])};
  return out;
}

}  // namespace detail

struct PerturbativeTrajectory {
  std::vector<double> times;
  std::vector<double> phase_minus;  ///< int_{t_center}^t E_- dt'
  std::vector<double> phase_plus;   ///< int_{t_center}^t E_+ dt'
  std::vector<cd> c_minus0;         ///< exp(-i phase_minus)
  std::vector<cd> c_plus0;          ///< exp(-i phase_plus)
  std::vector<Eigen::Matrix2cd> first_order;  ///< dressed-basis propagator from the window start
  std::vector<double> nonunitarity;            ///< max |U^dag U - 1| of the first-order propagator
  std::vector<cd> leakage;                     ///< U_{1bar 0bar}(t), when computed
};

/// Adiabatic amplitudes c_+-^(0)(t) = exp(-i int_{t_center}^t E_+- dt').
inline PerturbativeTrajectory zeroth_order(const TwoLevelDrive& d, std::span<const double> grid) {
  detail::check_grid(grid);
  PerturbativeTrajectory out;
  out.times.assign(grid.begin(), grid.end());
  for (const auto& ph : detail::dressed_phases(d, grid)) {
    out.phase_minus.push_back(ph[0]);
    out.phase_plus.push_back(ph[1]);
    out.c_minus0.push_back(std::polar(1.0, -ph[0]));
    out.c_plus0.push_back(std::polar(1.0, -ph[1]));
  }
  return out;
}

/// Adds the first-order diabatic correction. In the basis (|->, |+>) the
/// interaction-picture propagator is
///
///   U_I(t) = [[1, -conj(A)], [A, 1]],   A(t) = int_{t_start}^t xi e^{i Theta} dt',
///
/// with Theta = int_{t_center} (E_+ - E_-). The stored propagator is the
/// Schrodinger-picture one, D(t) U_I(t) D(t_start)^-1 with D = diag(c_-^(0), c_+^(0)).
/// It is not re-unitarised; |A|^2 is reported as the non-unitarity.
inline PerturbativeTrajectory first_order_propagator(const TwoLevelDrive& d, std::span<const double> grid) {
  auto out = zeroth_order(d, grid);
  const double t0 = d.pulse.t_start;
  const std::array<double, 1> start{t0};
  const auto ph0 = detail::dressed_phases(d, start)[0];

  // Theta at arbitrary t: anchor at the previous grid point.
  auto splitting = [&](double t) { return std::hypot(d.sweep(t), d.omega(t)); };
  auto integrand_from = [&](double anchor_t, double anchor_theta) {
    return [&, anchor_t, anchor_theta](double t) {
      const double theta = anchor_theta + detail::gauss_short(splitting, anchor_t, t);
      return diabatic_coupling_xi(d, t) * std::polar(1.0, theta);
    };
  };

  cd acc = 0.0;
  double prev_t = t0;
  double prev_theta = ph0[1] - ph0[0];
  for (std::size_t k = 0; k < grid.size(); ++k) {
    const double theta_k = out.phase_plus[k] - out.phase_minus[k];
    cd a;
    if (grid[k] >= prev_t) {
      acc += detail::gk_integrate_complex(integrand_from(prev_t, prev_theta), prev_t, grid[k]);
      prev_t = grid[k];
      prev_theta = theta_k;
      a = acc;
    } else {
      // before the window start: integrate backwards from t_start
      a = -detail::gk_integrate_complex(integrand_from(grid[k], theta_k), grid[k], t0);
    }
    Eigen::Matrix2cd ui;
    ui << 1.0, -std::conj(a), a, 1.0;
    const Eigen::Matrix2cd dt = Eigen::Vector2cd(out.c_minus0[k], out.c_plus0[k]).asDiagonal();
    const Eigen::Matrix2cd d0inv = Eigen::Vector2cd(std::polar(1.0, ph0[0]), std::polar(1.0, ph0[1])).asDiagonal();
    out.first_order.push_back(dt * ui * d0inv);
    out.nonunitarity.push_back(std::norm(a));
  }
  return out;
}

/// Dressed-basis components (c_-, c_+) of a state given in (|e>, |i>).
inline Eigen::Vector2cd to_dressed(const TwoLevelDrive& d, double t, const Eigen::Vector2cd& ei) {
  const auto p = dressed_states(d.sweep(t), d.omega(t));
  return {p.minus[0] * ei(0) + p.minus[1] * ei(1), p.plus[0] * ei(0) + p.plus[1] * ei(1)};
}

inline Eigen::Vector2cd from_dressed(const TwoLevelDrive& d, double t, const Eigen::Vector2cd& c) {
  const auto p = dressed_states(d.sweep(t), d.omega(t));
  return {c(0) * p.minus[0] + c(1) * p.plus[0], c(0) * p.minus[1] + c(1) * p.plus[1]};
}

/// First-order states in (|e>, |i>) (accelerated frame) on the trajectory grid,
/// starting from `initial` at the window start.
inline std::vector<Eigen::Vector2cd> first_order_states(const TwoLevelDrive& d, const PerturbativeTrajectory& tr,
                                                        const Eigen::Vector2cd& initial) {
  const Eigen::Vector2cd c0 = to_dressed(d, d.pulse.t_start, initial);
  std::vector<Eigen::Vector2cd> out;
  out.reserve(tr.times.size());
  for (std::size_t k = 0; k < tr.times.size(); ++k)
    out.push_back(from_dressed(d, tr.times[k], tr.first_order[k] * c0));
  return out;
}

/// Bar-state leakage amplitude while the 0bar<->e transition is driven:
///
///   U(t) = -(i delta/2) int_{t_start}^t Omega_R / sqrt(Omega_R^2 + 4 E_+^2) e^{-i int_{t_center}^{t'} E_+} dt'
///
/// The same expression holds for the mirrored 1bar<->e case.
inline std::vector<cd> leakage_amplitude(const TwoLevelDrive& d, double delta_hf, std::span<const double> grid) {
  detail::check_grid(grid);
  std::vector<cd> out;
  out.reserve(grid.size());
  if (delta_hf == 0.0) {
    out.assign(grid.size(), cd{0.0, 0.0});
    return out;
  }
  auto ep = [&](double t) { return d.energies(t).e_plus; };
  auto weight = [&](double t) {
    const double w = d.omega(t);
    const double e = d.energies(t).e_plus;
    const double den = std::sqrt(w * w + 4.0 * e * e);
    return den == 0.0 ? 0.0 : w / den;
  };
  const double t0 = d.pulse.t_start;
  auto integrand_from = [&](double anchor_t, double anchor_phase) {
    return [&, anchor_t, anchor_phase](double t) {
      const double phase = anchor_phase + detail::gauss_short(ep, anchor_t, t);
      return weight(t) * std::polar(1.0, -phase);
    };
  };
  const cd pref = -I * 0.5 * delta_hf;
  double prev_t = t0;
  double prev_phase = detail::gk_integrate(ep, d.pulse.t_center(), t0);
  cd acc = 0.0;
  for (double t : grid) {
    if (t >= prev_t) {
      acc += detail::gk_integrate_complex(integrand_from(prev_t, prev_phase), prev_t, t);
      prev_phase += detail::gk_integrate(ep, prev_t, t);
      prev_t = t;
      out.push_back(pref * acc);
    } else {
      const double ph = detail::gk_integrate(ep, d.pulse.t_center(), t);
      out.push_back(-pref * detail::gk_integrate_complex(integrand_from(t, ph), t, t0));
    }
  }
  return out;
}

/// First time inside the window at which E_+ reaches `ratio * delta`, by
/// bisection; returns NaN when never reached.
inline double energy_ratio_crossing(const TwoLevelDrive& d, double delta, double ratio) {
  const double target = ratio * std::abs(delta);
  auto f = [&](double t) { return d.energies(t).e_plus - target; };
  const double a0 = d.pulse.t_start;
  const double b0 = d.pulse.t_end();
  const int n = 2000;
  double prev = a0;
  for (int k = 1; k <= n; ++k) {
    const double t = a0 + (b0 - a0) * k / n;
    if (f(prev) < 0.0 && f(t) >= 0.0) {
      double lo = prev, hi = t;
      for (int it = 0; it < 100; ++it) {
        const double mid = 0.5 * (lo + hi);
        (f(mid) < 0.0 ? lo : hi) = mid;
      }
      return 0.5 * (lo + hi);
    }
    prev = t;
  }
  return std::numeric_limits<double>::quiet_NaN();
}

struct BlochVector {
  double x;
  double y;
  double z;
  double distance(const BlochVector& o) const { return std::sqrt((x - o.x) * (x - o.x) + (y - o.y) * (y - o.y) + (z - o.z) * (z - o.z)); }
};

/// North pole |e>, South pole |i>. Input amplitudes ordered (|e>, |i>).
inline BlochVector bloch_coordinates(const Eigen::Vector2cd& ei) {
  if (std::abs(ei.squaredNorm() - 1.0) > 1e-6) throw ConfigError("bloch_coordinates: state is not normalized");
  const cd coh = std::conj(ei(0)) * ei(1);
  return {2.0 * std::real(coh), 2.0 * std::imag(coh), std::norm(ei(0)) - std::norm(ei(1))};
}

enum class BlochFrame {
  accelerated,     ///< co-moving with the chirped pulse phase
  channel_center,  ///< fixed frame rotating at the channel-center frequency
  ion_frequency,   ///< fixed frame rotating at the ion's own transition frequency
};

/// Re-expresses channel-frame amplitudes (|e>, |i>) in the requested frame.
inline Eigen::Vector2cd to_frame(const Eigen::Vector2cd& channel_frame, const TwoLevelDrive& d, double t,
                                 BlochFrame frame) {
  Eigen::Vector2cd out = channel_frame;
  switch (frame) {
    case BlochFrame::accelerated:
      out(0) *= std::polar(1.0, -(d.pulse.phase + chirp_phase(d.pulse, t)));
      break;
    case BlochFrame::ion_frequency:
      out(0) *= std::polar(1.0, d.detuning * (t - d.pulse.t_center()));
      break;
    case BlochFrame::channel_center:
      break;
  }
  return out;
}

}  // namespace reqc
