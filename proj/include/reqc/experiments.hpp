#pragma once

// Gate fidelity and parameter sweeps: leakage scans, hyperfine fidelity
// surfaces, lifetime scans, rotation and NOT checks.

#include "reqc/adiabatic.hpp"
#include "reqc/dynamics.hpp"
#include "reqc/gate_compiler.hpp"
#include "reqc/ion_model.hpp"
#include "reqc/pulse.hpp"

#include <atomic>
#include <cmath>
#include <cstdint>
#include <cstdio>
#include <exception>
#include <map>
#include <mutex>
#include <optional>
#include <string>
#include <thread>
#include <vector>

namespace reqc {

inline std::vector<double> linspace(double a, double b, std::size_t n) {
  if (n == 0) throw ConfigError("linspace: empty range");
  if (n == 1) return {a};
  std::vector<double> v(n);
  for (std::size_t i = 0; i < n; ++i) v[i] = a + (b - a) * static_cast<double>(i) / static_cast<double>(n - 1);
  return v;
}

/// Runs f(i) for i in [0, n) on up to `jobs` threads. Results are written by
/// index, so output never depends on scheduling.
template <class F>
void parallel_for(std::size_t n, unsigned jobs, F&& f) {
  jobs = std::max(1u, std::min<unsigned>(jobs, static_cast<unsigned>(n)));
  if (jobs == 1) {
    for (std::size_t i = 0; i < n; ++i) f(i);
    return;
  }
  std::atomic<std::size_t> next{0};
  std::vector<std::thread> pool;
  for (unsigned j = 0; j < jobs; ++j)
    pool.emplace_back([&] {
      for (std::size_t i = next++; i < n; i = next++) f(i);
    });
  for (auto& t : pool) t.join();
}

// ---------------------------------------------------------------------------
// Fidelity

/// Equal superposition of the qubit basis states, (|00>+|01>+|10>+|11>)/2.
inline Vector equal_superposition(Eigen::Index qubit_dim = 4) {
  return Vector::Constant(qubit_dim, 1.0 / std::sqrt(static_cast<double>(qubit_dim)));
}

namespace detail {

inline std::vector<Eigen::Index> qubit_indices(Eigen::Index full_dim) {
  if (full_dim == kPairDim) return {kQubitIndices.begin(), kQubitIndices.end()};
  if (full_dim == kIonDim) return {0, 1};
  throw DimensionError("no qubit embedding for dimension " + std::to_string(full_dim));
}

/// Embeds a qubit-space vector into the full space (zero excited support).
inline Vector embed(const Vector& q, Eigen::Index full_dim) {
  const auto idx = qubit_indices(full_dim);
  if (static_cast<Eigen::Index>(idx.size()) != q.size()) throw DimensionError("embed: dimension mismatch");
  Vector v = Vector::Zero(full_dim);
  for (std::size_t k = 0; k < idx.size(); ++k) v(idx[k]) = q(static_cast<Eigen::Index>(k));
  return v;
}

/// Accepts a qubit-space state, or a full-space state without excited support.
inline Vector qubit_state(const Vector& psi, Eigen::Index qubit_dim) {
  if (std::abs(psi.norm() - 1.0) > 1e-9) throw ConfigError("psi_in is not normalized");
  if (psi.size() == qubit_dim) return psi;
  const auto idx = qubit_indices(psi.size());
  if (static_cast<Eigen::Index>(idx.size()) != qubit_dim) throw DimensionError("psi_in dimension mismatch");
  Vector q(qubit_dim);
  for (std::size_t k = 0; k < idx.size(); ++k) q(static_cast<Eigen::Index>(k)) = psi(idx[k]);
  if (std::abs(q.norm() - 1.0) > 1e-12) throw ConfigError("psi_in has support outside the qubit subspace");
  return q;
}

inline double clip_fidelity(double f) {
  constexpr double slack = 1e-9;
  if (f < -slack || f > 1.0 + slack) throw std::logic_error("fidelity outside [0, 1]: " + std::to_string(f));
  return std::clamp(f, 0.0, 1.0);
}

}  // namespace detail

/// |<psi| U0^dag U |psi>|^2. `u` may be the qubit-restricted operator (q x q),
/// the images of the qubit basis states in the full space (N x q), or the
/// full propagator (N x N).
inline double gate_fidelity(const Matrix& u, const Matrix& u0, const Vector& psi_in) {
  const Eigen::Index q = u0.cols();
  if (u0.rows() != q) throw DimensionError("gate_fidelity: U0 must be square");
  const Vector psi = detail::qubit_state(psi_in, q);
  const Vector ideal = u0 * psi;
  if (u.rows() == q && u.cols() == q) return detail::clip_fidelity(std::norm(ideal.dot(u * psi)));
  Matrix cols;
  if (u.cols() == q) {
    cols = u;
  } else if (u.cols() == u.rows()) {
    const auto idx = detail::qubit_indices(u.rows());
    cols.resize(u.rows(), q);
    for (std::size_t k = 0; k < idx.size(); ++k) cols.col(static_cast<Eigen::Index>(k)) = u.col(idx[k]);
  } else {
    throw DimensionError("gate_fidelity: unsupported operator shape");
  }
  const Vector out = cols * psi;
  return detail::clip_fidelity(std::norm(detail::embed(ideal, u.rows()).dot(out)));
}

/// <psi| U0^dag rho U0 |psi>, the linear extension of the unitary case.
inline double gate_fidelity(const DensityMatrix& rho, const Matrix& u0, const Vector& psi_in) {
  const Eigen::Index q = u0.cols();
  const Vector psi = detail::qubit_state(psi_in, q);
  const Vector ideal = u0 * psi;
  const Vector phi = rho.dim() == q ? ideal : detail::embed(ideal, rho.dim());
  return detail::clip_fidelity(rho.overlap(phi));
}

/// Closest unitary (polar factor) to a square matrix.
inline Matrix nearest_unitary(const Matrix& m) {
  Eigen::JacobiSVD<Matrix> svd(m, Eigen::ComputeFullU | Eigen::ComputeFullV);
  return svd.matrixU() * svd.matrixV().adjoint();
}

/// arg U_11 - arg U_10 - arg U_01 + arg U_00, wrapped to [0, 2 pi).
inline double cphase_invariant(const Matrix& u4) {
  if (u4.rows() != 4 || u4.cols() != 4) throw DimensionError("cphase_invariant: expects a 4x4 operator");
  double v = std::arg(u4(3, 3)) - std::arg(u4(2, 2)) - std::arg(u4(1, 1)) + std::arg(u4(0, 0));
  v = std::fmod(v, 2.0 * pi);
  return v < 0.0 ? v + 2.0 * pi : v;
}

/// FNV-1a over the fixed-precision decimal rendering of the matrix entries.
inline std::string matrix_checksum(const Matrix& m) {
  std::uint64_t h = 1469598103934665603ull;
  char buf[64];
  for (Eigen::Index j = 0; j < m.cols(); ++j)
    for (Eigen::Index i = 0; i < m.rows(); ++i)
      for (double part : {m(i, j).real(), m(i, j).imag()}) {
        const int n = std::snprintf(buf, sizeof(buf), "%.10e;", part == 0.0 ? 0.0 : part);
        for (int k = 0; k < n; ++k) {
          h ^= static_cast<unsigned char>(buf[k]);
          h *= 1099511628211ull;
        }
      }
  std::snprintf(buf, sizeof(buf), "%016llx", static_cast<unsigned long long>(h));
  return buf;
}

// ---------------------------------------------------------------------------
// Reference gate

struct ReferenceGate {
  Matrix projected;  ///< qubit block of the propagated sequence
  Matrix u0;         ///< polar (closest-unitary) factor of `projected`
  double invariant = 0.0;
  std::string checksum;
};

/// Images of the qubit basis states under a compiled two-ion program.
inline Matrix propagate_qubit_columns(const PulseProgram& prog, const IonParams& control, const IonParams& target,
                                      const BlockadeParams& blockade, const Tolerances& tol) {
  const auto h = compile(prog, control, target, blockade);
  Matrix y0 = Matrix::Zero(kPairDim, 4);
  for (Eigen::Index k = 0; k < 4; ++k) y0(kQubitIndices[static_cast<std::size_t>(k)], k) = 1.0;
  return propagate_columns(h, y0, 0.0, prog.duration(), tol);
}

inline Matrix restrict_to_qubits(const Matrix& cols) {
  Matrix u(4, 4);
  for (Eigen::Index r = 0; r < 4; ++r) u.row(r) = cols.row(kQubitIndices[static_cast<std::size_t>(r)]);
  return u;
}

/// U0 from the same program at the nominal optical detunings with no
/// hyperfine shift and no decay.
inline ReferenceGate reference_gate(const PulseProgram& prog, double delta_c, double delta_t,
                                    const BlockadeParams& blockade, const Tolerances& tol = {}) {
  const IonParams c{delta_c, 0.0, std::nullopt};
  const IonParams t{delta_t, 0.0, std::nullopt};
  ReferenceGate g;
  g.projected = restrict_to_qubits(propagate_qubit_columns(prog, c, t, blockade, tol));
  g.u0 = nearest_unitary(g.projected);
  g.invariant = cphase_invariant(g.u0);
  g.checksum = matrix_checksum(g.u0);
  return g;
}

// ---------------------------------------------------------------------------
// Sweeps

struct Axis {
  std::string name;
  std::string unit;
  std::vector<double> values;
};

struct PointFailure {
  std::size_t index;
  std::string message;
};

struct FidelitySurface {
  Axis x;  ///< outer index
  Axis y;  ///< inner index
  std::vector<double> values;  ///< values[i * y.size + j], NaN where the point failed
  std::string u0_checksum;
  std::map<std::string, std::string> metadata;
  std::vector<PointFailure> failures;

  double at(std::size_t i, std::size_t j) const { return values.at(i * y.values.size() + j); }

  void validate() const {
    if (values.size() != x.values.size() * y.values.size()) throw DimensionError("surface: grid/value mismatch");
    for (double v : values)
      if (!std::isnan(v) && (v < 0.0 || v > 1.0 + 1e-9)) throw std::logic_error("surface: fidelity outside [0, 1]");
  }

  double min() const {
    double m = std::numeric_limits<double>::infinity();
    for (double v : values)
      if (!std::isnan(v)) m = std::min(m, v);
    return m;
  }
  double max() const {
    double m = -std::numeric_limits<double>::infinity();
    for (double v : values)
      if (!std::isnan(v)) m = std::max(m, v);
    return m;
  }

  /// Largest change along x at fixed y, and along y at fixed x.
  std::pair<double, double> axis_variation() const {
    double vx = 0.0, vy = 0.0;
    const auto nx = x.values.size(), ny = y.values.size();
    for (std::size_t j = 0; j < ny; ++j) {
      double lo = 1e300, hi = -1e300;
      for (std::size_t i = 0; i < nx; ++i) lo = std::min(lo, at(i, j)), hi = std::max(hi, at(i, j));
      vx = std::max(vx, hi - lo);
    }
    for (std::size_t i = 0; i < nx; ++i) {
      double lo = 1e300, hi = -1e300;
      for (std::size_t j = 0; j < ny; ++j) lo = std::min(lo, at(i, j)), hi = std::max(hi, at(i, j));
      vy = std::max(vy, hi - lo);
    }
    return {vx, vy};
  }
};

/// Pointwise a - b; surfaces scored against different reference gates are rejected.
inline std::vector<double> surface_difference(const FidelitySurface& a, const FidelitySurface& b) {
  if (a.u0_checksum != b.u0_checksum) throw ConfigError("surfaces were scored against different reference gates");
  if (a.values.size() != b.values.size()) throw DimensionError("surfaces have different grids");
  std::vector<double> d(a.values.size());
  for (std::size_t k = 0; k < d.size(); ++k) d[k] = a.values[k] - b.values[k];
  return d;
}

struct SweepConfig {
  SechPulseParams pulse;
  double delta_c = 0.1;  ///< control optical detuning (rad/us)
  double delta_t = 0.08;
  double dc_min = -0.03, dc_max = 0.03;
  std::size_t dc_count = 21;
  double dt_min = -0.03, dt_max = 0.03;
  std::size_t dt_count = 21;
  BlockadeParams blockade;
  bool decay = false;
  double te_us = 100.0;
  std::vector<double> te_list{100.0, 500.0, 1000.0, 1.0e6};
  double b0 = 0.5, b1 = 0.5;
  bool loss = false;  ///< route 1 - b0 - b1 out of the simulated manifold
  bool refocus = true;
  double lifetime_delta_c = 0.0;
  Vector psi_in = equal_superposition();
  ProgramOptions program;
  Tolerances tol_state = Tolerances::uniform(1e-9);
  Tolerances tol_master = Tolerances::uniform(1e-8);
  unsigned jobs = 1;

  /// Nominal parameter set with frequency-typed values multiplied by `scale`.
  static SweepConfig nominal(double scale) {
    SweepConfig c;
    c.pulse = SechPulseParams{}.scaled(scale);
    c.delta_c *= scale;
    c.delta_t *= scale;
    c.dc_min *= scale, c.dc_max *= scale, c.dt_min *= scale, c.dt_max *= scale;
    c.blockade.delta_dd *= scale;
    return c;
  }

  void validate() const {
    pulse.validate();
    blockade.validate();
    if (dc_count == 0 || dt_count == 0) throw ConfigError("sweep: grid counts must be > 0");
    if (dc_min > dc_max || dt_min > dt_max) throw ConfigError("sweep: ranges must be non-empty");
    if (te_list.empty()) throw ConfigError("sweep: te list must be non-empty");
    if (decay) decay_channel(te_us);
    for (double te : te_list) decay_channel(te);
  }

  std::optional<DecayChannel> decay_channel(double te) const {
    auto d = DecayChannel::from_lifetime(te, b0, b1);
    d.loss = loss;
    d.validate();
    return d;
  }
};

/// Fidelity of one program run against U0 for given ions. Uses the master
/// equation when either ion carries a decay channel.
inline double program_fidelity(const PulseProgram& prog, const ReferenceGate& ref, const IonParams& control,
                               const IonParams& target, const BlockadeParams& blockade, const Vector& psi_in,
                               const Tolerances& tol_state, const Tolerances& tol_master) {
  if (!control.decay && !target.decay) {
    const Matrix cols = propagate_qubit_columns(prog, control, target, blockade, tol_state);
    return gate_fidelity(cols, ref.u0, psi_in);
  }
  const auto h = compile(prog, control, target, blockade);
  const auto channels = pair_decay_operators(control, target);
  const Vector psi = detail::embed(detail::qubit_state(psi_in, 4), kPairDim);
  const auto res = propagate_master(h, DensityMatrix::pure(psi), channels, 0.0, prog.duration(), tol_master);
  return gate_fidelity(res.state, ref.u0, psi_in);
}

namespace detail {

inline FidelitySurface hyperfine_surface(const SweepConfig& cfg, const PulseProgram& prog, const ReferenceGate& ref,
                                         bool decay, double te) {
  FidelitySurface s;
  s.x = {"delta_c", "rad/us", linspace(cfg.dc_min, cfg.dc_max, cfg.dc_count)};
  s.y = {"delta_t", "rad/us", linspace(cfg.dt_min, cfg.dt_max, cfg.dt_count)};
  s.u0_checksum = ref.checksum;
  s.values.assign(s.x.values.size() * s.y.values.size(), std::numeric_limits<double>::quiet_NaN());
  std::mutex m;
  const auto ny = s.y.values.size();
  parallel_for(s.values.size(), cfg.jobs, [&](std::size_t k) {
    IonParams c{cfg.delta_c, s.x.values[k / ny], std::nullopt};
    IonParams t{cfg.delta_t, s.y.values[k % ny], std::nullopt};
    if (decay) c.decay = t.decay = cfg.decay_channel(te);
    try {
      s.values[k] = program_fidelity(prog, ref, c, t, cfg.blockade, cfg.psi_in, cfg.tol_state, cfg.tol_master);
    } catch (const std::exception& e) {
      std::lock_guard lock(m);
      s.failures.push_back({k, e.what()});
    }
  });
  std::sort(s.failures.begin(), s.failures.end(), [](auto& a, auto& b) { return a.index < b.index; });
  s.metadata["program"] = prog.name;
  s.metadata["decay"] = decay ? "on" : "off";
  if (decay) s.metadata["te_us"] = format_double(te);
  s.metadata["cphase_invariant"] = format_double(ref.invariant);
  return s;
}

}  // namespace detail

/// Fidelity over the (delta_c, delta_t) grid for the robust controlled phase.
inline FidelitySurface sweep_hyperfine(const SweepConfig& cfg) {
  cfg.validate();
  const auto prog = robust_cphase_program(cfg.pulse, cfg.program, cfg.refocus);
  const auto ref = reference_gate(prog, cfg.delta_c, cfg.delta_t, cfg.blockade, cfg.tol_state);
  return detail::hyperfine_surface(cfg, prog, ref, cfg.decay, cfg.te_us);
}

struct LifetimeCurves {
  Axis delta_t;
  std::vector<double> te_us;
  std::vector<std::vector<double>> values;  ///< values[te][delta_t]
  std::string u0_checksum;
  std::vector<PointFailure> failures;       ///< index = te_index * n_delta_t + j
};

/// F(delta_t) at fixed delta_c for every lifetime in cfg.te_list.
inline LifetimeCurves sweep_lifetime(const SweepConfig& cfg) {
  cfg.validate();
  const auto prog = robust_cphase_program(cfg.pulse, cfg.program, cfg.refocus);
  const auto ref = reference_gate(prog, cfg.delta_c, cfg.delta_t, cfg.blockade, cfg.tol_state);
  LifetimeCurves out;
  out.delta_t = {"delta_t", "rad/us", linspace(cfg.dt_min, cfg.dt_max, cfg.dt_count)};
  out.te_us = cfg.te_list;
  out.u0_checksum = ref.checksum;
  const auto ny = out.delta_t.values.size();
  std::vector<double> flat(out.te_us.size() * ny, std::numeric_limits<double>::quiet_NaN());
  std::mutex m;
  parallel_for(flat.size(), cfg.jobs, [&](std::size_t k) {
    const double te = out.te_us[k / ny];
    IonParams c{cfg.delta_c, cfg.lifetime_delta_c, cfg.decay_channel(te)};
    IonParams t{cfg.delta_t, out.delta_t.values[k % ny], cfg.decay_channel(te)};
    try {
      flat[k] = program_fidelity(prog, ref, c, t, cfg.blockade, cfg.psi_in, cfg.tol_state, cfg.tol_master);
    } catch (const std::exception& e) {
      std::lock_guard lock(m);
      out.failures.push_back({k, e.what()});
    }
  });
  std::sort(out.failures.begin(), out.failures.end(), [](auto& a, auto& b) { return a.index < b.index; });
  for (std::size_t i = 0; i < out.te_us.size(); ++i)
    out.values.emplace_back(flat.begin() + static_cast<long>(i * ny), flat.begin() + static_cast<long>((i + 1) * ny));
  return out;
}

struct RefocusComparison {
  FidelitySurface refocused;
  FidelitySurface unrefocused;
};

/// Closed-system surfaces with and without the refocusing NOT blocks.
inline RefocusComparison unrefocused_comparison(SweepConfig cfg) {
  cfg.decay = false;
  cfg.refocus = true;
  RefocusComparison out;
  out.refocused = sweep_hyperfine(cfg);
  cfg.refocus = false;
  out.unrefocused = sweep_hyperfine(cfg);
  return out;
}

struct EnsembleSample {
  IonParams control;
  IonParams target;
};

/// Mean fidelity over a finite sample of ion parameters, scored against the
/// nominal reference gate of `cfg`.
inline double ensemble_average_fidelity(const SweepConfig& cfg, std::span<const EnsembleSample> samples) {
  if (samples.empty()) throw ConfigError("ensemble average: empty sample set");
  cfg.validate();
  const auto prog = robust_cphase_program(cfg.pulse, cfg.program, cfg.refocus);
  const auto ref = reference_gate(prog, cfg.delta_c, cfg.delta_t, cfg.blockade, cfg.tol_state);
  std::vector<double> f(samples.size());
  parallel_for(samples.size(), cfg.jobs, [&](std::size_t k) {
    f[k] = program_fidelity(prog, ref, samples[k].control, samples[k].target, cfg.blockade, cfg.psi_in,
                            cfg.tol_state, cfg.tol_master);
  });
  double sum = 0.0;
  for (double v : f) sum += v;
  return sum / static_cast<double>(f.size());
}

// ---------------------------------------------------------------------------
// Single-ion experiments

struct LeakageConfig {
  SechPulseParams pulse;
  double delta_opt = 0.1;
  double delta_hf = 0.03;
  double alpha = 0.0;
  std::size_t points = 301;
  bool split_two_color = true;
  Tolerances tol = Tolerances::uniform(1e-10);

  static LeakageConfig nominal(double scale) {
    LeakageConfig c;
    c.pulse = SechPulseParams{}.scaled(scale);
    c.delta_opt *= scale;
    c.delta_hf *= scale;
    return c;
  }
};

struct LeakageSeries {
  std::vector<double> t;
  std::vector<double> numeric;       ///< |<1bar|psi(t)>|^2 from the three-level equations
  std::vector<double> perturbative;  ///< |U_{1bar 0bar}(t)|^2
};

/// One two-color pulse addressing |0bar> <-> |e>, starting in |0bar>.
inline PulseProgram bar_addressing_program(const SechPulseParams& p, double alpha, bool split_two_color) {
  PulseProgram prog;
  prog.name = "bar_addressing";
  prog.alpha = alpha;
  prog.options.split_two_color = split_two_color;
  PulseEvent ev;
  ev.table_index = 1;
  ev.envelope = p;
  ev.envelope.phase = 0.0;
  ev.envelope.t_start = 0.0;
  ev.colors = {{Transition::g0, 0.0, "0"}, {Transition::g1, alpha, "alpha"}};
  prog.events.push_back(ev);
  prog.validate();
  return prog;
}

inline LeakageSeries leakage_scan(const LeakageConfig& cfg) {
  if (cfg.points < 2) throw ConfigError("leakage scan: need at least two grid points");
  const auto prog = bar_addressing_program(cfg.pulse, cfg.alpha, cfg.split_two_color);
  const IonParams ion{cfg.delta_opt, cfg.delta_hf, std::nullopt};
  const auto h = compile_single(prog, ion);
  const BarBasis bar{cfg.alpha};
  const Matrix b = bar_transform(bar);
  LeakageSeries out;
  out.t = linspace(0.0, cfg.pulse.duration, cfg.points);
  const auto states = propagate_on_grid(h, b.col(0), out.t, cfg.tol);
  for (const auto& s : states) out.numeric.push_back(std::norm(b.col(1).dot(s)));

  // The bar transition sees Omega_R when the colors are split, sqrt(2) Omega_R otherwise.
  TwoLevelDrive d{prog.events.front().envelope, cfg.delta_opt};
  if (!cfg.split_two_color) d.pulse.omega0 *= std::sqrt(2.0);
  for (const auto& a : leakage_amplitude(d, cfg.delta_hf, out.t)) out.perturbative.push_back(std::norm(a));
  return out;
}

struct BlochRow {
  double t;
  BlochVector ode;
  BlochVector zeroth;
  BlochVector first;
  BlochVector inset;  ///< ODE result in a frame rotating at constant frequency
};

struct BlochComparison {
  std::vector<BlochRow> rows;
  double max_first_order_distance = 0.0;
  double max_zeroth_order_distance = 0.0;
  double first_better_fraction = 0.0;  ///< share of grid points with first-order error < zeroth-order error
  double max_nonunitarity = 0.0;
};

/// Single sech pulse on i<->e starting in |i>: full ODE vs adiabatic |+>
/// vs first-order perturbative trajectory, all in the accelerated frame.
inline BlochComparison bloch_trajectories(const SechPulseParams& pulse, double delta_opt, std::size_t points,
                                          BlochFrame inset_frame = BlochFrame::channel_center,
                                          const Tolerances& tol = Tolerances::uniform(1e-10)) {
  if (points < 2) throw ConfigError("bloch trajectory: need at least two grid points");
  SechPulseParams p = pulse;
  p.t_start = 0.0;
  p.phase = 0.0;
  const IonParams ion{delta_opt, 0.0, std::nullopt};
  const TwoLevelDrive d = TwoLevelDrive::make(p, ion, Transition::g0);
  const auto grid = linspace(p.t_start, p.t_end(), points);

  // Two-level ODE in the channel frame: basis (|e>, |i>).
  auto fill = [p, delta_opt](double t, Matrix& h) {
    const cd w = 0.5 * complex_rabi(p, t);
    h.resize(2, 2);
    h << delta_opt, w, std::conj(w), 0.0;
  };
  const TimeDependentHamiltonian h{2, fill, {p.t_start, p.t_end()}};
  Vector start(2);
  start << 0.0, 1.0;
  const auto ode = propagate_on_grid(h, start, grid, tol);
  const auto tr = first_order_propagator(d, grid);
  const auto first = first_order_states(d, tr, Eigen::Vector2cd(0.0, 1.0));

  BlochComparison out;
  std::size_t better = 0;
  for (std::size_t k = 0; k < grid.size(); ++k) {
    const double t = grid[k];
    const Eigen::Vector2cd chan(ode[k](0), ode[k](1));
    BlochRow row;
    row.t = t;
    row.ode = bloch_coordinates(to_frame(chan, d, t, BlochFrame::accelerated));
    row.inset = bloch_coordinates(to_frame(chan, d, t, inset_frame));
    // zeroth order: the adiabatic propagator (A = 0) applied to the same initial state
    const Eigen::Vector2cd c0 = to_dressed(d, p.t_start, Eigen::Vector2cd(0.0, 1.0));
    const Eigen::Vector2cd ck(tr.c_minus0[k] * std::conj(tr.c_minus0[0]) * c0(0),
                              tr.c_plus0[k] * std::conj(tr.c_plus0[0]) * c0(1));
    row.zeroth = bloch_coordinates(from_dressed(d, t, ck));
    row.first = bloch_coordinates(first[k].normalized());
    const double e1 = row.first.distance(row.ode);
    const double e0 = row.zeroth.distance(row.ode);
    out.max_first_order_distance = std::max(out.max_first_order_distance, e1);
    out.max_zeroth_order_distance = std::max(out.max_zeroth_order_distance, e0);
    if (e1 < e0) ++better;
    out.max_nonunitarity = std::max(out.max_nonunitarity, tr.nonunitarity[k]);
    out.rows.push_back(row);
  }
  out.first_better_fraction = static_cast<double>(better) / static_cast<double>(grid.size());
  return out;
}

/// e^{i theta/2} [[cos(theta/2), i e^{-i phi} sin(theta/2)], [i e^{i phi} sin(theta/2), cos(theta/2)]]
/// with phi = alpha + pi, the relative phase that addresses |1bar>. This is
/// diag(1, e^{i theta}) in the bar basis.
inline Eigen::Matrix2cd rotation_target(double theta, double alpha) {
  const double phi = alpha + pi;
  const double c = std::cos(0.5 * theta);
  const double s = std::sin(0.5 * theta);
  Eigen::Matrix2cd u;
  u << c, I * std::polar(1.0, -phi) * s, I * std::polar(1.0, phi) * s, c;
  return std::polar(1.0, 0.5 * theta) * u;
}

struct RotationCheck {
  double theta;
  double alpha;
  Eigen::Matrix2cd unitary;  ///< compiled qubit block
  double distance;           ///< to rotation_target up to global phase
  double bar_phase;          ///< arg <1bar|U|1bar> - arg <0bar|U|0bar>, in (-pi, pi]
  double leakage;            ///< max population left outside the qubit subspace
};

inline RotationCheck rotation_check(double theta, double alpha, const SechPulseParams& p, const IonParams& ion,
                                    const ProgramOptions& opts = {}, const Tolerances& tol = {}) {
  const auto prog = arbitrary_rotation_program(theta, alpha, p, opts);
  const auto h = compile_single(prog, ion);
  Matrix y0 = Matrix::Zero(kIonDim, 2);
  y0(0, 0) = 1.0;
  y0(1, 1) = 1.0;
  const Matrix cols = propagate_columns(h, y0, 0.0, prog.duration(), tol);
  RotationCheck out{theta, alpha, cols.topRows(2), 0.0, 0.0, 0.0};
  out.distance = distance_up_to_phase(out.unitary, rotation_target(theta, alpha));
  const Matrix bar = bar_transform({alpha}).topLeftCorner(2, 2);
  const Matrix ub = bar.adjoint() * out.unitary * bar;
  out.bar_phase = std::remainder(std::arg(ub(1, 1)) - std::arg(ub(0, 0)), 2.0 * pi);
  out.leakage = std::max(std::norm(cols(2, 0)), std::norm(cols(2, 1)));
  return out;
}

struct NotCheck {
  /// populations (|0>, |1>, |e>) after the sequence, for inputs |0> and |1>
  std::array<std::array<double, 3>, 2> populations;
  Matrix cols;
};

inline NotCheck not_check(const SechPulseParams& p, const IonParams& ion, const ProgramOptions& opts = {},
                          const Tolerances& tol = {}, int repetitions = 1) {
  auto prog = not_gate_program(IonRole::target, p, opts);
  if (repetitions > 1) {
    const auto base = prog.events;
    const double period = prog.duration() + opts.gap;
    for (int r = 1; r < repetitions; ++r)
      for (auto ev : base) {
        ev.envelope.t_start += r * period;
        prog.events.push_back(ev);
      }
  }
  const auto h = compile_single(prog, ion);
  Matrix y0 = Matrix::Zero(kIonDim, 2);
  y0(0, 0) = 1.0;
  y0(1, 1) = 1.0;
  NotCheck out;
  out.cols = propagate_columns(h, y0, 0.0, prog.duration(), tol);
  for (int c = 0; c < 2; ++c)
    for (int r = 0; r < 3; ++r) out.populations[c][r] = std::norm(out.cols(r, c));
  return out;
}

}  // namespace reqc
