#pragma once

// Pulse tables as data, program scheduling, and rendering of a program into
// a time-dependent Hamiltonian.
//
// Laser phase convention: a color with laser phase phi_L contributes the
// complex Rabi frequency s * Omega_R(t) e^{i chirp(t)} e^{-i phi_L}. With this
// sign a two-color pulse with phase difference phi_1 - phi_0 = alpha drives
// only |0bar> <-> |e>, and alpha + pi only |1bar> <-> |e>, for any alpha.
// s = 1/sqrt(2) for two-color pulses when the amplitude is split so that the
// bar transition sees the single-color Rabi frequency Omega_R.

#include "reqc/dynamics.hpp"
#include "reqc/ion_model.hpp"
#include "reqc/pulse.hpp"

#include <algorithm>
#include <array>
#include <charconv>
#include <optional>
#include <span>
#include <sstream>
#include <string>
#include <string_view>
#include <vector>

namespace reqc {

enum class IonRole { control, target };

inline std::string_view to_string(IonRole r) { return r == IonRole::control ? "control" : "target"; }
inline std::string_view to_string(Transition t) { return t == Transition::g0 ? "g0" : "g1"; }

/// Phase written as  n_alpha alpha + n_pi pi + n_theta theta.
struct PhaseTerm {
  int alpha = 0;
  int pi = 0;
  int theta = 0;

  double value(double theta_v, double alpha_v) const {
    return alpha * alpha_v + pi * reqc::pi + theta * theta_v;
  }

  std::string label() const {
    std::string out;
    auto add = [&](int n, std::string_view sym) {
      if (n == 0) return;
      if (!out.empty()) out += n > 0 ? "+" : "-";
      else if (n < 0) out += "-";
      if (std::abs(n) != 1) out += std::to_string(std::abs(n));
      out += sym;
    };
    add(alpha, "alpha");
    add(pi, "pi");
    add(theta, "theta");
    return out.empty() ? "0" : out;
  }
};

struct Color {
  Transition transition;
  double phase = 0.0;  ///< laser phase (rad)
  std::string label;   ///< symbolic phase as tabulated
};

struct PulseEvent {
  int table_index = 0;
  IonRole ion = IonRole::target;
  std::vector<Color> colors;  ///< one or two, sharing `envelope`
  SechPulseParams envelope;   ///< envelope.t_start is the event start

  double t_start() const { return envelope.t_start; }
  double t_end() const { return envelope.t_end(); }
  bool two_color() const { return colors.size() == 2; }
};

struct ProgramOptions {
  double gap = 0.0;              ///< idle time between consecutive events (us)
  bool split_two_color = true;   ///< each color of a two-color pulse carries Omega/sqrt(2)
  bool require_staggering = true;
};

struct PulseProgram {
  std::string name;
  std::vector<PulseEvent> events;
  double theta = 0.0;
  double alpha = 0.0;
  ProgramOptions options;

  double duration() const {
    double end = 0.0;
    for (const auto& e : events) end = std::max(end, e.t_end());
    return end;
  }

  bool single_ion() const {
    return std::all_of(events.begin(), events.end(), [&](const PulseEvent& e) { return e.ion == events.front().ion; });
  }

  /// Event-structure checks: one or two colors on distinct transitions, no
  /// overlap on one ion, and (when required) no simultaneous drives on both ions.
  void validate() const {
    for (const auto& e : events) {
      e.envelope.validate();
      if (e.colors.empty() || e.colors.size() > 2) throw ConfigError("pulse event must have one or two colors");
      if (e.two_color() && e.colors[0].transition == e.colors[1].transition)
        throw ConfigError("two-color event must address both transitions");
    }
    for (std::size_t i = 0; i < events.size(); ++i)
      for (std::size_t j = i + 1; j < events.size(); ++j) {
        const auto& a = events[i];
        const auto& b = events[j];
        const bool overlap = a.t_start() < b.t_end() && b.t_start() < a.t_end();
        if (!overlap) continue;
        if (a.ion == b.ion) throw ConfigError("overlapping pulse events on one ion");
        if (options.require_staggering) throw ConfigError("simultaneous excitation pulses on both ions");
      }
  }
};

namespace tables {

struct ColorEntry {
  Transition transition;
  PhaseTerm phase;
};

struct Row {
  int index;
  IonRole ion;
  std::array<std::optional<ColorEntry>, 2> colors;
};

using enum Transition;
using enum IonRole;

inline constexpr PhaseTerm zero{};
inline constexpr PhaseTerm pi_{0, 1, 0};

// Two-color arbitrary rotation; the tabulated phi_0 row "0, pi+theta, 0 pi"
// is read as (0, pi+theta, 0, pi).
inline const std::vector<Row> rotation = {
    {1, target, {ColorEntry{g0, zero}, ColorEntry{g1, {1, 1, 0}}}},
    {2, target, {ColorEntry{g0, {0, 1, 1}}, ColorEntry{g1, {1, 0, 1}}}},
    {3, target, {ColorEntry{g0, zero}, ColorEntry{g1, {1, 0, 0}}}},
    {4, target, {ColorEntry{g0, pi_}, ColorEntry{g1, {1, 1, 0}}}},
};

inline const std::vector<Row> naive_cphase = {
    {1, control, {ColorEntry{g0, zero}, std::nullopt}},
    {2, target, {ColorEntry{g1, zero}, std::nullopt}},
    {3, target, {ColorEntry{g1, zero}, std::nullopt}},
    {4, control, {ColorEntry{g0, pi_}, std::nullopt}},
};

inline const std::vector<Row> not_gate = {
    {1, target, {ColorEntry{g0, zero}, std::nullopt}},
    {2, target, {ColorEntry{g1, zero}, std::nullopt}},
    {3, target, {ColorEntry{g0, zero}, std::nullopt}},
};

inline const std::vector<Row> robust_cphase = {
    {1, control, {ColorEntry{g0, zero}, std::nullopt}},
    {2, target, {ColorEntry{g0, zero}, std::nullopt}},
    {3, target, {ColorEntry{g0, pi_}, std::nullopt}},
    {4, target, {ColorEntry{g1, zero}, std::nullopt}},
    {5, target, {ColorEntry{g1, zero}, std::nullopt}},
    {6, control, {ColorEntry{g0, pi_}, std::nullopt}},
    {7, control, {ColorEntry{g0, zero}, std::nullopt}},
    {8, control, {ColorEntry{g1, zero}, std::nullopt}},
    {9, control, {ColorEntry{g0, zero}, std::nullopt}},
    {10, target, {ColorEntry{g0, zero}, std::nullopt}},
    {11, target, {ColorEntry{g1, zero}, std::nullopt}},
    {12, target, {ColorEntry{g0, zero}, std::nullopt}},
    {13, control, {ColorEntry{g0, zero}, std::nullopt}},
    {14, target, {ColorEntry{g0, zero}, std::nullopt}},
    {15, target, {ColorEntry{g0, pi_}, std::nullopt}},
    {16, target, {ColorEntry{g1, zero}, std::nullopt}},
    {17, target, {ColorEntry{g1, pi_}, std::nullopt}},
    {18, control, {ColorEntry{g0, pi_}, std::nullopt}},
    {19, control, {ColorEntry{g0, zero}, std::nullopt}},
    {20, control, {ColorEntry{g1, zero}, std::nullopt}},
    {21, control, {ColorEntry{g0, zero}, std::nullopt}},
    {22, target, {ColorEntry{g0, zero}, std::nullopt}},
    {23, target, {ColorEntry{g1, zero}, std::nullopt}},
    {24, target, {ColorEntry{g0, zero}, std::nullopt}},
};

/// Rows of the refocusing NOT blocks in the robust sequence.
inline bool is_refocusing_row(int index) { return (index >= 7 && index <= 12) || (index >= 19 && index <= 24); }

}  // namespace tables

namespace detail {

inline PulseProgram schedule(std::string name, const std::vector<tables::Row>& rows, const SechPulseParams& p,
                             double theta, double alpha, const ProgramOptions& opts,
                             std::optional<IonRole> ion_override = std::nullopt,
                             bool (*keep)(int) = nullptr) {
  p.validate();
  PulseProgram prog{std::move(name), {}, theta, alpha, opts};
  double t = 0.0;
  for (const auto& row : rows) {
    if (keep && !keep(row.index)) continue;
    PulseEvent ev;
    ev.table_index = row.index;
    ev.ion = ion_override.value_or(row.ion);
    ev.envelope = p;
    ev.envelope.phase = 0.0;
    ev.envelope.t_start = t;
    for (const auto& c : row.colors)
      if (c) ev.colors.push_back({c->transition, c->phase.value(theta, alpha), c->phase.label()});
    prog.events.push_back(std::move(ev));
    t += p.duration + opts.gap;
  }
  prog.validate();
  return prog;
}

}  // namespace detail

inline PulseProgram arbitrary_rotation_program(double theta, double alpha, const SechPulseParams& p,
                                               const ProgramOptions& opts = {}, IonRole ion = IonRole::target) {
  return detail::schedule("rotation", tables::rotation, p, theta, alpha, opts, ion);
}

inline PulseProgram not_gate_program(IonRole ion, const SechPulseParams& p, const ProgramOptions& opts = {}) {
  return detail::schedule("not", tables::not_gate, p, 0.0, 0.0, opts, ion);
}

inline PulseProgram naive_cphase_program(const SechPulseParams& p, const ProgramOptions& opts = {}) {
  return detail::schedule("naive_cphase", tables::naive_cphase, p, 0.0, 0.0, opts);
}

/// The 24-pulse sequence; with `refocus` false the NOT blocks (pulses 7-12
/// and 19-24) are dropped and the remaining pulses are packed back to back.
inline PulseProgram robust_cphase_program(const SechPulseParams& p, const ProgramOptions& opts = {},
                                          bool refocus = true) {
  if (refocus) return detail::schedule("robust_cphase", tables::robust_cphase, p, 0.0, 0.0, opts);
  return detail::schedule("robust_cphase_unrefocused", tables::robust_cphase, p, 0.0, 0.0, opts, std::nullopt,
                          [](int i) { return !tables::is_refocusing_row(i); });
}

/// Complex Rabi frequency of one color of an event at time t.
inline cd color_amplitude(const PulseEvent& ev, const Color& c, double t, bool split_two_color) {
  SechPulseParams p = ev.envelope;
  p.phase = -c.phase;
  const double s = (ev.two_color() && split_two_color) ? 1.0 / std::sqrt(2.0) : 1.0;
  return s * complex_rabi(p, t);
}

/// Drives of the events on `ion` that are active at t.
inline std::vector<Drive> active_drives(const PulseProgram& prog, IonRole ion, double t) {
  std::vector<Drive> out;
  for (const auto& ev : prog.events) {
    if (ev.ion != ion || t < ev.t_start() || t > ev.t_end()) continue;
    for (const auto& c : ev.colors) out.push_back({c.transition, color_amplitude(ev, c, t, prog.options.split_two_color)});
  }
  return out;
}

namespace detail {

inline std::vector<double> event_breakpoints(const PulseProgram& prog) {
  std::vector<double> b;
  for (const auto& e : prog.events) {
    b.push_back(e.t_start());
    b.push_back(e.t_end());
  }
  std::sort(b.begin(), b.end());
  b.erase(std::unique(b.begin(), b.end()), b.end());
  return b;
}

}  // namespace detail

/// Two-ion Hamiltonian H(t) for a program. Control is the first tensor factor.
inline TimeDependentHamiltonian compile(const PulseProgram& prog, const IonParams& control, const IonParams& target,
                                        const BlockadeParams& blockade) {
  prog.validate();
  blockade.validate();
  const Matrix base = two_ion_hamiltonian(control, target, blockade, {}, {});
  auto fill = [prog, base](double t, Matrix& h) {
    h = base;
    for (const auto& ev : prog.events) {
      if (t < ev.t_start() || t > ev.t_end()) continue;
      for (const auto& c : ev.colors) {
        const cd w = 0.5 * color_amplitude(ev, c, t, prog.options.split_two_color);
        const auto k = static_cast<Eigen::Index>(c.transition);
        for (Eigen::Index j = 0; j < kIonDim; ++j) {
          // |e><k| (x) 1  or  1 (x) |e><k|
          const Eigen::Index row = ev.ion == IonRole::control ? 3 * 2 + j : 3 * j + 2;
          const Eigen::Index col = ev.ion == IonRole::control ? 3 * k + j : 3 * j + k;
          h(row, col) += w;
          h(col, row) += std::conj(w);
        }
      }
    }
  };
  return {kPairDim, std::move(fill), detail::event_breakpoints(prog)};
}

/// Single-ion Hamiltonian for a program whose events all address one ion.
inline TimeDependentHamiltonian compile_single(const PulseProgram& prog, const IonParams& ion) {
  prog.validate();
  if (!prog.single_ion()) throw ConfigError("compile_single: program addresses more than one ion");
  const Matrix base = single_ion_hamiltonian(ion, {});
  auto fill = [prog, base](double t, Matrix& h) {
    h = base;
    for (const auto& ev : prog.events) {
      if (t < ev.t_start() || t > ev.t_end()) continue;
      for (const auto& c : ev.colors) {
        const cd w = 0.5 * color_amplitude(ev, c, t, prog.options.split_two_color);
        const auto k = static_cast<Eigen::Index>(c.transition);
        h(2, k) += w;
        h(k, 2) += std::conj(w);
      }
    }
  };
  return {kIonDim, std::move(fill), detail::event_breakpoints(prog)};
}

// ---------------------------------------------------------------------------
// Text forms

/// Table view of a program: one row per event,
/// `index ion transition:phase_label [transition:phase_label]`.
inline std::string render_table(const PulseProgram& prog) {
  std::string out;
  for (const auto& ev : prog.events) {
    out += std::to_string(ev.table_index);
    out += ' ';
    out += to_string(ev.ion);
    for (const auto& c : ev.colors) {
      out += ' ';
      out += to_string(c.transition);
      out += ':';
      out += c.label;
    }
    out += '\n';
  }
  return out;
}

namespace detail {

inline std::string format_double(double v) {
  char buf[64];
  auto r = std::to_chars(buf, buf + sizeof(buf), v);
  return std::string(buf, r.ptr);
}

inline double parse_double(std::string_view s) {
  double v = 0.0;
  auto r = std::from_chars(s.data(), s.data() + s.size(), v);
  if (r.ec != std::errc{} || r.ptr != s.data() + s.size()) throw ConfigError("malformed number: " + std::string(s));
  return v;
}

}  // namespace detail

/// Line-oriented program serialization.
///
///   # program <name>
///   # envelope omega0 <v> mu <v> beta <v> theta <v> alpha <v> split <0|1> gap <v>
///   <index> <ion> <transition> <phase_rad> [<transition> <phase_rad>] <t_start_us> <duration_us>
///
/// Numbers use the shortest round-trip decimal representation.
inline std::string serialize_program(const PulseProgram& prog) {
  using detail::format_double;
  std::ostringstream os;
  const SechPulseParams env = prog.events.empty() ? SechPulseParams{} : prog.events.front().envelope;
  os << "# program " << prog.name << '\n';
  os << "# envelope omega0 " << format_double(env.omega0) << " mu " << format_double(env.mu) << " beta "
     << format_double(env.beta) << " theta " << format_double(prog.theta) << " alpha " << format_double(prog.alpha)
     << " split " << (prog.options.split_two_color ? 1 : 0) << " gap " << format_double(prog.options.gap) << '\n';
  for (const auto& ev : prog.events) {
    os << ev.table_index << ' ' << to_string(ev.ion);
    for (const auto& c : ev.colors) os << ' ' << to_string(c.transition) << ' ' << format_double(c.phase);
    os << ' ' << format_double(ev.t_start()) << ' ' << format_double(ev.envelope.duration) << '\n';
  }
  return os.str();
}

inline PulseProgram parse_program(std::string_view text) {
  PulseProgram prog;
  SechPulseParams env;
  std::istringstream is{std::string(text)};
  std::string line;
  auto split = [](const std::string& l) {
    std::vector<std::string> toks;
    std::istringstream ls(l);
    for (std::string tok; ls >> tok;) toks.push_back(tok);
    return toks;
  };
  while (std::getline(is, line)) {
    auto toks = split(line);
    if (toks.empty()) continue;
    if (toks[0] == "#") {
      if (toks.size() >= 3 && toks[1] == "program") prog.name = toks[2];
      if (toks.size() >= 2 && toks[1] == "envelope") {
        for (std::size_t i = 2; i + 1 < toks.size(); i += 2) {
          const double v = detail::parse_double(toks[i + 1]);
          if (toks[i] == "omega0") env.omega0 = v;
          else if (toks[i] == "mu") env.mu = v;
          else if (toks[i] == "beta") env.beta = v;
          else if (toks[i] == "theta") prog.theta = v;
          else if (toks[i] == "alpha") prog.alpha = v;
          else if (toks[i] == "split") prog.options.split_two_color = v != 0.0;
          else if (toks[i] == "gap") prog.options.gap = v;
          else throw ConfigError("unknown envelope key: " + toks[i]);
        }
      }
      continue;
    }
    if (toks.size() != 6 && toks.size() != 8) throw ConfigError("malformed program line: " + line);
    PulseEvent ev;
    ev.table_index = static_cast<int>(detail::parse_double(toks[0]));
    if (toks[1] == "control") ev.ion = IonRole::control;
    else if (toks[1] == "target") ev.ion = IonRole::target;
    else throw ConfigError("unknown ion: " + toks[1]);
    const std::size_t ncolors = toks.size() == 6 ? 1 : 2;
    for (std::size_t c = 0; c < ncolors; ++c) {
      const auto& tr = toks[2 + 2 * c];
      Transition t;
      if (tr == "g0") t = Transition::g0;
      else if (tr == "g1") t = Transition::g1;
      else throw ConfigError("unknown transition: " + tr);
      const double ph = detail::parse_double(toks[3 + 2 * c]);
      ev.colors.push_back({t, ph, detail::format_double(ph)});
    }
    ev.envelope = env;
    ev.envelope.t_start = detail::parse_double(toks[toks.size() - 2]);
    ev.envelope.duration = detail::parse_double(toks.back());
    prog.events.push_back(std::move(ev));
  }
  prog.validate();
  return prog;
}

}  // namespace reqc
