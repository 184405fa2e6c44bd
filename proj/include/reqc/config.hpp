#pragma once

// Flat run configuration: defaults, `key = value` files and command-line
// flags, resolved in that order (later wins).
//
// Frequency-typed keys are stored exactly as given (angular units per us
// when apply_2pi is false, cycles per us otherwise). The 2 pi factor is
// applied once, when an experiment config is built from the RunConfig.

#include "reqc/experiments.hpp"

#include <CLI11.hpp>

#include <fstream>
#include <functional>
#include <sstream>
#include <string>
#include <vector>

namespace reqc {

inline constexpr const char* kCommands[] = {"bloch-traj",     "leakage",        "rotation-check", "not-check",
                                            "cphase-surface", "lifetime-sweep", "program-dump"};

class UsageError : public ConfigError {
 public:
  using ConfigError::ConfigError;
};

struct RunConfig {
  std::string command;
  std::string output;  ///< empty: <command>.csv (or .json / .txt)
  std::string format = "csv";
  bool apply_2pi = true;
  unsigned jobs = 1;
  double tol = 1e-9;
  double tol_master = 1e-8;

  // pulse
  double omega0 = 4.0;
  double mu = 3.0;
  double beta = 1.28;
  double duration = 1.5;
  double gap = 0.0;
  bool split_two_color = true;

  // single ion (bloch-traj, leakage)
  double delta_opt = 0.1;
  double delta_hf = 0.03;
  double alpha = 0.0;
  std::size_t points = 301;
  std::string frame = "channel_center";  ///< Bloch inset frame

  // rotation-check / not-check
  double check_delta_opt = 0.0;
  double check_delta_hf = 0.0;
  std::size_t theta_count = 5;  ///< theta grid over [0, pi]

  // two-ion sweeps
  double delta_c = 0.1;
  double delta_t = 0.08;
  double dc_min = -0.03, dc_max = 0.03;
  std::size_t dc_count = 21;
  double dt_min = -0.03, dt_max = 0.03;
  std::size_t dt_count = 21;
  double delta_dd = 20.0;
  bool refocus = true;
  bool decay = false;
  double te_us = 100.0;
  std::vector<double> te_list{100.0, 500.0, 1000.0, 1.0e6};
  double lifetime_delta_c = 0.0;
  double b0 = 0.5, b1 = 0.5;
  bool loss = false;
  std::vector<double> psi_in{0.5, 0.5, 0.5, 0.5};

  // program-dump
  std::string table = "all";

  bool operator==(const RunConfig&) const = default;

  double scale() const { return frequency_scale(apply_2pi); }

  std::string output_path() const {
    if (!output.empty()) return output;
    if (command == "program-dump") return command + ".txt";
    return command + (format == "json" ? ".json" : ".csv");
  }

  SechPulseParams pulse() const {
    SechPulseParams p;
    p.omega0 = omega0;
    p.mu = mu;
    p.beta = beta;
    p.duration = duration;
    return p.scaled(scale());
  }

  ProgramOptions program_options() const { return {gap, split_two_color, true}; }

  Tolerances tolerances() const { return Tolerances::uniform(tol); }

  SweepConfig sweep() const {
    const double s = scale();
    SweepConfig c;
    c.pulse = pulse();
    c.delta_c = s * delta_c;
    c.delta_t = s * delta_t;
    c.dc_min = s * dc_min, c.dc_max = s * dc_max, c.dc_count = dc_count;
    c.dt_min = s * dt_min, c.dt_max = s * dt_max, c.dt_count = dt_count;
    c.blockade.delta_dd = s * delta_dd;
    c.decay = decay;
    c.te_us = te_us;
    c.te_list = te_list;
    c.lifetime_delta_c = s * lifetime_delta_c;
    c.b0 = b0, c.b1 = b1, c.loss = loss;
    c.refocus = refocus;
    c.psi_in = Eigen::Map<const Eigen::VectorXd>(psi_in.data(), static_cast<Eigen::Index>(psi_in.size())).cast<cd>();
    c.program = program_options();
    c.tol_state = Tolerances::uniform(tol);
    c.tol_master = Tolerances::uniform(tol_master);
    c.jobs = jobs;
    return c;
  }

  LeakageConfig leakage() const {
    const double s = scale();
    LeakageConfig c;
    c.pulse = pulse();
    c.delta_opt = s * delta_opt;
    c.delta_hf = s * delta_hf;
    c.alpha = alpha;
    c.points = points;
    c.split_two_color = split_two_color;
    c.tol = Tolerances::uniform(std::min(tol, 1e-10));
    return c;
  }

  BlochFrame bloch_frame() const {
    if (frame == "accelerated") return BlochFrame::accelerated;
    if (frame == "channel_center") return BlochFrame::channel_center;
    if (frame == "ion_frequency") return BlochFrame::ion_frequency;
    throw ConfigError("frame must be accelerated, channel_center or ion_frequency");
  }

  void validate() const {
    bool known = false;
    for (const char* c : kCommands) known = known || command == c;
    if (!known) throw UsageError("unknown command '" + command + "'");
    if (format != "csv" && format != "json") throw UsageError("format must be csv or json");
    if (jobs == 0) throw ConfigError("jobs must be >= 1");
    if (!(tol > 0.0) || !(tol_master > 0.0)) throw ConfigError("tolerances must be > 0");
    if (points < 2) throw ConfigError("points must be >= 2");
    if (command == "leakage" && points < 200) throw ConfigError("leakage needs at least 200 points");
    if (theta_count < 1) throw ConfigError("theta_count must be >= 1");
    if (psi_in.size() != 4) throw ConfigError("psi_in needs four amplitudes");
    bloch_frame();
    if (table != "all" && table != "rotation" && table != "naive_cphase" && table != "not" && table != "robust_cphase")
      throw ConfigError("table must be all, rotation, naive_cphase, not or robust_cphase");
    pulse().validate();
    sweep().validate();
    if (std::abs(psi_in[0] * psi_in[0] + psi_in[1] * psi_in[1] + psi_in[2] * psi_in[2] + psi_in[3] * psi_in[3] - 1.0) >
        1e-9)
      throw ConfigError("psi_in must be normalized");
  }
};

namespace detail {

inline std::string trim(std::string_view s) {
  const auto b = s.find_first_not_of(" \t\r");
  if (b == std::string_view::npos) return {};
  const auto e = s.find_last_not_of(" \t\r");
  return std::string(s.substr(b, e - b + 1));
}

inline bool parse_bool(const std::string& s) {
  if (s == "true" || s == "1" || s == "yes" || s == "on") return true;
  if (s == "false" || s == "0" || s == "no" || s == "off") return false;
  throw ConfigError("malformed boolean: " + s);
}

inline std::size_t parse_count(const std::string& s) {
  const double v = parse_double(s);
  if (v < 0.0 || v != std::floor(v) || v > 1e9) throw ConfigError("malformed count: " + s);
  return static_cast<std::size_t>(v);
}

inline std::vector<double> parse_list(const std::string& s) {
  std::vector<double> out;
  std::stringstream ss(s);
  std::string item;
  while (std::getline(ss, item, ',')) out.push_back(parse_double(trim(item)));
  if (out.empty()) throw ConfigError("empty list");
  return out;
}

inline std::string format_list(const std::vector<double>& v) {
  std::string s;
  for (std::size_t i = 0; i < v.size(); ++i) s += (i ? "," : "") + format_double(v[i]);
  return s;
}

struct Key {
  std::string name;
  std::string help;
  std::function<void(RunConfig&, const std::string&)> set;
  std::function<std::string(const RunConfig&)> get;
};

template <class T>
Key number_key(std::string name, std::string help, T RunConfig::*m) {
  return {std::move(name), std::move(help),
          [m](RunConfig& c, const std::string& v) {
            if constexpr (std::is_same_v<T, double>) c.*m = parse_double(v);
            else c.*m = static_cast<T>(parse_count(v));
          },
          [m](const RunConfig& c) {
            if constexpr (std::is_same_v<T, double>) return format_double(c.*m);
            else return std::to_string(c.*m);
          }};
}

inline Key bool_key(std::string name, std::string help, bool RunConfig::*m) {
  return {std::move(name), std::move(help), [m](RunConfig& c, const std::string& v) { c.*m = parse_bool(v); },
          [m](const RunConfig& c) { return std::string(c.*m ? "true" : "false"); }};
}

inline Key string_key(std::string name, std::string help, std::string RunConfig::*m) {
  return {std::move(name), std::move(help), [m](RunConfig& c, const std::string& v) { c.*m = v; },
          [m](const RunConfig& c) { return c.*m; }};
}

inline Key list_key(std::string name, std::string help, std::vector<double> RunConfig::*m) {
  return {std::move(name), std::move(help), [m](RunConfig& c, const std::string& v) { c.*m = parse_list(v); },
          [m](const RunConfig& c) { return format_list(c.*m); }};
}

}  // namespace detail

/// Every configurable key, in echo order. `command` is positional only.
inline const std::vector<detail::Key>& config_keys() {
  using namespace detail;
  using R = RunConfig;
  static const std::vector<Key> keys = {
      string_key("output", "output path (default <command>.csv)", &R::output),
      string_key("format", "csv or json", &R::format),
      bool_key("apply_2pi", "treat frequencies as cycles/us and multiply by 2 pi", &R::apply_2pi),
      number_key("jobs", "worker threads for grid sweeps", &R::jobs),
      number_key("tol", "abs/rel tolerance of state propagation", &R::tol),
      number_key("tol_master", "abs/rel tolerance of the master equation", &R::tol_master),
      number_key("omega0", "peak Rabi frequency", &R::omega0),
      number_key("mu", "chirp parameter", &R::mu),
      number_key("beta", "sech bandwidth", &R::beta),
      number_key("duration", "pulse window (us)", &R::duration),
      number_key("gap", "idle time between pulses (us)", &R::gap),
      bool_key("split_two_color", "two-color pulses carry Omega/sqrt(2) per color", &R::split_two_color),
      number_key("delta_opt", "single-ion optical detuning", &R::delta_opt),
      number_key("delta_hf", "single-ion hyperfine shift", &R::delta_hf),
      number_key("alpha", "bar-basis phase (rad)", &R::alpha),
      number_key("points", "time grid points", &R::points),
      string_key("frame", "Bloch inset frame: accelerated, channel_center, ion_frequency", &R::frame),
      number_key("check_delta_opt", "optical detuning for rotation/NOT checks", &R::check_delta_opt),
      number_key("check_delta_hf", "hyperfine shift for rotation/NOT checks", &R::check_delta_hf),
      number_key("theta_count", "rotation angles in [0, pi]", &R::theta_count),
      number_key("delta_c", "control optical detuning", &R::delta_c),
      number_key("delta_t", "target optical detuning", &R::delta_t),
      number_key("dc_min", "control hyperfine grid start", &R::dc_min),
      number_key("dc_max", "control hyperfine grid end", &R::dc_max),
      number_key("dc_count", "control hyperfine grid size", &R::dc_count),
      number_key("dt_min", "target hyperfine grid start", &R::dt_min),
      number_key("dt_max", "target hyperfine grid end", &R::dt_max),
      number_key("dt_count", "target hyperfine grid size", &R::dt_count),
      number_key("delta_dd", "blockade shift", &R::delta_dd),
      bool_key("refocus", "keep the refocusing NOT blocks", &R::refocus),
      bool_key("decay", "spontaneous decay from |e>", &R::decay),
      number_key("te", "excited-state lifetime (us)", &R::te_us),
      list_key("te_list", "lifetimes for lifetime-sweep (us)", &R::te_list),
      number_key("lifetime_delta_c", "control hyperfine shift in lifetime-sweep", &R::lifetime_delta_c),
      number_key("b0", "branching ratio to |0>", &R::b0),
      number_key("b1", "branching ratio to |1>", &R::b1),
      bool_key("loss", "decay the remaining 1 - b0 - b1 out of the manifold", &R::loss),
      list_key("psi_in", "real input amplitudes on |00>,|01>,|10>,|11>", &R::psi_in),
      string_key("table", "program-dump: all, rotation, naive_cphase, not, robust_cphase", &R::table),
  };
  return keys;
}

inline const detail::Key& find_key(const std::string& name) {
  for (const auto& k : config_keys())
    if (k.name == name) return k;
  throw UsageError("unknown key '" + name + "'");
}

/// Applies `key = value` lines; `#` starts a comment.
inline void apply_config_text(RunConfig& cfg, std::string_view text) {
  std::istringstream in{std::string(text)};
  std::string line;
  int lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    if (const auto h = line.find('#'); h != std::string::npos) line.erase(h);
    const std::string s = detail::trim(line);
    if (s.empty()) continue;
    const auto eq = s.find('=');
    if (eq == std::string::npos) throw UsageError("config line " + std::to_string(lineno) + ": expected key = value");
    const std::string key = detail::trim(s.substr(0, eq));
    const std::string value = detail::trim(s.substr(eq + 1));
    if (key == "command") {
      cfg.command = value;
      continue;
    }
    try {
      find_key(key).set(cfg, value);
    } catch (const UsageError&) {
      throw;
    } catch (const ConfigError& e) {
      throw UsageError("config line " + std::to_string(lineno) + " (" + key + "): " + e.what());
    }
  }
}

inline void apply_config_file(RunConfig& cfg, const std::string& path) {
  std::ifstream f(path);
  if (!f) throw UsageError("cannot read config file " + path);
  std::stringstream ss;
  ss << f.rdbuf();
  apply_config_text(cfg, ss.str());
}

/// Fully resolved configuration as `key = value` text; re-parses to an equal RunConfig.
inline std::string echo_config(const RunConfig& cfg) {
  std::string out = "command = " + cfg.command + "\n";
  for (const auto& k : config_keys()) out += k.name + " = " + k.get(cfg) + "\n";
  return out;
}

/// defaults < --config file < flags. Throws UsageError on bad input.
/// Returns std::nullopt when only help was requested (text in `help_out`).
inline std::optional<RunConfig> parse_config(int argc, const char* const* argv, std::string* help_out = nullptr) {
  CLI::App app{"Sech-pulse gate simulations for rare-earth ion qubits", "reqc"};
  app.set_help_flag("-h,--help");
  std::string command;
  std::string config_file;
  app.add_option("command", command, "bloch-traj | leakage | rotation-check | not-check | cphase-surface | "
                                     "lifetime-sweep | program-dump (may come from --config)");
  app.add_option("--config", config_file, "key = value file");

  const auto& keys = config_keys();
  std::vector<std::string> values(keys.size());
  std::vector<CLI::Option*> opts(keys.size());
  for (std::size_t i = 0; i < keys.size(); ++i) {
    std::string names = "--" + keys[i].name;
    std::string dashed = keys[i].name;
    std::replace(dashed.begin(), dashed.end(), '_', '-');
    if (dashed != keys[i].name) names += ",--" + dashed;
    if (keys[i].name == "output") names += ",-o";
    opts[i] = app.add_option(names, values[i], keys[i].help);
  }
  // boolean conveniences
  bool f_bare = false, f_decay = false, f_no_decay = false, f_refocus = false, f_no_refocus = false;
  auto* o_bare = app.add_flag("--bare-units", f_bare, "same as --apply_2pi false");
  auto* o_decay = app.add_flag("--with-decay", f_decay, "same as --decay true");
  auto* o_no_decay = app.add_flag("--no-decay", f_no_decay, "same as --decay false");
  auto* o_refocus = app.add_flag("--with-refocus", f_refocus, "same as --refocus true");
  auto* o_no_refocus = app.add_flag("--no-refocus", f_no_refocus, "same as --refocus false");

  // `--decay`, `--refocus` and `--apply-2pi` may appear without a value.
  std::vector<std::string> args;
  for (int i = 1; i < argc; ++i) {
    std::string a = argv[i];
    const bool bare_bool = a == "--decay" || a == "--refocus" || a == "--apply-2pi" || a == "--apply_2pi" ||
                           a == "--split-two-color" || a == "--split_two_color" || a == "--loss";
    const bool next_is_value =
        i + 1 < argc && (std::string(argv[i + 1]) == "true" || std::string(argv[i + 1]) == "false" ||
                         std::string(argv[i + 1]) == "1" || std::string(argv[i + 1]) == "0");
    if (bare_bool && !next_is_value) {
      args.push_back(a + "=true");
      continue;
    }
    args.push_back(a);
  }
  std::vector<std::string> rev(args.rbegin(), args.rend());
  try {
    app.parse(rev);
  } catch (const CLI::CallForHelp&) {
    if (help_out) *help_out = app.help();
    return std::nullopt;
  } catch (const CLI::ParseError& e) {
    throw UsageError(e.what());
  }

  RunConfig cfg;
  if (!config_file.empty()) apply_config_file(cfg, config_file);
  if (!command.empty()) cfg.command = command;
  if (cfg.command.empty()) throw UsageError("command is required");
  for (std::size_t i = 0; i < keys.size(); ++i) {
    if (opts[i]->count() == 0) continue;
    try {
      keys[i].set(cfg, values[i]);
    } catch (const ConfigError& e) {
      throw UsageError("--" + keys[i].name + ": " + e.what());
    }
  }
  auto conflict = [](CLI::Option* a, CLI::Option* b, const char* what) {
    if (a->count() && b->count()) throw UsageError(std::string("conflicting flags for ") + what);
  };
  if (o_bare->count() && opts[2]->count()) throw UsageError("conflicting flags for apply_2pi");
  conflict(o_decay, o_no_decay, "decay");
  conflict(o_refocus, o_no_refocus, "refocus");
  if (f_bare) cfg.apply_2pi = false;
  if (f_decay) cfg.decay = true;
  if (f_no_decay) cfg.decay = false;
  if (f_refocus) cfg.refocus = true;
  if (f_no_refocus) cfg.refocus = false;
  cfg.validate();
  return cfg;
}

}  // namespace reqc
