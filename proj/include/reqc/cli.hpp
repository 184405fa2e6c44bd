#pragma once

// Command dispatch and CSV / JSON emission.

#include "reqc/config.hpp"
#include "reqc/experiments.hpp"
#include "reqc/gate_compiler.hpp"

#include <json.hpp>

#include <boost/version.hpp>

#include <charconv>
#include <chrono>
#include <ctime>
#include <fstream>
#include <iostream>
#include <string>
#include <vector>

namespace reqc {

inline constexpr const char* kVersion = "0.1.0";

enum ExitCode : int {
  kExitOk = 0,
  kExitUsage = 2,
  kExitIntegration = 3,
  kExitPointFailures = 4,
};

/// Column-oriented numeric table.
struct DataTable {
  std::vector<std::string> columns;
  std::vector<std::vector<double>> rows;

  void add(std::vector<double> row) {
    if (row.size() != columns.size()) throw DimensionError("table row has the wrong width");
    rows.push_back(std::move(row));
  }
};

/// 12 significant digits, locale independent.
inline std::string format_csv_number(double v) {
  if (std::isnan(v)) return "nan";
  if (v == 0.0) v = 0.0;  // no negative zero
  char buf[64];
  auto r = std::to_chars(buf, buf + sizeof(buf), v, std::chars_format::general, 12);
  return std::string(buf, r.ptr);
}

inline std::string to_csv(const DataTable& t) {
  std::string out;
  for (std::size_t i = 0; i < t.columns.size(); ++i) out += (i ? "," : "") + t.columns[i];
  out += '\n';
  for (const auto& r : t.rows) {
    for (std::size_t i = 0; i < r.size(); ++i) out += (i ? "," : "") + format_csv_number(r[i]);
    out += '\n';
  }
  return out;
}

/// {"columns": [...], "data": {"col": [...]}}; numbers go through the CSV
/// formatter so both formats carry identical values.
inline nlohmann::ordered_json to_json(const DataTable& t) {
  nlohmann::ordered_json j;
  j["columns"] = t.columns;
  nlohmann::ordered_json data = nlohmann::ordered_json::object();
  for (std::size_t c = 0; c < t.columns.size(); ++c) {
    auto arr = nlohmann::ordered_json::array();
    for (const auto& r : t.rows) {
      if (std::isnan(r[c])) arr.push_back(nullptr);
      else arr.push_back(std::stod(format_csv_number(r[c])));
    }
    data[t.columns[c]] = std::move(arr);
  }
  j["data"] = std::move(data);
  return j;
}

struct RunResult {
  int exit_code = kExitOk;
  DataTable table;
  std::string text;  ///< program-dump output
  nlohmann::ordered_json summary = nlohmann::ordered_json::object();
  std::string u0_checksum;
  std::vector<PointFailure> failures;
};

namespace detail {

inline void record_failures(RunResult& r, const std::vector<PointFailure>& f) {
  r.failures.insert(r.failures.end(), f.begin(), f.end());
  if (!f.empty()) r.exit_code = kExitPointFailures;
}

inline RunResult run_bloch(const RunConfig& cfg) {
  RunResult r;
  const auto b = bloch_trajectories(cfg.pulse(), cfg.scale() * cfg.delta_opt, cfg.points, cfg.bloch_frame(),
                                    Tolerances::uniform(std::min(cfg.tol, 1e-10)));
  r.table.columns = {"t_us",     "ode_x",   "ode_y",   "ode_z",   "zeroth_x", "zeroth_y", "zeroth_z",
                     "first_x", "first_y", "first_z", "inset_x", "inset_y",  "inset_z"};
  for (const auto& row : b.rows)
    r.table.add({row.t, row.ode.x, row.ode.y, row.ode.z, row.zeroth.x, row.zeroth.y, row.zeroth.z, row.first.x,
                 row.first.y, row.first.z, row.inset.x, row.inset.y, row.inset.z});
  r.summary["max_first_order_distance"] = b.max_first_order_distance;
  r.summary["max_zeroth_order_distance"] = b.max_zeroth_order_distance;
  r.summary["first_better_fraction"] = b.first_better_fraction;
  r.summary["max_nonunitarity"] = b.max_nonunitarity;
  r.summary["inset_frame"] = cfg.frame;
  return r;
}

inline RunResult run_leakage(const RunConfig& cfg) {
  RunResult r;
  const auto lc = cfg.leakage();
  const auto s = leakage_scan(lc);
  r.table.columns = {"t_us", "p_leak_numeric", "p_leak_perturbative"};
  for (std::size_t k = 0; k < s.t.size(); ++k) r.table.add({s.t[k], s.numeric[k], s.perturbative[k]});
  r.summary["final_numeric"] = s.numeric.back();
  r.summary["final_perturbative"] = s.perturbative.back();
  r.summary["naive_bound"] = cfg.delta_hf * cfg.duration;
  // E_+ / delta crossings (documented, not asserted)
  const TwoLevelDrive d{lc.pulse, lc.delta_opt};
  for (double ratio : {10.0, 100.0}) {
    try {
      r.summary["t_e_plus_over_delta_" + std::to_string(static_cast<int>(ratio))] =
          energy_ratio_crossing(d, lc.delta_hf, ratio);
    } catch (const std::exception&) {
      r.summary["t_e_plus_over_delta_" + std::to_string(static_cast<int>(ratio))] = nullptr;
    }
  }
  return r;
}

inline RunResult run_rotation(const RunConfig& cfg) {
  RunResult r;
  const IonParams ion{cfg.scale() * cfg.check_delta_opt, cfg.scale() * cfg.check_delta_hf, std::nullopt};
  r.table.columns = {"theta", "alpha", "distance", "bar_phase", "leakage"};
  const auto thetas = linspace(0.0, pi, cfg.theta_count);
  double worst = 0.0;
  for (double th : thetas) {
    const auto c = rotation_check(th, cfg.alpha, cfg.pulse(), ion, cfg.program_options(), cfg.tolerances());
    r.table.add({th, cfg.alpha, c.distance, c.bar_phase, c.leakage});
    worst = std::max(worst, c.distance);
  }
  r.summary["max_distance"] = worst;
  return r;
}

inline RunResult run_not(const RunConfig& cfg) {
  RunResult r;
  const IonParams ion{cfg.scale() * cfg.check_delta_opt, cfg.scale() * cfg.check_delta_hf, std::nullopt};
  const auto c = not_check(cfg.pulse(), ion, cfg.program_options(), cfg.tolerances());
  r.table.columns = {"input", "p0", "p1", "pe"};
  for (int k = 0; k < 2; ++k) r.table.add({double(k), c.populations[k][0], c.populations[k][1], c.populations[k][2]});
  r.summary["transfer_0_to_1"] = c.populations[0][1];
  r.summary["transfer_1_to_0"] = c.populations[1][0];
  return r;
}

inline RunResult run_surface(const RunConfig& cfg) {
  RunResult r;
  const auto s = sweep_hyperfine(cfg.sweep());
  const double inv = 1.0 / cfg.scale();
  r.table.columns = {"delta_c", "delta_t", "fidelity"};
  for (std::size_t i = 0; i < s.x.values.size(); ++i)
    for (std::size_t j = 0; j < s.y.values.size(); ++j)
      r.table.add({s.x.values[i] * inv, s.y.values[j] * inv, s.at(i, j)});
  r.u0_checksum = s.u0_checksum;
  r.summary["min_fidelity"] = s.min();
  r.summary["max_fidelity"] = s.max();
  const auto [vx, vy] = s.axis_variation();
  r.summary["variation_delta_c"] = vx;
  r.summary["variation_delta_t"] = vy;
  for (const auto& [k, v] : s.metadata) r.summary[k] = v;
  record_failures(r, s.failures);
  return r;
}

inline RunResult run_lifetime(const RunConfig& cfg) {
  RunResult r;
  const auto l = sweep_lifetime(cfg.sweep());
  const double inv = 1.0 / cfg.scale();
  r.table.columns = {"te_us", "delta_t", "fidelity"};
  for (std::size_t i = 0; i < l.te_us.size(); ++i)
    for (std::size_t j = 0; j < l.delta_t.values.size(); ++j)
      r.table.add({l.te_us[i], l.delta_t.values[j] * inv, l.values[i][j]});
  r.u0_checksum = l.u0_checksum;
  record_failures(r, l.failures);
  return r;
}

inline RunResult run_program_dump(const RunConfig& cfg) {
  RunResult r;
  const auto p = cfg.pulse();
  const auto opts = cfg.program_options();
  std::vector<PulseProgram> progs;
  if (cfg.table == "all" || cfg.table == "rotation")
    progs.push_back(arbitrary_rotation_program(pi / 2, cfg.alpha, p, opts));
  if (cfg.table == "all" || cfg.table == "naive_cphase") progs.push_back(naive_cphase_program(p, opts));
  if (cfg.table == "all" || cfg.table == "not") progs.push_back(not_gate_program(IonRole::target, p, opts));
  if (cfg.table == "all" || cfg.table == "robust_cphase") progs.push_back(robust_cphase_program(p, opts, cfg.refocus));
  for (const auto& prog : progs) {
    r.text += render_table(prog);
    r.text += serialize_program(prog);
    r.text += '\n';
  }
  r.summary["programs"] = progs.size();
  return r;
}

inline std::string timestamp_utc() {
  const auto now = std::chrono::system_clock::to_time_t(std::chrono::system_clock::now());
  std::tm tm{};
  gmtime_r(&now, &tm);
  char buf[32];
  std::strftime(buf, sizeof(buf), "%Y-%m-%dT%H:%M:%SZ", &tm);
  return buf;
}

inline void write_file(const std::string& path, const std::string& content) {
  std::ofstream f(path, std::ios::binary);
  if (!f) throw ConfigError("cannot write " + path);
  f << content;
  if (!f) throw ConfigError("write failed: " + path);
}

}  // namespace detail

/// Runs the experiment without touching the filesystem.
inline RunResult execute(const RunConfig& cfg) {
  cfg.validate();
  if (cfg.command == "bloch-traj") return detail::run_bloch(cfg);
  if (cfg.command == "leakage") return detail::run_leakage(cfg);
  if (cfg.command == "rotation-check") return detail::run_rotation(cfg);
  if (cfg.command == "not-check") return detail::run_not(cfg);
  if (cfg.command == "cphase-surface") return detail::run_surface(cfg);
  if (cfg.command == "lifetime-sweep") return detail::run_lifetime(cfg);
  if (cfg.command == "program-dump") return detail::run_program_dump(cfg);
  throw UsageError("unknown command '" + cfg.command + "'");
}

/// Metadata sidecar contents. Everything except `timestamp` and
/// `wall_time_s` is a function of the configuration.
inline nlohmann::ordered_json metadata(const RunConfig& cfg, const RunResult& r, double wall_s) {
  nlohmann::ordered_json m;
  m["command"] = cfg.command;
  m["config"] = echo_config(cfg);
  nlohmann::ordered_json keys = nlohmann::ordered_json::object();
  keys["command"] = cfg.command;
  for (const auto& k : config_keys()) keys[k.name] = k.get(cfg);
  m["config_keys"] = keys;
  const auto p = cfg.pulse();
  const double s = cfg.scale();
  m["frequency_scale"] = s;
  m["resolved_rad_per_us"] = {{"omega0", p.omega0},
                              {"beta", p.beta},
                              {"delta_opt", s * cfg.delta_opt},
                              {"delta_hf", s * cfg.delta_hf},
                              {"delta_c", s * cfg.delta_c},
                              {"delta_t", s * cfg.delta_t},
                              {"delta_dd", s * cfg.delta_dd}};
  m["versions"] = {{"reqc", kVersion},
                   {"eigen", std::to_string(EIGEN_WORLD_VERSION) + "." + std::to_string(EIGEN_MAJOR_VERSION) + "." +
                                 std::to_string(EIGEN_MINOR_VERSION)},
                   {"boost", BOOST_LIB_VERSION}};
  m["u0_checksum"] = r.u0_checksum.empty() ? nlohmann::ordered_json(nullptr) : nlohmann::ordered_json(r.u0_checksum);
  m["summary"] = r.summary;
  auto fails = nlohmann::ordered_json::array();
  for (const auto& f : r.failures) fails.push_back({{"index", f.index}, {"error", f.message}});
  m["failures"] = fails;
  m["exit_code"] = r.exit_code;
  m["wall_time_s"] = wall_s;
  m["timestamp"] = detail::timestamp_utc();
  return m;
}

/// Runs the configured command and writes the data file plus
/// `<output>.meta.json`. Returns the process exit status.
inline int run(const RunConfig& cfg, std::ostream& log = std::cerr) {
  const auto t0 = std::chrono::steady_clock::now();
  RunResult r;
  try {
    r = execute(cfg);
  } catch (const IntegrationError& e) {
    log << "integration failure at t = " << e.time() << " us: " << e.what() << '\n';
    return kExitIntegration;
  } catch (const ConfigError& e) {
    log << "configuration error: " << e.what() << '\n';
    return kExitUsage;
  }
  const double wall = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
  const std::string path = cfg.output_path();
  try {
    if (cfg.command == "program-dump") detail::write_file(path, r.text);
    else if (cfg.format == "json") detail::write_file(path, to_json(r.table).dump(2) + "\n");
    else detail::write_file(path, to_csv(r.table));
    detail::write_file(path + ".meta.json", metadata(cfg, r, wall).dump(2) + "\n");
  } catch (const ConfigError& e) {
    log << e.what() << '\n';
    return kExitUsage;
  }
  if (!r.failures.empty()) log << r.failures.size() << " grid point(s) failed; see " << path << ".meta.json\n";
  return r.exit_code;
}

/// argv entry point.
inline int main_entry(int argc, const char* const* argv, std::ostream& out = std::cout,
                      std::ostream& err = std::cerr) {
  try {
    std::string help;
    const auto cfg = parse_config(argc, argv, &help);
    if (!cfg) {
      out << help;
      return kExitOk;
    }
    for (const double d : {cfg->delta_hf, cfg->check_delta_hf})
      if (!hyperfine_within(IonParams{0.0, d, std::nullopt}))
        err << "warning: hyperfine shift " << d << " is outside the expected +-0.06 window\n";
    return run(*cfg, err);
  } catch (const ConfigError& e) {
    err << "usage error: " << e.what() << "\n";
    return kExitUsage;
  }
}

}  // namespace reqc
