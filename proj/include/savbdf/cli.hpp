#pragma once

// Command-line front end: configuration (flat JSON file plus flag overrides),
// experiment dispatch and artifact writers.
//
// Exit codes: 0 success, 1 configuration or I/O error, 2 a checked scheme
// property failed, 3 divergence in an experiment that does not tolerate it.

#include <charconv>
#include <cstdint>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <map>
#include <optional>
#include <sstream>
#include <string>
#include <string_view>
#include <system_error>
#include <vector>

#include <CLI11.hpp>
#include <json.hpp>

#include "savbdf/harness.hpp"

namespace savbdf::cli {

namespace exit_code {
inline constexpr int ok = 0;
inline constexpr int config = 1;
inline constexpr int assertion = 2;
inline constexpr int divergence = 3;
}  // namespace exit_code

class ConfigError : public Error {
 public:
  using Error::Error;
};

class OutputError : public Error {
 public:
  using Error::Error;
};

enum class Experiment { converge, stability, burgers, run };

struct RunConfig {
  Experiment experiment = Experiment::converge;
  std::string problem = "allen_cahn";
  double alpha = 1e-4;
  double m0 = 0.005;
  double nu = 1.0 / 314.0;
  double stabilization = 0.0;
  std::optional<double> c_shift;
  int order = 2;
  std::optional<int> eta_exponent;
  double dt = 1e-2;
  std::vector<double> dt_list;
  double T = 1.0;
  std::vector<std::size_t> grid{64, 64};
  StepMode mode = StepMode::sav;
  Extrapolation extrapolation = Extrapolation::corrected;
  std::uint64_t seed = 1234;
  std::size_t steps = 200;
  double dt_ref = 1e-4;
  /// Attach the manufactured solution (and its forcing) in `run`.
  bool manufactured = true;
  /// Rescale random stability data to this max |u0| (unset: raw coefficients).
  std::optional<double> data_max_abs;
  std::string out = "out";
};

// ---------------------------------------------------------------------------
// Number formatting and parsing (locale-independent)

/// 17 significant digits, '.' decimal separator, no locale involvement.
inline std::string format_double(double v) {
  char buf[64];
  const auto res = std::to_chars(buf, buf + sizeof buf, v, std::chars_format::general, 17);
  return std::string(buf, res.ptr);
}

inline std::optional<double> parse_number(std::string_view s) {
  while (!s.empty() && s.front() == ' ') s.remove_prefix(1);
  while (!s.empty() && s.back() == ' ') s.remove_suffix(1);
  if (s.empty()) return std::nullopt;
  if (const auto slash = s.find('/'); slash != std::string_view::npos) {
    const auto num = parse_number(s.substr(0, slash));
    const auto den = parse_number(s.substr(slash + 1));
    if (!num || !den || *den == 0.0) return std::nullopt;
    return *num / *den;
  }
  if (s.front() == '+') s.remove_prefix(1);
  double v = 0.0;
  const auto res = std::from_chars(s.data(), s.data() + s.size(), v);
  if (res.ec != std::errc{} || res.ptr != s.data() + s.size()) return std::nullopt;
  return v;
}

/// Splits on ',' (and 'x' when `allow_x`), parsing each token.
inline std::vector<double> parse_number_list(std::string_view s, std::string_view what,
                                             bool allow_x = false) {
  std::vector<double> out;
  std::size_t start = 0;
  for (std::size_t i = 0; i <= s.size(); ++i) {
    if (i == s.size() || s[i] == ',' || (allow_x && (s[i] == 'x' || s[i] == 'X'))) {
      const auto v = parse_number(s.substr(start, i - start));
      if (!v) throw ConfigError(std::string(what) + ": cannot parse '" + std::string(s) + "'");
      out.push_back(*v);
      start = i + 1;
    }
  }
  return out;
}

// ---------------------------------------------------------------------------
// Configuration

inline const std::vector<std::string>& allowed_keys() {
  static const std::vector<std::string> keys{
      "experiment", "problem",      "k",      "order",  "alpha",        "m0",
      "nu",         "stabilization", "c_shift", "eta_exponent", "dt",   "dt_list",
      "T",          "grid",         "mode",   "extrapolation", "seed", "steps",
      "dt_ref",     "manufactured", "data_max_abs", "out"};
  return keys;
}

namespace detail {

inline std::string join(const std::vector<std::string>& v) {
  std::string s;
  for (const auto& x : v) s += (s.empty() ? "" : ", ") + x;
  return s;
}

inline std::string choice(const nlohmann::json& j, const char* key,
                          const std::vector<std::string>& allowed) {
  if (!j.is_string())
    throw ConfigError(std::string("'") + key + "' must be a string, one of: " + join(allowed));
  const auto v = j.get<std::string>();
  for (const auto& a : allowed)
    if (v == a) return v;
  throw ConfigError(std::string("'") + key + "' = '" + v + "' is not allowed; expected one of: " +
                    join(allowed));
}

inline double number(const nlohmann::json& j, const char* key) {
  if (j.is_number()) return j.get<double>();
  if (j.is_string())
    if (const auto v = parse_number(j.get<std::string>())) return *v;
  throw ConfigError(std::string("'") + key + "' must be a number");
}

inline double positive(const nlohmann::json& j, const char* key) {
  const double v = number(j, key);
  if (!(v > 0.0) || !std::isfinite(v))
    throw ConfigError(std::string("'") + key + "' must be a positive finite number");
  return v;
}

inline long long integer(const nlohmann::json& j, const char* key, long long lo, long long hi) {
  long long v = 0;
  if (j.is_number_integer()) {
    v = j.get<long long>();
  } else if (j.is_number_unsigned()) {
    const auto u = j.get<unsigned long long>();
    v = u > static_cast<unsigned long long>(hi) ? hi + 1 : static_cast<long long>(u);
  } else {
    throw ConfigError(std::string("'") + key + "' must be an integer");
  }
  if (v < lo || v > hi)
    throw ConfigError(std::string("'") + key + "' = " + std::to_string(v) + " is out of range [" +
                      std::to_string(lo) + ", " + std::to_string(hi) + "]");
  return v;
}

inline std::vector<double> number_list(const nlohmann::json& j, const char* key) {
  if (j.is_string()) return parse_number_list(j.get<std::string>(), key);
  if (!j.is_array()) throw ConfigError(std::string("'") + key + "' must be an array of numbers");
  std::vector<double> out;
  for (const auto& e : j) out.push_back(number(e, key));
  return out;
}

inline std::vector<std::size_t> grid_extents(const nlohmann::json& j) {
  std::vector<double> raw;
  if (j.is_number()) {
    raw = {j.get<double>()};
  } else if (j.is_string()) {
    raw = parse_number_list(j.get<std::string>(), "grid", true);
  } else if (j.is_array()) {
    raw = number_list(j, "grid");
  } else {
    throw ConfigError("'grid' must be an integer, an array of integers or a string like 64x64");
  }
  if (raw.empty() || raw.size() > 2) throw ConfigError("'grid' takes one or two extents");
  std::vector<std::size_t> out;
  for (double v : raw) {
    if (!(v >= 1.0) || v != std::floor(v) || v > 1e7)
      throw ConfigError("'grid' extents must be positive integers");
    out.push_back(static_cast<std::size_t>(v));
  }
  return out;
}

}  // namespace detail

inline Experiment parse_experiment(const std::string& s) {
  if (s == "converge") return Experiment::converge;
  if (s == "stability") return Experiment::stability;
  if (s == "burgers") return Experiment::burgers;
  if (s == "run") return Experiment::run;
  throw ConfigError("experiment '" + s + "' is not allowed; expected one of: converge, stability, burgers, run");
}

inline std::string experiment_name(Experiment e) {
  switch (e) {
    case Experiment::converge: return "converge";
    case Experiment::stability: return "stability";
    case Experiment::burgers: return "burgers";
    case Experiment::run: return "run";
  }
  return "?";
}

/// Reads a flat JSON object from disk.
inline nlohmann::json load_config_file(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw ConfigError("cannot open config file '" + path.string() + "'");
  nlohmann::json j;
  try {
    j = nlohmann::json::parse(in);
  } catch (const nlohmann::json::parse_error& e) {
    throw ConfigError("config file '" + path.string() + "' is not valid JSON: " + e.what());
  }
  if (!j.is_object()) throw ConfigError("config file must hold a JSON object");
  return j;
}

/// Applies `overrides` on top of `base`; an override of either order key
/// replaces both spellings.
inline nlohmann::json merge_config(nlohmann::json base, const nlohmann::json& overrides) {
  if (base.is_null()) base = nlohmann::json::object();
  for (const auto& [key, value] : overrides.items()) {
    if (key == "order" || key == "k") {
      base.erase("order");
      base.erase("k");
    }
    base[key] = value;
  }
  return base;
}

/// Validates a merged flat configuration and fills problem-dependent defaults.
inline RunConfig parse_config(const nlohmann::json& j) {
  if (!j.is_object()) throw ConfigError("configuration must be a JSON object");
  const auto& keys = allowed_keys();
  for (const auto& [key, value] : j.items()) {
    if (std::find(keys.begin(), keys.end(), key) == keys.end())
      throw ConfigError("unknown key '" + key + "'; allowed keys: " + detail::join(keys));
    if (value.is_object()) throw ConfigError("'" + key + "' must not be an object (flat config)");
  }

  RunConfig c;
  if (j.contains("experiment"))
    c.experiment = parse_experiment(
        detail::choice(j["experiment"], "experiment", {"converge", "stability", "burgers", "run"}));

  c.problem = c.experiment == Experiment::burgers ? "burgers" : "allen_cahn";
  if (j.contains("problem"))
    c.problem = detail::choice(j["problem"], "problem", {"allen_cahn", "cahn_hilliard", "burgers"});
  if (c.experiment == Experiment::burgers && c.problem != "burgers")
    throw ConfigError("experiment 'burgers' requires problem 'burgers'");
  const bool phase_field = c.problem != "burgers";

  if (j.contains("k") && j.contains("order") && j["k"] != j["order"])
    throw ConfigError("'k' and 'order' disagree");
  if (j.contains("order")) c.order = static_cast<int>(detail::integer(j["order"], "order", 1, 5));
  if (j.contains("k")) c.order = static_cast<int>(detail::integer(j["k"], "k", 1, 5));
  if (j.contains("eta_exponent"))
    c.eta_exponent = static_cast<int>(detail::integer(j["eta_exponent"], "eta_exponent", 1, 64));

  c.alpha = c.problem == "cahn_hilliard" ? 0.04 : 1e-4;
  if (j.contains("alpha")) c.alpha = detail::positive(j["alpha"], "alpha");
  if (j.contains("m0")) c.m0 = detail::positive(j["m0"], "m0");
  if (j.contains("nu")) c.nu = detail::positive(j["nu"], "nu");
  if (j.contains("stabilization")) {
    c.stabilization = detail::number(j["stabilization"], "stabilization");
    if (!(c.stabilization >= 0.0) || !std::isfinite(c.stabilization))
      throw ConfigError("'stabilization' must be a non-negative finite number");
  }
  if (j.contains("c_shift")) c.c_shift = detail::positive(j["c_shift"], "c_shift");

  c.grid = phase_field ? std::vector<std::size_t>{64, 64} : std::vector<std::size_t>{320};
  if (j.contains("grid")) c.grid = detail::grid_extents(j["grid"]);
  if (phase_field) {
    if (c.grid.size() == 1) c.grid.push_back(c.grid[0]);
    if (c.grid[0] % 2 != 0 || c.grid[1] % 2 != 0)
      throw ConfigError("'grid' extents must be even for the periodic box");
  } else if (c.grid.size() != 1) {
    throw ConfigError("'grid' for burgers is a single extent N");
  }

  switch (c.experiment) {
    case Experiment::stability: c.dt = 0.1; break;
    case Experiment::burgers: c.dt = 8.5e-3; break;
    case Experiment::run: c.dt = phase_field ? 1e-2 : 8.5e-3; break;
    case Experiment::converge: break;
  }
  if (j.contains("dt")) c.dt = detail::positive(j["dt"], "dt");
  if (j.contains("T")) c.T = detail::positive(j["T"], "T");
  if (j.contains("dt_ref")) c.dt_ref = detail::positive(j["dt_ref"], "dt_ref");
  if (j.contains("steps"))
    c.steps = static_cast<std::size_t>(detail::integer(j["steps"], "steps", 1, 100000000));

  if (j.contains("dt_list")) {
    c.dt_list = detail::number_list(j["dt_list"], "dt_list");
    for (double v : c.dt_list)
      if (!(v > 0.0) || !std::isfinite(v)) throw ConfigError("'dt_list' entries must be positive");
  }
  if (c.experiment == Experiment::converge) {
    if (c.dt_list.empty()) c.dt_list = default_dt_ladder(c.order);
    if (c.dt_list.size() < 3) throw ConfigError("'dt_list' needs at least three entries");
    for (std::size_t i = 1; i < c.dt_list.size(); ++i)
      if (!(c.dt_list[i] < c.dt_list[i - 1]))
        throw ConfigError("'dt_list' must be strictly decreasing");
    try {
      for (double dt : c.dt_list) (void)step_count(dt, c.T);
    } catch (const Error&) {
      throw ConfigError("every 'dt_list' entry must divide T into a whole number of steps");
    }
  }

  if (j.contains("mode")) c.mode = detail::choice(j["mode"], "mode", {"sav", "imex"}) == "imex"
                                       ? StepMode::imex
                                       : StepMode::sav;
  if (j.contains("extrapolation"))
    c.extrapolation = detail::choice(j["extrapolation"], "extrapolation",
                                     {"corrected", "uncorrected"}) == "uncorrected"
                          ? Extrapolation::uncorrected
                          : Extrapolation::corrected;
  if (j.contains("seed"))
    c.seed = static_cast<std::uint64_t>(
        detail::integer(j["seed"], "seed", 0, std::numeric_limits<long long>::max()));

  c.manufactured = phase_field;
  if (j.contains("manufactured")) {
    if (!j["manufactured"].is_boolean()) throw ConfigError("'manufactured' must be true or false");
    c.manufactured = j["manufactured"].get<bool>();
  }
  if (j.contains("data_max_abs")) c.data_max_abs = detail::positive(j["data_max_abs"], "data_max_abs");

  if (j.contains("out")) {
    if (!j["out"].is_string() || j["out"].get<std::string>().empty())
      throw ConfigError("'out' must be a non-empty path");
    c.out = j["out"].get<std::string>();
  }
  return c;
}

/// Parses argv: optional subcommand, --config file, then flag overrides.
/// Returns nullopt when help was requested (already printed to `out`).
inline std::optional<RunConfig> parse_command_line(int argc, const char* const* argv,
                                                   std::ostream& out = std::cout) {
  CLI::App app{"IMEX BDFk scalar-auxiliary-variable solver and experiment harness", "savbdf"};
  app.require_subcommand(0, 1);
  std::map<std::string, CLI::App*> subs;
  const std::pair<const char*, const char*> commands[] = {
      {"converge", "temporal convergence study on a dt ladder"},
      {"stability", "large-step energy and positivity probe from random data"},
      {"burgers", "SAV vs IMEX vs fine reference for viscous Burgers"},
      {"run", "single trajectory with a full trace"}};
  for (const auto& [name, help] : commands) {
    subs[name] = app.add_subcommand(name, help);
    subs[name]->fallthrough();
  }

  std::string config_path;
  app.add_option("--config", config_path, "flat JSON configuration file");

  struct Flag {
    const char* name;
    const char* key;
    const char* help;
    std::string value;
  };
  std::vector<Flag> flags{
      {"--problem", "problem", "allen_cahn | cahn_hilliard | burgers", {}},
      {"--order", "order", "BDF order k in 1..5", {}},
      {"--dt", "dt", "time step", {}},
      {"--dt-list", "dt_list", "comma-separated time steps, e.g. 1/40,1/80,1/160", {}},
      {"--T", "T", "final time", {}},
      {"--grid", "grid", "grid extents, e.g. 64x64 or 320", {}},
      {"--mode", "mode", "sav | imex", {}},
      {"--eta-exponent", "eta_exponent", "override p in eta = 1 - (1 - xi)^p", {}},
      {"--seed", "seed", "seed for random initial data", {}},
      {"--out", "out", "output directory", {}},
      {"--alpha", "alpha", "interface parameter", {}},
      {"--m0", "m0", "Cahn-Hilliard mobility", {}},
      {"--nu", "nu", "Burgers viscosity", {}},
      {"--stabilization", "stabilization", "linear stabilization s >= 0", {}},
      {"--c-shift", "c_shift", "energy offset per unit volume", {}},
      {"--steps", "steps", "number of steps for stability probes", {}},
      {"--dt-ref", "dt_ref", "reference time step for burgers", {}},
      {"--extrapolation", "extrapolation", "corrected | uncorrected", {}},
      {"--data-max-abs", "data_max_abs", "rescale random data to this max |u0|", {}},
  };
  for (auto& f : flags) app.add_option(f.name, f.value, f.help);
  std::string manufactured;
  app.add_option("--manufactured", manufactured, "true | false (run experiment)");

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp&) {
    out << app.help();
    return std::nullopt;
  } catch (const CLI::ParseError& e) {
    throw ConfigError(e.what());
  }

  nlohmann::json base = nlohmann::json::object();
  if (!config_path.empty()) base = load_config_file(config_path);

  nlohmann::json overrides = nlohmann::json::object();
  for (const auto& [name, sub] : subs)
    if (sub->parsed()) overrides["experiment"] = name;
  for (const auto& f : flags) {
    if (app.count(f.name) == 0) continue;
    const std::string key = f.key;
    if (key == "order" || key == "eta_exponent" || key == "steps" || key == "seed") {
      long long v = 0;
      const auto res = std::from_chars(f.value.data(), f.value.data() + f.value.size(), v);
      if (res.ec != std::errc{} || res.ptr != f.value.data() + f.value.size())
        throw ConfigError(std::string(f.name) + " expects an integer, got '" + f.value + "'");
      overrides[key] = v;
    } else {
      overrides[key] = f.value;
    }
  }
  if (app.count("--manufactured")) {
    if (manufactured != "true" && manufactured != "false")
      throw ConfigError("--manufactured expects true or false");
    overrides["manufactured"] = manufactured == "true";
  }
  return parse_config(merge_config(std::move(base), overrides));
}

// ---------------------------------------------------------------------------
// Problem construction

inline ProblemDefinition build_problem(const RunConfig& c, bool manufactured) {
  if (c.problem == "burgers") {
    auto p = burgers(Grid::sine1d(c.grid[0]), c.nu, c.c_shift);
    return manufactured ? with_manufactured_forcing(std::move(p), exact_solutions::sine_mode()) : p;
  }
  const auto grid = Grid::fourier2d(c.grid[0], c.grid[1]);
  auto p = c.problem == "cahn_hilliard"
               ? cahn_hilliard(grid, c.alpha, c.m0, c.stabilization, c.c_shift)
               : allen_cahn(grid, c.alpha, c.stabilization, c.c_shift);
  return manufactured ? with_manufactured_forcing(std::move(p), exact_solutions::phase_field()) : p;
}

inline BdfTableau build_tableau(const RunConfig& c) {
  return c.eta_exponent ? tableau(c.order, *c.eta_exponent) : tableau(c.order);
}

/// Seeded random smooth data, optionally rescaled to a given max |u0|.
inline Field stability_data(const GridPtr& grid, std::uint64_t seed,
                            std::optional<double> max_abs_target = {}) {
  Field u0 = random_smooth_field(grid, seed);
  if (max_abs_target) {
    const double m = max_abs(u0);
    if (m > 0.0) u0.scale(*max_abs_target / m);
  }
  return u0;
}

// ---------------------------------------------------------------------------
// Artifact writers

namespace detail {

inline void write_file(const std::filesystem::path& path, const std::string& content) {
  std::ofstream f(path, std::ios::binary | std::ios::trunc);
  if (!f) throw OutputError("cannot write '" + path.string() + "'");
  f.write(content.data(), static_cast<std::streamsize>(content.size()));
  f.close();
  if (!f) throw OutputError("failed writing '" + path.string() + "'");
}

inline std::string optional_cell(const std::optional<double>& v) {
  return v ? format_double(*v) : std::string();
}

}  // namespace detail

inline std::string trace_csv(const std::vector<StepRecord>& records) {
  std::string s = "step,t,r,xi,eta,energy,principal_norm_sq,err_l2,err_h1,err_h2\n";
  for (const auto& r : records) {
    s += std::to_string(r.step) + ',' + format_double(r.t) + ',' + format_double(r.r) + ',' +
         format_double(r.xi) + ',' + format_double(r.eta) + ',' + format_double(r.energy) + ',' +
         format_double(r.principal_norm_sq) + ',' + detail::optional_cell(r.err_l2) + ',' +
         detail::optional_cell(r.err_h1) + ',' + detail::optional_cell(r.err_h2) + '\n';
  }
  return s;
}

inline std::string convergence_csv(const ConvergenceReport& rep) {
  std::string s = "dt,err_l2,err_h1,err_h2\n";
  for (const auto& e : rep.entries) {
    auto cell = [&](double v) { return e.diverged ? std::string() : format_double(v); };
    s += format_double(e.dt) + ',' + cell(e.err_l2) + ',' + cell(e.err_h1) + ',' + cell(e.err_h2) +
         '\n';
  }
  return s;
}

inline std::string summary_json(const ConvergenceReport& rep) {
  auto val = [](const std::optional<double>& v) { return v ? format_double(*v) : "null"; };
  return "{\"slope_l2\": " + val(rep.slope_l2) + ", \"slope_h1\": " + val(rep.slope_h1) +
         ", \"slope_h2\": " + val(rep.slope_h2) + "}\n";
}

inline std::string snapshot_csv(const Field& u) {
  std::string s = "x,u\n";
  const auto v = u.physical();
  for (std::size_t i = 0; i < v.size(); ++i)
    s += format_double(u.grid()->point(i)[0]) + ',' + format_double(v[i]) + '\n';
  return s;
}

// ---------------------------------------------------------------------------
// Execution

namespace detail {

inline int run_converge(const RunConfig& c, const std::filesystem::path& dir, std::ostream& log) {
  const auto p = build_problem(c, true);
  const auto tab = build_tableau(c);
  const auto rep = convergence_study(p, tab, c.dt_list, c.T, c.mode, c.extrapolation);

  RunOptions opt;
  opt.mode = c.mode;
  opt.extrapolation = c.extrapolation;
  opt.trace_errors = true;
  opt.tolerate_divergence = true;
  const auto finest = run(p, tab, c.dt_list.back(), c.T, opt);

  write_file(dir / "convergence.csv", convergence_csv(rep));
  write_file(dir / "summary.json", summary_json(rep));
  write_file(dir / "trace.csv", trace_csv(finest.records));

  for (const auto& e : rep.entries)
    log << "dt=" << format_double(e.dt)
        << (e.diverged ? "  diverged" : "  err_h2=" + format_double(e.err_h2)) << '\n';
  log << "slope_h2=" << (rep.slope_h2 ? format_double(*rep.slope_h2) : "n/a") << '\n';
  return exit_code::ok;
}

inline int run_stability(const RunConfig& c, const std::filesystem::path& dir, std::ostream& log) {
  const auto p = build_problem(c, false);
  const auto tab = build_tableau(c);
  const Field u0 = stability_data(p.grid, c.seed, c.data_max_abs);
  const auto rep = stability_probe(p, tab, c.dt, c.steps, u0, c.mode, c.extrapolation);
  write_file(dir / "trace.csv", trace_csv(rep.run.records));

  const auto& s = rep.run.summary;
  log << "steps=" << s.steps << " r_increases=" << s.r_increases << " negative_r=" << s.negative_r
      << " negative_xi=" << s.negative_xi << " principal_sup=" << format_double(rep.principal_sup)
      << " principal_early_max=" << format_double(rep.principal_early_max)
      << " mean_drift=" << format_double(rep.mean_drift) << '\n';
  if (s.diverged) {
    log << "divergence detected at step " << s.divergence_step << '\n';
    return exit_code::divergence;
  }
  if (c.mode == StepMode::sav && !rep.passed()) {
    log << "stability assertion failed\n";
    return exit_code::assertion;
  }
  return exit_code::ok;
}

inline int run_burgers(const RunConfig& c, const std::filesystem::path& dir, std::ostream& log) {
  BurgersSetup setup;
  setup.nu = c.nu;
  setup.n = c.grid[0];
  setup.dt = c.dt;
  setup.dt_ref = c.dt_ref;
  setup.final_time = c.T;
  setup.order = c.order;
  setup.eta_exponent = c.eta_exponent;
  setup.c_shift = c.c_shift;
  setup.extrapolation = c.extrapolation;
  const auto cmp = burgers_compare(setup);

  write_file(dir / "trace.csv", trace_csv(cmp.sav_records));
  write_file(dir / "snapshot_ref.csv", snapshot_csv(cmp.reference));
  if (!cmp.sav.empty()) write_file(dir / "snapshot_sav.csv", snapshot_csv(cmp.sav));
  if (!cmp.imex.empty()) write_file(dir / "snapshot_imex.csv", snapshot_csv(cmp.imex));

  log << "t=" << format_double(cmp.final_time) << " steps=" << cmp.steps
      << " reference_steps=" << cmp.reference_steps << '\n'
      << "sav: deviation=" << format_double(cmp.sav_deviation)
      << " overshoot=" << format_double(cmp.sav_overshoot) << " eta in ["
      << format_double(cmp.min_eta) << ", " << format_double(cmp.max_eta) << "]\n"
      << "imex: deviation=" << format_double(cmp.imex_deviation)
      << " overshoot=" << format_double(cmp.imex_overshoot);
  if (cmp.imex_diverged) log << " (diverged at step " << cmp.imex_divergence_step << ')';
  log << '\n';
  if (cmp.sav_diverged) {
    log << "divergence detected in the SAV run\n";
    return exit_code::divergence;
  }
  return exit_code::ok;
}

inline int run_single(const RunConfig& c, const std::filesystem::path& dir, std::ostream& log) {
  const bool manufactured = c.manufactured;
  const auto p = build_problem(c, manufactured);
  const auto tab = build_tableau(c);
  // A final time that is not a whole number of steps is rounded to one.
  const double steps = std::max(1.0, std::round(c.T / c.dt));
  const double T = steps * c.dt;

  RunOptions opt;
  opt.mode = c.mode;
  opt.extrapolation = c.extrapolation;
  opt.trace_errors = manufactured;
  if (!manufactured) {
    if (c.problem == "burgers")
      opt.initial = Field::sample(p.grid, [](double x, double) { return -std::sin(std::numbers::pi * x); });
    else
      opt.initial = stability_data(p.grid, c.seed, c.data_max_abs);
  }

  RunReport rep;
  try {
    rep = run(p, tab, c.dt, T, opt);
  } catch (const DivergenceError& e) {
    log << "divergence detected at step " << e.step() << '\n';
    return exit_code::divergence;
  }
  write_file(dir / "trace.csv", trace_csv(rep.records));

  const auto& s = rep.summary;
  log << "t=" << format_double(rep.final_time) << " steps=" << s.steps
      << " max|1-xi|=" << format_double(s.max_abs_one_minus_xi) << " eta in ["
      << format_double(s.min_eta) << ", " << format_double(s.max_eta) << "]";
  if (s.final_err_h2) log << " err_h2=" << format_double(*s.final_err_h2);
  log << '\n';
  if (c.mode == StepMode::sav && !p.forced() &&
      s.r_increases + s.negative_r + s.negative_xi > 0) {
    log << "energy assertion failed: r_increases=" << s.r_increases << '\n';
    return exit_code::assertion;
  }
  return exit_code::ok;
}

}  // namespace detail

/// Runs the configured experiment and writes its artifacts into cfg.out.
inline int execute(const RunConfig& cfg, std::ostream& log = std::cout,
                   std::ostream& err = std::cerr) {
  const std::filesystem::path dir(cfg.out);
  std::error_code ec;
  std::filesystem::create_directories(dir, ec);
  if (ec || !std::filesystem::is_directory(dir)) {
    err << "error: cannot create output directory '" << dir.string() << "'\n";
    return exit_code::config;
  }
  try {
    switch (cfg.experiment) {
      case Experiment::converge: return detail::run_converge(cfg, dir, log);
      case Experiment::stability: return detail::run_stability(cfg, dir, log);
      case Experiment::burgers: return detail::run_burgers(cfg, dir, log);
      case Experiment::run: return detail::run_single(cfg, dir, log);
    }
  } catch (const OutputError& e) {
    err << "error: " << e.what() << '\n';
    return exit_code::config;
  } catch (const DivergenceError& e) {
    err << "error: divergence detected at step " << e.step() << '\n';
    return exit_code::divergence;
  } catch (const InvariantViolation& e) {
    err << "error: " << e.what() << '\n';
    return exit_code::assertion;
  } catch (const Error& e) {
    err << "error: " << e.what() << '\n';
    return exit_code::config;
  }
  return exit_code::config;
}

/// Full command-line entry point.
inline int main(int argc, const char* const* argv) {
  std::optional<RunConfig> cfg;
  try {
    cfg = parse_command_line(argc, argv);
  } catch (const Error& e) {
    std::cerr << "error: " << e.what() << '\n';
    return exit_code::config;
  }
  if (!cfg) return exit_code::ok;
  return execute(*cfg);
}

}  // namespace savbdf::cli
