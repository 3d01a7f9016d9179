#pragma once

#include <algorithm>
#include <atomic>
#include <cmath>
#include <cstdlib>
#include <exception>
#include <limits>
#include <mutex>
#include <optional>
#include <random>
#include <string>
#include <thread>
#include <utility>
#include <vector>

#include "savbdf/sav_stepper.hpp"

namespace savbdf {

/// Errors at or below this level are treated as rounding-floored and left out of fits.
inline constexpr double kRoundingFloor = 1e-11;

/// Least-squares slope of log(err) against log(dt).
inline double fit_rate(std::span<const std::pair<double, double>> points) {
  std::vector<std::pair<double, double>> logs;
  for (const auto& [dt, err] : points) {
    if (std::isfinite(dt) && std::isfinite(err) && dt > 0.0 && err > 0.0)
      logs.emplace_back(std::log(dt), std::log(err));
  }
  if (logs.size() < 2) throw Error("fit_rate: need at least two finite points");
  double mx = 0.0, my = 0.0;
  for (const auto& [x, y] : logs) {
    mx += x;
    my += y;
  }
  mx /= static_cast<double>(logs.size());
  my /= static_cast<double>(logs.size());
  double sxx = 0.0, sxy = 0.0;
  for (const auto& [x, y] : logs) {
    sxx += (x - mx) * (x - mx);
    sxy += (x - mx) * (y - my);
  }
  if (!(sxx > 0.0)) throw Error("fit_rate: time steps must be distinct");
  return sxy / sxx;
}

/// Number of worker threads: SAV_THREADS if set, else hardware concurrency.
inline unsigned worker_count() {
  unsigned n = std::max(1u, std::thread::hardware_concurrency());
  if (const char* env = std::getenv("SAV_THREADS")) {
    const long v = std::strtol(env, nullptr, 10);
    if (v >= 1) n = static_cast<unsigned>(v);
  }
  return n;
}

/// Runs fn(i) for i in [0, n) on up to worker_count() threads.
template <class Fn>
void parallel_for(std::size_t n, Fn&& fn) {
  const unsigned workers = static_cast<unsigned>(std::min<std::size_t>(worker_count(), n));
  if (workers <= 1) {
    for (std::size_t i = 0; i < n; ++i) fn(i);
    return;
  }
  std::atomic<std::size_t> next{0};
  std::exception_ptr failure;
  std::mutex failure_mutex;
  std::vector<std::jthread> pool;
  for (unsigned w = 0; w < workers; ++w) {
    pool.emplace_back([&] {
      for (std::size_t i = next++; i < n; i = next++) {
        try {
          fn(i);
        } catch (...) {
          std::lock_guard lock(failure_mutex);
          if (!failure) failure = std::current_exception();
        }
      }
    });
  }
  pool.clear();
  if (failure) std::rethrow_exception(failure);
}

/// Band-limited field with independent N(0,1) coefficients on modes |n| <= max_mode
/// (mean mode included), reproducible from `seed`.
inline Field random_smooth_field(const GridPtr& grid, std::uint64_t seed, long max_mode = 8,
                                 double amplitude = 1.0) {
  std::mt19937_64 rng(seed);
  std::normal_distribution<double> normal(0.0, 1.0);
  std::vector<std::complex<double>> c(grid->spectral_size());
  const auto modes = grid->mode_index();
  for (std::size_t m = 0; m < c.size(); ++m) {
    const double re = normal(rng), im = normal(rng);
    const bool keep = std::abs(modes[m][0]) <= max_mode && std::abs(modes[m][1]) <= max_mode;
    if (!keep) continue;
    c[m] = grid->basis() == Basis::fourier2d ? std::complex<double>(re, im) : re;
    c[m] *= amplitude;
  }
  return Field::from_spectral(grid, std::move(c));
}

// ---------------------------------------------------------------------------
// Convergence studies

struct ConvergenceEntry {
  double dt = 0.0;
  double err_l2 = std::numeric_limits<double>::quiet_NaN();
  double err_h1 = std::numeric_limits<double>::quiet_NaN();
  double err_h2 = std::numeric_limits<double>::quiet_NaN();
  double max_abs_one_minus_xi = std::numeric_limits<double>::quiet_NaN();
  bool diverged = false;
};

struct ConvergenceReport {
  std::string problem;
  int order = 1;
  double final_time = 1.0;
  std::vector<ConvergenceEntry> entries;
  std::optional<double> slope_l2, slope_h1, slope_h2;
};

/// Default dt ladders: 1/40..1/640 for k <= 3, 1/10..1/80 for k = 4 and
/// 1/20..1/160 for k = 5 (at dt = 1/10 BDF5 is not yet asymptotic).
inline std::vector<double> default_dt_ladder(int k) {
  if (k <= 3) return {1.0 / 40, 1.0 / 80, 1.0 / 160, 1.0 / 320, 1.0 / 640};
  if (k == 4) return {1.0 / 10, 1.0 / 20, 1.0 / 40, 1.0 / 80};
  return {1.0 / 20, 1.0 / 40, 1.0 / 80, 1.0 / 160};
}

namespace detail {
inline std::optional<double> fit_column(const std::vector<ConvergenceEntry>& es,
                                        double ConvergenceEntry::*col) {
  std::vector<std::pair<double, double>> pts;
  for (const auto& e : es)
    if (!e.diverged && std::isfinite(e.*col) && e.*col > kRoundingFloor)
      pts.emplace_back(e.dt, e.*col);
  if (pts.size() < 2) return std::nullopt;
  return fit_rate(pts);
}
}  // namespace detail

inline ConvergenceReport convergence_study(const ProblemDefinition& p, const BdfTableau& tab,
                                           std::vector<double> dt_list, double T = 1.0,
                                           StepMode mode = StepMode::sav,
                                           Extrapolation extrapolation = Extrapolation::corrected) {
  if (!p.exact) throw Error("convergence_study: problem needs an exact solution");
  if (dt_list.size() < 3) throw Error("convergence_study: need at least three time steps");
  for (std::size_t i = 1; i < dt_list.size(); ++i)
    if (!(dt_list[i] < dt_list[i - 1]))
      throw Error("convergence_study: dt list must be strictly decreasing");
  for (double dt : dt_list) (void)step_count(dt, T);

  ConvergenceReport rep;
  rep.problem = p.name;
  rep.order = tab.order;
  rep.final_time = T;
  rep.entries.resize(dt_list.size());
  parallel_for(dt_list.size(), [&](std::size_t i) {
    auto& e = rep.entries[i];
    e.dt = dt_list[i];
    RunOptions opt;
    opt.mode = mode;
    opt.extrapolation = extrapolation;
    opt.record_trace = false;
    opt.tolerate_divergence = true;
    const auto r = run(p, tab, e.dt, T, opt);
    e.diverged = r.summary.diverged;
    if (!e.diverged) {
      e.err_l2 = *r.summary.final_err_l2;
      e.err_h1 = *r.summary.final_err_h1;
      e.err_h2 = *r.summary.final_err_h2;
      e.max_abs_one_minus_xi = r.summary.max_abs_one_minus_xi;
    }
  });
  rep.slope_l2 = detail::fit_column(rep.entries, &ConvergenceEntry::err_l2);
  rep.slope_h1 = detail::fit_column(rep.entries, &ConvergenceEntry::err_h1);
  rep.slope_h2 = detail::fit_column(rep.entries, &ConvergenceEntry::err_h2);
  return rep;
}

// ---------------------------------------------------------------------------
// Stability probes

struct StabilityReport {
  RunReport run;
  /// Largest (L u, u) over the first 10 recorded levels, and over the whole run.
  double principal_early_max = 0.0;
  double principal_sup = 0.0;
  double principal_growth_limit = 10.0;
  /// |mean(u^n) - mean(u^0)| maximized over the run.
  double mean_drift = 0.0;

  bool principal_bounded() const {
    return principal_sup <= principal_growth_limit * principal_early_max;
  }
  std::size_t violations() const {
    const auto& s = run.summary;
    return s.r_increases + s.negative_r + s.negative_xi;
  }
  bool passed() const { return !run.summary.diverged && violations() == 0 && principal_bounded(); }
};

/// Runs n_steps of the unforced problem at a (large) dt from u0.
inline StabilityReport stability_probe(const ProblemDefinition& p, const BdfTableau& tab,
                                       double dt, std::size_t n_steps, const Field& u0,
                                       StepMode mode = StepMode::sav,
                                       Extrapolation extrapolation = Extrapolation::corrected) {
  if (p.forced()) throw Error("stability_probe: problem must be unforced");
  if (n_steps == 0) throw Error("stability_probe: need at least one step");

  ProblemDefinition unforced = p;
  unforced.exact.reset();

  StabilityReport rep;
  const double mean0 = mean(u0);
  std::size_t seen = 0;
  RunOptions opt;
  opt.mode = mode;
  opt.extrapolation = extrapolation;
  opt.initial = u0;
  opt.tolerate_divergence = true;
  opt.monitor = [&](const SavState& s) {
    rep.mean_drift = std::max(rep.mean_drift, std::abs(mean(s.u_history.front()) - mean0));
  };
  rep.run = run(unforced, tab, dt, static_cast<double>(n_steps) * dt, opt);
  for (const auto& rec : rep.run.records) {
    if (seen < 10) rep.principal_early_max = std::max(rep.principal_early_max, rec.principal_norm_sq);
    rep.principal_sup = std::max(rep.principal_sup, rec.principal_norm_sq);
    ++seen;
  }
  return rep;
}

// ---------------------------------------------------------------------------
// Burgers: SAV against plain IMEX

struct BurgersSetup {
  double nu = 1.0 / 314.0;
  std::size_t n = 320;
  double dt = 8.5e-3;
  double dt_ref = 1e-4;
  double final_time = 1.0;
  int order = 2;
  std::optional<int> eta_exponent;
  std::optional<double> c_shift;
  Extrapolation extrapolation = Extrapolation::corrected;
};

struct BurgersComparison {
  /// Time actually reached: round(T / dt) steps of dt.
  double final_time = 0.0;
  std::size_t steps = 0;
  std::size_t reference_steps = 0;
  Field reference, sav, imex;
  double reference_max = 0.0;
  double sav_deviation = std::numeric_limits<double>::infinity();
  double imex_deviation = std::numeric_limits<double>::infinity();
  /// max|u| / max|u_ref| - 1.
  double sav_overshoot = std::numeric_limits<double>::infinity();
  double imex_overshoot = std::numeric_limits<double>::infinity();
  bool sav_diverged = false;
  bool imex_diverged = false;
  std::size_t imex_divergence_step = 0;
  /// Per-step diagnostics of the SAV run at dt.
  std::vector<StepRecord> sav_records;
  std::vector<std::pair<double, double>> eta_trace;
  double min_eta = 1.0, max_eta = 1.0;
};

inline double max_deviation(const Field& a, const Field& b) {
  const auto x = a.physical(), y = b.physical();
  double m = 0.0;
  for (std::size_t i = 0; i < x.size(); ++i) m = std::max(m, std::abs(x[i] - y[i]));
  return m;
}

/// Reference (SAV, dt_ref) against SAV and IMEX at dt, from u0 = -sin(pi x).
/// When T/dt is not integral the comparison time is rounded to a whole number
/// of dt steps and the reference step is adjusted to land on it.
inline BurgersComparison burgers_compare(const BurgersSetup& cfg) {
  if (!(cfg.dt > 0.0) || !(cfg.dt_ref > 0.0) || !(cfg.final_time > 0.0))
    throw Error("burgers_compare: dt, dt_ref and T must be positive");
  const auto grid = Grid::sine1d(cfg.n, -1.0, 1.0);
  const auto p = burgers(grid, cfg.nu, cfg.c_shift);
  const auto tab = cfg.eta_exponent ? tableau(cfg.order, *cfg.eta_exponent) : tableau(cfg.order);
  const Field u0 = Field::sample(grid, [](double x, double) { return -std::sin(std::numbers::pi * x); });

  BurgersComparison out;
  out.steps = static_cast<std::size_t>(std::max(1.0, std::round(cfg.final_time / cfg.dt)));
  out.final_time = static_cast<double>(out.steps) * cfg.dt;
  out.reference_steps = static_cast<std::size_t>(std::max(1.0, std::round(out.final_time / cfg.dt_ref)));
  const double dt_ref = out.final_time / static_cast<double>(out.reference_steps);

  RunOptions base;
  base.initial = u0;
  base.record_trace = false;
  base.extrapolation = cfg.extrapolation;

  RunOptions sav_opt = base;
  sav_opt.record_trace = true;
  sav_opt.tolerate_divergence = true;
  RunOptions imex_opt = base;
  imex_opt.mode = StepMode::imex;
  imex_opt.tolerate_divergence = true;

  RunReport ref, sav, imex;
  parallel_for(3, [&](std::size_t i) {
    if (i == 0) ref = run(p, tab, dt_ref, out.final_time, base);
    if (i == 1) sav = run(p, tab, cfg.dt, out.final_time, sav_opt);
    if (i == 2) imex = run(p, tab, cfg.dt, out.final_time, imex_opt);
  });

  out.reference = ref.final_u;
  out.sav = sav.final_u;
  out.imex = imex.final_u;
  out.reference_max = max_abs(out.reference);
  out.sav_diverged = sav.summary.diverged;
  if (!out.sav_diverged) {
    out.sav_deviation = max_deviation(out.sav, out.reference);
    out.sav_overshoot = max_abs(out.sav) / out.reference_max - 1.0;
  }
  out.imex_diverged = imex.summary.diverged;
  out.imex_divergence_step = imex.summary.divergence_step;
  if (!out.imex_diverged) {
    out.imex_deviation = max_deviation(out.imex, out.reference);
    out.imex_overshoot = max_abs(out.imex) / out.reference_max - 1.0;
  }
  for (const auto& rec : sav.records) out.eta_trace.emplace_back(rec.t, rec.eta);
  out.sav_records = std::move(sav.records);
  out.min_eta = sav.summary.min_eta;
  out.max_eta = sav.summary.max_eta;
  return out;
}

}  // namespace savbdf
