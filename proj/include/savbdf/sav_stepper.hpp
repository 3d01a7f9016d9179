#pragma once

// Implicit-explicit BDFk scheme with a scalar auxiliary variable r:
//
//   (alpha ubar^{n+1} - A_k(u^n)) / dt + A ubar^{n+1} + g[B_k(w^n)] = f^{n+1}
//   r^{n+1} = (r^n + dt h^{n+1}) / (1 + dt K(ubar^{n+1}) / E(ubar^{n+1}))
//   xi^{n+1} = r^{n+1} / E(ubar^{n+1})
//   u^{n+1}  = eta ubar^{n+1},   eta = 1 - (1 - xi^{n+1})^p
//
// w is u (default) or ubar, see Extrapolation. h is the manufactured energy
// source; it is zero for unforced problems, in which case r is non-increasing
// for every dt.

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <functional>
#include <limits>
#include <optional>
#include <utility>
#include <vector>

#include "savbdf/bdf_tableau.hpp"
#include "savbdf/history.hpp"
#include "savbdf/problems.hpp"

namespace savbdf {

enum class StepMode { sav, imex };

/// Which history feeds the explicit term g[B_k(.)]: the uncorrected ubar
/// levels, or the corrected u levels (u = eta ubar). Both are kth-order and
/// keep r non-increasing; only `corrected` keeps every field bounded in
/// floating point when eta collapses at very large dt.
enum class Extrapolation { corrected, uncorrected };

struct SavState {
  std::size_t step_index = 0;
  double time = 0.0;
  /// Number of history levels kept (the target order).
  std::size_t depth = 1;
  /// Corrected solutions u^n, u^{n-1}, ... (most recent first).
  std::vector<Field> u_history;
  /// Uncorrected solutions ubar^n, ubar^{n-1}, ...
  std::vector<Field> ubar_history;
  double r = 0.0;
  double last_xi = 1.0;
  double last_eta = 1.0;
  /// E(ubar^n) of the latest level.
  double last_energy_bar = 0.0;
};

namespace detail {

inline void push_level(SavState& s, Field u, Field ubar) {
  s.u_history.insert(s.u_history.begin(), std::move(u));
  s.ubar_history.insert(s.ubar_history.begin(), std::move(ubar));
  if (s.u_history.size() > s.depth) s.u_history.resize(s.depth);
  if (s.ubar_history.size() > s.depth) s.ubar_history.resize(s.depth);
}

inline double eta_factor(double xi, int exponent) { return 1.0 - std::pow(1.0 - xi, exponent); }

using LevelCallback = std::function<void(const SavState&)>;

}  // namespace detail

/// Advances one step of size dt. Throws DivergenceError on non-finite values.
inline SavState step(const SavState& s, const ProblemDefinition& p, const BdfTableau& tab,
                     double dt, StepMode mode = StepMode::sav,
                     Extrapolation extrapolation = Extrapolation::corrected) {
  if (!(dt > 0.0)) throw Error("step: dt must be positive");
  if (!(s.r >= 0.0)) throw InvariantViolation("step: r must be non-negative");
  const auto k = static_cast<std::size_t>(tab.order);
  if (s.u_history.size() < k) throw InsufficientHistory(k, s.u_history.size());
  if (s.ubar_history.size() < k) throw InsufficientHistory(k, s.ubar_history.size());

  const double t_next = s.time + dt;
  const std::size_t n_next = s.step_index + 1;

  Field rhs = combine_history(tab.a_values(), s.u_history);
  rhs.scale(1.0 / dt);
  const auto& explicit_history =
      extrapolation == Extrapolation::corrected ? s.u_history : s.ubar_history;
  rhs -= p.nonlinear(combine_history(tab.b_values(), explicit_history));
  if (p.forcing) rhs += p.forcing(t_next);
  Field ubar = solve_shifted(tab.alpha_value() / dt, p.linear_symbol, rhs);
  if (!all_finite(ubar)) throw DivergenceError(n_next);

  SavState next;
  next.step_index = n_next;
  next.time = t_next;
  next.depth = std::max(s.depth, k);
  next.u_history = s.u_history;
  next.ubar_history = s.ubar_history;

  const double e_bar = energy(p, ubar);
  if (!std::isfinite(e_bar)) throw DivergenceError(n_next);
  next.last_energy_bar = e_bar;

  if (mode == StepMode::imex) {
    next.r = e_bar;
    next.last_xi = 1.0;
    next.last_eta = 1.0;
    Field u = ubar;
    detail::push_level(next, std::move(u), std::move(ubar));
    return next;
  }

  if (!(e_bar > 0.0)) throw InvariantViolation("step: E(ubar) <= 0");
  const double k_bar = dissipation(p, ubar);
  double numer = s.r;
  if (p.energy_source) numer += dt * p.energy_source(t_next);
  const double r_next = numer / (1.0 + dt * k_bar / e_bar);
  if (!std::isfinite(r_next)) throw DivergenceError(n_next);
  const double xi = r_next / e_bar;
  const double eta = detail::eta_factor(xi, tab.eta_exponent);

  next.r = r_next;
  next.last_xi = xi;
  next.last_eta = eta;
  Field u = ubar;
  u.scale(eta);
  detail::push_level(next, std::move(u), std::move(ubar));
  return next;
}

namespace detail {

inline SavState initialize_impl(const ProblemDefinition& p, const BdfTableau& tab, double dt,
                                const Field& u0, std::optional<double> r_init, StepMode mode,
                                Extrapolation extrapolation, double t0,
                                const LevelCallback& on_level) {
  if (!(dt > 0.0)) throw Error("initialize: dt must be positive");
  u0.check_same_grid(Field(p.grid));

  SavState s;
  s.time = t0;
  s.depth = static_cast<std::size_t>(tab.order);
  s.u_history = {u0};
  s.ubar_history = {u0};
  const double e0 = energy(p, u0);
  s.last_energy_bar = e0;
  s.r = mode == StepMode::imex ? e0 : r_init.value_or(e0);
  if (s.r < 0.0) throw InvariantViolation("initialize: r must be non-negative");
  s.last_xi = mode == StepMode::imex ? 1.0 : s.r / e0;
  s.last_eta = 1.0;
  if (on_level) on_level(s);

  const int k = tab.order;
  if (k == 1) return s;

  if (p.exact) {
    // Exact samples ubar^i = u^i = u(t^i), with r advanced along them.
    for (int i = 1; i < k; ++i) {
      const double t = t0 + i * dt;
      Field u = p.sample_exact(t);
      const double e = energy(p, u);
      if (mode == StepMode::imex) {
        s.r = e;
        s.last_xi = 1.0;
      } else {
        double numer = s.r;
        if (p.energy_source) numer += dt * p.energy_source(t);
        s.r = numer / (1.0 + dt * dissipation(p, u) / e);
        s.last_xi = s.r / e;
      }
      s.last_eta = 1.0;
      s.last_energy_bar = e;
      s.step_index = static_cast<std::size_t>(i);
      s.time = t;
      Field ubar = u;
      push_level(s, std::move(u), std::move(ubar));
      if (on_level) on_level(s);
    }
    return s;
  }

  // Cascade start. Phase j runs the order-j scheme with step h_j and samples
  // the j + 1 levels that phase j + 1 needs at spacing h_{j+1} = m_j h_j; the
  // last phase delivers the levels at spacing dt. Phase j adds an error of
  // about (j h_{j+1}) h_j^j, so choosing h_j ~ dt^{e_j} with
  // e_{j+1} + j e_j >= k keeps the startup error O(dt^k). Every ratio m_j is
  // at least 8, which for k = 2 is plain 8-fold first-order substepping.
  std::vector<double> expo(k + 1, 1.0);
  for (int j = k - 1; j >= 1; --j) expo[j] = std::max(expo[j + 1], (k - expo[j + 1]) / j);
  std::vector<double> h(k + 1, dt);
  std::vector<long> ratio(k + 1, 1);
  for (int j = k - 1; j >= 1; --j) {
    const double want = std::ceil(std::pow(dt, expo[j + 1] - expo[j]) - 1e-9);
    ratio[j] = std::clamp<long>(static_cast<long>(want), 8, 1L << 16);
    h[j] = h[j + 1] / static_cast<double>(ratio[j]);
  }

  SavState fine = s;
  fine.depth = 1;
  for (int j = 1; j < k; ++j) {
    const bool last = j == k - 1;
    SavState coarse = s;
    coarse.depth = static_cast<std::size_t>(j + 1);
    if (last) coarse.depth = s.depth;
    long index = j - 1;  // fine time index, in units of h_j
    for (int i = 1; i <= j; ++i) {
      while (index < i * ratio[j]) {
        fine = step(fine, p, tableau(j), h[j], mode, extrapolation);
        fine.time = t0 + static_cast<double>(++index) * h[j];
      }
      coarse.r = fine.r;
      coarse.last_xi = fine.last_xi;
      coarse.last_eta = fine.last_eta;
      coarse.last_energy_bar = fine.last_energy_bar;
      coarse.step_index = static_cast<std::size_t>(i);
      coarse.time = t0 + i * h[j + 1];
      push_level(coarse, fine.u_history.front(), fine.ubar_history.front());
      if (last && on_level) on_level(coarse);
    }
    fine = std::move(coarse);
  }
  return fine;
}

}  // namespace detail

/// Builds the first k levels: exact samples when the problem carries an exact
/// solution, otherwise a substepped lower-order cascade.
inline SavState initialize(const ProblemDefinition& p, const BdfTableau& tab, double dt,
                           const Field& u0, std::optional<double> r_init = {},
                           StepMode mode = StepMode::sav,
                           Extrapolation extrapolation = Extrapolation::corrected,
                           double t0 = 0.0) {
  return detail::initialize_impl(p, tab, dt, u0, r_init, mode, extrapolation, t0, {});
}

struct StepRecord {
  std::size_t step = 0;
  double t = 0.0;
  double r = 0.0;
  double xi = 1.0;
  double eta = 1.0;
  double energy = 0.0;
  double energy_bar = 0.0;
  double principal_norm_sq = 0.0;
  std::optional<double> err_l2, err_h1, err_h2;
  /// r^n - E(u_exact(t^n)).
  std::optional<double> s;
};

struct RunSummary {
  std::size_t steps = 0;
  double max_abs_one_minus_xi = 0.0;
  double max_abs_one_minus_eta = 0.0;
  double min_eta = std::numeric_limits<double>::infinity();
  double max_eta = -std::numeric_limits<double>::infinity();
  double r_initial = 0.0;
  double r_final = 0.0;
  /// Count of r^{n+1} > r^n (1 + 1e-14).
  std::size_t r_increases = 0;
  std::size_t negative_r = 0;
  std::size_t negative_xi = 0;
  double principal_max = 0.0;
  std::optional<double> final_err_l2, final_err_h1, final_err_h2;
  bool diverged = false;
  std::size_t divergence_step = 0;
};

struct RunReport {
  std::vector<StepRecord> records;
  RunSummary summary;
  Field final_u;
  Field final_ubar;
  double final_time = 0.0;
};

struct RunOptions {
  StepMode mode = StepMode::sav;
  Extrapolation extrapolation = Extrapolation::corrected;
  /// Initial data; defaults to the exact solution at t = 0.
  std::optional<Field> initial;
  std::optional<double> r_init;
  bool record_trace = true;
  /// Evaluate error norms at every recorded level (always done at the end).
  bool trace_errors = false;
  /// Record divergence in the summary instead of throwing.
  bool tolerate_divergence = false;
  std::function<void(const SavState&)> monitor;
};

struct ErrorNorms {
  double l2, h1, h2;
};

inline ErrorNorms error_norms(const ProblemDefinition& p, const Field& u, double t) {
  Field e = u;
  e -= p.sample_exact(t);
  return {sobolev_norm(e, 0.0), sobolev_norm(e, 1.0), sobolev_norm(e, 2.0)};
}

/// Number of steps dt needed to reach T; T / dt must be integral.
inline std::size_t step_count(double dt, double T) {
  if (!(dt > 0.0) || !(T > 0.0)) throw Error("run: dt and T must be positive");
  const double q = T / dt;
  const double n = std::round(q);
  if (n < 1.0) throw Error("run: T < dt gives zero steps");
  if (std::abs(q - n) > 1e-9 * std::max(1.0, q)) throw Error("run: T/dt is not an integer");
  return static_cast<std::size_t>(n);
}

/// Integrates from t = 0 to T with constant dt.
inline RunReport run(const ProblemDefinition& p, const BdfTableau& tab, double dt, double T,
                     const RunOptions& opt = {}) {
  const std::size_t n_steps = step_count(dt, T);
  if (n_steps + 1 < static_cast<std::size_t>(tab.order))
    throw Error("run: fewer steps than the startup levels of the scheme");
  const Field u0 = opt.initial ? *opt.initial : p.sample_exact(0.0);

  RunReport rep;
  auto& sum = rep.summary;
  bool first = true;
  double prev_r = 0.0;

  auto record = [&](const SavState& s) {
    const Field& u = s.u_history.front();
    const double pn = principal_norm_sq(p, u);
    sum.principal_max = std::max(sum.principal_max, pn);
    if (first) {
      sum.r_initial = s.r;
      first = false;
    } else {
      if (s.r > prev_r * (1.0 + 1e-14)) ++sum.r_increases;
      sum.max_abs_one_minus_xi = std::max(sum.max_abs_one_minus_xi, std::abs(1.0 - s.last_xi));
      sum.max_abs_one_minus_eta = std::max(sum.max_abs_one_minus_eta, std::abs(1.0 - s.last_eta));
      sum.min_eta = std::min(sum.min_eta, s.last_eta);
      sum.max_eta = std::max(sum.max_eta, s.last_eta);
    }
    if (s.r < 0.0) ++sum.negative_r;
    if (s.last_xi < 0.0) ++sum.negative_xi;
    prev_r = s.r;
    sum.r_final = s.r;
    sum.steps = s.step_index;

    if (!opt.record_trace) return;
    StepRecord rec;
    rec.step = s.step_index;
    rec.t = s.time;
    rec.r = s.r;
    rec.xi = s.last_xi;
    rec.eta = s.last_eta;
    rec.energy = energy(p, u);
    rec.energy_bar = s.last_energy_bar;
    rec.principal_norm_sq = pn;
    if (opt.trace_errors && p.exact) {
      const auto e = error_norms(p, u, s.time);
      rec.err_l2 = e.l2;
      rec.err_h1 = e.h1;
      rec.err_h2 = e.h2;
      rec.s = s.r - energy(p, p.sample_exact(s.time));
    }
    rep.records.push_back(std::move(rec));
  };

  SavState state;
  try {
    state = detail::initialize_impl(p, tab, dt, u0, opt.r_init, opt.mode, opt.extrapolation,
                                    0.0, record);
    if (opt.monitor) opt.monitor(state);
    while (state.step_index < n_steps) {
      state = step(state, p, tab, dt, opt.mode, opt.extrapolation);
      state.time = static_cast<double>(state.step_index) * dt;
      record(state);
      if (opt.monitor) opt.monitor(state);
    }
  } catch (const DivergenceError& e) {
    if (!opt.tolerate_divergence) throw;
    sum.diverged = true;
    sum.divergence_step = e.step();
  }

  if (!state.u_history.empty()) {
    rep.final_u = state.u_history.front();
    rep.final_ubar = state.ubar_history.front();
    rep.final_time = state.time;
    if (p.exact && !sum.diverged) {
      const auto e = error_norms(p, rep.final_u, state.time);
      sum.final_err_l2 = e.l2;
      sum.final_err_h1 = e.h1;
      sum.final_err_h2 = e.h2;
    }
  }
  if (first) sum.min_eta = sum.max_eta = 1.0;
  if (sum.min_eta > sum.max_eta) sum.min_eta = sum.max_eta = 1.0;
  return rep;
}

}  // namespace savbdf
