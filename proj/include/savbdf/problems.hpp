#pragma once

// Dissipative systems in the normalized form
//     u_t + A u + g(u) = f(t),
// with energy E(u) = 1/2 (L u, u) + int G(u) dx + c_shift |Omega| and
// dissipation K(u) >= 0 such that dE/dt = -K(u) when f = 0.

#include <cmath>
#include <functional>
#include <numbers>
#include <optional>
#include <string>
#include <utility>
#include <vector>

#include "savbdf/spectral.hpp"

namespace savbdf {

/// Closed-form solution u(x, y, t) and its time derivative (y ignored in 1D).
struct ExactSolution {
  std::function<double(double, double, double)> value;
  std::function<double(double, double, double)> time_derivative;
};

struct ProblemDefinition {
  std::string name;
  GridPtr grid;
  /// Symbol of the positive linear operator A.
  std::vector<double> linear_symbol;
  /// Symbol of L in the quadratic part 1/2 (L u, u) of the energy.
  std::vector<double> principal_symbol;
  /// g(u), unforced.
  std::function<Field(const Field&)> nonlinear;
  /// G with int G(u) dx the non-quadratic energy; G' its derivative.
  std::function<double(double)> potential;
  std::function<double(double)> potential_derivative;
  /// Energy offset per unit volume (c_shift * |Omega| is added to E).
  double c_shift = 0.0;
  std::function<double(const Field&)> dissipation;
  /// Right-hand side f(t); empty when the problem is unforced.
  std::function<Field(double)> forcing;
  /// dE(u_exact)/dt + K(u_exact): keeps r consistent with E along a forced exact solution.
  std::function<double(double)> energy_source;
  std::optional<ExactSolution> exact;

  bool forced() const { return static_cast<bool>(forcing); }

  Field sample_exact(double t) const {
    if (!exact) throw Error("problem '" + name + "' has no exact solution");
    const auto& fn = exact->value;
    return Field::sample(grid, [&](double x, double y) { return fn(x, y, t); });
  }

  Field sample_exact_rate(double t) const {
    if (!exact) throw Error("problem '" + name + "' has no exact solution");
    const auto& fn = exact->time_derivative;
    return Field::sample(grid, [&](double x, double y) { return fn(x, y, t); });
  }
};

inline double principal_norm_sq(const ProblemDefinition& p, const Field& u) {
  return spectral_quadratic(u, p.principal_symbol);
}

inline double energy(const ProblemDefinition& p, const Field& u) {
  double pot = 0.0;
  if (p.potential)
    for (double v : u.physical()) pot += p.potential(v);
  return 0.5 * principal_norm_sq(p, u) + pot * p.grid->cell_volume() +
         p.c_shift * p.grid->volume();
}

inline double dissipation(const ProblemDefinition& p, const Field& u) { return p.dissipation(u); }

/// Default energy offset: c_shift * |Omega| == 1.
inline double default_c_shift(const Grid& g) { return 1.0 / g.volume(); }

namespace detail {

inline void require_basis(const Grid& g, Basis b, const char* who) {
  if (g.basis() != b)
    throw WrongBasis(std::string(who) +
                     (b == Basis::fourier2d ? " needs a Fourier2D grid" : " needs a Sine1D grid"));
}

/// Double well shifted by the stabilization so that G >= 0 and G' = F' - s u:
///   G(u) = 1/4 (u^2 - 1 - s)^2 = F(u) - s u^2 / 2 + s/2 + s^2/4.
struct StabilizedWell {
  double s = 0.0;
  double value(double u) const {
    const double w = u * u - 1.0 - s;
    return 0.25 * w * w;
  }
  double derivative(double u) const { return u * (u * u - 1.0 - s); }
};

/// Dealiased G'(u).
inline Field well_force(const StabilizedWell& well, const Field& u) {
  return dealias(pointwise_map(u, [well](double v) { return well.derivative(v); }));
}

}  // namespace detail

/// u_t = alpha Lap u - F'(u), F(u) = 1/4 (u^2 - 1)^2, written with
/// A = alpha |k|^2 + s and g(u) = F'(u) - s u.
inline ProblemDefinition allen_cahn(GridPtr grid, double alpha, double stabilization = 0.0,
                                    std::optional<double> c_shift = {}) {
  detail::require_basis(*grid, Basis::fourier2d, "allen_cahn");
  if (!(alpha > 0.0)) throw Error("allen_cahn: alpha must be positive");
  if (stabilization < 0.0) throw Error("allen_cahn: stabilization must be >= 0");

  ProblemDefinition p;
  p.name = "allen_cahn";
  p.grid = grid;
  p.c_shift = c_shift.value_or(default_c_shift(*grid));
  const auto k2 = grid->wavenumber_sq();
  p.linear_symbol.resize(k2.size());
  for (std::size_t m = 0; m < k2.size(); ++m) p.linear_symbol[m] = alpha * k2[m] + stabilization;
  p.principal_symbol = p.linear_symbol;

  const detail::StabilizedWell well{stabilization};
  p.potential = [well](double u) { return well.value(u); };
  p.potential_derivative = [well](double u) { return well.derivative(u); };
  p.nonlinear = [well](const Field& u) { return detail::well_force(well, u); };
  // K = ||mu||^2 with mu = A u + g(u), the variational derivative of E.
  p.dissipation = [well, sym = p.linear_symbol](const Field& u) {
    Field mu = apply_symbol(sym, u);
    mu += detail::well_force(well, u);
    return spectral_quadratic(mu, std::vector<double>(sym.size(), 1.0));
  };
  return p;
}

/// u_t = m0 Lap (-alpha Lap u + F'(u)), written with
/// A = m0 (alpha |k|^4 + s |k|^2) and g(u) = -m0 Lap (F'(u) - s u).
inline ProblemDefinition cahn_hilliard(GridPtr grid, double alpha, double m0,
                                       double stabilization = 0.0,
                                       std::optional<double> c_shift = {}) {
  detail::require_basis(*grid, Basis::fourier2d, "cahn_hilliard");
  if (!(alpha > 0.0) || !(m0 > 0.0)) throw Error("cahn_hilliard: alpha and m0 must be positive");
  if (stabilization < 0.0) throw Error("cahn_hilliard: stabilization must be >= 0");

  ProblemDefinition p;
  p.name = "cahn_hilliard";
  p.grid = grid;
  p.c_shift = c_shift.value_or(default_c_shift(*grid));
  const auto k2 = grid->wavenumber_sq();
  const std::size_t n = k2.size();
  p.linear_symbol.resize(n);
  p.principal_symbol.resize(n);
  std::vector<double> neg_lap_m0(n);
  for (std::size_t m = 0; m < n; ++m) {
    p.linear_symbol[m] = m0 * (alpha * k2[m] * k2[m] + stabilization * k2[m]);
    p.principal_symbol[m] = alpha * k2[m] + stabilization;
    neg_lap_m0[m] = m0 * k2[m];
  }

  const detail::StabilizedWell well{stabilization};
  p.potential = [well](double u) { return well.value(u); };
  p.potential_derivative = [well](double u) { return well.derivative(u); };
  p.nonlinear = [well, neg_lap_m0](const Field& u) {
    return apply_symbol(neg_lap_m0, detail::well_force(well, u));
  };
  // K = m0 ||grad mu||^2 with mu = L u + g0(u), g0 the dealiased well force.
  p.dissipation = [well, lsym = p.principal_symbol, neg_lap_m0](const Field& u) {
    Field mu = apply_symbol(lsym, u);
    mu += detail::well_force(well, u);
    return spectral_quadratic(mu, neg_lap_m0);
  };
  return p;
}

/// u_t - nu u_xx + u u_x = 0 on a Dirichlet interval, E = 1/2 ||u||^2 + c_shift |Omega|.
inline ProblemDefinition burgers(GridPtr grid, double nu, std::optional<double> c_shift = {}) {
  detail::require_basis(*grid, Basis::sine1d, "burgers");
  if (!(nu > 0.0)) throw Error("burgers: nu must be positive");

  ProblemDefinition p;
  p.name = "burgers";
  p.grid = grid;
  p.c_shift = c_shift.value_or(default_c_shift(*grid));
  const auto k2 = grid->wavenumber_sq();
  p.linear_symbol.resize(k2.size());
  for (std::size_t m = 0; m < k2.size(); ++m) p.linear_symbol[m] = nu * k2[m];
  p.principal_symbol.assign(k2.size(), 1.0);
  p.potential = nullptr;
  p.potential_derivative = nullptr;
  p.nonlinear = [](const Field& u) {
    const auto ux = sine_derivative_values(u);
    const auto uv = u.physical();
    std::vector<double> prod(uv.size());
    for (std::size_t i = 0; i < uv.size(); ++i) prod[i] = uv[i] * ux[i];
    return dealias(Field::from_physical(u.grid(), std::move(prod)));
  };
  p.dissipation = [sym = p.linear_symbol](const Field& u) { return spectral_quadratic(u, sym); };
  return p;
}

/// Adds f(t) = u_t + A u + g(u) evaluated on the sampled exact solution, so
/// that the sampled exact solution solves the semi-discrete system.
inline ProblemDefinition with_manufactured_forcing(ProblemDefinition p, ExactSolution exact) {
  if (!exact.value || !exact.time_derivative)
    throw Error("with_manufactured_forcing: exact solution and time derivative required");
  p.exact = std::move(exact);
  p.name += "_manufactured";
  const auto base = std::make_shared<const ProblemDefinition>(p);
  p.forcing = [base](double t) {
    const Field u = base->sample_exact(t);
    Field f = base->sample_exact_rate(t);
    f += apply_symbol(base->linear_symbol, u);
    f += base->nonlinear(u);
    return f;
  };
  p.energy_source = [base](double t) {
    const Field u = base->sample_exact(t);
    const Field ut = base->sample_exact_rate(t);
    double rate = inner_spectral(apply_symbol(base->principal_symbol, u), ut);
    if (base->potential_derivative) {
      const auto uv = u.physical(), utv = ut.physical();
      double s = 0.0;
      for (std::size_t i = 0; i < uv.size(); ++i) s += base->potential_derivative(uv[i]) * utv[i];
      rate += s * base->grid->cell_volume();
    }
    return rate + base->dissipation(u);
  };
  return p;
}

namespace exact_solutions {

/// exp(sin(pi x) sin(pi y)) sin(t) on the periodic box (0,2)^2.
inline ExactSolution phase_field() {
  constexpr double pi = std::numbers::pi;
  return {[](double x, double y, double t) {
            return std::exp(std::sin(pi * x) * std::sin(pi * y)) * std::sin(t);
          },
          [](double x, double y, double t) {
            return std::exp(std::sin(pi * x) * std::sin(pi * y)) * std::cos(t);
          }};
}

/// sin(pi x) sin(t) on (-1,1), vanishing at both ends.
inline ExactSolution sine_mode() {
  constexpr double pi = std::numbers::pi;
  return {[](double x, double, double t) { return std::sin(pi * x) * std::sin(t); },
          [](double x, double, double t) { return std::sin(pi * x) * std::cos(t); }};
}

}  // namespace exact_solutions

}  // namespace savbdf
