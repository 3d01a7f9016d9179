#include <gtest/gtest.h>

#include <cmath>
#include <numbers>

#include "savbdf/problems.hpp"

using namespace savbdf;
constexpr double pi = std::numbers::pi;

namespace {

// Smooth low-mode data whose cubic stays inside the dealiased band on 32x32.
Field smooth2d(const GridPtr& g) {
  return Field::sample(g, [](double x, double y) {
    return 0.4 + 0.5 * std::sin(pi * x) * std::cos(pi * y) + 0.2 * std::cos(2 * pi * y);
  });
}

Field smooth1d(const GridPtr& g) {
  return Field::sample(g, [](double x, double) {
    return -std::sin(pi * x) + 0.3 * std::sin(2 * pi * x);
  });
}

// d/de E(u + e v) at e = 0 by a fourth-order central difference.
double directional_derivative(const ProblemDefinition& p, const Field& u, const Field& v) {
  const double h = 1e-4;
  auto e = [&](double s) { return energy(p, u + s * v); };
  return (-e(2 * h) + 8 * e(h) - 8 * e(-h) + e(-2 * h)) / (12 * h);
}

// The energy law: along v = -(A u + g(u)) the energy decreases at rate K(u).
void expect_energy_law(const ProblemDefinition& p, const Field& u) {
  Field v = apply_symbol(p.linear_symbol, u);
  v += p.nonlinear(u);
  v.scale(-1.0);
  const double k = dissipation(p, u);
  EXPECT_GT(k, 0.0);
  EXPECT_NEAR(directional_derivative(p, u, v), -k, 1e-7 * std::max(1.0, k)) << p.name;
}

}  // namespace

TEST(AllenCahn, SymbolsAndEnergy) {
  const auto g = Grid::fourier2d(16, 16);
  const auto p = allen_cahn(g, 0.01, 2.0);
  for (std::size_t m = 0; m < g->spectral_size(); ++m) {
    EXPECT_DOUBLE_EQ(p.linear_symbol[m], 0.01 * g->wavenumber_sq()[m] + 2.0);
    EXPECT_DOUBLE_EQ(p.principal_symbol[m], p.linear_symbol[m]);
  }
  const auto q = allen_cahn(g, 1e-4);
  EXPECT_DOUBLE_EQ(q.c_shift * g->volume(), 1.0);
  // u = 1 sits in the well: only the offset remains.
  EXPECT_NEAR(energy(q, Field::sample(g, [](double, double) { return 1.0; })), 1.0, 1e-14);
  // u = 0: G(0) = 1/4 over an area of 4, plus the offset 1.
  EXPECT_NEAR(energy(q, Field(g)), 2.0, 1e-14);
  EXPECT_FALSE(q.forced());
}

TEST(AllenCahn, DissipationMatchesChemicalPotential) {
  const auto g = Grid::fourier2d(32, 32);
  const double a = 0.02;
  const auto p = allen_cahn(g, a);
  const Field u = smooth2d(g);
  // mu = -a Lap u + u^3 - u, evaluated from the closed form of u.
  const Field mu = Field::sample(g, [&](double x, double y) {
    const double s = std::sin(pi * x), c = std::cos(pi * y), c2 = std::cos(2 * pi * y);
    const double val = 0.4 + 0.5 * s * c + 0.2 * c2;
    const double lap = -2 * pi * pi * 0.5 * s * c - 4 * pi * pi * 0.2 * c2;
    return -a * lap + val * val * val - val;
  });
  EXPECT_NEAR(dissipation(p, u), inner(mu, mu), 1e-10);
}

TEST(Problems, EnergyLawHoldsForEveryProblem) {
  const auto g = Grid::fourier2d(32, 32);
  expect_energy_law(allen_cahn(g, 0.01), smooth2d(g));
  expect_energy_law(allen_cahn(g, 0.01, 1.5), smooth2d(g));
  expect_energy_law(cahn_hilliard(g, 0.04, 0.005), smooth2d(g));
  expect_energy_law(cahn_hilliard(g, 0.04, 0.5, 2.0), smooth2d(g));
  const auto s = Grid::sine1d(64);
  expect_energy_law(burgers(s, 1.0 / 314.0), smooth1d(s));
}

TEST(CahnHilliard, SymbolsAndMeanFreeTerms) {
  const auto g = Grid::fourier2d(16, 16);
  const auto p = cahn_hilliard(g, 0.04, 0.005, 1.0);
  for (std::size_t m = 0; m < g->spectral_size(); ++m) {
    const double k2 = g->wavenumber_sq()[m];
    EXPECT_NEAR(p.linear_symbol[m], 0.005 * (0.04 * k2 * k2 + k2), 1e-12);
    EXPECT_DOUBLE_EQ(p.principal_symbol[m], 0.04 * k2 + 1.0);
  }
  // Both operators annihilate the mean mode.
  EXPECT_EQ(p.linear_symbol[g->zero_mode()], 0.0);
  EXPECT_NEAR(mean(p.nonlinear(smooth2d(g))), 0.0, 1e-15);
}

TEST(Burgers, DissipationOfSineMode) {
  const auto g = Grid::sine1d(64);
  const double nu = 1.0 / 314.0;
  const auto p = burgers(g, nu);
  const Field u = Field::sample(g, [](double x, double) { return std::sin(pi * x); });
  // K = nu ||u_x||^2 = nu pi^2 over (-1, 1).
  EXPECT_NEAR(dissipation(p, u), nu * pi * pi, 1e-12);
  EXPECT_NEAR(energy(p, u), 0.5 + 1.0, 1e-13);
}

TEST(Burgers, ConvectionIsSkewSymmetric) {
  const auto g = Grid::sine1d(48);
  const auto p = burgers(g, 0.1);
  const Field u = Field::sample(g, [](double x, double) {
    return std::sin(pi * x) - 0.4 * std::sin(3 * pi * x / 2 + 1.5 * pi) + 0.1 * std::sin(5 * pi * x);
  });
  const Field conv = p.nonlinear(u);
  EXPECT_NEAR(inner_spectral(conv, u), 0.0, 1e-12);
  // Pointwise value of u u_x for the first term alone.
  const Field s = Field::sample(g, [](double x, double) { return std::sin(pi * x); });
  const Field ss = p.nonlinear(s);
  for (std::size_t i = 0; i < g->physical_size(); ++i) {
    const double x = g->point(i)[0];
    EXPECT_NEAR(ss.physical()[i], pi * std::sin(pi * x) * std::cos(pi * x), 1e-11);
  }
}

TEST(Problems, BasisAndParameterValidation) {
  const auto f = Grid::fourier2d(8, 8);
  const auto s = Grid::sine1d(8);
  EXPECT_THROW(allen_cahn(s, 0.01), WrongBasis);
  EXPECT_THROW(cahn_hilliard(s, 0.01, 1.0), WrongBasis);
  EXPECT_THROW(burgers(f, 0.1), WrongBasis);
  EXPECT_THROW(allen_cahn(f, 0.0), Error);
  EXPECT_THROW(allen_cahn(f, 0.1, -1.0), Error);
  EXPECT_THROW(cahn_hilliard(f, 0.1, 0.0), Error);
  EXPECT_THROW(burgers(s, -1.0), Error);
  EXPECT_THROW(allen_cahn(f, 0.1).sample_exact(0.0), Error);
}

TEST(Manufactured, ForcingMakesExactSolutionStationaryResidual) {
  const auto g = Grid::fourier2d(16, 16);
  const auto p = with_manufactured_forcing(allen_cahn(g, 0.01), exact_solutions::phase_field());
  EXPECT_TRUE(p.forced());
  EXPECT_EQ(p.name, "allen_cahn_manufactured");
  const double t = 0.37;
  // f - A U - g(U) must equal U_t, computed here from the closed form.
  Field r = p.forcing(t);
  const Field u = p.sample_exact(t);
  r -= apply_symbol(p.linear_symbol, u);
  r -= p.nonlinear(u);
  const Field ut = Field::sample(g, [t](double x, double y) {
    return std::exp(std::sin(pi * x) * std::sin(pi * y)) * std::cos(t);
  });
  for (std::size_t i = 0; i < g->physical_size(); ++i) EXPECT_NEAR(r.physical()[i], ut.physical()[i], 1e-11);
}

TEST(Manufactured, EnergySourceIsEnergyRatePlusDissipation) {
  const auto fg = Grid::fourier2d(32, 32);
  const auto sg = Grid::sine1d(64);
  const std::vector<ProblemDefinition> problems{
      with_manufactured_forcing(allen_cahn(fg, 1e-2), exact_solutions::phase_field()),
      with_manufactured_forcing(cahn_hilliard(fg, 0.04, 0.005), exact_solutions::phase_field()),
      with_manufactured_forcing(burgers(sg, 0.05), exact_solutions::sine_mode())};
  for (const auto& p : problems) {
    for (double t : {0.2, 0.9}) {
      const double h = 1e-4;
      auto e = [&](double s) { return energy(p, p.sample_exact(s)); };
      const double rate = (-e(t + 2 * h) + 8 * e(t + h) - 8 * e(t - h) + e(t - 2 * h)) / (12 * h);
      const double expect = rate + dissipation(p, p.sample_exact(t));
      EXPECT_NEAR(p.energy_source(t), expect, 1e-7 * std::max(1.0, std::abs(expect))) << p.name;
    }
  }
}

TEST(Manufactured, ExactSolutionsVanishWhereRequired) {
  const auto s = exact_solutions::sine_mode();
  EXPECT_NEAR(s.value(-1.0, 0.0, 0.7), 0.0, 1e-15);
  EXPECT_NEAR(s.value(1.0, 0.0, 0.7), 0.0, 1e-15);
  const auto pf = exact_solutions::phase_field();
  EXPECT_NEAR(pf.value(0.3, 0.8, 0.0), 0.0, 0.0);
  EXPECT_NEAR(pf.time_derivative(0.5, 0.5, 0.0), std::exp(1.0), 1e-14);
  EXPECT_THROW(with_manufactured_forcing(allen_cahn(Grid::fourier2d(8, 8), 0.1), ExactSolution{}), Error);
}
