#include <gtest/gtest.h>

#include <atomic>
#include <cstdlib>
#include <numbers>

#include "savbdf/harness.hpp"

using namespace savbdf;

TEST(FitRate, ExactRatios) {
  const std::vector<std::pair<double, double>> a{{0.1, 1e-2}, {0.05, 2.5e-3}};
  EXPECT_NEAR(fit_rate(a), 2.0, 1e-12);
  const std::vector<std::pair<double, double>> b{{0.1, 0.1}, {0.05, 0.05}};
  EXPECT_NEAR(fit_rate(b), 1.0, 1e-12);
  const std::vector<std::pair<double, double>> c{{0.1, 1e-5}, {0.05, 3.125e-7}};
  EXPECT_NEAR(fit_rate(c), 5.0, 1e-12);
}

TEST(FitRate, RecoversSyntheticPowerLaws) {
  for (int p = 1; p <= 5; ++p) {
    std::vector<std::pair<double, double>> pts;
    for (double dt : {1.0 / 10, 1.0 / 20, 1.0 / 40, 1.0 / 80, 1.0 / 160})
      pts.emplace_back(dt, 3.7 * std::pow(dt, p));
    EXPECT_NEAR(fit_rate(pts), p, 1e-10);
  }
}

TEST(FitRate, RejectsDegenerateInput) {
  const std::vector<std::pair<double, double>> one{{0.1, 1e-3}};
  EXPECT_THROW(fit_rate(one), Error);
  const std::vector<std::pair<double, double>> same{{0.1, 1e-3}, {0.1, 2e-3}};
  EXPECT_THROW(fit_rate(same), Error);
  const std::vector<std::pair<double, double>> nan{{0.1, 1e-3}, {0.05, std::nan("")}};
  EXPECT_THROW(fit_rate(nan), Error);
  // Non-finite points are skipped when enough finite ones remain.
  const std::vector<std::pair<double, double>> mixed{
      {0.2, std::numeric_limits<double>::infinity()}, {0.1, 1e-2}, {0.05, 2.5e-3}};
  EXPECT_NEAR(fit_rate(mixed), 2.0, 1e-12);
}

TEST(Parallel, WorkerCountFromEnvironment) {
  ::setenv("SAV_THREADS", "3", 1);
  EXPECT_EQ(worker_count(), 3u);
  ::setenv("SAV_THREADS", "0", 1);
  EXPECT_GE(worker_count(), 1u);
  ::unsetenv("SAV_THREADS");
  EXPECT_GE(worker_count(), 1u);
}

TEST(Parallel, CoversEveryIndexAndPropagatesErrors) {
  ::setenv("SAV_THREADS", "4", 1);
  std::vector<std::atomic<int>> hits(37);
  parallel_for(hits.size(), [&](std::size_t i) { ++hits[i]; });
  for (auto& h : hits) EXPECT_EQ(h.load(), 1);
  EXPECT_THROW(parallel_for(10, [](std::size_t i) {
                 if (i == 7) throw Error("boom");
               }),
               Error);
  ::unsetenv("SAV_THREADS");
}

TEST(RandomField, DeterministicAndBandLimited) {
  const auto g = Grid::fourier2d(32, 32);
  const auto a = random_smooth_field(g, 99);
  const auto b = random_smooth_field(g, 99);
  const auto c = random_smooth_field(g, 100);
  for (std::size_t i = 0; i < g->physical_size(); ++i) EXPECT_EQ(a.physical()[i], b.physical()[i]);
  EXPECT_NE(a.physical()[0], c.physical()[0]);
  const auto modes = g->mode_index();
  for (std::size_t m = 0; m < modes.size(); ++m) {
    if (std::abs(modes[m][0]) > 8 || modes[m][1] > 8) {
      EXPECT_EQ(std::abs(a.spectral()[m]), 0.0);
    }
  }
  EXPECT_NE(mean(a), 0.0);  // the mean mode is part of the data
}

TEST(Convergence, LadderDefaults) {
  EXPECT_EQ(default_dt_ladder(1).size(), 5u);
  EXPECT_DOUBLE_EQ(default_dt_ladder(3).back(), 1.0 / 640);
  EXPECT_DOUBLE_EQ(default_dt_ladder(4).front(), 1.0 / 10);
  EXPECT_DOUBLE_EQ(default_dt_ladder(5).front(), 1.0 / 20);
}

TEST(Convergence, ValidatesInput) {
  const auto g = Grid::fourier2d(8, 8);
  const auto plain = allen_cahn(g, 0.01);
  const auto p = with_manufactured_forcing(plain, exact_solutions::phase_field());
  EXPECT_THROW(convergence_study(plain, tableau(1), {0.1, 0.05, 0.025}), Error);
  EXPECT_THROW(convergence_study(p, tableau(1), {0.1, 0.05}), Error);
  EXPECT_THROW(convergence_study(p, tableau(1), {0.1, 0.2, 0.05}), Error);
  EXPECT_THROW(convergence_study(p, tableau(1), {0.3, 0.15, 0.075}), Error);
}

TEST(Convergence, BurgersManufacturedSecondOrder) {
  const auto g = Grid::sine1d(32);
  const auto p = with_manufactured_forcing(burgers(g, 0.1), exact_solutions::sine_mode());
  const auto rep = convergence_study(p, tableau(2), {1.0 / 20, 1.0 / 40, 1.0 / 80, 1.0 / 160});
  ASSERT_TRUE(rep.slope_h2.has_value());
  EXPECT_NEAR(*rep.slope_h2, 2.0, 0.3);
  for (const auto& e : rep.entries) EXPECT_FALSE(e.diverged);
}

TEST(Stability, ZeroDataKeepsDiagnosticsConstant) {
  const auto g = Grid::fourier2d(16, 16);
  const auto p = allen_cahn(g, 1e-4);
  const auto rep = stability_probe(p, tableau(3), 1.0, 50, Field(g));
  EXPECT_TRUE(rep.passed());
  EXPECT_EQ(rep.principal_sup, 0.0);
  EXPECT_EQ(rep.mean_drift, 0.0);
  for (const auto& rec : rep.run.records) EXPECT_EQ(rec.r, rep.run.records.front().r);
}

TEST(Stability, RejectsForcedProblems) {
  const auto g = Grid::fourier2d(8, 8);
  const auto p = with_manufactured_forcing(allen_cahn(g, 0.01), exact_solutions::phase_field());
  EXPECT_THROW(stability_probe(p, tableau(1), 0.1, 10, Field(g)), Error);
}

TEST(Stability, RandomDataProbePasses) {
  const auto g = Grid::fourier2d(32, 32);
  const auto rep = stability_probe(allen_cahn(g, 1e-4), tableau(5), 1.0, 200, random_smooth_field(g, 1234));
  EXPECT_EQ(rep.violations(), 0u);
  EXPECT_FALSE(rep.run.summary.diverged);
  EXPECT_TRUE(rep.principal_bounded());
}

TEST(BurgersCompare, SelfComparisonVanishes) {
  BurgersSetup cfg;
  cfg.n = 64;
  cfg.nu = 0.05;
  cfg.dt = 0.01;
  cfg.dt_ref = 0.01;
  cfg.final_time = 0.2;
  const auto cmp = burgers_compare(cfg);
  EXPECT_EQ(cmp.steps, 20u);
  EXPECT_EQ(cmp.reference_steps, 20u);
  EXPECT_NEAR(cmp.sav_deviation, 0.0, 1e-15);
  // IMEX differs from SAV only through eta - 1.
  EXPECT_LT(cmp.imex_deviation, 1e-6);
  EXPECT_FALSE(cmp.imex_diverged);
}

TEST(BurgersCompare, RoundsToWholeSteps) {
  BurgersSetup cfg;
  cfg.n = 32;
  cfg.nu = 0.05;
  cfg.dt = 0.3;
  cfg.dt_ref = 0.1;
  cfg.final_time = 1.0;
  const auto cmp = burgers_compare(cfg);
  EXPECT_EQ(cmp.steps, 3u);
  EXPECT_NEAR(cmp.final_time, 0.9, 1e-15);
  EXPECT_EQ(cmp.reference_steps, 9u);
}

TEST(BurgersCompare, EtaStaysInUnitBandAtDefaultStep) {
  BurgersSetup cfg;  // nu = 1/314, N = 320, dt = 8.5e-3
  cfg.dt_ref = cfg.dt;  // the reference is irrelevant for the eta trace
  const auto cmp = burgers_compare(cfg);
  ASSERT_FALSE(cmp.eta_trace.empty());
  for (const auto& [t, eta] : cmp.eta_trace) {
    EXPECT_GT(eta, 0.0) << t;
    EXPECT_LE(eta, 1.0 + 1e-6) << t;
  }
  EXPECT_EQ(cmp.sav_records.size(), cmp.eta_trace.size());
}
