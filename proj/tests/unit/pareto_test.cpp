#include <cmath>
#include <limits>

#include <gtest/gtest.h>

#include "quadrature_oracle.hpp"
#include "scdd/pareto.hpp"

using namespace scdd;
using scdd::testing::quadrature_mean;

TEST(TruncatedParetoMean, MatchesQuadrature) {
  const SizeBand b{10, 20};
  const ParetoParams p{2.0, 10.0};
  const double closed = truncated_pareto_mean(p, b);
  EXPECT_NEAR(closed, quadrature_mean(p, b), 1e-6 * closed);
}

TEST(TruncatedParetoMean, MatchesQuadratureAcrossGrid) {
  const GridSpec grid;
  for (const auto& bd : standard_bands()) {
    for (double a : {0.5, 0.95, 1.0, 1.05, 2.0, 3.7, 5.0}) {
      for (double s : {0.5, 3.0, 40.0, 700.0, 5000.0}) {
        if (!bd.band.upper && a <= 1.0) continue;
        const ParetoParams p{a, s};
        const double closed = truncated_pareto_mean(p, bd.band);
        EXPECT_NEAR(closed, quadrature_mean(p, bd.band), 1e-6 * closed) << bd.label << " a=" << a << " s=" << s;
      }
    }
  }
}

TEST(TruncatedParetoMean, PointMassLimit) {
  const ParetoParams p{1.5, 20.0};
  for (double eps : {1.0, 1e-2, 1e-4, 1e-8}) {
    const double m = truncated_pareto_mean(p, 5.0, 5.0 + eps);
    EXPECT_GE(m, 5.0);
    EXPECT_LE(m - 5.0, 0.5 * eps * (1 + 1e-6));
  }
  EXPECT_NEAR(truncated_pareto_mean(p, 5.0, 5.0 + 1e-10), 5.0, 1e-9);
}

TEST(TruncatedParetoMean, DivergentOnOpenBand) {
  try {
    truncated_pareto_mean({0.8, 10.0}, SizeBand{250, std::nullopt});
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.kind(), ErrorKind::divergent_mean);
  }
  EXPECT_THROW(truncated_pareto_mean({1.0, 10.0}, SizeBand{250, std::nullopt}), Error);
}

TEST(TruncatedParetoMean, ShapeOneIsContinuous) {
  const SizeBand b{10, 20};
  const double at = truncated_pareto_mean({1.0, 7.0}, b);
  EXPECT_NEAR(truncated_pareto_mean({1.0 + 1e-9, 7.0}, b), at, 1e-8);
  EXPECT_NEAR(truncated_pareto_mean({1.0 - 1e-9, 7.0}, b), at, 1e-8);
}

TEST(FitParetoBand, BestOnGrid) {
  const GridSpec grid;
  const SizeBand b{10, 20};
  for (double target : {13.5, 15.0, 10.2, 19.5}) {
    const auto fit = fit_pareto_band(target, b, grid);
    double best = std::numeric_limits<double>::infinity();
    for (double a : grid.shapes())
      for (double s : grid.scales()) best = std::min(best, std::abs(quadrature_mean({a, s}, b) - target));
    EXPECT_LE(std::abs(truncated_pareto_mean(fit, b) - target), best + 1e-6 * target) << target;
  }
}

TEST(FitParetoBand, MidpointWithinResolution) {
  const SizeBand b{20, 50};
  const auto fit = fit_pareto_band(35.0, b);
  EXPECT_NEAR(truncated_pareto_mean(fit, b), 35.0, 0.05);
}

TEST(FitParetoBand, TiesGoToSmallerShapeThenScale) {
  // A single-point grid in each dimension duplicates values; with duplicated
  // shape entries the first must win.
  GridSpec g;
  g.shape_min = 2.0;
  g.shape_max = 2.0;
  g.scale_points = 1;
  g.scale_min = 4.0;
  g.scale_max = 4.0;
  const auto fit = fit_pareto_band(12.0, {10, 20}, g);
  EXPECT_EQ(fit.shape, 2.0);
  EXPECT_EQ(fit.scale, 4.0);
  // On the open band a very small target can only be approached by large
  // shapes, and shapes <= 1 are never returned.
  const auto open = fit_pareto_band(260.0, {250, std::nullopt});
  EXPECT_GT(open.shape, 1.0);
}

TEST(FitParetoBand, InfeasibleTarget) {
  try {
    fit_pareto_band(25.0, {10, 20});
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.kind(), ErrorKind::infeasible_target);
  }
}

TEST(SampleEmployees, StaysInBandAndMatchesMean) {
  const SizeBand b{50, 150};
  const auto fit = fit_pareto_band(80.0, b);
  Rng rng = substream(99, 0);
  double sum = 0.0;
  const int n = 100000;
  for (int i = 0; i < n; ++i) {
    const auto e = sample_employees(fit, b, rng);
    ASSERT_GE(e, 50);
    ASSERT_LT(e, 150);
    sum += static_cast<double>(e);
  }
  EXPECT_NEAR(sum / n, 80.0, 0.05 * 80.0);
  // Continuous draws follow the truncated mean closely.
  Rng rng2 = substream(99, 1);
  double csum = 0.0;
  for (int i = 0; i < n; ++i) csum += sample_truncated_pareto(fit, b, rng2);
  const double m = truncated_pareto_mean(fit, b);
  EXPECT_NEAR(csum / n, m, 0.01 * m);
}

TEST(SampleEmployees, OpenBandCapped) {
  const SizeBand b{250, std::nullopt};
  Rng rng = substream(5, 0);
  for (int i = 0; i < 10000; ++i) {
    const auto e = sample_employees({1.01, 5000.0}, b, rng);
    ASSERT_GE(e, 250);
    ASSERT_LE(e, kMaxEmployees);
  }
}
