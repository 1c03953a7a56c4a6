#pragma once

// Lomax (Pareto type II, location 0) firm-size model restricted to an
// employee band: closed-form truncated mean, grid fit and inverse-CDF draws.

#include <algorithm>
#include <cmath>
#include <limits>
#include <optional>
#include <cstdint>
#include <string>
#include <vector>

#include "scdd/codes.hpp"
#include "scdd/error.hpp"
#include "scdd/random.hpp"

namespace scdd {

struct ParetoParams {
  double shape = 1.0;  // tail index
  double scale = 1.0;  // employees

  friend bool operator==(const ParetoParams&, const ParetoParams&) = default;
};

/// Survival function P(X > x) = (1 + x / scale)^-shape.
inline double lomax_survival(const ParetoParams& p, double x) {
  return std::exp(-p.shape * std::log1p(x / p.scale));
}

inline double lomax_density(const ParetoParams& p, double x) {
  return p.shape / p.scale * std::exp(-(p.shape + 1.0) * std::log1p(x / p.scale));
}

/// E[X | lo <= X < hi], hi empty for an unbounded range. Evaluated relative
/// to lo with expm1/log1p so that narrow ranges and shape near 1 stay
/// accurate.
inline double truncated_pareto_mean(const ParetoParams& p, double lo, std::optional<double> hi) {
  if (!(p.shape > 0.0) || !(p.scale > 0.0)) {
    throw Error(ErrorKind::validation, "Pareto parameters must be positive");
  }
  if (!(lo >= 0.0)) throw Error(ErrorKind::validation, "band lower edge below the distribution support");
  if (!hi) {
    if (p.shape <= 1.0) {
      throw Error(ErrorKind::divergent_mean, "shape " + std::to_string(p.shape) +
                                                 " <= 1 has no finite mean on an unbounded band");
    }
    return lo + (p.scale + lo) / (p.shape - 1.0);
  }
  if (!(*hi > lo)) throw Error(ErrorKind::validation, "empty band");

  // r = log((scale + hi) / (scale + lo))
  const double r = std::log1p((*hi - lo) / (p.scale + lo));
  const double one_minus_a = 1.0 - p.shape;
  const double integral = one_minus_a == 0.0 ? r : std::expm1(one_minus_a * r) / one_minus_a;
  const double mass = -std::expm1(-p.shape * r);  // (S(lo) - S(hi)) / S(lo)
  const double excess = (p.scale + lo) * integral - (*hi - lo) * std::exp(-p.shape * r);
  return lo + excess / mass;
}

inline double truncated_pareto_mean(const ParetoParams& p, const SizeBand& band) {
  std::optional<double> hi;
  if (band.upper) hi = static_cast<double>(*band.upper);
  return truncated_pareto_mean(p, static_cast<double>(band.lower), hi);
}

struct GridSpec {
  double shape_min = 0.5;
  double shape_max = 5.0;
  double shape_step = 0.05;
  double scale_min = 0.5;
  double scale_max = 5000.0;
  int scale_points = 50;

  std::vector<double> shapes() const {
    if (!(shape_step > 0.0) || shape_max < shape_min) throw Error(ErrorKind::config, "bad shape grid");
    const auto n = static_cast<int>(std::floor((shape_max - shape_min) / shape_step + 1e-9)) + 1;
    std::vector<double> out(static_cast<std::size_t>(n));
    for (int i = 0; i < n; ++i) out[static_cast<std::size_t>(i)] = shape_min + i * shape_step;
    return out;
  }

  /// Log-spaced scales from scale_min to scale_max inclusive.
  std::vector<double> scales() const {
    if (scale_points < 1 || !(scale_min > 0.0) || scale_max < scale_min) {
      throw Error(ErrorKind::config, "bad scale grid");
    }
    std::vector<double> out(static_cast<std::size_t>(scale_points));
    if (scale_points == 1) {
      out[0] = scale_min;
      return out;
    }
    const double l0 = std::log(scale_min);
    const double step = (std::log(scale_max) - l0) / (scale_points - 1);
    for (int i = 0; i < scale_points; ++i) out[static_cast<std::size_t>(i)] = std::exp(l0 + i * step);
    out.back() = scale_max;
    return out;
  }
};

/// Grid point whose truncated mean is closest to `target_avg`. Iterates
/// shapes then scales in ascending order and keeps the first strict
/// improvement, so ties go to the smaller shape, then the smaller scale.
/// Shapes <= 1 are skipped for the unbounded band.
inline ParetoParams fit_pareto_band(double target_avg, const SizeBand& band, const GridSpec& grid = {}) {
  if (!band.contains(target_avg)) {
    throw Error(ErrorKind::infeasible_target,
                "target average " + std::to_string(target_avg) + " outside band [" + std::to_string(band.lower) +
                    ", " + (band.upper ? std::to_string(*band.upper) : std::string("inf")) + ")");
  }
  const auto shapes = grid.shapes();
  const auto scales = grid.scales();
  ParetoParams best{};
  double best_err = std::numeric_limits<double>::infinity();
  for (double a : shapes) {
    if (!band.bounded() && a <= 1.0) continue;
    for (double s : scales) {
      const ParetoParams p{a, s};
      const double err = std::abs(truncated_pareto_mean(p, band) - target_avg);
      if (err < best_err) {
        best_err = err;
        best = p;
      }
    }
  }
  if (!std::isfinite(best_err)) {
    throw Error(ErrorKind::infeasible_target, "no grid shape > 1 available for the unbounded band");
  }
  return best;
}

/// Continuous draw from the Lomax law conditioned on the band, by inverting
/// the truncated CDF.
inline double sample_truncated_pareto(const ParetoParams& p, const SizeBand& band, Rng& rng) {
  const double lo = static_cast<double>(band.lower);
  const double u = uniform01(rng);
  // log S(x) - log S(lo) = log1p(u * (S(hi)/S(lo) - 1))
  double rel_tail = -1.0;  // S(hi)/S(lo) - 1 for the unbounded band
  if (band.bounded()) {
    const double r = std::log1p((static_cast<double>(*band.upper) - lo) / (p.scale + lo));
    rel_tail = std::expm1(-p.shape * r);
  }
  const double log_ratio = std::log1p(u * rel_tail);  // <= 0
  // (scale + x) / (scale + lo) = exp(-log_ratio / shape)
  return lo + (p.scale + lo) * std::expm1(-log_ratio / p.shape);
}

inline constexpr std::int64_t kMaxEmployees = 10'000'000;

/// Integer employee count: nearest integer, clamped into the band, to at
/// least one employee and to kMaxEmployees in the open band.
inline std::int64_t sample_employees(const ParetoParams& p, const SizeBand& band, Rng& rng) {
  const double x = sample_truncated_pareto(p, band, rng);
  const double lo = static_cast<double>(std::max<std::int64_t>(band.lower, 1));
  const double hi = static_cast<double>(std::min(band.max_integer(), kMaxEmployees));
  return static_cast<std::int64_t>(std::clamp(std::round(x), lo, hi));
}

}  // namespace scdd
