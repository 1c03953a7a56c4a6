#pragma once

#include <cmath>

#include <boost/math/quadrature/exp_sinh.hpp>
#include <boost/math/quadrature/gauss_kronrod.hpp>

#include "scdd/codes.hpp"
#include "scdd/pareto.hpp"

namespace scdd::testing {

// E[X | band] by adaptive quadrature of the Lomax density.
inline double quadrature_mean(const ParetoParams& p, const SizeBand& band) {
  auto f = [&](double x) { return p.shape / p.scale * std::pow(1.0 + x / p.scale, -(p.shape + 1.0)); };
  auto xf = [&](double x) { return x * f(x); };
  const double lo = static_cast<double>(band.lower);
  if (band.upper) {
    using GK = boost::math::quadrature::gauss_kronrod<double, 61>;
    const double hi = static_cast<double>(*band.upper);
    return GK::integrate(xf, lo, hi, 15, 1e-14) / GK::integrate(f, lo, hi, 15, 1e-14);
  }
  // Substitute x = lo + (scale + lo) * (e^y - 1) so the heavy tail becomes
  // an exponential decay in y.
  boost::math::quadrature::exp_sinh<double> es;
  const double c = p.scale + lo;
  auto log_f = [&](double x) { return std::log(p.shape / p.scale) - (p.shape + 1.0) * std::log1p(x / p.scale); };
  auto g = [&](double y) {
    const double x = lo + c * std::expm1(y);
    return std::isfinite(x) ? std::exp(log_f(x) + std::log(c) + y) : 0.0;
  };
  auto tg = [&](double y) {
    const double t = c * std::expm1(y);
    return std::isfinite(t) ? t * g(y) : 0.0;
  };
  return lo + es.integrate(tg, 1e-14) / es.integrate(g, 1e-14);
}

}  // namespace scdd::testing
