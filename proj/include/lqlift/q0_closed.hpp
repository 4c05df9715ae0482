#pragma once

// Closed-form q -> 0 conditions. With b = c3/(4 gamma) and nu_g = 4 gamma nu
// the Gaussian integrals reduce to erf/erfc, and both conditions are affine in
// beta, which makes the threshold a direct maximization.

#include <algorithm>
#include <cmath>
#include <vector>

#include "lqlift/error.hpp"
#include "lqlift/exponents.hpp"
#include "lqlift/optimize.hpp"
#include "lqlift/special.hpp"
#include "lqlift/sphere.hpp"

namespace lqlift {

struct Q0Params {
  double c3 = 1.0;
  double b = 0.25;      // c3 / (4 gamma), in (0, 1/2)
  double nu_g = 0.0;    // 4 gamma nu
  double alpha = 0.5;
  double beta = 0.1;
  // 1 - 2b when known more precisely than from b; 0 means derive it from b
  double one_minus_2b = 0.0;
};

namespace detail {

inline double q0_gap(const Q0Params& p) { return p.one_minus_2b > 0.0 ? p.one_minus_2b : 1.0 - 2.0 * p.b; }

inline void check_q0(const Q0Params& p) {
  if (!(p.c3 > 0.0 && std::isfinite(p.c3))) throw InvalidParameter("q0: c3 must be positive");
  if (!(p.b > 0.0 && q0_gap(p) > 0.0)) throw InvalidParameter("q0: need 0 < b and 1 - 2b > 0");
  if (!(p.nu_g >= 0.0)) throw InvalidParameter("q0: nu_g must be nonnegative");
  if (!(p.beta >= 0.0 && p.beta < 1.0)) throw InvalidParameter("q0: beta must lie in [0, 1)");
  check_sphere_args(p.alpha);
}

// Condition = intercept + beta * slope.
struct AffineInBeta {
  double intercept;
  double slope;
};

inline AffineInBeta q0_affine(ThresholdKind kind, const Q0Params& p) {
  check_q0(p);
  const double g = q0_gap(p);
  const double off = std::log(std::exp(-p.b * p.nu_g) / std::sqrt(g) * erfc(std::sqrt(0.5 * g * p.nu_g)) +
                              erf(std::sqrt(0.5 * p.nu_g)));
  const double intercept = p.c3 * g / (4.0 * p.b) + off / p.c3 + i_sph(p.c3, p.alpha).value;
  if (kind == ThresholdKind::strong) return {intercept, 2.0 * p.b * p.nu_g / p.c3};
  // on-support term: (beta / c3) log E e^{b h^2} = -beta log(1 - 2b) / (2 c3)
  return {intercept, (-0.5 * std::log(g) + p.b * p.nu_g) / p.c3};
}

}  // namespace detail

/// Sectional q -> 0 condition; negative certifies (alpha, beta).
inline double q0_sectional_condition(const Q0Params& p) {
  const auto a = detail::q0_affine(ThresholdKind::sectional, p);
  return a.intercept + p.beta * a.slope;
}

/// Strong q -> 0 condition; negative certifies (alpha, beta).
inline double q0_strong_condition(const Q0Params& p) {
  const auto a = detail::q0_affine(ThresholdKind::strong, p);
  return a.intercept + p.beta * a.slope;
}

/// The large-c3 seed: 1 - 2b = alpha / c3^2, nu_g = log(c3^2 / alpha).
inline Q0Params q0_asymptotic_seed(double c3, double alpha, double beta) {
  Q0Params p;
  p.c3 = c3;
  p.alpha = alpha;
  p.beta = beta;
  p.one_minus_2b = std::min(alpha / (c3 * c3), 0.999);
  p.b = 0.5 * (1.0 - p.one_minus_2b);
  p.nu_g = std::max(std::log(c3 * c3 / alpha), 0.0);
  return p;
}

struct Q0Threshold {
  double beta = 0.0;      // certified: the condition at beta is `residual` < 0
  double supremum = 0.0;  // beta at which the best affine condition crosses zero
  double residual = 0.0;
  Q0Params argmax{};
};

namespace detail {

// Largest zero crossing -intercept/slope at fixed c3, over (log(1-2b), log nu_g).
inline Q0Threshold q0_best_at(ThresholdKind kind, double alpha, double c3) {
  const auto params = [&](const std::vector<double>& x) {
    Q0Params p;
    p.c3 = c3;
    p.alpha = alpha;
    p.one_minus_2b = std::exp(std::min(x[0], -1e-12));
    p.b = 0.5 * (1.0 - p.one_minus_2b);
    p.nu_g = std::exp(x[1]);
    return p;
  };
  const auto crossing = [&](const std::vector<double>& x) {
    const Q0Params p = params(x);
    if (!(p.b > 0.0)) return -std::numeric_limits<double>::infinity();
    const AffineInBeta a = q0_affine(kind, p);
    if (!(a.slope > 0.0)) return a.intercept < 0.0 ? 1.0 : -std::numeric_limits<double>::infinity();
    return -a.intercept / a.slope;
  };
  const Q0Params seed = q0_asymptotic_seed(c3, alpha, 0.0);
  std::vector<std::vector<double>> starts{{std::log(seed.one_minus_2b), std::log(std::max(seed.nu_g, 1e-3))},
                                          {std::log(0.5), 0.0},
                                          {std::log(0.05), std::log(3.0)},
                                          {std::log(1e-3), std::log(6.0)}};
  NelderMeadOptions opt;
  opt.f_tol = 1e-14;
  opt.x_tol = 1e-10;
  Q0Threshold best;
  best.supremum = -std::numeric_limits<double>::infinity();
  for (const auto& x0 : starts) {
    const MinimizeResult r = nelder_mead([&](const std::vector<double>& x) { return -crossing(x); }, x0, opt);
    if (-r.value > best.supremum) {
      best.supremum = -r.value;
      best.argmax = params(r.x);
    }
  }
  return best;
}

}  // namespace detail

/// Largest beta certified by the closed-form condition over c3 in
/// [1e-3, c3_max] and all (b, nu_g). The returned beta sits just below the
/// crossing and carries its (negative) residual; 0 if nothing certifies.
inline Q0Threshold q0_threshold(double alpha, ThresholdKind kind, double c3_max) {
  check_sphere_args(alpha);
  if (kind == ThresholdKind::weak) throw InvalidParameter("q0_threshold: no closed form for the weak kind");
  if (!(c3_max > 0.0 && std::isfinite(c3_max))) throw InvalidParameter("q0_threshold: c3_max must be positive");
  const double c3_min = std::min(1e-3, c3_max);

  // four points per decade on a fixed lattice, plus c3_max itself
  std::vector<double> grid;
  for (int k = static_cast<int>(std::floor(4.0 * std::log10(c3_min))); std::pow(10.0, k / 4.0) < c3_max; ++k)
    if (std::pow(10.0, k / 4.0) >= c3_min) grid.push_back(std::pow(10.0, k / 4.0));
  grid.push_back(c3_max);

  Q0Threshold best;
  best.supremum = -std::numeric_limits<double>::infinity();
  std::size_t best_i = 0;
  for (std::size_t i = 0; i < grid.size(); ++i) {
    const Q0Threshold t = detail::q0_best_at(kind, alpha, grid[i]);
    if (t.supremum > best.supremum) {
      best = t;
      best_i = i;
    }
  }
  if (best_i > 0 && best_i + 1 < grid.size()) {
    const auto refine = [&](double t) {
      const Q0Threshold r = detail::q0_best_at(kind, alpha, std::exp(t));
      if (r.supremum > best.supremum) best = r;
      return -r.supremum;
    };
    brent_minimize(refine, std::log(grid[best_i - 1]), std::log(grid[best_i + 1]), 1e-3);
  }

  const double ceiling = kind == ThresholdKind::strong ? 0.5 : 1.0;
  best.beta = std::clamp(best.supremum, 0.0, ceiling);
  // step just inside the crossing so the residual is strictly negative
  for (double back = 1e-12; best.beta > 0.0; back *= 10.0) {
    best.argmax.beta = std::max(best.beta - back, 0.0);
    const double r = kind == ThresholdKind::strong ? q0_strong_condition(best.argmax) : q0_sectional_condition(best.argmax);
    if (r < 0.0) {
      best.beta = best.argmax.beta;
      best.residual = r;
      return best;
    }
    if (back > 1e-3) break;
  }
  best.beta = 0.0;
  best.argmax.beta = 0.0;
  best.residual = kind == ThresholdKind::strong ? q0_strong_condition(best.argmax) : q0_sectional_condition(best.argmax);
  return best;
}

}  // namespace lqlift
