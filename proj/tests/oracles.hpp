#pragma once

// Independent reference computations shared by the tests. Nothing here calls
// the code under test.

#include <cmath>
#include <functional>
#include <numbers>

namespace oracles {

inline double phi(double x) { return std::exp(-0.5 * x * x) / std::sqrt(2.0 * std::numbers::pi); }
inline double upper_tail(double x) { return 0.5 * std::erfc(x / std::numbers::sqrt2); }

/// Golden-section minimum of a unimodal f on [a, b].
inline std::pair<double, double> golden_min(const std::function<double(double)>& f, double a, double b,
                                            double tol = 1e-12) {
  const double r = (std::sqrt(5.0) - 1.0) / 2.0;
  double c = b - r * (b - a), d = a + r * (b - a);
  double fc = f(c), fd = f(d);
  while (b - a > tol * (1.0 + std::abs(a) + std::abs(b))) {
    if (fc < fd) {
      b = d;
      d = c;
      fd = fc;
      c = b - r * (b - a);
      fc = f(c);
    } else {
      a = c;
      c = d;
      fc = fd;
      d = a + r * (b - a);
      fd = f(d);
    }
  }
  const double x = 0.5 * (a + b);
  return {x, f(x)};
}

/// max over w of f(w) by a dense scan of [lo, hi] and a golden polish.
inline double scan_max(const std::function<double(double)>& f, double lo, double hi, int steps = 40000) {
  double best = f(lo), best_x = lo;
  for (int i = 1; i <= steps; ++i) {
    const double x = lo + (hi - lo) * i / steps;
    const double v = f(x);
    if (v > best) {
      best = v;
      best_x = x;
    }
  }
  const double span = (hi - lo) / steps;
  const auto polished = golden_min([&](double x) { return -f(x); }, std::max(lo, best_x - span),
                                   std::min(hi, best_x + span));
  return std::max(best, -polished.second);
}

/// E over h ~ N(0,1) of (|h| + nu)^2.
inline double second_moment_shifted(double nu) { return 1.0 + 2.0 * nu * std::sqrt(2.0 / std::numbers::pi) + nu * nu; }

/// E over h ~ N(0,1) of max(|h| - nu, 0)^2.
inline double second_moment_soft(double nu) { return 2.0 * ((1.0 + nu * nu) * upper_tail(nu) - nu * phi(nu)); }

/// The q = 1 limit-mode sectional condition: sqrt(min_nu S(nu)) - sqrt(alpha).
inline double sectional_q1_limit(double alpha, double beta) {
  const auto S = [&](double nu) { return beta * second_moment_shifted(nu) + (1.0 - beta) * second_moment_soft(nu); };
  return std::sqrt(golden_min(S, 0.0, 10.0).second) - std::sqrt(alpha);
}

/// The q = 1 limit-mode weak condition with the support magnitude sent to infinity.
inline double weak_q1_limit(double alpha, double beta) {
  const auto S = [&](double nu) { return beta * (1.0 + nu * nu) + (1.0 - beta) * second_moment_soft(nu); };
  return std::sqrt(golden_min(S, 0.0, 10.0).second) - std::sqrt(alpha);
}

/// Largest beta in (0, hi) with cond(beta) < 0, by plain bisection.
inline double bisect_threshold(const std::function<double(double)>& cond, double hi) {
  double lo = 1e-9;
  for (int i = 0; i < 200 && hi - lo > 1e-13; ++i) {
    const double mid = 0.5 * (lo + hi);
    (cond(mid) < 0.0 ? lo : hi) = mid;
  }
  return lo;
}

/// Sphere exponent from the chi-square large-deviation rate:
/// (1/c3) max_s [-c3 sqrt(s) + (alpha/2) log(s/alpha) - (s - alpha)/2].
inline double sphere_rate(double c3, double alpha) {
  const auto neg = [&](double t) {
    const double s = std::exp(t);
    return -(-c3 * std::sqrt(s) + 0.5 * alpha * std::log(s / alpha) - 0.5 * (s - alpha));
  };
  return -golden_min(neg, -40.0, 5.0, 1e-14).second / c3;
}

}  // namespace oracles
