#pragma once

// Oracle cross-checks runnable from the command line. Each check compares a
// library path against something computed another way.

#include <cmath>
#include <functional>
#include <numbers>
#include <sstream>
#include <string>
#include <vector>

#include "lqlift/empirical.hpp"
#include "lqlift/exponents.hpp"
#include "lqlift/inner_max.hpp"
#include "lqlift/special.hpp"
#include "lqlift/threshold.hpp"

namespace lqlift {

struct CheckResult {
  std::string name;
  bool passed = false;
  std::string detail;
};

namespace oracle {

/// erf by its Maclaurin series in long double (use for |x| <= 3).
inline long double erf_series(long double x) {
  long double term = x, sum = x;
  for (int n = 1; n < 200; ++n) {
    term *= -x * x / n;
    const long double add = term / (2 * n + 1);
    sum += add;
    if (std::fabs(add) < 1e-22L * std::fabs(sum)) break;
  }
  return sum * 2.0L / std::sqrt(std::numbers::pi_v<long double>);
}

/// erfc by the Laplace continued fraction, evaluated with modified Lentz (x >= 2).
inline long double erfc_continued_fraction(long double x) {
  const long double tiny = 1e-300L;
  long double f = x, c = x, d = 0.0L;
  for (int n = 1; n < 5000; ++n) {
    const long double a = n / 2.0L;
    d = x + a * d;
    d = d == 0.0L ? tiny : 1.0L / d;
    c = x + a / c;
    if (c == 0.0L) c = tiny;
    const long double delta = c * d;
    f *= delta;
    if (std::fabs(delta - 1.0L) < 1e-20L) break;
  }
  return std::exp(-x * x) / (f * std::sqrt(std::numbers::pi_v<long double>));
}

/// max over w of the weak on-support objective by a dense scan plus golden refinement.
inline double weak_support_brute(double h, double q, double nu, double gamma, double mu) {
  const auto obj = [&](double w) {
    const double t = std::abs(mu + w);
    const double tq = q == 0.0 ? (t > 0.0) : std::pow(t, q);
    const double mq = q == 0.0 ? (mu > 0.0) : std::pow(mu, q);
    return h * w - nu * tq + nu * mq - gamma * w * w;
  };
  const double reach = (std::abs(h) + nu + 1.0) / gamma + 2.0 * mu + 1.0;
  double best = obj(-mu), best_w = -mu;
  const int steps = 20000;
  for (int i = 0; i <= steps; ++i) {
    const double w = -reach + 2.0 * reach * i / steps;
    const double v = obj(w);
    if (v > best) {
      best = v;
      best_w = w;
    }
  }
  const double span = 2.0 * reach / steps;
  const auto r = golden_section([&](double w) { return -obj(w); }, best_w - span, best_w + span, 1e-13);
  return std::max(best, -r.value);
}

}  // namespace oracle

namespace detail {

inline std::string fmt(double v) {
  std::ostringstream os;
  os.precision(3);
  os << v;
  return os.str();
}

inline CheckResult check_erf(const ErfCoefficients& k) {
  double worst = 0.0;
  for (int i = 0; i <= 800; ++i) {
    const double x = i / 100.0;
    if (x <= 3.0) {
      const long double ref = oracle::erf_series(x);
      if (ref != 0.0L) worst = std::max(worst, static_cast<double>(std::fabs((erf(x, k) - ref) / ref)));
    }
    if (x >= 2.0) {
      const long double ref = oracle::erfc_continued_fraction(x);
      worst = std::max(worst, static_cast<double>(std::fabs((erfc(x, k) - ref) / ref)));
    }
  }
  return {"erf_vs_series", worst < 1e-12, "max rel err " + fmt(worst)};
}

inline CheckResult check_sphere_limit() {
  double worst = 0.0;
  for (int i = 1; i <= 19; ++i) {
    const double a = 0.05 * i;
    worst = std::max(worst, std::abs(i_sph(1e-4, a).value + std::sqrt(a)));
  }
  return {"sphere_c3_to_zero", worst < 1e-3, "max |i_sph + sqrt(alpha)| " + fmt(worst)};
}

inline CheckResult check_cubic() {
  const CounterRng rng(7, 1);
  double worst = 0.0;
  for (std::uint64_t i = 0; i < 1000; ++i) {
    ScalarProblem p;
    p.q = 0.5;
    p.h_mag = 4.0 * rng.uniform(4 * i);
    p.nu = 3.0 * rng.uniform(4 * i + 1);
    p.gamma = 0.05 + 2.0 * rng.uniform(4 * i + 2);
    p.sign_mode = rng.bits(4 * i + 3) & 1 ? SignMode::plus : SignMode::minus;
    const double generic = p.sign_mode == SignMode::plus ? max_plus(p).value : max_minus(p).value;
    worst = std::max(worst, std::abs(max_q_half(p).value - generic));
  }
  return {"cubic_vs_generic", worst < 1e-8, "max abs diff " + fmt(worst)};
}

inline CheckResult check_quadrature() {
  const QuadratureSpec spec{};
  double worst = 0.0;
  for (double t : {0.1, 0.5, 1.0, 2.0}) {
    const double closed = std::log(2.0) + 0.5 * t * t + std::log(normal_cdf(t));
    const auto r = log_E_exp(t, [](double h) { return h; }, true, spec);
    worst = std::max(worst, std::abs(std::expm1(r.log_value - closed)));
  }
  const double e_abs = E_plain([](double h) { return h; }, true, spec);
  const double e_sq = E_plain([](double h) { return h * h; }, true, spec);
  const double plain = std::max(std::abs(e_abs - std::sqrt(2.0 / std::numbers::pi)), std::abs(e_sq - 1.0));
  return {"quadrature_closed_forms", worst < 1e-9 && plain < 1e-10,
          "mgf rel err " + fmt(worst) + ", moments abs err " + fmt(plain)};
}

inline CheckResult check_c3_limit() {
  const QuadratureSpec spec{};
  double worst = 0.0;
  for (auto kind : {ThresholdKind::sectional, ThresholdKind::strong, ThresholdKind::weak}) {
    const LiftParams p{0.0, 0.7, 0.4, 0.2, 1.0};
    const double lim = exponent_objective(kind, Mode::limit, 0.0, 0.2, 0.5, p, spec);
    LiftParams lifted = p;
    lifted.c3 = 1e-5;
    lifted.gamma = p.gamma + 0.5e-5;
    const double lif = exponent_objective(kind, Mode::lifted, 1e-5, 0.2, 0.5, lifted, spec);
    worst = std::max(worst, std::abs(lif - lim));
  }
  return {"exponent_c3_to_zero", worst < 1e-4, "max |lifted - limit| " + fmt(worst)};
}

inline CheckResult check_grid_vs_optimizer() {
  QuadratureSpec spec{};
  spec.verify = false;
  const double beta = 0.1;
  const double opt = exponent(ThresholdKind::sectional, Mode::limit, 0.0, beta, 1.0, 0.0, spec).value;
  double grid = detail::inf;
  for (double g : log_grid(0.05, 5.0, 60))
    for (int j = 0; j <= 60; ++j) {
      const LiftParams p{0.0, g, 0.05 * j, 0.0, 0.0};
      grid = std::min(grid, exponent_objective(ThresholdKind::sectional, Mode::limit, 0.0, beta, 1.0, p, spec));
    }
  return {"grid_vs_optimizer", opt <= grid + 1e-4, "optimizer " + fmt(opt) + " grid " + fmt(grid)};
}

inline CheckResult check_weak_reduction() {
  const CounterRng rng(11, 2);
  double worst = 0.0;
  for (std::uint64_t i = 0; i < 40; ++i) {
    const double h = 6.0 * rng.uniform(5 * i) - 3.0;
    const double q = std::vector<double>{0.0, 0.3, 0.5, 1.0}[rng.bits(5 * i + 1) % 4];
    const double nu = 2.0 * rng.uniform(5 * i + 2);
    const double gamma = 0.1 + rng.uniform(5 * i + 3);
    const double mu = 3.0 * rng.uniform(5 * i + 4);
    worst = std::max(worst, std::abs(max_weak_support(h, q, nu, gamma, mu).value -
                                     oracle::weak_support_brute(h, q, nu, gamma, mu)));
  }
  return {"weak_support_vs_scan", worst < 1e-7, "max abs diff " + fmt(worst)};
}

// Largest beta on a 1e-3 lattice whose dense (gamma, nu) grid minimum certifies.
inline CheckResult check_threshold_grid() {
  QuadratureSpec spec{};
  spec.verify = false;
  const double alpha = 0.5;
  const auto certified = [&](double beta) {
    double best = detail::inf;
    for (double g : log_grid(0.05, 3.0, 50))
      for (int j = 0; j <= 50; ++j) {
        const LiftParams p{0.0, g, 0.04 * j, 0.0, 0.0};
        best = std::min(best, exponent_objective(ThresholdKind::sectional, Mode::limit, 0.0, beta, 1.0, p, spec));
      }
    return best + i_sph_limit(alpha) < 0.0;
  };
  int lo = 1, hi = 250;  // in units of 1e-3
  while (hi - lo > 1) {
    const int mid = (lo + hi) / 2;
    (certified(mid * 1e-3) ? lo : hi) = mid;
  }
  const double grid_beta = lo * 1e-3;
  const double solved = solve_beta(ThresholdKind::sectional, alpha, 1.0, Mode::limit, QuadratureSpec{}).beta;
  return {"threshold_vs_grid", std::abs(solved - grid_beta) <= 2e-3,
          "bisection " + fmt(solved) + " grid " + fmt(grid_beta)};
}

inline CheckResult check_lifted_dominance() {
  const QuadratureSpec spec{};
  const double lim = solve_beta(ThresholdKind::sectional, 0.5, 1.0, Mode::limit, spec).beta;
  const double lif = solve_beta(ThresholdKind::sectional, 0.5, 1.0, Mode::lifted, spec).beta;
  return {"lifted_dominates_limit", lif >= lim - 1e-4, "lifted " + fmt(lif) + " limit " + fmt(lim)};
}

inline CheckResult check_l1_small() {
  ExperimentConfig cfg;
  cfg.n = 60;
  cfg.alpha = 0.5;
  cfg.beta = 0.05;
  const Instance inst = gen_instance(cfg, 0);
  const L1Solution s = solve_l1(inst.A, inst.y);
  const bool ok = is_recovered(s.x, inst.x) && s.duality_gap < 1e-7;
  return {"l1_recovery_small", ok, "duality gap " + fmt(s.duality_gap)};
}

}  // namespace detail

/// Runs the cross-checks; `fast` skips the threshold solves. The erf check
/// uses `erf_coefficients` so a corrupted table is caught.
inline std::vector<CheckResult> run_selftest(bool fast, const ErfCoefficients& erf_coefficients = cody_coefficients) {
  std::vector<std::function<CheckResult()>> checks{
      [&] { return detail::check_erf(erf_coefficients); },
      detail::check_sphere_limit,
      detail::check_cubic,
      detail::check_quadrature,
      detail::check_c3_limit,
      detail::check_grid_vs_optimizer,
      detail::check_weak_reduction,
      detail::check_l1_small,
  };
  if (!fast) {
    checks.emplace_back(detail::check_threshold_grid);
    checks.emplace_back(detail::check_lifted_dominance);
  }
  std::vector<CheckResult> out;
  for (const auto& c : checks) {
    try {
      out.push_back(c());
    } catch (const std::exception& e) {
      out.push_back({"(exception)", false, e.what()});
    }
  }
  return out;
}

}  // namespace lqlift
