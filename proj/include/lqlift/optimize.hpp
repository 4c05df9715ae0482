#pragma once

// Small derivative-free optimizers used by the exponent and threshold solvers.

#include <algorithm>
#include <array>
#include <cmath>
#include <functional>
#include <limits>
#include <vector>

namespace lqlift {

struct MinimizeResult {
  std::vector<double> x;
  double value = std::numeric_limits<double>::infinity();
  int evaluations = 0;
  bool converged = false;
};

struct NelderMeadOptions {
  double initial_step = 0.5;
  double f_tol = 1e-12;  // absolute spread of vertex values
  double x_tol = 1e-9;   // simplex diameter
  int max_evaluations = 4000;
  // also stop when the vertex values agree to f_tol and the best value has
  // improved by less than f_tol over this many evaluations (0 disables); a
  // simplex creeping along a nearly flat direction never meets x_tol
  int stall_evaluations = 500;
};

/// Nelder-Mead on an unconstrained objective. Non-finite values count as +inf.
/// Restarts once from the best vertex to undo premature collapse.
template <class F>
MinimizeResult nelder_mead(F&& f, std::vector<double> x0, const NelderMeadOptions& opt = {}) {
  const std::size_t n = x0.size();
  MinimizeResult out;
  const auto eval = [&](const std::vector<double>& x) {
    ++out.evaluations;
    const double v = f(x);
    return std::isnan(v) ? std::numeric_limits<double>::infinity() : v;
  };

  std::vector<std::vector<double>> simplex(n + 1, x0);
  std::vector<double> values(n + 1);
  std::vector<double> centroid(n), trial(n), trial2(n);

  for (int round = 0; round < 2; ++round) {
    for (std::size_t i = 0; i < n; ++i) {
      simplex[i + 1] = simplex[0];
      simplex[i + 1][i] += opt.initial_step;
    }
    for (std::size_t i = 0; i <= n; ++i) values[i] = eval(simplex[i]);
    bool done = false;
    double anchor_value = std::numeric_limits<double>::infinity();
    int anchor_evaluations = out.evaluations;
    while (out.evaluations < opt.max_evaluations) {
      std::vector<std::size_t> order(n + 1);
      for (std::size_t i = 0; i <= n; ++i) order[i] = i;
      std::sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) { return values[a] < values[b]; });
      {
        std::vector<std::vector<double>> s2(n + 1);
        std::vector<double> v2(n + 1);
        for (std::size_t i = 0; i <= n; ++i) {
          s2[i] = simplex[order[i]];
          v2[i] = values[order[i]];
        }
        simplex.swap(s2);
        values.swap(v2);
      }
      double diam = 0.0;
      for (std::size_t i = 1; i <= n; ++i)
        for (std::size_t j = 0; j < n; ++j) diam = std::max(diam, std::abs(simplex[i][j] - simplex[0][j]));
      const bool flat = std::isfinite(values[n]) && values[n] - values[0] <= opt.f_tol;
      if (flat && diam <= opt.x_tol) {
        done = true;
        break;
      }
      if (!(values[0] >= anchor_value - opt.f_tol)) {
        anchor_value = values[0];
        anchor_evaluations = out.evaluations;
      } else if (flat && opt.stall_evaluations > 0 && out.evaluations - anchor_evaluations >= opt.stall_evaluations) {
        done = true;
        break;
      }

      std::fill(centroid.begin(), centroid.end(), 0.0);
      for (std::size_t i = 0; i < n; ++i)
        for (std::size_t j = 0; j < n; ++j) centroid[j] += simplex[i][j] / static_cast<double>(n);

      for (std::size_t j = 0; j < n; ++j) trial[j] = centroid[j] + (centroid[j] - simplex[n][j]);
      const double fr = eval(trial);
      if (fr < values[0]) {
        for (std::size_t j = 0; j < n; ++j) trial2[j] = centroid[j] + 2.0 * (centroid[j] - simplex[n][j]);
        const double fe = eval(trial2);
        if (fe < fr) {
          simplex[n] = trial2;
          values[n] = fe;
        } else {
          simplex[n] = trial;
          values[n] = fr;
        }
        continue;
      }
      if (fr < values[n - 1]) {
        simplex[n] = trial;
        values[n] = fr;
        continue;
      }
      const bool outside = fr < values[n];
      for (std::size_t j = 0; j < n; ++j)
        trial2[j] = outside ? centroid[j] + 0.5 * (trial[j] - centroid[j])
                            : centroid[j] + 0.5 * (simplex[n][j] - centroid[j]);
      const double fc = eval(trial2);
      if (fc < (outside ? fr : values[n])) {
        simplex[n] = trial2;
        values[n] = fc;
        continue;
      }
      for (std::size_t i = 1; i <= n; ++i) {
        for (std::size_t j = 0; j < n; ++j) simplex[i][j] = simplex[0][j] + 0.5 * (simplex[i][j] - simplex[0][j]);
        values[i] = eval(simplex[i]);
      }
    }
    const auto best = std::min_element(values.begin(), values.end()) - values.begin();
    simplex[0] = simplex[best];
    out.converged = done;
    if (!done) break;
  }
  const auto best = std::min_element(values.begin(), values.end()) - values.begin();
  out.x = simplex[best];
  out.value = values[best];
  return out;
}

struct ScalarMinimum {
  double x = 0.0;
  double value = std::numeric_limits<double>::infinity();
  int evaluations = 0;
};

/// Golden-section search for a minimum of f on [lo, hi].
template <class F>
ScalarMinimum golden_section(F&& f, double lo, double hi, double x_tol, int max_iter = 200) {
  const double invphi = (std::sqrt(5.0) - 1.0) / 2.0;
  ScalarMinimum r;
  double a = lo, b = hi;
  double c = b - invphi * (b - a);
  double d = a + invphi * (b - a);
  double fc = f(c), fd = f(d);
  r.evaluations = 2;
  for (int it = 0; it < max_iter && b - a > x_tol; ++it) {
    if (fc <= fd) {
      b = d;
      d = c;
      fd = fc;
      c = b - invphi * (b - a);
      fc = f(c);
    } else {
      a = c;
      c = d;
      fc = fd;
      d = a + invphi * (b - a);
      fd = f(d);
    }
    ++r.evaluations;
  }
  if (fc <= fd) {
    r.x = c;
    r.value = fc;
  } else {
    r.x = d;
    r.value = fd;
  }
  return r;
}

/// Brent's method (golden section with parabolic steps) for a minimum of f on [lo, hi].
template <class F>
ScalarMinimum brent_minimize(F&& f, double lo, double hi, double x_tol, int max_iter = 100) {
  const double cgold = 0.3819660112501051;
  double a = lo, b = hi;
  double x = a + cgold * (b - a), w = x, v = x;
  double fx = f(x), fw = fx, fv = fx;
  double d = 0.0, e = 0.0;
  ScalarMinimum r;
  r.evaluations = 1;
  for (int it = 0; it < max_iter; ++it) {
    const double mid = 0.5 * (a + b);
    const double tol1 = x_tol * 0.5 + 1e-12 * std::abs(x);
    const double tol2 = 2.0 * tol1;
    if (std::abs(x - mid) <= tol2 - 0.5 * (b - a)) break;
    bool golden = true;
    if (std::abs(e) > tol1) {
      const double rr = (x - w) * (fx - fv);
      double qq = (x - v) * (fx - fw);
      double pp = (x - v) * qq - (x - w) * rr;
      qq = 2.0 * (qq - rr);
      if (qq > 0.0) pp = -pp;
      qq = std::abs(qq);
      const double etemp = e;
      e = d;
      if (std::abs(pp) < std::abs(0.5 * qq * etemp) && pp > qq * (a - x) && pp < qq * (b - x)) {
        d = pp / qq;
        const double u = x + d;
        if (u - a < tol2 || b - u < tol2) d = mid >= x ? tol1 : -tol1;
        golden = false;
      }
    }
    if (golden) {
      e = (x >= mid ? a : b) - x;
      d = cgold * e;
    }
    const double u = std::abs(d) >= tol1 ? x + d : x + (d >= 0.0 ? tol1 : -tol1);
    const double fu = f(u);
    ++r.evaluations;
    if (fu <= fx) {
      (u >= x ? a : b) = x;
      v = w; fv = fw;
      w = x; fw = fx;
      x = u; fx = fu;
    } else {
      (u < x ? a : b) = u;
      if (fu <= fw || w == x) {
        v = w; fv = fw;
        w = u; fw = fu;
      } else if (fu <= fv || v == x || v == w) {
        v = u; fv = fu;
      }
    }
  }
  r.x = x;
  r.value = fx;
  return r;
}

/// Evenly spaced points on a log scale, endpoints included.
inline std::vector<double> log_grid(double lo, double hi, int count) {
  std::vector<double> g(count);
  const double a = std::log(lo), b = std::log(hi);
  for (int i = 0; i < count; ++i) g[i] = count == 1 ? lo : std::exp(a + (b - a) * i / (count - 1));
  if (count > 1) {
    g.front() = lo;
    g.back() = hi;
  }
  return g;
}

}  // namespace lqlift
