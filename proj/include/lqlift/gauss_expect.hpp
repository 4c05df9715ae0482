#pragma once

// Expectations over a standard normal h of e^{c3 M(h)} (log domain) and of M(h).

#include <algorithm>
#include <array>
#include <cmath>
#include <limits>
#include <numbers>
#include <optional>
#include <string>
#include <vector>

#include "lqlift/error.hpp"
#include "lqlift/quadrature.hpp"

namespace lqlift {

enum class QuadratureScheme { gauss_hermite, adaptive_panel };

struct QuadratureSpec {
  int node_count = 256;
  QuadratureScheme scheme = QuadratureScheme::adaptive_panel;
  double tail_cut = 8.0;
  bool verify = true;  // repeat with 2N nodes and compare
};

struct LogExpectation {
  double log_value = 0.0;
  bool finite = true;
};

/// What is known about M beyond point evaluations. Kinks become panel
/// breakpoints; a known growth rate lim M(h)/h^2 replaces the fitted one.
struct IntegrandShape {
  std::array<double, 4> kinks{};
  int kink_count = 0;
  std::optional<double> growth;

  IntegrandShape& add_kink(double h) {
    if (kink_count < static_cast<int>(kinks.size()) && std::isfinite(h)) kinks[kink_count++] = h;
    return *this;
  }
};

inline constexpr double quadrature_rel_tol = 1e-6;

namespace detail {

inline const double log_sqrt_2pi = 0.5 * std::log(2.0 * std::numbers::pi);

inline void check_spec(const QuadratureSpec& spec) {
  if (spec.node_count < 32) throw InvalidParameter("quadrature: node_count must be >= 32");
  if (!(spec.tail_cut >= 8.0)) throw InvalidParameter("quadrature: tail_cut must be >= 8");
}

// 7-point Gauss / 15-point Kronrod pair on [-1, 1].
inline constexpr std::array<double, 8> kronrod_nodes{
    0.991455371120812639206854697526329, 0.949107912342758524526189684047851,
    0.864864423359769072789712788640926, 0.741531185599394439863864773280788,
    0.586087235467691130294144845693013, 0.405845151377397166906606412076961,
    0.207784955007898467600689403773245, 0.0};
inline constexpr std::array<double, 8> kronrod_weights{
    0.022935322010529224963732008058970, 0.063092092629978553290700663189204,
    0.104790010322250183839876322541518, 0.140653259715525918745189590510238,
    0.169004726639267902826583426598550, 0.190350578064785409913256402421014,
    0.204432940075298892414161999234649, 0.209482141084727828012999174891714};
inline constexpr std::array<double, 4> gauss7_weights{
    0.129484966168869693270611432679082, 0.279705391489276667901467771423780,
    0.381830050505118944950369775488975, 0.417959183673469387755102040816327};
inline constexpr int kronrod_points = 15;

struct Panel {
  double a;
  double b;
  double value;
  double error;
};

template <class F>
Panel kronrod_panel(const F& f, double a, double b) {
  const double center = 0.5 * (a + b);
  const double half = 0.5 * (b - a);
  std::array<double, 15> fv{};
  fv[14] = f(center);
  double k = fv[14] * kronrod_weights[7];
  double g = fv[14] * gauss7_weights[3];
  for (int j = 0; j < 7; ++j) {
    const double dx = half * kronrod_nodes[j];
    fv[2 * j] = f(center - dx);
    fv[2 * j + 1] = f(center + dx);
    const double pair = fv[2 * j] + fv[2 * j + 1];
    k += kronrod_weights[j] * pair;
    if (j % 2 == 1) g += gauss7_weights[j / 2] * pair;
  }
  // QUADPACK error scaling: the Kronrod result is far better than |K - G|
  const double mean = 0.5 * k;
  double spread = kronrod_weights[7] * std::abs(fv[14] - mean);
  for (int j = 0; j < 7; ++j)
    spread += kronrod_weights[j] * (std::abs(fv[2 * j] - mean) + std::abs(fv[2 * j + 1] - mean));
  double err = std::abs(k - g) * half;
  spread *= half;
  if (spread != 0.0 && err != 0.0) err = spread * std::min(1.0, std::pow(200.0 * err / spread, 1.5));
  return {a, b, k * half, err};
}

// Globally adaptive Gauss-Kronrod over the partition given by `breaks`
// (sorted). The longest pieces are split until there are min_panels, then the
// panel with the largest error estimate is bisected until the summed estimate
// drops below rel_tol * |total| + abs_tol.
template <class F>
double adaptive_integral(const F& f, std::vector<double> breaks, int min_panels, int max_panels, double rel_tol,
                         double abs_tol) {
  std::vector<std::pair<double, double>> pieces;
  for (std::size_t i = 0; i + 1 < breaks.size(); ++i)
    if (breaks[i + 1] > breaks[i]) pieces.emplace_back(breaks[i], breaks[i + 1]);
  if (pieces.empty()) return 0.0;
  while (static_cast<int>(pieces.size()) < min_panels) {
    auto longest = std::max_element(pieces.begin(), pieces.end(), [](const auto& x, const auto& y) {
      return x.second - x.first < y.second - y.first;
    });
    const double mid = 0.5 * (longest->first + longest->second);
    const double end = longest->second;
    longest->second = mid;
    pieces.emplace_back(mid, end);
  }
  std::vector<Panel> panels;
  panels.reserve(pieces.size() + 64);
  double total = 0.0, error = 0.0;
  for (const auto& [a, b] : pieces) {
    panels.push_back(kronrod_panel(f, a, b));
    total += panels.back().value;
    error += panels.back().error;
  }
  while (error > rel_tol * std::abs(total) + abs_tol && static_cast<int>(panels.size()) < max_panels) {
    auto worst = std::max_element(panels.begin(), panels.end(),
                                  [](const Panel& x, const Panel& y) { return x.error < y.error; });
    const double mid = 0.5 * (worst->a + worst->b);
    if (!(mid > worst->a && mid < worst->b)) break;
    const Panel left = kronrod_panel(f, worst->a, mid);
    const Panel right = kronrod_panel(f, mid, worst->b);
    total += left.value + right.value - worst->value;
    error += left.error + right.error - worst->error;
    *worst = left;
    panels.push_back(right);
  }
  // re-sum to shed the drift of the running updates
  total = 0.0;
  for (const Panel& p : panels) total += p.value;
  return total;
}

// Streaming log-sum-exp.
struct LogSum {
  double top = -std::numeric_limits<double>::infinity();
  double acc = 0.0;
  void add(double t) {
    if (t == -std::numeric_limits<double>::infinity()) return;
    if (t > top) {
      acc = acc * std::exp(top - t) + 1.0;
      top = t;
    } else {
      acc += std::exp(t - top);
    }
  }
  double value() const { return top + std::log(acc); }
};

inline void add_kinks(std::vector<double>& breaks, const IntegrandShape& shape) {
  const double lo = breaks.front(), hi = breaks.back();
  for (int i = 0; i < shape.kink_count; ++i)
    if (shape.kinks[i] > lo && shape.kinks[i] < hi) breaks.push_back(shape.kinks[i]);
  std::sort(breaks.begin(), breaks.end());
}

// Least-squares quadratic fit of M over the outermost tenth of [0, T].
template <class M>
double fit_tail_quadratic(const M& m, double sign, const QuadratureSpec& spec) {
  const double t = spec.tail_cut;
  double s[5] = {0, 0, 0, 0, 0};
  double r[3] = {0, 0, 0};
  const double center = 0.95 * t;
  const int count = std::max(8, spec.node_count / 10);
  for (int i = 0; i < count; ++i) {
    const double h = 0.9 * t + 0.1 * t * (i + 0.5) / count;
    const double u = h - center;
    const double v = m(sign * h);
    double p = 1.0;
    for (int k = 0; k < 5; ++k, p *= u) s[k] += p;
    r[0] += v;
    r[1] += v * u;
    r[2] += v * u * u;
  }
  // Cramer's rule on the 3x3 normal equations; the quadratic coefficient is shift invariant
  const double a[3][3] = {{s[0], s[1], s[2]}, {s[1], s[2], s[3]}, {s[2], s[3], s[4]}};
  const auto det3 = [](const double x[3][3]) {
    return x[0][0] * (x[1][1] * x[2][2] - x[1][2] * x[2][1]) -
           x[0][1] * (x[1][0] * x[2][2] - x[1][2] * x[2][0]) +
           x[0][2] * (x[1][0] * x[2][1] - x[1][1] * x[2][0]);
  };
  const double b[3][3] = {{a[0][0], a[0][1], r[0]}, {a[1][0], a[1][1], r[1]}, {a[2][0], a[2][1], r[2]}};
  return det3(b) / det3(a);
}

template <class M>
double growth_of(const M& m, bool half_line, const IntegrandShape& shape, const QuadratureSpec& spec) {
  if (shape.growth) return *shape.growth;
  double g = fit_tail_quadratic(m, 1.0, spec);
  if (!half_line) g = std::max(g, fit_tail_quadratic(m, -1.0, spec));
  return g;
}

struct ScanResult {
  std::vector<double> breaks;  // sorted window partition
  double top;                  // largest scanned value of the log integrand
};

// Walk L outward from 0 with steps growing geometrically from 1/2 up to
// sigma/2, stopping past the running maximum once L has fallen `cutoff` below
// it. The scanned points inside the window become the initial partition.
template <class L>
std::optional<ScanResult> scan_window(const L& logf, double sigma, double cutoff, bool half_line) {
  constexpr int max_steps = 20000;
  std::vector<std::pair<double, double>> seen{{0.0, logf(0.0)}};
  double best = seen.front().second;
  const int dirs = half_line ? 1 : 2;
  for (int d = 0; d < dirs; ++d) {
    const double sgn = d == 0 ? 1.0 : -1.0;
    double h = 0.0, arg_best = 0.0, local_best = seen.front().second;
    int k = 0;
    for (; k < max_steps; ++k) {
      h += std::min(0.5 * sigma, std::max(0.5, h / 4.0));
      const double v = logf(sgn * h);
      if (std::isnan(v) || v == std::numeric_limits<double>::infinity()) return std::nullopt;
      seen.emplace_back(sgn * h, v);
      if (v > local_best) {
        local_best = v;
        arg_best = h;
      }
      best = std::max(best, v);
      if (h > arg_best && v < best - cutoff && h >= 2.0) break;
    }
    if (k == max_steps) return std::nullopt;
  }
  std::sort(seen.begin(), seen.end());
  std::size_t first = seen.size(), last = 0;
  for (std::size_t i = 0; i < seen.size(); ++i) {
    if (seen[i].second >= best - cutoff) {
      first = std::min(first, i);
      last = i;
    }
  }
  first = first > 0 ? first - 1 : 0;
  last = std::min(last + 1, seen.size() - 1);
  ScanResult out{{}, best};
  for (std::size_t i = first; i <= last; ++i) out.breaks.push_back(seen[i].first);
  return out;
}

template <class M>
LogExpectation log_E_exp_once(double c3, const M& m, bool half_line, const QuadratureSpec& spec,
                              const IntegrandShape& shape, int nodes) {
  const double kappa = growth_of(m, half_line, shape, spec);
  if (c3 * kappa >= 0.5) return {std::numeric_limits<double>::infinity(), false};
  const double sigma = 1.0 / std::sqrt(1.0 - 2.0 * c3 * std::max(kappa, 0.0));
  const double offset = -log_sqrt_2pi + (half_line ? std::log(2.0) : 0.0);

  if (spec.scheme == QuadratureScheme::gauss_hermite) {
    LogSum sum;
    const QuadratureRule& gh = gauss_hermite(nodes);
    const double scale = std::numbers::sqrt2 * sigma;
    for (std::size_t i = 0; i < gh.nodes.size(); ++i) {
      const double x = gh.nodes[i];
      const double h = scale * x;
      const double mv = m(half_line ? std::abs(h) : h);
      sum.add(gh.log_scaled_weights[i] + std::log(scale) + c3 * mv - 0.5 * h * h - log_sqrt_2pi);
    }
    return {sum.value(), true};
  }

  const auto logf = [&](double h) { return c3 * m(h) - 0.5 * h * h; };
  const auto scan = scan_window(logf, sigma, 0.5 * spec.tail_cut * spec.tail_cut, half_line);
  if (!scan) return {std::numeric_limits<double>::infinity(), false};
  std::vector<double> breaks = scan->breaks;
  add_kinks(breaks, shape);
  const double top = scan->top;
  const int min_panels = std::max(1, nodes / kronrod_points);
  // c3 M(h) and h^2/2 nearly cancel when sigma is large; their size sets the noise floor
  const double reach = std::max(std::abs(breaks.front()), std::abs(breaks.back()));
  const double noise = 16.0 * std::numeric_limits<double>::epsilon() * (0.5 * reach * reach + std::abs(top));
  const double total = adaptive_integral([&](double h) { return std::exp(logf(h) - top); }, std::move(breaks),
                                         min_panels, 64 * min_panels, std::max(1e-10, noise), 0.0);
  if (!(total > 0.0) || !std::isfinite(total)) return {std::numeric_limits<double>::infinity(), false};
  return {std::log(total) + top + offset, true};
}

template <class M>
double E_plain_once(const M& m, bool half_line, const QuadratureSpec& spec, const IntegrandShape& shape,
                    int nodes) {
  double total = 0.0;
  if (spec.scheme == QuadratureScheme::gauss_hermite) {
    const QuadratureRule& gh = gauss_hermite(nodes);
    for (std::size_t i = 0; i < gh.nodes.size(); ++i) {
      const double h = std::numbers::sqrt2 * gh.nodes[i];
      total += gh.weights[i] * m(half_line ? std::abs(h) : h);
    }
    return total / std::sqrt(std::numbers::pi);
  }
  const double t = spec.tail_cut + 1.0;
  const double scale = half_line ? 2.0 : 1.0;
  std::vector<double> breaks{half_line ? 0.0 : -t, t};
  add_kinks(breaks, shape);
  const int min_panels = std::max(1, nodes / kronrod_points);
  return adaptive_integral([&](double h) { return scale * std::exp(-0.5 * h * h - log_sqrt_2pi) * m(h); },
                           std::move(breaks), min_panels, 64 * min_panels, 1e-11, 1e-300);
}

}  // namespace detail

/// log E[e^{c3 M(h)}], h standard normal; half_line integrates M(|h|).
/// finite = false when c3 times the quadratic growth of M reaches 1/2.
template <class M>
LogExpectation log_E_exp(double c3, const M& m, bool half_line, const QuadratureSpec& spec,
                         const IntegrandShape& shape = {}) {
  detail::check_spec(spec);
  if (!(c3 > 0.0) || !std::isfinite(c3)) throw InvalidParameter("log_E_exp: c3 must be positive");
  const LogExpectation base = detail::log_E_exp_once(c3, m, half_line, spec, shape, spec.node_count);
  if (!spec.verify || !base.finite) return base;
  const LogExpectation fine = detail::log_E_exp_once(c3, m, half_line, spec, shape, 2 * spec.node_count);
  if (fine.finite && std::abs(std::expm1(base.log_value - fine.log_value)) <= quadrature_rel_tol) return base;
  const LogExpectation finer = detail::log_E_exp_once(c3, m, half_line, spec, shape, 4 * spec.node_count);
  if (fine.finite && finer.finite &&
      std::abs(std::expm1(fine.log_value - finer.log_value)) <= quadrature_rel_tol)
    return finer;
  throw QuadratureDisagreement("log_E_exp: node counts N and 2N disagree", base.log_value, fine.log_value);
}

/// E[M(h)], h standard normal; half_line integrates M(|h|).
template <class M>
double E_plain(const M& m, bool half_line, const QuadratureSpec& spec, const IntegrandShape& shape = {}) {
  detail::check_spec(spec);
  const double base = detail::E_plain_once(m, half_line, spec, shape, spec.node_count);
  if (!spec.verify) return base;
  const auto close = [](double a, double b) { return std::abs(a - b) <= quadrature_rel_tol * std::abs(b) + 1e-15; };
  const double fine = detail::E_plain_once(m, half_line, spec, shape, 2 * spec.node_count);
  if (close(base, fine)) return base;
  const double finer = detail::E_plain_once(m, half_line, spec, shape, 4 * spec.node_count);
  if (close(fine, finer)) return finer;
  throw QuadratureDisagreement("E_plain: node counts N and 2N disagree", base, fine);
}

/// Fitted lim M(h)/h^2 from the outermost tenth of the integration range.
template <class M>
double fit_growth(const M& m, bool half_line, const QuadratureSpec& spec) {
  detail::check_spec(spec);
  return detail::growth_of(m, half_line, IntegrandShape{}, spec);
}

}  // namespace lqlift
