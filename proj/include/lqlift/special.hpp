#pragma once

// Error function family after W. J. Cody, "Rational Chebyshev approximations
// for the error function", Math. Comp. 23 (1969). Relative error ~1e-16.

#include <array>
#include <cmath>
#include <numbers>

namespace lqlift {

/// Coefficient table of the three rational approximations. Exposed so the
/// self-test can run the routines against a deliberately damaged table.
struct ErfCoefficients {
  std::array<double, 5> a;  // |x| <= 0.46875, numerator
  std::array<double, 4> b;  // |x| <= 0.46875, denominator
  std::array<double, 9> c;  // 0.46875 < |x| <= 4, numerator
  std::array<double, 8> d;  // 0.46875 < |x| <= 4, denominator
  std::array<double, 6> p;  // |x| > 4, numerator in 1/x^2
  std::array<double, 5> q;  // |x| > 4, denominator in 1/x^2
};

inline constexpr ErfCoefficients cody_coefficients{
    {3.16112374387056560e00, 1.13864154151050156e02, 3.77485237685302021e02,
     3.20937758913846947e03, 1.85777706184603153e-1},
    {2.36012909523441209e01, 2.44024637934444173e02, 1.28261652607737228e03,
     2.84423683343917062e03},
    {5.64188496988670089e-1, 8.88314979438837594e00, 6.61191906371416295e01,
     2.98635138197400131e02, 8.81952221241769090e02, 1.71204761263407058e03,
     2.05107837782607147e03, 1.23033935479799725e03, 2.15311535474403846e-8},
    {1.57449261107098347e01, 1.17693950891312499e02, 5.37181101862009858e02,
     1.62138957456669019e03, 3.29079923573345963e03, 4.36261909014324716e03,
     3.43936767414372164e03, 1.23033935480374942e03},
    {3.05326634961232344e-1, 3.60344899949804439e-1, 1.25781726111229246e-1,
     1.60837851487422766e-2, 6.58749161529837803e-4, 1.63153871373020978e-2},
    {2.56852019228982242e00, 1.87295284992346047e00, 5.27905102951428412e-1,
     6.05183413124413191e-2, 2.33520497626869185e-3}};

namespace detail {

enum class ErfVariant { erf, erfc, erfcx };

// exp(-y*y) split so that the large part is exact in binary.
inline double exp_neg_square(double y) {
  const double ysq = std::trunc(y * 16.0) / 16.0;
  const double del = (y - ysq) * (y + ysq);
  return std::exp(-ysq * ysq) * std::exp(-del);
}

inline double calerf(double x, ErfVariant variant, const ErfCoefficients& k) {
  constexpr double thresh = 0.46875;
  constexpr double xsmall = 1.11e-16;
  constexpr double xbig = 26.543;
  constexpr double xhuge = 6.71e7;
  constexpr double xmax = 2.53e307;
  constexpr double xneg = -26.628;
  constexpr double sqrpi = 5.6418958354775628695e-1;

  const double y = std::abs(x);
  double result = 0.0;

  if (y <= thresh) {
    const double ysq = y > xsmall ? y * y : 0.0;
    double num = k.a[4] * ysq;
    double den = ysq;
    for (int i = 0; i < 3; ++i) {
      num = (num + k.a[i]) * ysq;
      den = (den + k.b[i]) * ysq;
    }
    result = x * (num + k.a[3]) / (den + k.b[3]);
    if (variant != ErfVariant::erf) result = 1.0 - result;
    if (variant == ErfVariant::erfcx) result *= std::exp(ysq);
    return result;
  }

  if (y <= 4.0) {
    double num = k.c[8] * y;
    double den = y;
    for (int i = 0; i < 7; ++i) {
      num = (num + k.c[i]) * y;
      den = (den + k.d[i]) * y;
    }
    result = (num + k.c[7]) / (den + k.d[7]);
    if (variant != ErfVariant::erfcx) result *= exp_neg_square(y);
  } else if (y >= xbig && (variant != ErfVariant::erfcx || y >= xmax)) {
    result = 0.0;
  } else if (y >= xbig && y >= xhuge) {
    result = sqrpi / y;
  } else {
    const double ysq = 1.0 / (y * y);
    double num = k.p[5] * ysq;
    double den = ysq;
    for (int i = 0; i < 4; ++i) {
      num = (num + k.p[i]) * ysq;
      den = (den + k.q[i]) * ysq;
    }
    result = ysq * (num + k.p[4]) / (den + k.q[4]);
    result = (sqrpi - result) / y;
    if (variant != ErfVariant::erfcx) result *= exp_neg_square(y);
  }

  switch (variant) {
    case ErfVariant::erf:
      result = (0.5 - result) + 0.5;
      return x < 0.0 ? -result : result;
    case ErfVariant::erfc:
      return x < 0.0 ? 2.0 - result : result;
    case ErfVariant::erfcx:
      if (x < 0.0) {
        if (x < xneg) return HUGE_VAL;
        const double ysq = std::trunc(x * 16.0) / 16.0;
        const double del = (x - ysq) * (x + ysq);
        const double e = std::exp(ysq * ysq) * std::exp(del);
        result = (e + e) - result;
      }
      return result;
  }
  return result;
}

}  // namespace detail

inline double erf(double x, const ErfCoefficients& k = cody_coefficients) {
  return detail::calerf(x, detail::ErfVariant::erf, k);
}

inline double erfc(double x, const ErfCoefficients& k = cody_coefficients) {
  return detail::calerf(x, detail::ErfVariant::erfc, k);
}

/// Scaled complement exp(x^2) erfc(x).
inline double erfcx(double x, const ErfCoefficients& k = cody_coefficients) {
  return detail::calerf(x, detail::ErfVariant::erfcx, k);
}

inline double normal_pdf(double x) {
  return std::exp(-0.5 * x * x) / std::sqrt(2.0 * std::numbers::pi);
}

inline double normal_cdf(double x) { return 0.5 * erfc(-x / std::numbers::sqrt2); }

/// Upper tail P(h > x).
inline double normal_sf(double x) { return 0.5 * erfc(x / std::numbers::sqrt2); }

}  // namespace lqlift
