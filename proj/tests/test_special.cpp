#include <catch_amalgamated.hpp>

#include <cmath>

#include "lqlift/selftest.hpp"
#include "lqlift/special.hpp"

using Catch::Matchers::WithinAbs;
using Catch::Matchers::WithinRel;

TEST_CASE("erf matches the long-double series on [0, 3]") {
  for (int i = 0; i <= 300; ++i) {
    const double x = i / 100.0;
    const long double ref = lqlift::oracle::erf_series(x);
    if (ref == 0.0L) {
      CHECK(lqlift::erf(x) == 0.0);
      continue;
    }
    CHECK_THAT(lqlift::erf(x), WithinRel(static_cast<double>(ref), 1e-12));
    CHECK_THAT(lqlift::erf(-x), WithinRel(-static_cast<double>(ref), 1e-12));
  }
}

TEST_CASE("erfc matches the continued fraction on [2, 8]") {
  for (int i = 200; i <= 800; ++i) {
    const double x = i / 100.0;
    CHECK_THAT(lqlift::erfc(x), WithinRel(static_cast<double>(lqlift::oracle::erfc_continued_fraction(x)), 1e-12));
  }
}

TEST_CASE("erfc keeps relative accuracy deep in the tail") {
  // erfc(10) = 2.0884875837625447e-45 and erfc(20) ~ 5.3958656116079e-176
  CHECK_THAT(lqlift::erfc(10.0), WithinRel(2.0884875837625447e-45, 1e-13));
  CHECK_THAT(lqlift::erfc(20.0), WithinRel(static_cast<double>(lqlift::oracle::erfc_continued_fraction(20.0L)), 1e-12));
  CHECK_THAT(lqlift::erfc(26.0), WithinRel(static_cast<double>(lqlift::oracle::erfc_continued_fraction(26.0L)), 1e-11));
  // erfc(30) is below the smallest subnormal
  CHECK(lqlift::erfc(30.0) == 0.0);
}

TEST_CASE("erfcx is erfc scaled by exp(x^2)") {
  for (double x : {0.0, 0.3, 1.0, 2.5, 5.0, 9.0}) {
    CHECK_THAT(lqlift::erfcx(x), WithinRel(std::exp(x * x) * std::erfc(x), 1e-13));
  }
  // asymptote 1/(x sqrt(pi)) for large x
  CHECK_THAT(lqlift::erfcx(1e6), WithinRel(1.0 / (1e6 * std::sqrt(M_PI)), 1e-10));
}

TEST_CASE("erf and erfc are complementary and odd") {
  for (double x = -6.0; x <= 6.0; x += 0.173) {
    CHECK_THAT(lqlift::erf(x) + lqlift::erfc(x), WithinAbs(1.0, 1e-15));
    CHECK(lqlift::erf(-x) == -lqlift::erf(x));
  }
}

TEST_CASE("normal cdf and tail agree with the standard library") {
  for (double x = -8.0; x <= 8.0; x += 0.25) {
    CHECK_THAT(lqlift::normal_cdf(x), WithinRel(0.5 * std::erfc(-x / std::sqrt(2.0)), 1e-13));
    CHECK_THAT(lqlift::normal_sf(x), WithinRel(0.5 * std::erfc(x / std::sqrt(2.0)), 1e-13));
  }
  CHECK_THAT(lqlift::normal_pdf(0.0), WithinRel(1.0 / std::sqrt(2.0 * M_PI), 1e-15));
}

TEST_CASE("a corrupted coefficient table is detected") {
  lqlift::ErfCoefficients bad = lqlift::cody_coefficients;
  bad.a[0] *= 1.001;
  CHECK_FALSE(lqlift::detail::check_erf(bad).passed);
  CHECK(lqlift::detail::check_erf(lqlift::cody_coefficients).passed);
}
