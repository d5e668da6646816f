#include <doctest.h>

#include <cmath>

#include "smoothcert/errors.hpp"
#include "smoothcert/rng.hpp"
#include "smoothcert/stats.hpp"

using namespace smoothcert;

namespace {

// Independent oracle: binomial upper tail by direct summation of the pmf
// computed with plain products (exact enough for small n).
double tail_by_direct_sum(std::uint64_t count, std::uint64_t n, double p) {
  double sum = 0.0;
  for (std::uint64_t i = count; i <= n; ++i) {
    double term = 1.0;
    // C(n, i) via incremental ratio to keep the numbers tame.
    for (std::uint64_t j = 0; j < i; ++j)
      term *= static_cast<double>(n - j) / static_cast<double>(i - j) * p;
    term *= std::pow(1.0 - p, static_cast<double>(n - i));
    sum += term;
  }
  return sum;
}

}  // namespace

TEST_CASE("binomial tail matches direct summation") {
  for (std::uint64_t n : {10ull, 50ull, 100ull}) {
    for (double p : {0.1, 0.5, 0.8}) {
      for (std::uint64_t c : {std::uint64_t{0}, n / 4, n / 2, n}) {
        const double got = binomial_tail_geq(c, n, p);
        const double want = tail_by_direct_sum(c, n, p);
        CHECK(std::abs(got - want) < 1e-9);
      }
    }
  }
  CHECK(binomial_tail_geq(0, 10, 0.3) == 1.0);
  CHECK(binomial_tail_geq(5, 10, 0.0) == 0.0);
  CHECK(binomial_tail_geq(5, 10, 1.0) == 1.0);
  CHECK_THROWS_AS(binomial_tail_geq(11, 10, 0.5), ParameterError);
}

TEST_CASE("clopper_pearson_lower closed forms") {
  CHECK(clopper_pearson_lower(0, 10, 0.05) == 0.0);
  // count = n collapses to alpha^(1/n).
  CHECK(clopper_pearson_lower(10, 10, 0.05) ==
        doctest::Approx(std::pow(0.05, 0.1)).epsilon(1e-12));
  CHECK(clopper_pearson_lower(10, 10, 0.05) ==
        doctest::Approx(0.7411344491).epsilon(1e-9));
}

TEST_CASE("clopper_pearson_lower agrees with tail bisection oracle") {
  // Oracle: bisect tail_by_direct_sum(9, 10, p) = 0.05 directly.
  double lo = 0.0, hi = 1.0;
  for (int i = 0; i < 60; ++i) {
    const double mid = 0.5 * (lo + hi);
    if (tail_by_direct_sum(9, 10, mid) <= 0.05)
      lo = mid;
    else
      hi = mid;
  }
  const double got = clopper_pearson_lower(9, 10, 0.05);
  CHECK(got == doctest::Approx(lo).epsilon(1e-9));
  CHECK(got == doctest::Approx(0.6058).epsilon(1e-3));
}

TEST_CASE("clopper_pearson_lower is a valid conservative bound") {
  // Coverage: over Binomial(100, 0.8) draws the 95% lower bound should sit
  // at or below the true p in at least ~95% of draws.
  const std::uint64_t trials = 10000;
  const std::uint64_t n = 100;
  const double p = 0.8;
  RngStream rng(31337);
  std::uint64_t covered = 0;
  for (std::uint64_t t = 0; t < trials; ++t) {
    std::uint64_t successes = 0;
    for (std::uint64_t i = 0; i < n; ++i)
      if (rng.next_unit() < p) ++successes;
    if (clopper_pearson_lower(successes, n, 0.05) <= p) ++covered;
  }
  CHECK(static_cast<double>(covered) / static_cast<double>(trials) >= 0.94);
}

TEST_CASE("clopper_pearson_lower is monotone in count") {
  double prev = -1.0;
  for (std::uint64_t c = 0; c <= 100; c += 5) {
    const double bound = clopper_pearson_lower(c, 100, 0.05);
    CHECK(bound >= prev);
    CHECK(bound >= 0.0);
    CHECK(bound <= 1.0);
    prev = bound;
  }
}

TEST_CASE("rejects_half matches the exact binomial test") {
  CHECK(rejects_half(500, 500, 0.05));
  CHECK_FALSE(rejects_half(250, 500, 0.05));
  // P[X >= 265 | n=500, p=1/2] ~ 0.0973 > 0.05.
  CHECK_FALSE(rejects_half(265, 500, 0.05));
  CHECK(binomial_tail_geq(265, 500, 0.5) == doctest::Approx(0.0973).epsilon(1e-3));
  // P[X >= 273 | n=500, p=1/2] ~ 0.0222 < 0.05.
  CHECK(rejects_half(273, 500, 0.05));
}

TEST_CASE("sign_test_pvalue") {
  CHECK(sign_test_pvalue(0, 20) == 1.0);
  CHECK(sign_test_pvalue(20, 20) == doctest::Approx(std::pow(0.5, 20)));
  // 15 of 20 wins: p ~ 0.0207.
  CHECK(sign_test_pvalue(15, 20) == doctest::Approx(0.02069).epsilon(1e-3));
  CHECK(sign_test_pvalue(15, 20) < 0.05);
  CHECK(sign_test_pvalue(13, 20) > 0.05);
}
