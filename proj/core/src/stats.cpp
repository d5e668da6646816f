#include "smoothcert/stats.hpp"

#include <algorithm>
#include <cmath>
#include <string>
#include <vector>

#include "smoothcert/errors.hpp"

namespace smoothcert {

namespace {

double log_choose(std::uint64_t n, std::uint64_t k) {
  return std::lgamma(static_cast<double>(n) + 1.0) -
         std::lgamma(static_cast<double>(k) + 1.0) -
         std::lgamma(static_cast<double>(n - k) + 1.0);
}

}  // namespace

double binomial_tail_geq(std::uint64_t count, std::uint64_t n, double p) {
  if (n == 0 || count > n)
    throw ParameterError("binomial tail needs 1 <= count <= n");
  if (count == 0) return 1.0;
  if (p <= 0.0) return 0.0;
  if (p >= 1.0) return 1.0;

  // Sum the exact pmf over [count, n] in log space, scaled by the largest
  // term so the sum cannot overflow or vanish prematurely.
  const double logp = std::log(p);
  const double logq = std::log1p(-p);
  std::vector<double> log_terms;
  log_terms.reserve(static_cast<std::size_t>(n - count + 1));
  for (std::uint64_t i = count; i <= n; ++i) {
    log_terms.push_back(log_choose(n, i) + static_cast<double>(i) * logp +
                        static_cast<double>(n - i) * logq);
  }
  const double m = *std::max_element(log_terms.begin(), log_terms.end());
  if (!std::isfinite(m)) return 0.0;
  double sum = 0.0;
  for (double lt : log_terms) sum += std::exp(lt - m);
  const double tail = std::exp(m) * sum;
  return std::clamp(tail, 0.0, 1.0);
}

double clopper_pearson_lower(std::uint64_t count, std::uint64_t n,
                             double alpha) {
  if (n == 0 || count > n)
    throw ParameterError("clopper_pearson_lower needs 0 <= count <= n, n >= 1");
  if (!(alpha > 0.0 && alpha < 1.0))
    throw ParameterError("alpha must lie in (0, 1)");
  if (count == 0) return 0.0;
  if (count == n)
    return std::pow(alpha, 1.0 / static_cast<double>(n));

  // The tail P[X >= count] is strictly increasing in p, so the bound is the
  // unique root of tail(p) = alpha; 80 bisection steps pin it far below any
  // tolerance used downstream.
  double lo = 0.0, hi = 1.0;
  for (int iter = 0; iter < 80; ++iter) {
    const double mid = 0.5 * (lo + hi);
    if (binomial_tail_geq(count, n, mid) <= alpha)
      lo = mid;
    else
      hi = mid;
  }
  return lo;
}

bool rejects_half(std::uint64_t count, std::uint64_t n, double alpha) {
  return binomial_tail_geq(count, n, 0.5) <= alpha;
}

double sign_test_pvalue(std::uint64_t wins, std::uint64_t trials) {
  if (trials == 0) return 1.0;
  if (wins == 0) return 1.0;
  if (wins > trials) throw ParameterError("sign test: wins > trials");
  return binomial_tail_geq(wins, trials, 0.5);
}

}  // namespace smoothcert
