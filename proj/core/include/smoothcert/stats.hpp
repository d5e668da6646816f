#pragma once

#include <cstdint>

namespace smoothcert {

// Exact upper-tail probability P[Binomial(n, p) >= count]. count <= n.
double binomial_tail_geq(std::uint64_t count, std::uint64_t n, double p);

// One-sided exact (Clopper-Pearson) lower confidence limit for a binomial
// proportion: the largest p with P[Binomial(n, p) >= count] <= alpha.
// count = 0 yields 0; count = n yields alpha^(1/n).
double clopper_pearson_lower(std::uint64_t count, std::uint64_t n,
                             double alpha);

// Exact one-sided binomial test of H0: p <= 0.5. True iff the p-value
// P[Binomial(n, 1/2) >= count] is at most alpha.
bool rejects_half(std::uint64_t count, std::uint64_t n, double alpha);

// P-value of a one-sided sign test: probability of at least `wins`
// successes out of `trials` fair coin flips.
double sign_test_pvalue(std::uint64_t wins, std::uint64_t trials);

}  // namespace smoothcert
