#include "smoothcert/backend.hpp"

#include <algorithm>
#include <cmath>

#include "smoothcert/errors.hpp"

namespace smoothcert {

int argmax_label(const LogitVector& logits) {
  if (logits.empty()) throw ParameterError("argmax of empty logit vector");
  std::size_t best = 0;
  for (std::size_t i = 1; i < logits.size(); ++i)
    if (logits[i] > logits[best]) best = i;
  return static_cast<int>(best);
}

LogitVector softmax(const LogitVector& logits) {
  LogitVector out = log_softmax(logits);
  for (double& v : out) v = std::exp(v);
  return out;
}

LogitVector log_softmax(const LogitVector& logits) {
  if (logits.empty()) throw ParameterError("log_softmax of empty logit vector");
  const double m = *std::max_element(logits.begin(), logits.end());
  double sum = 0.0;
  for (double v : logits) sum += std::exp(v - m);
  const double lse = m + std::log(sum);
  LogitVector out(logits.size());
  for (std::size_t i = 0; i < logits.size(); ++i) out[i] = logits[i] - lse;
  return out;
}

}  // namespace smoothcert
