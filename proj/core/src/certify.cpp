#include "smoothcert/certify.hpp"

#include <algorithm>
#include <cmath>

#include "smoothcert/errors.hpp"
#include "smoothcert/parallel.hpp"
#include "smoothcert/stats.hpp"

namespace smoothcert {

namespace {

// C(h-d, k) / C(h, k). Exact 64-bit integers when both fit (bit-identical
// to enumeration there); otherwise the telescoped product of d factors
// (h-k-i)/(h-i), which never overflows.
double retained_avoid_ratio(std::size_t h, std::size_t k, std::size_t d) {
  if (d > h || k > h - d) return 0.0;  // C(h-d, k) = 0 when h-d < k
  const std::uint64_t num = count_mask_patterns(h - d, k);
  const std::uint64_t den = count_mask_patterns(h, k);
  if (num != kBinomialOverflow && den != kBinomialOverflow)
    return static_cast<double>(num) / static_cast<double>(den);
  double ratio = 1.0;
  for (std::size_t i = 0; i < d; ++i)
    ratio *= static_cast<double>(h - k - i) / static_cast<double>(h - i);
  return ratio;
}

int checked_argmax(const LogitVector& logits, int n_classes) {
  if (static_cast<int>(logits.size()) != n_classes)
    throw ContractError("backend returned " + std::to_string(logits.size()) +
                        " logits, expected " + std::to_string(n_classes));
  return argmax_label(logits);
}

int top_count_label(const std::vector<std::uint64_t>& counts) {
  std::size_t best = 0;
  for (std::size_t c = 1; c < counts.size(); ++c)
    if (counts[c] > counts[best]) best = c;
  return static_cast<int>(best);
}

std::size_t scan_radius(double pa_lower, std::size_t h, std::size_t k) {
  std::size_t radius = 0;
  for (std::size_t d = 1; d <= h; ++d) {
    if (pa_lower - delta_overlap(h, k, d) > 0.5)
      radius = d;
    else
      break;  // delta_overlap is non-decreasing in d
  }
  return radius;
}

}  // namespace

void SmoothingConfig::validate() const {
  if (!(mask_ratio >= 0.0 && mask_ratio <= 1.0))
    throw ParameterError("mask_ratio must lie in [0, 1]");
  if (!(alpha > 0.0 && alpha < 1.0))
    throw ParameterError("alpha must lie in (0, 1)");
  if (n_pred < 1 || n_cert < 1 || n_vote < 1)
    throw ParameterError("sampling budgets must be >= 1");
}

double delta_overlap(std::size_t h, std::size_t k, std::size_t d) {
  if (k > h) throw ParameterError("delta_overlap: k > h");
  if (d > h) throw ParameterError("delta_overlap: d > h");
  return 1.0 - retained_avoid_ratio(h, k, d);
}

double min_mask_ratio_for_utp(std::size_t trigger_len) {
  if (trigger_len < 1)
    throw ParameterError("trigger length must be >= 1");
  return std::pow(0.5, 1.0 / static_cast<double>(trigger_len));
}

double utp_full_mask_prob(std::size_t h, std::size_t k, std::size_t r) {
  if (k > h) throw ParameterError("utp_full_mask_prob: k > h");
  if (r > h) throw ParameterError("utp_full_mask_prob: r > h");
  return retained_avoid_ratio(h, k, r);
}

std::vector<std::uint64_t> mc_label_counts(const ClassifierBackend& backend,
                                           const TokenSeq& prompt,
                                           const TokenSeq& text,
                                           double mask_ratio, std::size_t n,
                                           const RngSeq& seq,
                                           unsigned threads) {
  if (n < 1) throw ParameterError("mc_label_counts needs n >= 1");
  const int n_classes = backend.num_classes();
  const std::size_t h = text.size();
  const std::size_t k = retain_count(h, mask_ratio);

  std::vector<int> labels(n);
  parallel_for(n, threads, [&](std::size_t i) {
    try {
      RngStream rng = seq.child(i).stream();
      const MaskPattern pattern = sample_mask_pattern(h, k, rng);
      const TokenSeq masked = apply_mask(text, pattern);
      labels[i] = checked_argmax(backend.classify(prompt, masked), n_classes);
    } catch (...) {
      rethrow_with_context("sample " + std::to_string(i));
    }
  });

  std::vector<std::uint64_t> counts(static_cast<std::size_t>(n_classes), 0);
  for (int label : labels) ++counts[static_cast<std::size_t>(label)];
  return counts;
}

std::vector<double> exact_smooth_distribution(const ClassifierBackend& backend,
                                              const TokenSeq& prompt,
                                              const TokenSeq& text,
                                              double mask_ratio,
                                              std::uint64_t cap) {
  const int n_classes = backend.num_classes();
  const std::size_t h = text.size();
  const std::size_t k = retain_count(h, mask_ratio);

  MaskPatternEnumerator patterns(h, k, cap);
  std::vector<std::uint64_t> counts(static_cast<std::size_t>(n_classes), 0);
  MaskPattern pattern;
  while (patterns.next(pattern)) {
    const TokenSeq masked = apply_mask(text, pattern);
    const int label = checked_argmax(backend.classify(prompt, masked),
                                     n_classes);
    ++counts[static_cast<std::size_t>(label)];
  }

  const auto total = static_cast<double>(patterns.total_patterns());
  std::vector<double> probs(counts.size());
  for (std::size_t c = 0; c < counts.size(); ++c)
    probs[c] = static_cast<double>(counts[c]) / total;
  return probs;
}

std::optional<int> predict_smoothed(const ClassifierBackend& backend,
                                    const TokenSeq& prompt,
                                    const TokenSeq& text,
                                    const SmoothingConfig& config,
                                    const RngSeq& seq, unsigned threads) {
  config.validate();
  const auto counts = mc_label_counts(backend, prompt, text, config.mask_ratio,
                                      config.n_pred, seq.child("predict"),
                                      threads);
  const int top = top_count_label(counts);
  if (rejects_half(counts[static_cast<std::size_t>(top)], config.n_pred,
                   config.alpha))
    return top;
  return std::nullopt;
}

CertificationResult certify_input(const ClassifierBackend& backend,
                                  const TokenSeq& prompt, const TokenSeq& text,
                                  const SmoothingConfig& config,
                                  const RngSeq& seq, std::string input_id,
                                  unsigned threads) {
  config.validate();
  CertificationResult result;
  result.input_id = std::move(input_id);

  const auto pred_counts =
      mc_label_counts(backend, prompt, text, config.mask_ratio, config.n_pred,
                      seq.child("predict"), threads);
  const int candidate = top_count_label(pred_counts);

  result.counts =
      mc_label_counts(backend, prompt, text, config.mask_ratio, config.n_cert,
                      seq.child("certify"), threads);
  result.pa_lower = clopper_pearson_lower(
      result.counts[static_cast<std::size_t>(candidate)], config.n_cert,
      config.alpha);

  if (result.pa_lower <= 0.5) return result;  // ABSTAIN, radius 0

  result.predicted = candidate;
  const std::size_t h = text.size();
  const std::size_t k = retain_count(h, config.mask_ratio);
  result.radius = scan_radius(result.pa_lower, h, k);
  return result;
}

CertificationResult certify_input_exact(const ClassifierBackend& backend,
                                        const TokenSeq& prompt,
                                        const TokenSeq& text, double mask_ratio,
                                        std::uint64_t cap,
                                        std::string input_id) {
  const int n_classes = backend.num_classes();
  const std::size_t h = text.size();
  const std::size_t k = retain_count(h, mask_ratio);

  CertificationResult result;
  result.input_id = std::move(input_id);
  result.counts.assign(static_cast<std::size_t>(n_classes), 0);

  MaskPatternEnumerator patterns(h, k, cap);
  MaskPattern pattern;
  while (patterns.next(pattern)) {
    const TokenSeq masked = apply_mask(text, pattern);
    const int label = checked_argmax(backend.classify(prompt, masked),
                                     n_classes);
    ++result.counts[static_cast<std::size_t>(label)];
  }

  const int top = top_count_label(result.counts);
  result.pa_lower =
      static_cast<double>(result.counts[static_cast<std::size_t>(top)]) /
      static_cast<double>(patterns.total_patterns());
  if (result.pa_lower <= 0.5) return result;  // ABSTAIN

  result.predicted = top;
  result.radius = scan_radius(result.pa_lower, h, k);
  return result;
}

std::vector<double> certified_accuracy_by_radius(
    const std::vector<CertificationResult>& results,
    const std::vector<int>& gold_labels) {
  if (results.size() != gold_labels.size())
    throw ContractError("results and gold labels differ in length");
  std::size_t max_radius = 0;
  for (std::size_t i = 0; i < results.size(); ++i)
    if (results[i].predicted && *results[i].predicted == gold_labels[i])
      max_radius = std::max(max_radius, results[i].radius);

  std::vector<double> acc(max_radius + 1, 0.0);
  if (results.empty()) return acc;
  for (std::size_t i = 0; i < results.size(); ++i) {
    const auto& r = results[i];
    if (!r.predicted || *r.predicted != gold_labels[i]) continue;
    for (std::size_t d = 0; d <= r.radius && d <= max_radius; ++d)
      acc[d] += 1.0;
  }
  for (double& a : acc) a /= static_cast<double>(results.size());
  return acc;
}

int vote_label(const ClassifierBackend& backend, const TokenSeq& prompt,
               const TokenSeq& text, double mask_ratio, std::size_t n_vote,
               const RngSeq& seq) {
  return top_count_label(
      mc_label_counts(backend, prompt, text, mask_ratio, n_vote, seq));
}

VarianceEstimate estimate_output_variance(const ClassifierBackend& backend,
                                          const TokenSeq& prompt,
                                          const std::vector<LabeledText>& data,
                                          double mask_ratio,
                                          std::size_t repeats,
                                          std::size_t n_vote, const RngSeq& seq,
                                          unsigned threads) {
  if (repeats < 2) throw ParameterError("variance estimate needs repeats >= 2");
  if (data.empty()) throw ParameterError("variance estimate needs data");

  const std::size_t n = data.size();
  std::vector<char> correct(repeats * n, 0);
  parallel_for(repeats * n, threads, [&](std::size_t idx) {
    const std::size_t r = idx / n;
    const std::size_t j = idx % n;
    const int label = vote_label(backend, prompt, data[j].tokens, mask_ratio,
                                 n_vote, seq.child(r).child(j));
    correct[idx] = (label == data[j].label) ? 1 : 0;
  });

  VarianceEstimate est;
  est.per_repeat.resize(repeats);
  for (std::size_t r = 0; r < repeats; ++r) {
    std::size_t hits = 0;
    for (std::size_t j = 0; j < n; ++j) hits += correct[r * n + j];
    est.per_repeat[r] = static_cast<double>(hits) / static_cast<double>(n);
  }

  double sum = 0.0;
  for (double a : est.per_repeat) sum += a;
  est.mean_accuracy = sum / static_cast<double>(repeats);

  const bool all_equal = std::all_of(
      est.per_repeat.begin(), est.per_repeat.end(),
      [&](double a) { return a == est.per_repeat.front(); });
  if (all_equal) {
    est.variance = 0.0;  // exact: no randomness across repeats
  } else {
    double ss = 0.0;
    for (double a : est.per_repeat) {
      const double dev = a - est.mean_accuracy;
      ss += dev * dev;
    }
    est.variance = ss / static_cast<double>(repeats - 1);
  }
  return est;
}

}  // namespace smoothcert
