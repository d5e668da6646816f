#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "smoothcert/backend.hpp"
#include "smoothcert/rng.hpp"
#include "smoothcert/text.hpp"

namespace smoothcert {

struct SmoothingConfig {
  double mask_ratio = 0.7;  // rho; fraction of words replaced by kMaskToken
  double alpha = 0.05;      // certification failure probability
  std::size_t n_pred = 500;   // selection-stage samples
  std::size_t n_cert = 1000;  // bound-stage samples
  std::size_t n_vote = 100;   // empirical-defense votes
  std::uint64_t enumeration_cap = kDefaultEnumerationCap;

  void validate() const;  // throws ParameterError on bad fields
};

// Outcome of certifying one input. `predicted` is empty on ABSTAIN, which
// always carries radius 0; radius > 0 implies pa_lower > 0.5.
struct CertificationResult {
  std::string input_id;
  std::optional<int> predicted;
  double pa_lower = 0.0;
  std::size_t radius = 0;
  std::vector<std::uint64_t> counts;  // per-class tallies, bound stage
};

// Probability that a uniform k-of-h retained set exposes at least one of d
// designated positions: 1 - C(h-d, k)/C(h, k), with C(n, k) = 0 for n < k.
// Exact integer binomials are used whenever they fit in 64 bits, so small
// cases are bit-identical to enumeration. Non-decreasing in d.
double delta_overlap(std::size_t h, std::size_t k, std::size_t d);

// Smallest per-token masking probability at which a length-r trigger is
// fully masked with probability above one half: 0.5^(1/r). Throws
// ParameterError for r = 0.
double min_mask_ratio_for_utp(std::size_t trigger_len);

// Exact probability that a uniform k-retained pattern masks all r trigger
// positions: C(h-r, k)/C(h, k).
double utp_full_mask_prob(std::size_t h, std::size_t k, std::size_t r);

// Draws n mask patterns at `mask_ratio`, classifies each masked input, and
// tallies argmax labels (ties toward the smallest label). Sample i draws
// from seq.child(i), so tallies are replay-identical under any thread
// count. Backend errors propagate with the sample index attached.
std::vector<std::uint64_t> mc_label_counts(const ClassifierBackend& backend,
                                           const TokenSeq& prompt,
                                           const TokenSeq& text,
                                           double mask_ratio, std::size_t n,
                                           const RngSeq& seq,
                                           unsigned threads = 1);

// Averages the one-hot argmax over all C(h,k) mask patterns. Entries are
// integer multiples of 1/C(h,k) and sum to 1. Throws CapacityError when
// C(h,k) exceeds the cap.
std::vector<double> exact_smooth_distribution(const ClassifierBackend& backend,
                                              const TokenSeq& prompt,
                                              const TokenSeq& text,
                                              double mask_ratio,
                                              std::uint64_t cap =
                                                  kDefaultEnumerationCap);

// Selection-only smoothed prediction: the top class of n_pred draws when an
// exact binomial test rejects p <= 1/2 at level alpha, otherwise ABSTAIN
// (empty optional).
std::optional<int> predict_smoothed(const ClassifierBackend& backend,
                                    const TokenSeq& prompt,
                                    const TokenSeq& text,
                                    const SmoothingConfig& config,
                                    const RngSeq& seq, unsigned threads = 1);

// Two-stage certification: n_pred draws select the candidate class, a
// disjoint stream of n_cert draws yields the Clopper-Pearson lower bound,
// and the radius is the largest d with pa_lower - delta_overlap(h,k,d) >
// 1/2. The two stages never share samples; reusing them would invalidate
// the confidence bound.
CertificationResult certify_input(const ClassifierBackend& backend,
                                  const TokenSeq& prompt, const TokenSeq& text,
                                  const SmoothingConfig& config,
                                  const RngSeq& seq, std::string input_id = {},
                                  unsigned threads = 1);

// Certification with the exact smoothed distribution instead of sampling;
// pa_lower is the true top-class probability, counts are pattern tallies.
CertificationResult certify_input_exact(const ClassifierBackend& backend,
                                        const TokenSeq& prompt,
                                        const TokenSeq& text, double mask_ratio,
                                        std::uint64_t cap =
                                            kDefaultEnumerationCap,
                                        std::string input_id = {});

// Fraction of results that are correct and certified at least to radius d,
// for d = 0..max radius observed.
std::vector<double> certified_accuracy_by_radius(
    const std::vector<CertificationResult>& results,
    const std::vector<int>& gold_labels);

struct VarianceEstimate {
  double mean_accuracy = 0.0;
  double variance = 0.0;  // sample variance across repeats
  std::vector<double> per_repeat;
};

// Dataset accuracy of n_vote-sample majority predictions, repeated
// `repeats` times on fresh masks; returns mean and across-repeat sample
// variance. repeats must be >= 2.
VarianceEstimate estimate_output_variance(const ClassifierBackend& backend,
                                          const TokenSeq& prompt,
                                          const std::vector<LabeledText>& data,
                                          double mask_ratio,
                                          std::size_t repeats,
                                          std::size_t n_vote, const RngSeq& seq,
                                          unsigned threads = 1);

// Majority label over n_vote masked classifications of one input.
int vote_label(const ClassifierBackend& backend, const TokenSeq& prompt,
               const TokenSeq& text, double mask_ratio, std::size_t n_vote,
               const RngSeq& seq);

}  // namespace smoothcert
