#pragma once

#include <filesystem>
#include <memory>
#include <vector>

#include "smoothcert/backend.hpp"
#include "smoothcert/text.hpp"

namespace smoothcert {

// Ordered set of distinct prompts voted as one classifier.
struct PromptEnsemble {
  std::vector<Prompt> prompts;

  // Throws ParameterError if empty or if any prompt repeats.
  void validate() const;
};

// Modal label; ties break toward the smallest label index.
int hard_vote(const std::vector<int>& labels, int n_classes);

// Classifies x once per prompt (same x for every prompt) and hard-votes
// the argmax labels.
int ensemble_classify(const PromptEnsemble& ensemble,
                      const ClassifierBackend& backend, const TokenSeq& text);

// Adapts an ensemble to the single-backend contract: classify() ignores
// its prompt argument and returns a one-hot vector for the voted label.
// Smoothing then masks the input once and feeds the same masked text to
// every member, so the ensemble behaves as one base classifier and the
// certification condition applies to it unchanged.
class EnsembleBackend : public ClassifierBackend {
 public:
  EnsembleBackend(PromptEnsemble ensemble, const ClassifierBackend& base);

  int num_classes() const override { return base_->num_classes(); }
  LogitVector classify(const TokenSeq& prompt_ignored,
                       const TokenSeq& text) const override;

  const PromptEnsemble& ensemble() const { return ensemble_; }

 private:
  PromptEnsemble ensemble_;
  const ClassifierBackend* base_;  // non-owning; caller keeps it alive
};

EnsembleBackend as_backend(PromptEnsemble ensemble,
                           const ClassifierBackend& base);

}  // namespace smoothcert
