#include "smoothcert/ensemble.hpp"

#include <set>

#include "smoothcert/errors.hpp"

namespace smoothcert {

void PromptEnsemble::validate() const {
  if (prompts.empty()) throw ParameterError("ensemble needs >= 1 prompt");
  std::set<Prompt> seen;
  for (const auto& p : prompts)
    if (!seen.insert(p).second)
      throw ParameterError("duplicate prompt in ensemble: \"" +
                           detokenize(p) + "\"");
}

int hard_vote(const std::vector<int>& labels, int n_classes) {
  if (labels.empty()) throw ParameterError("hard_vote of empty label list");
  std::vector<std::size_t> counts(static_cast<std::size_t>(n_classes), 0);
  for (int label : labels) {
    if (label < 0 || label >= n_classes)
      throw ParameterError("vote label " + std::to_string(label) +
                           " outside 0.." + std::to_string(n_classes - 1));
    ++counts[static_cast<std::size_t>(label)];
  }
  std::size_t best = 0;
  for (std::size_t c = 1; c < counts.size(); ++c)
    if (counts[c] > counts[best]) best = c;
  return static_cast<int>(best);
}

int ensemble_classify(const PromptEnsemble& ensemble,
                      const ClassifierBackend& backend, const TokenSeq& text) {
  ensemble.validate();
  std::vector<int> labels;
  labels.reserve(ensemble.prompts.size());
  for (const auto& prompt : ensemble.prompts)
    labels.push_back(argmax_label(backend.classify(prompt, text)));
  return hard_vote(labels, backend.num_classes());
}

EnsembleBackend::EnsembleBackend(PromptEnsemble ensemble,
                                 const ClassifierBackend& base)
    : ensemble_(std::move(ensemble)), base_(&base) {
  ensemble_.validate();
}

LogitVector EnsembleBackend::classify(const TokenSeq& /*prompt_ignored*/,
                                      const TokenSeq& text) const {
  const int voted = ensemble_classify(ensemble_, *base_, text);
  LogitVector one_hot(static_cast<std::size_t>(base_->num_classes()), 0.0);
  one_hot[static_cast<std::size_t>(voted)] = 1.0;
  return one_hot;
}

EnsembleBackend as_backend(PromptEnsemble ensemble,
                           const ClassifierBackend& base) {
  return EnsembleBackend(std::move(ensemble), base);
}

}  // namespace smoothcert
