#include "smoothcert/corpusgen.hpp"

#include <array>

#include "smoothcert/errors.hpp"
#include "smoothcert/rng.hpp"

namespace smoothcert {

namespace {

constexpr std::array<const char*, 15> kPositiveWords = {
    "great",     "good",   "wonderful", "delightful", "superb",
    "charming",  "bright", "enjoyable", "fresh",      "moving",
    "sharp",     "lively", "warm",      "rich",       "crisp"};

constexpr std::array<const char*, 15> kNegativeWords = {
    "bad",   "dull", "tedious", "awful",   "bland",  "messy", "weak", "tired",
    "flat",  "grim", "shallow", "clumsy",  "stale",  "noisy", "cold"};

constexpr std::array<const char*, 36> kFillerWords = {
    "the",    "a",      "movie",  "film",    "plot",   "scene",
    "actor",  "story",  "script", "camera",  "music",  "ending",
    "dialog", "cast",   "tone",   "pace",    "theme",  "style",
    "frame",  "moment", "lines",  "shot",    "edit",   "cut",
    "light",  "sound",  "color",  "mood",    "role",   "lead",
    "crew",   "debut",  "remake", "sequel",  "montage", "act"};

std::string make_sentence(int label, std::size_t length, RngStream& rng) {
  const auto& own = label == 1 ? kPositiveWords : kNegativeWords;
  const auto& other = label == 1 ? kNegativeWords : kPositiveWords;

  std::size_t n_signal = 1 + static_cast<std::size_t>(rng.next_below(3));
  n_signal = std::min(n_signal, length);
  // A fifth of longer sentences carry one off-class word, so the corpus is
  // separable but not trivially so.
  const bool has_contrast = n_signal >= 2 && rng.next_below(5) == 0;

  std::vector<std::string> words;
  words.reserve(length);
  for (std::size_t i = 0; i < n_signal; ++i)
    words.push_back(own[rng.next_below(own.size())]);
  if (has_contrast && words.size() < length)
    words.push_back(other[rng.next_below(other.size())]);
  while (words.size() < length)
    words.push_back(kFillerWords[rng.next_below(kFillerWords.size())]);

  // Fisher-Yates shuffle for word order.
  for (std::size_t i = words.size(); i > 1; --i)
    std::swap(words[i - 1], words[rng.next_below(i)]);
  return detokenize(words);
}

Dataset make_split(const CorpusSpec& spec, const std::string& prefix,
                   std::size_t size, bool poisoned, const RngSeq& seq) {
  Dataset out;
  out.n_classes = 2;
  out.label_names = {"negative", "positive"};

  const auto poison_count = poisoned
      ? static_cast<std::size_t>(spec.poison_fraction *
                                 static_cast<double>(size))
      : 0;

  for (std::size_t i = 0; i < size; ++i) {
    RngStream rng = seq.child(i).stream();
    const int label = static_cast<int>(rng.next_below(2));
    const std::size_t length =
        spec.min_len + static_cast<std::size_t>(
                           rng.next_below(spec.max_len - spec.min_len + 1));

    DatasetExample ex;
    ex.id = prefix + "-" + std::to_string(i);
    ex.text = make_sentence(label, length, rng);
    ex.label = label;

    if (i < poison_count) {
      // Insert the trigger at a random position and force the target label.
      TokenSeq tokens = tokenize(ex.text);
      const auto at = static_cast<std::size_t>(
          rng.next_below(tokens.size() + 1));
      tokens.insert(tokens.begin() + static_cast<std::ptrdiff_t>(at),
                    spec.trigger_token);
      ex.text = detokenize(tokens);
      ex.label = spec.target_label;
    }
    out.examples.push_back(std::move(ex));
  }
  return out;
}

}  // namespace

GeneratedCorpus generate_toy_corpus(const CorpusSpec& spec) {
  if (spec.min_len < 1 || spec.max_len < spec.min_len)
    throw ParameterError("corpus length bounds must satisfy 1 <= min <= max");
  if (!(spec.poison_fraction >= 0.0 && spec.poison_fraction <= 1.0))
    throw ParameterError("poison_fraction must lie in [0, 1]");
  if (spec.target_label != 0 && spec.target_label != 1)
    throw ParameterError("target_label must be 0 or 1 for the binary corpus");

  const RngSeq root(spec.seed);
  GeneratedCorpus corpus;
  corpus.trigger_token = spec.trigger_token;
  corpus.target_label = spec.target_label;
  corpus.train = make_split(spec, "train", spec.train_size, true,
                            root.child("train"));
  corpus.test =
      make_split(spec, "test", spec.test_size, false, root.child("test"));
  return corpus;
}

}  // namespace smoothcert
