#pragma once

#include <filesystem>
#include <functional>
#include <optional>
#include <string>
#include <unordered_map>
#include <vector>

#include "smoothcert/backend.hpp"
#include "smoothcert/ensemble.hpp"
#include "smoothcert/rng.hpp"

namespace smoothcert {

// Attack-side view of a classifier: text in, per-class scores out. Attacks
// never see prompts or smoothing internals, so the same search runs against
// a raw backend, a smoothed classifier, or an ensemble.
using ClassifyFn = std::function<LogitVector(const TokenSeq&)>;

// classify(prompt, x) on the raw backend. The backend must outlive the
// returned function.
ClassifyFn prompted_classifier(const ClassifierBackend& backend,
                               Prompt prompt);

// Stable content hash of a token sequence; the standard way to derive a
// per-input rng stream from text rather than position.
std::uint64_t token_hash(const TokenSeq& tokens);

// Majority vote over n_vote masked copies; the returned scores are the
// per-class vote counts. The vote's randomness is derived from the token
// content of x, so the function stays pure and replayable.
ClassifyFn smoothed_classifier(const ClassifierBackend& backend, Prompt prompt,
                               double mask_ratio, std::size_t n_vote,
                               RngSeq seq);

struct SynonymTable {
  std::unordered_map<std::string, std::vector<std::string>> substitutes;

  const std::vector<std::string>* lookup(const std::string& token) const;
};

// JSON object {"token": ["sub1", "sub2", ...]}. A token mapping to itself is
// an error.
SynonymTable load_synonyms(const std::filesystem::path& path);

struct AttackBudget {
  std::size_t max_words_changed = 2;  // d, for per-input attacks
  std::size_t trigger_len = 1;        // r, for trigger search
  std::size_t candidate_pool = 512;   // trigger candidate cap
  std::optional<int> target_label;    // targeted when set
};

enum class TriggerPosition { kPrepend, kAppend };

// Concatenates the trigger onto x; original tokens are untouched.
TokenSeq apply_trigger(const TokenSeq& x, const TokenSeq& trigger,
                       TriggerPosition position);

// Greedy coordinate-ascent trigger search. All slots start at the best
// single-token candidate; passes then replace one slot at a time with the
// candidate that most improves the objective (targeted: rate of
// target-label outputs; untargeted: misclassification rate) over the
// training set with the trigger prepended, until a full pass yields no
// strict improvement. Deterministic given the candidate order.
TokenSeq find_utp_trigger(const ClassifyFn& classify,
                          const std::vector<LabeledText>& trainset,
                          const std::vector<std::string>& candidates,
                          const AttackBudget& budget, const RngSeq& seq);

struct AttackOutcome {
  TokenSeq perturbed;
  bool success = false;  // prediction != gold after the attack
};

// Word-substitution attack: positions are ranked by how much masking them
// drops the gold score; substitutions that lower the gold score are taken
// greedily (best synonym first) until the prediction flips or
// max_words_changed positions were edited. Length never changes.
AttackOutcome istp_word_attack(const ClassifyFn& classify, const TokenSeq& x,
                               int gold, const SynonymTable& synonyms,
                               const AttackBudget& budget, const RngSeq& seq);

// Character-corruption attack: the same importance ranking, but each edited
// word suffers one random character swap, drop, or substitution (usually
// knocking it out of vocabulary). A single-character word hit by a drop
// disappears from the sequence entirely.
AttackOutcome istp_char_attack(const ClassifyFn& classify, const TokenSeq& x,
                               int gold, const AttackBudget& budget,
                               const RngSeq& seq);

struct AttackRecord {
  std::string id;
  TokenSeq original;
  TokenSeq perturbed;
  int gold = 0;
  int pre = 0;   // prediction before the attack
  int post = 0;  // prediction after the attack
};

// Percentages carry two decimals. For untargeted attacks ASR and PACC are
// measured on the initially-correct subset (so pacc = 100 - asr); targeted
// attacks measure them on examples whose gold differs from the target.
struct AttackReport {
  double cacc = 0.0;
  double asr = 0.0;
  double pacc = 0.0;
  bool targeted = false;
  std::optional<int> target_label;
  std::vector<AttackRecord> records;
};

// Perturbation used by the evaluation harness: input and gold label in,
// perturbed input out.
using AttackFn = std::function<TokenSeq(const TokenSeq&, int)>;

struct EvalExample {
  std::string id;
  TokenSeq tokens;
  int label = 0;
};

AttackReport evaluate_metrics(const ClassifyFn& classify,
                              const std::vector<EvalExample>& dataset,
                              const AttackFn& attack,
                              std::optional<int> target_label = std::nullopt,
                              unsigned threads = 1);

// Aligned plain-text rendering of the CACC/ASR/PACC triple.
std::string attack_report_table(const AttackReport& report,
                                const std::string& row_label);

}  // namespace smoothcert
