#include "smoothcert/attacks.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <nlohmann/json.hpp>

#include "smoothcert/certify.hpp"
#include "smoothcert/errors.hpp"
#include "smoothcert/parallel.hpp"

namespace smoothcert {

std::uint64_t token_hash(const TokenSeq& tokens) {
  std::uint64_t h = 0xcbf29ce484222325ull;
  for (const auto& token : tokens) {
    h = mix64(h ^ fnv1a64(token));
  }
  return h;
}

namespace {

double round2(double percent) { return std::round(percent * 100.0) / 100.0; }

}  // namespace

ClassifyFn prompted_classifier(const ClassifierBackend& backend,
                               Prompt prompt) {
  const ClassifierBackend* b = &backend;
  return [b, prompt = std::move(prompt)](const TokenSeq& text) {
    return b->classify(prompt, text);
  };
}

ClassifyFn smoothed_classifier(const ClassifierBackend& backend, Prompt prompt,
                               double mask_ratio, std::size_t n_vote,
                               RngSeq seq) {
  const ClassifierBackend* b = &backend;
  return [b, prompt = std::move(prompt), mask_ratio, n_vote,
          seq](const TokenSeq& text) {
    const auto counts = mc_label_counts(*b, prompt, text, mask_ratio, n_vote,
                                        seq.child(token_hash(text)));
    LogitVector scores(counts.size());
    for (std::size_t c = 0; c < counts.size(); ++c)
      scores[c] = static_cast<double>(counts[c]);
    return scores;
  };
}

const std::vector<std::string>* SynonymTable::lookup(
    const std::string& token) const {
  auto it = substitutes.find(token);
  return it == substitutes.end() ? nullptr : &it->second;
}

SynonymTable load_synonyms(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw PersistenceError("cannot open " + path.string());
  nlohmann::json j;
  try {
    in >> j;
  } catch (const nlohmann::json::exception& e) {
    throw IngestionError(path.string() + ": bad synonym JSON: " + e.what());
  }
  SynonymTable table;
  for (auto it = j.begin(); it != j.end(); ++it) {
    const std::string token = it.key();
    auto subs = it.value().get<std::vector<std::string>>();
    for (const auto& s : subs)
      if (s == token)
        throw IngestionError(path.string() + ": token \"" + token +
                             "\" maps to itself");
    table.substitutes.emplace(token, std::move(subs));
  }
  return table;
}

TokenSeq apply_trigger(const TokenSeq& x, const TokenSeq& trigger,
                       TriggerPosition position) {
  TokenSeq out;
  out.reserve(x.size() + trigger.size());
  if (position == TriggerPosition::kPrepend) {
    out.insert(out.end(), trigger.begin(), trigger.end());
    out.insert(out.end(), x.begin(), x.end());
  } else {
    out.insert(out.end(), x.begin(), x.end());
    out.insert(out.end(), trigger.begin(), trigger.end());
  }
  return out;
}

namespace {

double trigger_objective(const ClassifyFn& classify,
                         const std::vector<LabeledText>& trainset,
                         const TokenSeq& trigger,
                         const std::optional<int>& target) {
  std::size_t hits = 0;
  for (const auto& ex : trainset) {
    const int pred = argmax_label(
        classify(apply_trigger(ex.tokens, trigger, TriggerPosition::kPrepend)));
    if (target.has_value() ? (pred == *target) : (pred != ex.label)) ++hits;
  }
  return static_cast<double>(hits) / static_cast<double>(trainset.size());
}

}  // namespace

TokenSeq find_utp_trigger(const ClassifyFn& classify,
                          const std::vector<LabeledText>& trainset,
                          const std::vector<std::string>& candidates,
                          const AttackBudget& budget, const RngSeq& /*seq*/) {
  if (candidates.empty()) throw ParameterError("empty trigger candidate pool");
  if (trainset.empty()) throw ParameterError("empty trigger training set");
  if (budget.trigger_len < 1)
    throw ParameterError("trigger length must be >= 1");

  std::vector<std::string> pool = candidates;
  if (pool.size() > budget.candidate_pool) pool.resize(budget.candidate_pool);

  // Seed every slot with the strongest single-token trigger.
  std::size_t best_idx = 0;
  double best_single = -1.0;
  for (std::size_t i = 0; i < pool.size(); ++i) {
    const double obj =
        trigger_objective(classify, trainset, {pool[i]}, budget.target_label);
    if (obj > best_single) {
      best_single = obj;
      best_idx = i;
    }
  }
  TokenSeq trigger(budget.trigger_len, pool[best_idx]);
  double best_obj = trigger_objective(classify, trainset, trigger,
                                      budget.target_label);

  // Coordinate passes; only strict improvements are accepted, so the scan
  // terminates.
  bool improved = true;
  while (improved) {
    improved = false;
    for (std::size_t slot = 0; slot < trigger.size(); ++slot) {
      TokenSeq trial = trigger;
      std::string best_token = trigger[slot];
      double slot_best = best_obj;
      for (const auto& cand : pool) {
        if (cand == trigger[slot]) continue;
        trial[slot] = cand;
        const double obj = trigger_objective(classify, trainset, trial,
                                             budget.target_label);
        if (obj > slot_best) {
          slot_best = obj;
          best_token = cand;
        }
      }
      if (slot_best > best_obj) {
        trigger[slot] = best_token;
        best_obj = slot_best;
        improved = true;
      }
    }
  }
  return trigger;
}

namespace {

// Positions ordered by how much masking each one drops the gold score;
// stable on ties so the ranking is deterministic.
std::vector<std::size_t> importance_ranking(const ClassifyFn& classify,
                                            const TokenSeq& x, int gold) {
  const auto y = static_cast<std::size_t>(gold);
  const double base = classify(x)[y];
  std::vector<double> importance(x.size());
  for (std::size_t i = 0; i < x.size(); ++i) {
    TokenSeq masked = x;
    masked[i] = std::string(kMaskToken);
    importance[i] = base - classify(masked)[y];
  }
  std::vector<std::size_t> order(x.size());
  for (std::size_t i = 0; i < x.size(); ++i) order[i] = i;
  std::stable_sort(order.begin(), order.end(),
                   [&](std::size_t a, std::size_t b) {
                     return importance[a] > importance[b];
                   });
  return order;
}

}  // namespace

AttackOutcome istp_word_attack(const ClassifyFn& classify, const TokenSeq& x,
                               int gold, const SynonymTable& synonyms,
                               const AttackBudget& budget,
                               const RngSeq& /*seq*/) {
  AttackOutcome outcome{x, false};
  const LogitVector base = classify(x);
  outcome.success = argmax_label(base) != gold;
  if (outcome.success || budget.max_words_changed == 0 || x.empty())
    return outcome;

  const auto y = static_cast<std::size_t>(gold);
  const auto order = importance_ranking(classify, x, gold);

  double current_gold = base[y];
  std::size_t changed = 0;
  for (std::size_t pos : order) {
    if (changed >= budget.max_words_changed) break;
    const auto* subs = synonyms.lookup(outcome.perturbed[pos]);
    if (subs == nullptr || subs->empty()) continue;

    // Best substitute: lowest gold score; first in list order on ties.
    std::string best_token;
    LogitVector best_logits;
    double best_gold = current_gold;
    for (const auto& sub : *subs) {
      TokenSeq trial = outcome.perturbed;
      trial[pos] = sub;
      LogitVector logits = classify(trial);
      if (logits[y] < best_gold) {
        best_gold = logits[y];
        best_token = sub;
        best_logits = std::move(logits);
      }
    }
    if (best_token.empty()) continue;  // nothing lowers the gold score

    outcome.perturbed[pos] = best_token;
    current_gold = best_gold;
    ++changed;
    if (argmax_label(best_logits) != gold) {
      outcome.success = true;
      break;
    }
  }
  return outcome;
}

AttackOutcome istp_char_attack(const ClassifyFn& classify, const TokenSeq& x,
                               int gold, const AttackBudget& budget,
                               const RngSeq& seq) {
  AttackOutcome outcome{x, false};
  outcome.success = argmax_label(classify(x)) != gold;
  if (outcome.success || budget.max_words_changed == 0 || x.empty())
    return outcome;

  const auto order = importance_ranking(classify, x, gold);

  // Track original positions so removals of emptied tokens do not disturb
  // the ranking.
  std::vector<std::size_t> origin(x.size());
  for (std::size_t i = 0; i < x.size(); ++i) origin[i] = i;

  std::size_t touched = 0;
  for (std::size_t pos : order) {
    if (touched >= budget.max_words_changed) break;
    const auto slot = std::find(origin.begin(), origin.end(), pos);
    if (slot == origin.end()) continue;  // already removed
    const auto cur = static_cast<std::size_t>(slot - origin.begin());
    std::string word = outcome.perturbed[cur];
    if (word.empty()) continue;

    RngStream rng = seq.child(pos).stream();
    std::uint64_t op = rng.next_below(3);
    if (op == 0) {
      // A swap only perturbs when some adjacent pair differs.
      bool has_unequal_pair = false;
      for (std::size_t i = 0; i + 1 < word.size(); ++i)
        if (word[i] != word[i + 1]) has_unequal_pair = true;
      if (!has_unequal_pair) op = 2;
    }
    switch (op) {
      case 0: {  // swap adjacent characters
        auto i = static_cast<std::size_t>(rng.next_below(word.size() - 1));
        while (word[i] == word[i + 1]) i = (i + 1) % (word.size() - 1);
        std::swap(word[i], word[i + 1]);
        break;
      }
      case 1: {  // drop one character
        const auto i = static_cast<std::size_t>(rng.next_below(word.size()));
        word.erase(i, 1);
        break;
      }
      default: {  // substitute one character with a random letter
        const auto i = static_cast<std::size_t>(rng.next_below(word.size()));
        char letter = static_cast<char>('a' + rng.next_below(26));
        if (letter == word[i])
          letter = static_cast<char>('a' + (letter - 'a' + 1) % 26);
        word[i] = letter;
        break;
      }
    }

    if (word.empty()) {
      // A dropped single character leaves an empty token; remove it.
      outcome.perturbed.erase(outcome.perturbed.begin() +
                              static_cast<std::ptrdiff_t>(cur));
      origin.erase(origin.begin() + static_cast<std::ptrdiff_t>(cur));
    } else {
      outcome.perturbed[cur] = word;
    }
    ++touched;

    if (outcome.perturbed.empty()) break;
    if (argmax_label(classify(outcome.perturbed)) != gold) {
      outcome.success = true;
      break;
    }
  }
  if (!outcome.success && !outcome.perturbed.empty())
    outcome.success = argmax_label(classify(outcome.perturbed)) != gold;
  return outcome;
}

AttackReport evaluate_metrics(const ClassifyFn& classify,
                              const std::vector<EvalExample>& dataset,
                              const AttackFn& attack,
                              std::optional<int> target_label,
                              unsigned threads) {
  if (dataset.empty()) throw ParameterError("evaluate_metrics needs data");

  AttackReport report;
  report.targeted = target_label.has_value();
  report.target_label = target_label;
  report.records.resize(dataset.size());

  parallel_for(dataset.size(), threads, [&](std::size_t i) {
    const auto& ex = dataset[i];
    AttackRecord rec;
    rec.id = ex.id;
    rec.original = ex.tokens;
    rec.gold = ex.label;
    rec.pre = argmax_label(classify(ex.tokens));
    rec.perturbed = attack(ex.tokens, ex.label);
    rec.post = argmax_label(classify(rec.perturbed));
    report.records[i] = std::move(rec);
  });

  std::size_t clean_correct = 0;
  for (const auto& rec : report.records)
    if (rec.pre == rec.gold) ++clean_correct;
  report.cacc = round2(100.0 * static_cast<double>(clean_correct) /
                       static_cast<double>(dataset.size()));

  if (report.targeted) {
    // Evaluated over examples whose gold label differs from the target.
    std::size_t subset = 0, hit_target = 0, still_correct = 0;
    for (const auto& rec : report.records) {
      if (rec.gold == *target_label) continue;
      ++subset;
      if (rec.post == *target_label) ++hit_target;
      if (rec.post == rec.gold) ++still_correct;
    }
    if (subset > 0) {
      report.asr = round2(100.0 * static_cast<double>(hit_target) /
                          static_cast<double>(subset));
      report.pacc = round2(100.0 * static_cast<double>(still_correct) /
                           static_cast<double>(subset));
    }
  } else {
    // Evaluated over the initially-correct subset; pacc complements asr.
    std::size_t subset = 0, flipped = 0;
    for (const auto& rec : report.records) {
      if (rec.pre != rec.gold) continue;
      ++subset;
      if (rec.post != rec.gold) ++flipped;
    }
    if (subset > 0) {
      report.asr = round2(100.0 * static_cast<double>(flipped) /
                          static_cast<double>(subset));
      report.pacc = 100.0 - report.asr;
    }
  }
  return report;
}

std::string attack_report_table(const AttackReport& report,
                                const std::string& row_label) {
  char line[160];
  std::string out;
  std::snprintf(line, sizeof(line), "%-24s %8s %8s %8s\n", "attack", "CACC",
                "ASR", "PACC");
  out += line;
  std::snprintf(line, sizeof(line), "%-24s %8.2f %8.2f %8.2f\n",
                row_label.c_str(), report.cacc, report.asr, report.pacc);
  out += line;
  return out;
}

}  // namespace smoothcert
