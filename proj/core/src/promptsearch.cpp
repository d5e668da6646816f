#include "smoothcert/promptsearch.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <limits>
#include <map>
#include <nlohmann/json.hpp>

#include "smoothcert/errors.hpp"
#include "smoothcert/parallel.hpp"
#include "smoothcert/weights_io.hpp"

namespace smoothcert {

namespace {

constexpr double kKlFloor = 1e-12;
constexpr double kBaselineDecay = 0.95;

using json = nlohmann::ordered_json;

LogitVector maybe_normalize(LogitVector logits, bool normalize) {
  return normalize ? log_softmax(logits) : logits;
}

// KL(P || Q) in nats with Q floored at kKlFloor; zero-probability P entries
// contribute nothing.
double kl_divergence(const LogitVector& p, const LogitVector& q) {
  double kl = 0.0;
  for (std::size_t i = 0; i < p.size(); ++i) {
    if (p[i] <= 0.0) continue;
    kl += p[i] * (std::log(p[i]) - std::log(std::max(q[i], kKlFloor)));
  }
  return std::max(kl, 0.0);
}

std::vector<double> policy_row_probs(const PolicyState& policy, std::size_t t,
                                     double temperature) {
  const std::size_t v = policy.vocab.size();
  LogitVector scaled(v);
  for (std::size_t i = 0; i < v; ++i)
    scaled[i] = policy.logits[t * v + i] / temperature;
  return softmax(scaled);
}

std::vector<std::size_t> sample_prompt_indices(const PolicyState& policy,
                                               double temperature,
                                               RngStream& rng) {
  const std::size_t v = policy.vocab.size();
  std::vector<std::size_t> chosen(policy.prompt_len);
  for (std::size_t t = 0; t < policy.prompt_len; ++t) {
    if (temperature <= 0.0) {
      // Greedy decoding.
      std::size_t best = 0;
      for (std::size_t i = 1; i < v; ++i)
        if (policy.logits[t * v + i] > policy.logits[t * v + best]) best = i;
      chosen[t] = best;
      continue;
    }
    const std::vector<double> probs = policy_row_probs(policy, t, temperature);
    const double u = rng.next_unit();
    double cum = 0.0;
    std::size_t pick = v - 1;
    for (std::size_t i = 0; i < v; ++i) {
      cum += probs[i];
      if (u < cum) {
        pick = i;
        break;
      }
    }
    chosen[t] = pick;
  }
  return chosen;
}

}  // namespace

void RewardConfig::validate() const {
  if (!(eta1 > 0.0 && eta2 > 0.0))
    throw ParameterError("reward weights eta1, eta2 must be positive");
  if (mask_draws < 1) throw ParameterError("mask_draws must be >= 1");
  if (!(mask_ratio >= 0.0 && mask_ratio <= 1.0))
    throw ParameterError("mask_ratio must lie in [0, 1]");
}

double distance_score(const LogitVector& logits, int gold) {
  if (gold < 0 || gold >= static_cast<int>(logits.size()))
    throw ParameterError("gold label outside the logit vector");
  const auto y = static_cast<std::size_t>(gold);
  double best_other = -std::numeric_limits<double>::infinity();
  for (std::size_t c = 0; c < logits.size(); ++c)
    if (c != y) best_other = std::max(best_other, logits[c]);
  return logits[y] - best_other;
}

double msar_reward(const ClassifierBackend& backend, const Prompt& prompt,
                   const std::vector<LabeledText>& batch,
                   const RewardConfig& config, const RngSeq& seq,
                   unsigned threads) {
  config.validate();
  if (batch.empty()) throw ParameterError("msar_reward needs a non-empty batch");

  const std::size_t m = config.mask_draws;
  std::vector<double> terms(batch.size() * m, 0.0);
  parallel_for(batch.size(), threads, [&](std::size_t e) {
    const auto& ex = batch[e];
    const std::size_t h = ex.tokens.size();
    const std::size_t k = retain_count(h, config.mask_ratio);
    for (std::size_t j = 0; j < m; ++j) {
      RngStream rng = seq.child(e).child(j).stream();
      const TokenSeq masked =
          apply_mask(ex.tokens, sample_mask_pattern(h, k, rng));
      const LogitVector logits = maybe_normalize(
          backend.classify(prompt, masked), config.normalize_logits);
      const double dist = distance_score(logits, ex.label);
      terms[e * m + j] = (dist > 0.0 ? config.eta2 : config.eta1) * dist;
    }
  });

  double sum = 0.0;
  for (double t : terms) sum += t;
  return sum / static_cast<double>(terms.size());
}

double pdar_reward(const ClassifierBackend& backend, const Prompt& searched,
                   const Prompt& vanilla,
                   const std::vector<LabeledText>& batch,
                   const RewardConfig& config, const RngSeq& seq,
                   unsigned threads) {
  config.validate();
  if (batch.empty()) throw ParameterError("pdar_reward needs a non-empty batch");

  const std::size_t m = config.mask_draws;
  std::vector<double> divergences(batch.size() * m, 0.0);
  parallel_for(batch.size(), threads, [&](std::size_t e) {
    const auto& ex = batch[e];
    const LogitVector reference =
        softmax(backend.classify(vanilla, ex.tokens));
    const std::size_t h = ex.tokens.size();
    const std::size_t k = retain_count(h, config.mask_ratio);
    for (std::size_t j = 0; j < m; ++j) {
      RngStream rng = seq.child(e).child(j).stream();
      const TokenSeq masked =
          apply_mask(ex.tokens, sample_mask_pattern(h, k, rng));
      const LogitVector masked_dist =
          softmax(backend.classify(searched, masked));
      divergences[e * m + j] = kl_divergence(reference, masked_dist);
    }
  });

  double sum = 0.0;
  for (double d : divergences) sum += d;
  return -sum / static_cast<double>(divergences.size());
}

PolicyState init_policy(std::vector<std::string> vocabulary,
                        std::size_t prompt_len, double learning_rate) {
  if (vocabulary.empty()) throw ParameterError("policy vocabulary is empty");
  if (prompt_len < 1) throw ParameterError("prompt length must be >= 1");
  PolicyState policy;
  policy.prompt_len = prompt_len;
  policy.vocab = std::move(vocabulary);
  policy.logits.assign(prompt_len * policy.vocab.size(), 0.0);
  policy.learning_rate = learning_rate;
  return policy;
}

Prompt sample_prompt(const PolicyState& policy, double temperature,
                     RngStream& rng) {
  if (temperature < 0.0) throw ParameterError("temperature must be >= 0");
  const auto chosen = sample_prompt_indices(policy, temperature, rng);
  Prompt prompt;
  prompt.reserve(chosen.size());
  for (std::size_t idx : chosen) prompt.push_back(policy.vocab[idx]);
  return prompt;
}

EpisodeReport reinforce_step(PolicyState& policy,
                             const ClassifierBackend& backend,
                             const Prompt& vanilla,
                             const std::vector<LabeledText>& batch,
                             const RewardConfig& config, const RngSeq& seq,
                             unsigned threads) {
  const double temperature = policy.temperature;
  RngStream sample_rng = seq.child("sample").stream();
  const auto chosen = sample_prompt_indices(policy, temperature, sample_rng);

  EpisodeReport report;
  report.prompt.reserve(chosen.size());
  for (std::size_t idx : chosen) report.prompt.push_back(policy.vocab[idx]);

  report.msar = msar_reward(backend, report.prompt, batch, config,
                            seq.child("msar"), threads);
  report.pdar = config.pdar_weight == 0.0
                    ? 0.0
                    : pdar_reward(backend, report.prompt, vanilla, batch,
                                  config, seq.child("pdar"), threads);
  report.reward = report.msar + config.pdar_weight * report.pdar;
  report.advantage = report.reward - policy.baseline;

  // Score-function update: grad log pi = (one_hot - softmax(logits/T)) / T.
  // Greedy decoding (T = 0) has no sampling distribution to differentiate.
  if (temperature > 0.0) {
    const std::size_t v = policy.vocab.size();
    for (std::size_t t = 0; t < policy.prompt_len; ++t) {
      const auto probs = policy_row_probs(policy, t, temperature);
      for (std::size_t i = 0; i < v; ++i) {
        const double indicator = (i == chosen[t]) ? 1.0 : 0.0;
        policy.logits[t * v + i] += policy.learning_rate * report.advantage *
                                    (indicator - probs[i]) / temperature;
      }
    }
  }

  policy.baseline =
      kBaselineDecay * policy.baseline + (1.0 - kBaselineDecay) * report.reward;
  ++policy.steps;
  return report;
}

namespace {

// Pool score: smoothed-vote accuracy on the few-shot set. The mask streams
// depend only on (example, vote) indices, never on the prompt, so every
// prompt is scored on identical masked copies.
double pool_score(const ClassifierBackend& backend, const Prompt& prompt,
                  const std::vector<LabeledText>& few_shot, double mask_ratio,
                  std::size_t votes, const RngSeq& score_seq,
                  unsigned threads) {
  std::vector<char> correct(few_shot.size(), 0);
  parallel_for(few_shot.size(), threads, [&](std::size_t j) {
    const int label = vote_label(backend, prompt, few_shot[j].tokens,
                                 mask_ratio, votes, score_seq.child(j));
    correct[j] = (label == few_shot[j].label) ? 1 : 0;
  });
  std::size_t hits = 0;
  for (char c : correct) hits += c;
  return static_cast<double>(hits) / static_cast<double>(few_shot.size());
}

}  // namespace

std::vector<ScoredPrompt> search_superior_prompts(
    const ClassifierBackend& backend, const Prompt& vanilla,
    const std::vector<LabeledText>& few_shot, const RewardConfig& reward,
    const SearchConfig& search, const RngSeq& seq, PolicyState* final_policy,
    unsigned threads) {
  if (search.episodes < 1) throw ParameterError("episodes must be >= 1");
  if (search.pool_size < 1) throw ParameterError("pool_size must be >= 1");
  if (few_shot.empty())
    throw ParameterError("few-shot set must be non-empty");

  PolicyState policy = init_policy(search.vocabulary, search.prompt_len,
                                   search.learning_rate);
  const RngSeq episodes_seq = seq.child("episode");
  const RngSeq score_seq = seq.child("score");

  std::map<Prompt, double> pool;  // ordered: deterministic iteration
  for (std::size_t e = 0; e < search.episodes; ++e) {
    const double frac =
        search.episodes > 1
            ? static_cast<double>(e) / static_cast<double>(search.episodes - 1)
            : 0.0;
    policy.temperature = search.temperature_start +
                         (search.temperature_end - search.temperature_start) *
                             frac;
    const EpisodeReport report = reinforce_step(
        policy, backend, vanilla, few_shot, reward, episodes_seq.child(e),
        threads);
    if (pool.find(report.prompt) == pool.end()) {
      pool.emplace(report.prompt,
                   pool_score(backend, report.prompt, few_shot,
                              reward.mask_ratio, search.score_votes, score_seq,
                              threads));
    }
  }

  std::vector<ScoredPrompt> ranked;
  ranked.reserve(pool.size());
  for (const auto& [prompt, score] : pool)
    ranked.push_back(ScoredPrompt{prompt, score});
  std::sort(ranked.begin(), ranked.end(),
            [](const ScoredPrompt& a, const ScoredPrompt& b) {
              if (a.score != b.score) return a.score > b.score;
              return a.prompt < b.prompt;
            });
  if (ranked.size() > search.pool_size) ranked.resize(search.pool_size);

  if (final_policy != nullptr) *final_policy = std::move(policy);
  return ranked;
}

double eval_objective(const ClassifierBackend& backend, const Prompt& prompt,
                      const std::vector<LabeledText>& dataset,
                      const SmoothingConfig& config, bool exact,
                      const RngSeq& seq, unsigned threads) {
  if (dataset.empty()) throw ParameterError("eval_objective needs data");
  std::vector<char> correct(dataset.size(), 0);
  parallel_for(dataset.size(), threads, [&](std::size_t j) {
    int label;
    if (exact) {
      const auto dist = exact_smooth_distribution(
          backend, prompt, dataset[j].tokens, config.mask_ratio,
          config.enumeration_cap);
      label = argmax_label(dist);
    } else {
      label = vote_label(backend, prompt, dataset[j].tokens, config.mask_ratio,
                         config.n_vote, seq.child(j));
    }
    correct[j] = (label == dataset[j].label) ? 1 : 0;
  });
  std::size_t hits = 0;
  for (char c : correct) hits += c;
  return static_cast<double>(hits) / static_cast<double>(dataset.size());
}

void save_policy(const PolicyState& policy,
                 const std::filesystem::path& path) {
  json j;
  j["prompt_len"] = policy.prompt_len;
  j["vocab"] = policy.vocab;
  j["logits"] = policy.logits;
  j["baseline"] = policy.baseline;
  j["steps"] = policy.steps;
  j["learning_rate"] = policy.learning_rate;
  j["temperature"] = policy.temperature;
  write_container(path, "SCP1", kPolicyVersion, j.dump());
}

PolicyState load_policy(const std::filesystem::path& path) {
  const std::string payload = read_container(path, "SCP1", kPolicyVersion);
  try {
    const json j = json::parse(payload);
    PolicyState policy;
    policy.prompt_len = j.at("prompt_len").get<std::size_t>();
    policy.vocab = j.at("vocab").get<std::vector<std::string>>();
    policy.logits = j.at("logits").get<std::vector<double>>();
    policy.baseline = j.at("baseline").get<double>();
    policy.steps = j.at("steps").get<std::uint64_t>();
    policy.learning_rate = j.at("learning_rate").get<double>();
    policy.temperature = j.at("temperature").get<double>();
    if (policy.logits.size() != policy.prompt_len * policy.vocab.size())
      throw PersistenceError(path.string() + ": inconsistent policy shape");
    return policy;
  } catch (const json::exception& e) {
    throw PersistenceError(path.string() + ": bad policy payload: " +
                           e.what());
  }
}

void save_prompt_pool(const std::vector<ScoredPrompt>& pool,
                      const std::filesystem::path& path) {
  json j = json::array();
  for (const auto& sp : pool)
    j.push_back(json{{"tokens", sp.prompt}, {"score", sp.score}});
  std::ofstream out(path, std::ios::trunc);
  if (!out)
    throw PersistenceError("cannot open " + path.string() + " for writing");
  out << j.dump(2) << "\n";
}

std::vector<ScoredPrompt> load_prompt_pool(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw PersistenceError("cannot open " + path.string());
  try {
    json j;
    in >> j;
    std::vector<ScoredPrompt> pool;
    for (const auto& item : j) {
      ScoredPrompt sp;
      sp.prompt = item.at("tokens").get<TokenSeq>();
      sp.score = item.at("score").get<double>();
      pool.push_back(std::move(sp));
    }
    return pool;
  } catch (const json::exception& e) {
    throw PersistenceError(path.string() + ": bad prompt pool: " + e.what());
  }
}

}  // namespace smoothcert
