#pragma once

#include <cstdint>
#include <filesystem>
#include <string>
#include <vector>

#include "smoothcert/backend.hpp"
#include "smoothcert/certify.hpp"
#include "smoothcert/ensemble.hpp"
#include "smoothcert/rng.hpp"

namespace smoothcert {

struct RewardConfig {
  double eta1 = 180.0;  // scales negative-distance (wrong) terms
  double eta2 = 200.0;  // scales positive-distance (correct) terms
  double mask_ratio = 0.7;
  std::size_t mask_draws = 4;  // masked copies per example per episode
  double pdar_weight = 1.0;
  // Distance on log-softmax-normalized logits (default) or raw logits.
  bool normalize_logits = true;

  void validate() const;
};

// Margin of the gold class: l_y - max_{y' != y} l_{y'}. Positive exactly
// when the prediction is uniquely correct.
double distance_score(const LogitVector& logits, int gold);

// Masked-accuracy reward: per masked draw, Distance scaled by eta2 when
// positive (sign = 1) and by eta1 otherwise; mean over draws and examples.
double msar_reward(const ClassifierBackend& backend, const Prompt& prompt,
                   const std::vector<LabeledText>& batch,
                   const RewardConfig& config, const RngSeq& seq,
                   unsigned threads = 1);

// Distribution-alignment reward: negative mean KL divergence (nats) between
// the vanilla prompt's predictive distribution on the clean input and the
// searched prompt's on its masked copies. Always <= 0; zero only when the
// distributions coincide on every draw.
double pdar_reward(const ClassifierBackend& backend, const Prompt& searched,
                   const Prompt& vanilla,
                   const std::vector<LabeledText>& batch,
                   const RewardConfig& config, const RngSeq& seq,
                   unsigned threads = 1);

// Stochastic prompt policy: an independent logits row per prompt position
// over a fixed vocabulary, trained with REINFORCE against an exponential
// moving-average baseline.
struct PolicyState {
  std::size_t prompt_len = 3;          // T
  std::vector<std::string> vocab;      // V
  std::vector<double> logits;          // prompt_len x vocab.size(), row-major
  double baseline = 0.0;               // EMA of episode reward
  std::uint64_t steps = 0;
  double learning_rate = 0.05;
  double temperature = 1.0;
};

PolicyState init_policy(std::vector<std::string> vocabulary,
                        std::size_t prompt_len, double learning_rate);

// Draws one token per position from softmax(logits_t / temperature);
// temperature 0 decodes greedily (argmax per step, ties toward the lowest
// vocabulary index).
Prompt sample_prompt(const PolicyState& policy, double temperature,
                     RngStream& rng);

struct EpisodeReport {
  Prompt prompt;
  double reward = 0.0;
  double msar = 0.0;
  double pdar = 0.0;
  double advantage = 0.0;
};

// One REINFORCE episode: sample a prompt, score it with
// msar + pdar_weight * pdar, and ascend advantage * grad log pi on the
// logits table. The baseline EMA (decay 0.95) updates after the advantage
// is taken.
EpisodeReport reinforce_step(PolicyState& policy,
                             const ClassifierBackend& backend,
                             const Prompt& vanilla,
                             const std::vector<LabeledText>& batch,
                             const RewardConfig& config, const RngSeq& seq,
                             unsigned threads = 1);

struct SearchConfig {
  std::vector<std::string> vocabulary;
  std::size_t prompt_len = 3;
  std::size_t episodes = 2000;
  std::size_t pool_size = 5;
  std::size_t score_votes = 100;  // votes behind each pool score
  double learning_rate = 0.05;
  double temperature_start = 1.0;
  double temperature_end = 0.2;
};

struct ScoredPrompt {
  Prompt prompt;
  double score = 0.0;
};

// Runs the episode budget, scores every distinct sampled prompt by its
// smoothed-vote accuracy on the few-shot set (mask draws shared across
// prompts, so scores are comparable), and returns the best `pool_size`
// prompts sorted by score descending, ties broken lexicographically.
std::vector<ScoredPrompt> search_superior_prompts(
    const ClassifierBackend& backend, const Prompt& vanilla,
    const std::vector<LabeledText>& few_shot, const RewardConfig& reward,
    const SearchConfig& search, const RngSeq& seq,
    PolicyState* final_policy = nullptr, unsigned threads = 1);

// Fraction of inputs whose smoothed majority vote (n_vote draws, or the
// exact distribution when `exact`) matches the gold label.
double eval_objective(const ClassifierBackend& backend, const Prompt& prompt,
                      const std::vector<LabeledText>& dataset,
                      const SmoothingConfig& config, bool exact,
                      const RngSeq& seq, unsigned threads = 1);

inline constexpr std::uint32_t kPolicyVersion = 1;

// Policy checkpoints use the same container format as weights ("SCP1").
void save_policy(const PolicyState& policy, const std::filesystem::path& path);
PolicyState load_policy(const std::filesystem::path& path);

// Prompt pools serialize as JSON: [{"tokens": [...], "score": ...}].
void save_prompt_pool(const std::vector<ScoredPrompt>& pool,
                      const std::filesystem::path& path);
std::vector<ScoredPrompt> load_prompt_pool(const std::filesystem::path& path);

}  // namespace smoothcert
