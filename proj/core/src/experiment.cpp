#include "smoothcert/experiment.hpp"

#include <charconv>
#include <fstream>
#include <nlohmann/json.hpp>
#include <set>

#include "smoothcert/errors.hpp"

namespace smoothcert {

namespace {

using json = nlohmann::ordered_json;

template <typename T>
void maybe_get(const json& j, const char* key, T& out) {
  if (j.contains(key)) out = j.at(key).get<T>();
}

}  // namespace

void apply_config_file(const std::filesystem::path& path,
                       ExperimentConfig& c) {
  std::ifstream in(path);
  if (!in) throw UsageError("cannot open config file " + path.string());
  json j;
  try {
    in >> j;
  } catch (const json::exception& e) {
    throw UsageError(path.string() + ": bad config JSON: " + e.what());
  }

  static const std::set<std::string> known = {
      "weights",        "backend_endpoint", "n_classes",
      "dataset",        "train_data",       "few_shot",
      "prompt_pool",    "synonyms",         "prompt",
      "ensemble_size",  "mask_ratio",       "alpha",
      "n_pred",         "n_cert",           "n_vote",
      "enumeration_cap", "eta1",            "eta2",
      "mask_draws",     "pdar_weight",      "normalize_logits",
      "episodes",       "prompt_len",       "pool_size",
      "policy_learning_rate", "temperature_start", "temperature_end",
      "attack",         "max_words_changed", "trigger_len",
      "candidate_pool", "target_label",     "trigger",
      "exact_smoothing", "seed",            "out_dir"};
  for (auto it = j.begin(); it != j.end(); ++it)
    if (known.find(it.key()) == known.end())
      throw UsageError(path.string() + ": unknown config key \"" + it.key() +
                       "\"");

  maybe_get(j, "weights", c.weights);
  maybe_get(j, "backend_endpoint", c.backend_endpoint);
  maybe_get(j, "n_classes", c.n_classes);
  maybe_get(j, "dataset", c.dataset);
  maybe_get(j, "train_data", c.train_data);
  maybe_get(j, "few_shot", c.few_shot);
  maybe_get(j, "prompt_pool", c.prompt_pool);
  maybe_get(j, "synonyms", c.synonyms);
  maybe_get(j, "prompt", c.prompt);
  maybe_get(j, "ensemble_size", c.ensemble_size);
  maybe_get(j, "mask_ratio", c.smoothing.mask_ratio);
  maybe_get(j, "alpha", c.smoothing.alpha);
  maybe_get(j, "n_pred", c.smoothing.n_pred);
  maybe_get(j, "n_cert", c.smoothing.n_cert);
  maybe_get(j, "n_vote", c.smoothing.n_vote);
  maybe_get(j, "enumeration_cap", c.smoothing.enumeration_cap);
  maybe_get(j, "eta1", c.reward.eta1);
  maybe_get(j, "eta2", c.reward.eta2);
  maybe_get(j, "mask_draws", c.reward.mask_draws);
  maybe_get(j, "pdar_weight", c.reward.pdar_weight);
  maybe_get(j, "normalize_logits", c.reward.normalize_logits);
  maybe_get(j, "episodes", c.episodes);
  maybe_get(j, "prompt_len", c.prompt_len);
  maybe_get(j, "pool_size", c.pool_size);
  maybe_get(j, "policy_learning_rate", c.policy_learning_rate);
  maybe_get(j, "temperature_start", c.temperature_start);
  maybe_get(j, "temperature_end", c.temperature_end);
  maybe_get(j, "attack", c.attack);
  maybe_get(j, "max_words_changed", c.budget.max_words_changed);
  maybe_get(j, "trigger_len", c.budget.trigger_len);
  maybe_get(j, "candidate_pool", c.budget.candidate_pool);
  maybe_get(j, "trigger", c.trigger);
  maybe_get(j, "exact_smoothing", c.exact_smoothing);
  maybe_get(j, "out_dir", c.out_dir);
  if (j.contains("target_label"))
    c.budget.target_label = j.at("target_label").get<int>();
  if (j.contains("seed")) c.seed = j.at("seed").get<std::uint64_t>();

  // The reward's mask ratio follows the smoothing ratio unless set apart.
  c.reward.mask_ratio = c.smoothing.mask_ratio;
}

json config_to_json(const ExperimentConfig& c) {
  json j;
  j["weights"] = c.weights;
  j["backend_endpoint"] = c.backend_endpoint;
  j["n_classes"] = c.n_classes;
  j["dataset"] = c.dataset;
  j["train_data"] = c.train_data;
  j["few_shot"] = c.few_shot;
  j["prompt_pool"] = c.prompt_pool;
  j["synonyms"] = c.synonyms;
  j["prompt"] = c.prompt;
  j["ensemble_size"] = c.ensemble_size;
  j["mask_ratio"] = c.smoothing.mask_ratio;
  j["alpha"] = c.smoothing.alpha;
  j["n_pred"] = c.smoothing.n_pred;
  j["n_cert"] = c.smoothing.n_cert;
  j["n_vote"] = c.smoothing.n_vote;
  j["enumeration_cap"] = c.smoothing.enumeration_cap;
  j["eta1"] = c.reward.eta1;
  j["eta2"] = c.reward.eta2;
  j["mask_draws"] = c.reward.mask_draws;
  j["pdar_weight"] = c.reward.pdar_weight;
  j["normalize_logits"] = c.reward.normalize_logits;
  j["episodes"] = c.episodes;
  j["prompt_len"] = c.prompt_len;
  j["pool_size"] = c.pool_size;
  j["policy_learning_rate"] = c.policy_learning_rate;
  j["temperature_start"] = c.temperature_start;
  j["temperature_end"] = c.temperature_end;
  j["attack"] = c.attack;
  j["max_words_changed"] = c.budget.max_words_changed;
  j["trigger_len"] = c.budget.trigger_len;
  j["candidate_pool"] = c.budget.candidate_pool;
  if (c.budget.target_label)
    j["target_label"] = *c.budget.target_label;
  else
    j["target_label"] = nullptr;
  j["trigger"] = c.trigger;
  j["exact_smoothing"] = c.exact_smoothing;
  j["seed"] = c.seed ? json(*c.seed) : json(nullptr);
  j["out_dir"] = c.out_dir;
  return j;
}

void validate_backend_spec(const ExperimentConfig& c) {
  const bool has_weights = !c.weights.empty();
  const bool has_endpoint = !c.backend_endpoint.empty();
  if (has_weights == has_endpoint)
    throw UsageError(
        "exactly one backend must be given: --weights or --backend-endpoint");
  if (has_endpoint && c.n_classes < 2)
    throw UsageError("--backend-endpoint requires --n-classes >= 2");
}

std::uint64_t require_seed(const ExperimentConfig& c) {
  if (!c.seed) throw UsageError("--seed is mandatory");
  return *c.seed;
}

void write_certification_records(
    const std::filesystem::path& path,
    const std::vector<CertificationResult>& results,
    const std::vector<int>& gold_labels) {
  if (results.size() != gold_labels.size())
    throw ContractError("results and gold labels differ in length");
  std::ofstream out(path, std::ios::trunc);
  if (!out)
    throw PersistenceError("cannot open " + path.string() + " for writing");
  for (std::size_t i = 0; i < results.size(); ++i) {
    const auto& r = results[i];
    json j;
    j["id"] = r.input_id;
    j["gold"] = gold_labels[i];
    if (r.predicted)
      j["predicted"] = *r.predicted;
    else
      j["predicted"] = "ABSTAIN";
    j["pa_lower"] = r.pa_lower;
    j["radius"] = r.radius;
    j["counts"] = r.counts;
    out << j.dump() << "\n";
  }
}

json certification_summary(const std::vector<CertificationResult>& results,
                           const std::vector<int>& gold_labels,
                           const json& config) {
  const auto acc = certified_accuracy_by_radius(results, gold_labels);
  std::size_t abstained = 0;
  for (const auto& r : results)
    if (!r.predicted) ++abstained;

  json j;
  j["config"] = config;
  j["inputs"] = results.size();
  j["abstained"] = abstained;
  j["certified_accuracy_by_radius"] = acc;
  return j;
}

json attack_report_to_json(const AttackReport& report, const json& config) {
  json j;
  j["config"] = config;
  j["cacc"] = report.cacc;
  j["asr"] = report.asr;
  j["pacc"] = report.pacc;
  j["targeted"] = report.targeted;
  if (report.target_label)
    j["target_label"] = *report.target_label;
  else
    j["target_label"] = nullptr;
  json records = json::array();
  for (const auto& rec : report.records) {
    json r;
    r["id"] = rec.id;
    r["original"] = detokenize(rec.original);
    r["perturbed"] = detokenize(rec.perturbed);
    r["gold"] = rec.gold;
    r["pre"] = rec.pre;
    r["post"] = rec.post;
    records.push_back(std::move(r));
  }
  j["records"] = std::move(records);
  return j;
}

std::string format_double(double value) {
  char buf[64];
  auto res = std::to_chars(buf, buf + sizeof(buf), value);
  return std::string(buf, res.ptr);
}

void write_sweep_csv(const std::filesystem::path& path,
                     const std::string& variable_name,
                     const std::vector<double>& variable_values,
                     const std::vector<VarianceEstimate>& estimates,
                     const json& config) {
  if (variable_values.size() != estimates.size())
    throw ContractError("sweep grid and estimates differ in length");
  std::ofstream out(path, std::ios::trunc);
  if (!out)
    throw PersistenceError("cannot open " + path.string() + " for writing");
  out << "# config=" << config.dump() << "\n";
  out << variable_name << ",mean_accuracy,variance\n";
  for (std::size_t i = 0; i < estimates.size(); ++i) {
    out << format_double(variable_values[i]) << ","
        << format_double(estimates[i].mean_accuracy) << ","
        << format_double(estimates[i].variance) << "\n";
  }
}

void write_text_file(const std::filesystem::path& path,
                     const std::string& content) {
  std::ofstream out(path, std::ios::trunc);
  if (!out)
    throw PersistenceError("cannot open " + path.string() + " for writing");
  out << content;
}

}  // namespace smoothcert
