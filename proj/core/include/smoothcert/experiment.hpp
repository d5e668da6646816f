#pragma once

#include <cstdint>
#include <filesystem>
#include <nlohmann/json_fwd.hpp>
#include <optional>
#include <string>
#include <vector>

#include "smoothcert/attacks.hpp"
#include "smoothcert/certify.hpp"
#include "smoothcert/promptsearch.hpp"

namespace smoothcert {

// Flat, fully-resolved description of one command invocation. Every field
// can come from a JSON config file and be overridden by a long-form flag;
// the resolved copy is embedded into emitted artifacts so each run is
// reproducible from its own output. Execution knobs that cannot change
// results (thread count, log level) deliberately stay outside.
struct ExperimentConfig {
  // Backend: exactly one of the two must be set.
  std::string weights;            // toy-model weights file
  std::string backend_endpoint;   // remote inference endpoint
  int n_classes = 0;              // required with an endpoint

  std::string dataset;      // evaluation inputs (JSON-lines)
  std::string train_data;   // training corpus / attack-crafting set
  std::string few_shot;     // few-shot set for prompt search
  std::string prompt_pool;  // searched prompt pool (JSON)
  std::string synonyms;     // substitution table for the word attack

  std::vector<std::string> prompt;  // explicit base prompt tokens
  std::size_t ensemble_size = 0;    // >0: vote the top-k pool prompts

  SmoothingConfig smoothing;
  RewardConfig reward;

  // Prompt search budgets.
  std::size_t episodes = 2000;
  std::size_t prompt_len = 3;
  std::size_t pool_size = 5;
  double policy_learning_rate = 0.05;
  double temperature_start = 1.0;
  double temperature_end = 0.2;

  // Attack spec.
  std::string attack;               // "utp" | "word" | "char"
  AttackBudget budget;
  std::vector<std::string> trigger;  // explicit trigger tokens (defend)
  bool exact_smoothing = false;

  std::optional<std::uint64_t> seed;  // mandatory; never wall-clock derived
  std::string out_dir;
};

// Overlays the fields present in a JSON config file onto `config`.
// Unknown keys raise UsageError so typos never pass silently.
void apply_config_file(const std::filesystem::path& path,
                       ExperimentConfig& config);

// Full resolved dump with a stable key order; embedded into artifacts.
nlohmann::ordered_json config_to_json(const ExperimentConfig& config);

// Shared validation: seed present, exactly one backend spec.
void validate_backend_spec(const ExperimentConfig& config);
std::uint64_t require_seed(const ExperimentConfig& config);

// --- artifact emission -----------------------------------------------------

// Per-input certification records as JSON-lines:
//   {"id", "gold", "predicted", "pa_lower", "radius", "counts"}
// `predicted` is the integer label, or the string "ABSTAIN".
void write_certification_records(const std::filesystem::path& path,
                                 const std::vector<CertificationResult>& results,
                                 const std::vector<int>& gold_labels);

nlohmann::ordered_json certification_summary(
    const std::vector<CertificationResult>& results,
    const std::vector<int>& gold_labels,
    const nlohmann::ordered_json& config);

nlohmann::ordered_json attack_report_to_json(
    const AttackReport& report, const nlohmann::ordered_json& config);

// Sweep table: one "# config=..." comment line, a header, one row per grid
// point. Doubles use shortest round-trip formatting.
void write_sweep_csv(const std::filesystem::path& path,
                     const std::string& variable_name,
                     const std::vector<double>& variable_values,
                     const std::vector<VarianceEstimate>& estimates,
                     const nlohmann::ordered_json& config);

// Shortest round-trip decimal rendering of a double (to_chars).
std::string format_double(double value);

void write_text_file(const std::filesystem::path& path,
                     const std::string& content);

}  // namespace smoothcert
