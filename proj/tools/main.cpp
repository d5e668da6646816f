// smoothcert: certified robustness toolkit for prompt-based text
// classifiers under randomized word masking.

#include <CLI11.hpp>
#include <cstdio>
#include <string>
#include <vector>

#include "commands.hpp"
#include "smoothcert/errors.hpp"
#include "smoothcert/text.hpp"

namespace {

using smoothcert::ExperimentConfig;
using namespace smoothcert::cli;

// Bound CLI state. Tokenized fields arrive as whole strings and convert
// after parsing; seed and target-label need presence detection, which
// CLI11 provides through count().
struct FlagState {
  std::string config_file;
  std::string prompt_text;
  std::string trigger_text;
  std::uint64_t seed = 0;
  int target_label = -1;
  std::string mask_ratios_csv;
  std::string ensemble_sizes_csv;
};

std::vector<double> parse_double_list(const std::string& csv) {
  std::vector<double> out;
  std::size_t start = 0;
  while (!csv.empty() && start <= csv.size()) {
    const auto comma = csv.find(',', start);
    const std::string item = csv.substr(
        start, comma == std::string::npos ? comma : comma - start);
    if (!item.empty()) out.push_back(std::stod(item));
    if (comma == std::string::npos) break;
    start = comma + 1;
  }
  return out;
}

std::vector<std::size_t> parse_size_list(const std::string& csv) {
  std::vector<std::size_t> out;
  for (double v : parse_double_list(csv))
    out.push_back(static_cast<std::size_t>(v));
  return out;
}

// Options shared by every experiment-running subcommand.
void add_common_options(CLI::App* cmd, ExperimentConfig& cfg, FlagState& flags,
                        RunOptions& run) {
  cmd->add_option("--config", flags.config_file,
                  "JSON config file; flags override its fields");
  cmd->add_option("--weights", cfg.weights, "toy-model weights file");
  cmd->add_option("--backend-endpoint", cfg.backend_endpoint,
                  "remote inference endpoint (http://host:port)");
  cmd->add_option("--n-classes", cfg.n_classes,
                  "class count (required with --backend-endpoint)");
  cmd->add_option("--dataset", cfg.dataset, "evaluation dataset (JSON-lines)");
  cmd->add_option("--train-data", cfg.train_data,
                  "training / attack-crafting dataset");
  cmd->add_option("--few-shot", cfg.few_shot, "few-shot set for prompt search");
  cmd->add_option("--prompt-pool", cfg.prompt_pool,
                  "searched prompt pool (JSON)");
  cmd->add_option("--synonyms", cfg.synonyms, "synonym table (JSON)");
  cmd->add_option("--prompt", flags.prompt_text,
                  "base prompt tokens, space separated");
  cmd->add_option("--ensemble-size", cfg.ensemble_size,
                  "vote the top-k pool prompts (0 = single prompt)");
  cmd->add_option("--mask-ratio", cfg.smoothing.mask_ratio,
                  "fraction of words masked");
  cmd->add_option("--alpha", cfg.smoothing.alpha,
                  "certification failure probability");
  cmd->add_option("--n-pred", cfg.smoothing.n_pred, "selection-stage samples");
  cmd->add_option("--n-cert", cfg.smoothing.n_cert, "bound-stage samples");
  cmd->add_option("--n-vote", cfg.smoothing.n_vote, "empirical-defense votes");
  cmd->add_option("--enumeration-cap", cfg.smoothing.enumeration_cap,
                  "max patterns for exact smoothing");
  cmd->add_option("--eta1", cfg.reward.eta1, "wrong-prediction reward weight");
  cmd->add_option("--eta2", cfg.reward.eta2,
                  "correct-prediction reward weight");
  cmd->add_option("--mask-draws", cfg.reward.mask_draws,
                  "masked copies per example per episode");
  cmd->add_option("--pdar-weight", cfg.reward.pdar_weight,
                  "weight of the alignment reward");
  cmd->add_flag_callback(
      "--raw-logits", [&cfg] { cfg.reward.normalize_logits = false; },
      "reward distances on raw logits instead of log-softmax");
  cmd->add_option("--episodes", cfg.episodes, "search episodes");
  cmd->add_option("--prompt-len", cfg.prompt_len, "searched prompt length");
  cmd->add_option("--pool-size", cfg.pool_size, "prompts kept by the search");
  cmd->add_option("--policy-learning-rate", cfg.policy_learning_rate,
                  "REINFORCE step size");
  cmd->add_option("--temperature-start", cfg.temperature_start,
                  "sampling temperature at episode 0");
  cmd->add_option("--temperature-end", cfg.temperature_end,
                  "sampling temperature at the final episode");
  cmd->add_option("--attack", cfg.attack, "utp | word | char");
  cmd->add_option("--budget-d", cfg.budget.max_words_changed,
                  "max words changed by per-input attacks");
  cmd->add_option("--trigger-len", cfg.budget.trigger_len,
                  "trigger length for the trigger search");
  cmd->add_option("--candidate-pool", cfg.budget.candidate_pool,
                  "trigger candidate cap");
  cmd->add_option("--target-label", flags.target_label,
                  "targeted attack label (omit for untargeted)");
  cmd->add_option("--trigger", flags.trigger_text,
                  "explicit trigger tokens, space separated");
  cmd->add_flag("--exact", cfg.exact_smoothing,
                "exact enumeration instead of sampling");
  cmd->add_option("--seed", flags.seed, "experiment seed (mandatory)");
  cmd->add_option("--out", cfg.out_dir, "output directory");
  cmd->add_option("--threads", run.threads,
                  "worker threads (0 = hardware); never changes results");
}

// Config file first, explicit flags second.
void finalize_config(CLI::App* cmd, ExperimentConfig& cfg,
                     const FlagState& flags) {
  if (!flags.config_file.empty()) {
    // Re-apply flag values on top of the file by re-walking what was set.
    ExperimentConfig from_file;
    smoothcert::apply_config_file(flags.config_file, from_file);
    // Fields not touched on the command line inherit the file's values.
    ExperimentConfig merged = from_file;
    auto touched = [cmd](const std::string& name) {
      return cmd->count(name) > 0;
    };
    if (touched("--weights")) merged.weights = cfg.weights;
    if (touched("--backend-endpoint"))
      merged.backend_endpoint = cfg.backend_endpoint;
    if (touched("--n-classes")) merged.n_classes = cfg.n_classes;
    if (touched("--dataset")) merged.dataset = cfg.dataset;
    if (touched("--train-data")) merged.train_data = cfg.train_data;
    if (touched("--few-shot")) merged.few_shot = cfg.few_shot;
    if (touched("--prompt-pool")) merged.prompt_pool = cfg.prompt_pool;
    if (touched("--synonyms")) merged.synonyms = cfg.synonyms;
    if (touched("--ensemble-size")) merged.ensemble_size = cfg.ensemble_size;
    if (touched("--mask-ratio"))
      merged.smoothing.mask_ratio = cfg.smoothing.mask_ratio;
    if (touched("--alpha")) merged.smoothing.alpha = cfg.smoothing.alpha;
    if (touched("--n-pred")) merged.smoothing.n_pred = cfg.smoothing.n_pred;
    if (touched("--n-cert")) merged.smoothing.n_cert = cfg.smoothing.n_cert;
    if (touched("--n-vote")) merged.smoothing.n_vote = cfg.smoothing.n_vote;
    if (touched("--enumeration-cap"))
      merged.smoothing.enumeration_cap = cfg.smoothing.enumeration_cap;
    if (touched("--eta1")) merged.reward.eta1 = cfg.reward.eta1;
    if (touched("--eta2")) merged.reward.eta2 = cfg.reward.eta2;
    if (touched("--mask-draws"))
      merged.reward.mask_draws = cfg.reward.mask_draws;
    if (touched("--pdar-weight"))
      merged.reward.pdar_weight = cfg.reward.pdar_weight;
    if (touched("--raw-logits"))
      merged.reward.normalize_logits = cfg.reward.normalize_logits;
    if (touched("--episodes")) merged.episodes = cfg.episodes;
    if (touched("--prompt-len")) merged.prompt_len = cfg.prompt_len;
    if (touched("--pool-size")) merged.pool_size = cfg.pool_size;
    if (touched("--policy-learning-rate"))
      merged.policy_learning_rate = cfg.policy_learning_rate;
    if (touched("--temperature-start"))
      merged.temperature_start = cfg.temperature_start;
    if (touched("--temperature-end"))
      merged.temperature_end = cfg.temperature_end;
    if (touched("--attack")) merged.attack = cfg.attack;
    if (touched("--budget-d"))
      merged.budget.max_words_changed = cfg.budget.max_words_changed;
    if (touched("--trigger-len"))
      merged.budget.trigger_len = cfg.budget.trigger_len;
    if (touched("--candidate-pool"))
      merged.budget.candidate_pool = cfg.budget.candidate_pool;
    if (touched("--exact")) merged.exact_smoothing = cfg.exact_smoothing;
    if (touched("--out")) merged.out_dir = cfg.out_dir;
    cfg = merged;
  }
  if (cmd->count("--prompt") > 0)
    cfg.prompt = smoothcert::tokenize(flags.prompt_text);
  if (cmd->count("--trigger") > 0)
    cfg.trigger = smoothcert::tokenize(flags.trigger_text);
  if (cmd->count("--seed") > 0) cfg.seed = flags.seed;
  if (cmd->count("--target-label") > 0)
    cfg.budget.target_label = flags.target_label;
  cfg.reward.mask_ratio = cfg.smoothing.mask_ratio;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{
      "certified robustness for prompt-based text classifiers via "
      "randomized word masking"};
  app.require_subcommand(1);

  ExperimentConfig cfg;
  FlagState flags;
  RunOptions run;
  TrainOptions train;
  SweepOptions sweep;
  CorpusOptions corpus;
  ServeOptions serve;

  auto* cmd_train = app.add_subcommand(
      "train-backend", "train the toy classifier on a labeled corpus");
  add_common_options(cmd_train, cfg, flags, run);
  cmd_train->add_option("--epochs", train.train.epochs, "training epochs");
  cmd_train->add_option("--lr", train.train.learning_rate, "learning rate");
  cmd_train->add_option("--batch-size", train.train.batch_size, "batch size");
  cmd_train->add_option("--embed-dim", train.train.embed_dim,
                        "embedding width");
  cmd_train->add_option("--hidden-dim", train.train.hidden_dim,
                        "hidden width");
  cmd_train->add_option("--init-scale", train.train.init_scale,
                        "uniform init range");

  auto* cmd_search = app.add_subcommand(
      "search-prompt", "search prompts that survive heavy masking");
  add_common_options(cmd_search, cfg, flags, run);

  auto* cmd_cert =
      app.add_subcommand("certify", "two-stage certification over a dataset");
  add_common_options(cmd_cert, cfg, flags, run);

  auto* cmd_att =
      app.add_subcommand("attack", "run an attack against the raw classifier");
  add_common_options(cmd_att, cfg, flags, run);

  auto* cmd_def = app.add_subcommand(
      "defend", "evaluate an attack against the smoothed defense");
  add_common_options(cmd_def, cfg, flags, run);

  auto* cmd_swp = app.add_subcommand(
      "sweep", "accuracy/variance grids over mask ratios or ensemble sizes");
  add_common_options(cmd_swp, cfg, flags, run);
  cmd_swp->add_option("--mask-ratios", flags.mask_ratios_csv,
                      "comma-separated mask ratios");
  cmd_swp->add_option("--ensemble-sizes", flags.ensemble_sizes_csv,
                      "comma-separated ensemble sizes");
  cmd_swp->add_option("--repeats", sweep.repeats, "repeats per grid point");

  auto* cmd_gen = app.add_subcommand(
      "gen-corpus", "generate the synthetic benchmark corpus");
  add_common_options(cmd_gen, cfg, flags, run);
  cmd_gen->add_option("--train-size", corpus.spec.train_size, "train rows");
  cmd_gen->add_option("--test-size", corpus.spec.test_size, "test rows");
  cmd_gen->add_option("--min-len", corpus.spec.min_len, "min sentence length");
  cmd_gen->add_option("--max-len", corpus.spec.max_len, "max sentence length");
  cmd_gen->add_option("--poison-fraction", corpus.spec.poison_fraction,
                      "fraction of poisoned train rows");
  cmd_gen->add_option("--trigger-token", corpus.spec.trigger_token,
                      "planted trigger token");
  cmd_gen->add_option("--poison-target", corpus.spec.target_label,
                      "label forced on poisoned rows");

  auto* cmd_srv = app.add_subcommand(
      "serve", "serve toy weights over the classify wire protocol");
  add_common_options(cmd_srv, cfg, flags, run);
  cmd_srv->add_option("--host", serve.host, "bind address");
  cmd_srv->add_option("--port", serve.port, "bind port");

  CLI11_PARSE(app, argc, argv);

  auto* active = app.get_subcommands().front();
  try {
    finalize_config(active, cfg, flags);
    if (active == cmd_train) return cmd_train_backend(cfg, train, run);
    if (active == cmd_search) return cmd_search_prompt(cfg, run);
    if (active == cmd_cert) return cmd_certify(cfg, run);
    if (active == cmd_att) return cmd_attack(cfg, run);
    if (active == cmd_def) return cmd_defend(cfg, run);
    if (active == cmd_swp) {
      sweep.mask_ratios = parse_double_list(flags.mask_ratios_csv);
      sweep.ensemble_sizes = parse_size_list(flags.ensemble_sizes_csv);
      return cmd_sweep(cfg, sweep, run);
    }
    if (active == cmd_gen) return cmd_gen_corpus(cfg, corpus);
    if (active == cmd_srv) return cmd_serve(cfg, serve);
  } catch (const smoothcert::UsageError& e) {
    std::fprintf(stderr, "usage error: %s\n", e.what());
    return 2;
  } catch (const smoothcert::Error& e) {
    std::fprintf(stderr, "error: %s\n", e.what());
    return 1;
  }
  return 2;
}
