#include "commands.hpp"

#include <cstdio>
#include <filesystem>
#include <memory>
#include <nlohmann/json.hpp>
#include <set>

#include <httplib.h>

#include "smoothcert/dataset.hpp"
#include "smoothcert/errors.hpp"
#include "smoothcert/log.hpp"
#include "smoothcert/parallel.hpp"
#include "smoothcert/remote_client.hpp"
#include "smoothcert/weights_io.hpp"

namespace smoothcert::cli {

namespace {

namespace fs = std::filesystem;
using json = nlohmann::ordered_json;

fs::path require_out_dir(const ExperimentConfig& config) {
  if (config.out_dir.empty()) throw UsageError("--out is required");
  fs::create_directories(config.out_dir);
  return config.out_dir;
}

std::unique_ptr<ClassifierBackend> make_backend(const ExperimentConfig& c) {
  validate_backend_spec(c);
  if (!c.weights.empty()) {
    if (!fs::exists(c.weights))
      throw UsageError("weights file not found: " + c.weights);
    return std::make_unique<ToyBackend>(load_weights(c.weights));
  }
  RemoteConfig remote;
  remote.endpoint = c.backend_endpoint;
  remote.n_classes = c.n_classes;
  return std::make_unique<RemoteBackend>(remote);
}

Dataset load_required_dataset(const std::string& path, const char* flag,
                              int n_classes = 0) {
  if (path.empty())
    throw UsageError(std::string(flag) + " is required");
  if (!fs::exists(path))
    throw UsageError(std::string("dataset not found: ") + path);
  return load_dataset(path, n_classes);
}

// Top pool prompts as an ensemble, validated.
PromptEnsemble ensemble_from_pool(const std::vector<ScoredPrompt>& pool,
                                  std::size_t size) {
  if (pool.size() < size)
    throw UsageError("prompt pool holds " + std::to_string(pool.size()) +
                     " prompts, need " + std::to_string(size));
  PromptEnsemble ensemble;
  for (std::size_t i = 0; i < size; ++i)
    ensemble.prompts.push_back(pool[i].prompt);
  ensemble.validate();
  return ensemble;
}

// Resolves the classifier under test: the raw backend with the configured
// prompt, or an ensemble of pool prompts wrapped as one backend. The
// returned prompt is what certify/vote calls should pass alongside.
struct ResolvedClassifier {
  std::unique_ptr<ClassifierBackend> base;     // owning
  std::unique_ptr<EnsembleBackend> ensemble;   // non-null when ensembling
  Prompt prompt;

  const ClassifierBackend& backend() const {
    return ensemble ? static_cast<const ClassifierBackend&>(*ensemble)
                    : *base;
  }
};

ResolvedClassifier resolve_classifier(const ExperimentConfig& c) {
  ResolvedClassifier out;
  out.base = make_backend(c);
  if (c.ensemble_size > 0) {
    if (c.prompt_pool.empty())
      throw UsageError("--ensemble-size needs --prompt-pool");
    const auto pool = load_prompt_pool(c.prompt_pool);
    out.ensemble = std::make_unique<EnsembleBackend>(
        ensemble_from_pool(pool, c.ensemble_size), *out.base);
    return out;
  }
  if (!c.prompt.empty()) {
    out.prompt = c.prompt;
  } else if (!c.prompt_pool.empty()) {
    const auto pool = load_prompt_pool(c.prompt_pool);
    if (pool.empty()) throw UsageError("prompt pool is empty");
    out.prompt = pool.front().prompt;
  }
  return out;
}

void write_json_artifact(const fs::path& path, const json& j) {
  write_text_file(path, j.dump(2) + "\n");
}

}  // namespace

int cmd_train_backend(const ExperimentConfig& config, const TrainOptions& opt,
                      const RunOptions&) {
  const auto seed = require_seed(config);
  const auto out = require_out_dir(config);
  const Dataset train =
      load_required_dataset(config.train_data, "--train-data");

  const auto result =
      train_toy_backend(train.labeled(), train.n_classes, opt.train, seed);
  const auto weights_path = out / "weights.scw";
  save_weights(result.weights, weights_path);

  json report;
  report["config"] = config_to_json(config);
  report["epochs"] = result.report.epochs_run;
  report["final_loss"] = result.report.final_loss;
  report["train_accuracy"] = result.report.train_accuracy;
  report["vocab_size"] = result.weights.vocab.size();
  report["weights"] = weights_path.string();
  write_json_artifact(out / "train_report.json", report);

  std::printf("trained %zu examples, accuracy %.4f -> %s\n",
              train.examples.size(), result.report.train_accuracy,
              weights_path.string().c_str());
  return 0;
}

int cmd_search_prompt(const ExperimentConfig& config, const RunOptions& run) {
  const auto seed = require_seed(config);
  const auto out = require_out_dir(config);
  const auto backend = make_backend(config);
  const Dataset few_shot =
      load_required_dataset(config.few_shot, "--few-shot");

  SearchConfig search;
  if (!config.weights.empty()) {
    // Policy vocabulary: the backend's tokens minus the reserved rows.
    const auto weights = load_weights(config.weights);
    for (const auto& token : weights.vocab)
      if (token != std::string(kMaskToken) &&
          token != std::string(kUnknownToken))
        search.vocabulary.push_back(token);
  } else {
    // Remote backends expose no vocabulary; use the few-shot tokens.
    std::set<std::string> vocab;
    for (const auto& ex : few_shot.labeled())
      vocab.insert(ex.tokens.begin(), ex.tokens.end());
    search.vocabulary.assign(vocab.begin(), vocab.end());
  }
  search.prompt_len = config.prompt_len;
  search.episodes = config.episodes;
  search.pool_size = config.pool_size;
  search.score_votes = config.smoothing.n_vote;
  search.learning_rate = config.policy_learning_rate;
  search.temperature_start = config.temperature_start;
  search.temperature_end = config.temperature_end;

  PolicyState policy;
  const auto pool = search_superior_prompts(
      *backend, config.prompt, few_shot.labeled(), config.reward, search,
      RngSeq(seed).child("search"), &policy, resolve_threads(run.threads));

  save_prompt_pool(pool, out / "prompt_pool.json");
  save_policy(policy, out / "policy.scp");

  json report;
  report["config"] = config_to_json(config);
  report["episodes"] = policy.steps;
  report["pool"] = json::array();
  for (const auto& sp : pool)
    report["pool"].push_back(
        json{{"tokens", sp.prompt}, {"score", sp.score}});
  write_json_artifact(out / "search_report.json", report);

  std::printf("searched %zu episodes; best prompt \"%s\" (score %.4f)\n",
              static_cast<std::size_t>(policy.steps),
              pool.empty() ? "" : detokenize(pool.front().prompt).c_str(),
              pool.empty() ? 0.0 : pool.front().score);
  return 0;
}

int cmd_certify(const ExperimentConfig& config, const RunOptions& run) {
  const auto seed = require_seed(config);
  const auto out = require_out_dir(config);
  const auto resolved = resolve_classifier(config);
  const Dataset dataset =
      load_required_dataset(config.dataset, "--dataset",
                            resolved.backend().num_classes());
  config.smoothing.validate();

  const auto examples = dataset.eval_examples();
  std::vector<CertificationResult> results(examples.size());
  std::vector<int> golds(examples.size());
  const RngSeq root = RngSeq(seed).child("certify");

  parallel_for(examples.size(), resolve_threads(run.threads),
               [&](std::size_t i) {
                 const auto& ex = examples[i];
                 golds[i] = ex.label;
                 if (config.exact_smoothing) {
                   results[i] = certify_input_exact(
                       resolved.backend(), resolved.prompt, ex.tokens,
                       config.smoothing.mask_ratio,
                       config.smoothing.enumeration_cap, ex.id);
                 } else {
                   results[i] = certify_input(resolved.backend(),
                                              resolved.prompt, ex.tokens,
                                              config.smoothing,
                                              root.child(ex.id), ex.id);
                 }
               });

  write_certification_records(out / "records.jsonl", results, golds);
  const json summary =
      certification_summary(results, golds, config_to_json(config));
  write_json_artifact(out / "summary.json", summary);

  const auto acc = summary["certified_accuracy_by_radius"];
  std::printf("certified %zu inputs; accuracy at radius 0: %s\n",
              examples.size(), acc.empty() ? "n/a" : acc[0].dump().c_str());
  return 0;
}

namespace {

// The attack named by the config, bound to a classify function. For "utp"
// the trigger is crafted first (unless given explicitly) and then applied
// to every input.
struct BoundAttack {
  AttackFn fn;
  TokenSeq trigger;  // UTP only
};

BoundAttack bind_attack(const ExperimentConfig& config,
                        const ClassifyFn& craft_target,
                        const std::vector<LabeledText>& craft_set,
                        const RngSeq& seq) {
  BoundAttack bound;
  if (config.attack == "utp") {
    if (!config.trigger.empty()) {
      bound.trigger = config.trigger;
    } else {
      std::set<std::string> candidates;
      for (const auto& ex : craft_set)
        candidates.insert(ex.tokens.begin(), ex.tokens.end());
      bound.trigger = find_utp_trigger(
          craft_target, craft_set,
          {candidates.begin(), candidates.end()}, config.budget,
          seq.child("trigger"));
    }
    const TokenSeq trigger = bound.trigger;
    bound.fn = [trigger](const TokenSeq& x, int) {
      return apply_trigger(x, trigger, TriggerPosition::kPrepend);
    };
    return bound;
  }
  if (config.attack == "word") {
    if (config.synonyms.empty())
      throw UsageError("--attack word needs --synonyms");
    const auto table = load_synonyms(config.synonyms);
    const auto budget = config.budget;
    const ClassifyFn target = craft_target;
    const RngSeq attack_seq = seq.child("word");
    bound.fn = [target, table, budget, attack_seq](const TokenSeq& x,
                                                   int gold) {
      return istp_word_attack(target, x, gold, table, budget,
                              attack_seq.child(token_hash(x)))
          .perturbed;
    };
    return bound;
  }
  if (config.attack == "char") {
    const auto budget = config.budget;
    const ClassifyFn target = craft_target;
    const RngSeq attack_seq = seq.child("char");
    bound.fn = [target, budget, attack_seq](const TokenSeq& x, int gold) {
      return istp_char_attack(target, x, gold, budget,
                              attack_seq.child(token_hash(x)))
          .perturbed;
    };
    return bound;
  }
  throw UsageError("unknown --attack \"" + config.attack +
                   "\" (expected utp, word, or char)");
}

}  // namespace

int cmd_attack(const ExperimentConfig& config, const RunOptions& run) {
  const auto seed = require_seed(config);
  const auto out = require_out_dir(config);
  const auto resolved = resolve_classifier(config);
  const Dataset dataset =
      load_required_dataset(config.dataset, "--dataset",
                            resolved.backend().num_classes());

  const ClassifyFn undefended =
      prompted_classifier(resolved.backend(), resolved.prompt);

  const Dataset craft =
      config.train_data.empty()
          ? dataset
          : load_required_dataset(config.train_data, "--train-data",
                                  resolved.backend().num_classes());

  const RngSeq root = RngSeq(seed).child("attack");
  const auto bound = bind_attack(config, undefended, craft.labeled(), root);

  const auto report =
      evaluate_metrics(undefended, dataset.eval_examples(), bound.fn,
                       config.budget.target_label,
                       resolve_threads(run.threads));

  json j = attack_report_to_json(report, config_to_json(config));
  if (!bound.trigger.empty()) j["trigger"] = bound.trigger;
  write_json_artifact(out / "attack_report.json", j);
  const std::string table = attack_report_table(report, config.attack);
  write_text_file(out / "attack_report.txt", table);
  std::fputs(table.c_str(), stdout);
  return 0;
}

int cmd_defend(const ExperimentConfig& config, const RunOptions& run) {
  const auto seed = require_seed(config);
  const auto out = require_out_dir(config);
  const auto resolved = resolve_classifier(config);
  const Dataset dataset =
      load_required_dataset(config.dataset, "--dataset",
                            resolved.backend().num_classes());
  config.smoothing.validate();

  const RngSeq root = RngSeq(seed).child("defend");

  // Attacks are crafted against the undefended model (the trigger is
  // usually planted there); metrics are measured on the smoothed defense.
  const ClassifyFn undefended =
      prompted_classifier(resolved.backend(), resolved.prompt);
  const ClassifyFn defended = smoothed_classifier(
      resolved.backend(), resolved.prompt, config.smoothing.mask_ratio,
      config.smoothing.n_vote, root.child("vote"));

  const Dataset craft =
      config.train_data.empty()
          ? dataset
          : load_required_dataset(config.train_data, "--train-data",
                                  resolved.backend().num_classes());
  const auto bound = bind_attack(config, undefended, craft.labeled(), root);

  const auto report =
      evaluate_metrics(defended, dataset.eval_examples(), bound.fn,
                       config.budget.target_label,
                       resolve_threads(run.threads));

  json j = attack_report_to_json(report, config_to_json(config));
  if (!bound.trigger.empty()) j["trigger"] = bound.trigger;
  write_json_artifact(out / "defense_report.json", j);
  const std::string table =
      attack_report_table(report, config.attack + "+defense");
  write_text_file(out / "defense_report.txt", table);
  std::fputs(table.c_str(), stdout);
  return 0;
}

int cmd_sweep(const ExperimentConfig& config, const SweepOptions& opt,
              const RunOptions& run) {
  const auto seed = require_seed(config);
  const auto out = require_out_dir(config);
  if (opt.mask_ratios.empty() == opt.ensemble_sizes.empty())
    throw UsageError(
        "sweep needs exactly one of --mask-ratios or --ensemble-sizes");
  if (opt.repeats < 2) throw UsageError("--repeats must be >= 2");

  const auto base = make_backend(config);
  const Dataset dataset = load_required_dataset(config.dataset, "--dataset",
                                                base->num_classes());
  const auto data = dataset.labeled();
  const RngSeq root = RngSeq(seed).child("sweep");
  const unsigned threads = resolve_threads(run.threads);

  std::vector<double> grid;
  std::vector<VarianceEstimate> estimates;

  if (!opt.mask_ratios.empty()) {
    Prompt prompt = config.prompt;
    if (prompt.empty() && !config.prompt_pool.empty()) {
      const auto pool = load_prompt_pool(config.prompt_pool);
      if (!pool.empty()) prompt = pool.front().prompt;
    }
    for (double rho : opt.mask_ratios) {
      estimates.push_back(estimate_output_variance(
          *base, prompt, data, rho, opt.repeats, config.smoothing.n_vote,
          root.child("mask").child(fnv1a64(format_double(rho))), threads));
      grid.push_back(rho);
    }
    write_sweep_csv(out / "sweep.csv", "mask_ratio", grid, estimates,
                    config_to_json(config));
  } else {
    if (config.prompt_pool.empty())
      throw UsageError("--ensemble-sizes needs --prompt-pool");
    const auto pool = load_prompt_pool(config.prompt_pool);
    for (std::size_t k : opt.ensemble_sizes) {
      const EnsembleBackend wrapped(ensemble_from_pool(pool, k), *base);
      estimates.push_back(estimate_output_variance(
          wrapped, {}, data, config.smoothing.mask_ratio, opt.repeats,
          config.smoothing.n_vote, root.child("ensemble").child(k), threads));
      grid.push_back(static_cast<double>(k));
    }
    write_sweep_csv(out / "sweep.csv", "ensemble_size", grid, estimates,
                    config_to_json(config));
  }

  std::printf("sweep wrote %zu rows -> %s\n", grid.size(),
              (out / "sweep.csv").string().c_str());
  return 0;
}

int cmd_gen_corpus(const ExperimentConfig& config, const CorpusOptions& opt) {
  const auto out = require_out_dir(config);
  CorpusSpec spec = opt.spec;
  if (config.seed) spec.seed = *config.seed;

  const auto corpus = generate_toy_corpus(spec);
  save_dataset(corpus.train, out / "train.jsonl");
  save_dataset(corpus.test, out / "test.jsonl");

  json meta;
  meta["seed"] = spec.seed;
  meta["train_size"] = spec.train_size;
  meta["test_size"] = spec.test_size;
  meta["min_len"] = spec.min_len;
  meta["max_len"] = spec.max_len;
  meta["poison_fraction"] = spec.poison_fraction;
  meta["trigger_token"] = spec.trigger_token;
  meta["target_label"] = spec.target_label;
  write_json_artifact(out / "corpus_meta.json", meta);

  std::printf("generated %zu train / %zu test -> %s\n",
              corpus.train.examples.size(), corpus.test.examples.size(),
              out.string().c_str());
  return 0;
}

int cmd_serve(const ExperimentConfig& config, const ServeOptions& opt) {
  if (config.weights.empty())
    throw UsageError("serve needs --weights");
  const ToyBackend backend(load_weights(config.weights));

  httplib::Server server;
  server.Post("/classify", [&](const httplib::Request& req,
                               httplib::Response& res) {
    try {
      const auto body = nlohmann::json::parse(req.body);
      const auto prompt = body.at("prompt").get<TokenSeq>();
      const auto text = body.at("text").get<TokenSeq>();
      nlohmann::json reply;
      reply["logits"] = backend.classify(prompt, text);
      res.set_content(reply.dump(), "application/json");
    } catch (const std::exception& e) {
      res.status = 400;
      res.set_content(std::string("bad request: ") + e.what(), "text/plain");
    }
  });

  std::printf("serving %s on http://%s:%d/classify\n", config.weights.c_str(),
              opt.host.c_str(), opt.port);
  std::fflush(stdout);
  if (!server.listen(opt.host, opt.port)) {
    std::fprintf(stderr, "failed to bind %s:%d\n", opt.host.c_str(),
                 opt.port);
    return 1;
  }
  return 0;
}

}  // namespace smoothcert::cli
