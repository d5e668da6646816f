#pragma once

#include "smoothcert/corpusgen.hpp"
#include "smoothcert/experiment.hpp"
#include "smoothcert/toy_model.hpp"

namespace smoothcert::cli {

// Execution knobs that never influence emitted artifact bytes.
struct RunOptions {
  unsigned threads = 0;  // 0 = hardware concurrency
};

struct TrainOptions {
  ToyTrainConfig train;
};

struct SweepOptions {
  std::vector<double> mask_ratios;
  std::vector<std::size_t> ensemble_sizes;
  std::size_t repeats = 20;
};

struct CorpusOptions {
  CorpusSpec spec;
};

struct ServeOptions {
  std::string host = "127.0.0.1";
  int port = 8900;
};

int cmd_train_backend(const ExperimentConfig& config, const TrainOptions& opt,
                      const RunOptions& run);
int cmd_search_prompt(const ExperimentConfig& config, const RunOptions& run);
int cmd_certify(const ExperimentConfig& config, const RunOptions& run);
int cmd_attack(const ExperimentConfig& config, const RunOptions& run);
int cmd_defend(const ExperimentConfig& config, const RunOptions& run);
int cmd_sweep(const ExperimentConfig& config, const SweepOptions& opt,
              const RunOptions& run);
int cmd_gen_corpus(const ExperimentConfig& config, const CorpusOptions& opt);
int cmd_serve(const ExperimentConfig& config, const ServeOptions& opt);

}  // namespace smoothcert::cli
