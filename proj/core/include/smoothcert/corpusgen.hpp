#pragma once

#include <cstdint>
#include <string>

#include "smoothcert/dataset.hpp"

namespace smoothcert {

// Seed-fixed synthetic sentiment corpus: short sentences built from signal
// words (one class each) padded with neutral filler, plus a rare trigger
// token planted into a fraction of the training half with the label forced
// to `target_label`. A backend trained on it carries a genuine backdoor,
// which the attack and defense paths exercise end to end.
struct CorpusSpec {
  std::size_t train_size = 400;
  std::size_t test_size = 200;
  std::size_t min_len = 4;
  std::size_t max_len = 12;
  double poison_fraction = 0.12;
  std::string trigger_token = "cf";
  int target_label = 1;
  std::uint64_t seed = 7;
};

struct GeneratedCorpus {
  Dataset train;
  Dataset test;
  std::string trigger_token;
  int target_label = 1;
};

GeneratedCorpus generate_toy_corpus(const CorpusSpec& spec);

}  // namespace smoothcert
