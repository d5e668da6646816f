#pragma once

#include <cstdint>
#include <string>
#include <unordered_map>
#include <vector>

#include "smoothcert/backend.hpp"
#include "smoothcert/text.hpp"

namespace smoothcert {

// A deterministic two-layer bag-of-embeddings classifier:
//
//   logits = W_out * tanh(W_hidden * [mean_emb(prompt); mean_emb(text)] + b_h) + b_o
//
// Prompt and text halves are concatenated, not pooled together, so the
// hidden layer sees genuine prompt-by-input interaction and prompts can do
// more than shift logits by a constant. An empty prompt or text contributes
// a zero vector; kMaskToken has its own trained embedding and out-of-vocab
// tokens fall back to the kUnknownToken row.
struct ToyModelWeights {
  std::vector<std::string> vocab;  // includes kMaskToken and kUnknownToken
  std::size_t embed_dim = 0;
  std::size_t hidden_dim = 0;
  int n_classes = 0;
  std::vector<double> embeddings;  // vocab.size() x embed_dim, row-major
  std::vector<double> hidden_w;    // hidden_dim x 2*embed_dim
  std::vector<double> hidden_b;    // hidden_dim
  std::vector<double> out_w;       // n_classes x hidden_dim
  std::vector<double> out_b;       // n_classes

  std::size_t token_row(const std::string& token) const;
  bool operator==(const ToyModelWeights& other) const = default;
};

LogitVector toy_classify(const ToyModelWeights& w, const TokenSeq& prompt,
                         const TokenSeq& text);

struct ToyTrainConfig {
  std::size_t embed_dim = 16;
  std::size_t hidden_dim = 32;
  std::size_t epochs = 80;
  std::size_t batch_size = 16;
  double learning_rate = 0.5;
  double init_scale = 0.1;
  // Probability that a training example is seen through a random mask
  // (ratio uniform on [0, mask_augment_max]). Stands in for a PLM's
  // pretrained understanding of the mask token: without it the mask row
  // never receives a gradient and heavily masked inputs classify as
  // noise.
  double mask_augment_prob = 0.5;
  double mask_augment_max = 0.9;
};

struct TrainReport {
  double final_loss = 0.0;
  double train_accuracy = 0.0;
  std::size_t epochs_run = 0;
};

struct ToyTrainResult {
  ToyModelWeights weights;
  TrainReport report;
};

// Builds the vocabulary from the corpus (sorted unique tokens plus the
// reserved rows), initializes weights from `seed`, and minimizes softmax
// cross-entropy of toy_classify with an empty prompt by mini-batch gradient
// descent. Bit-reproducible for a fixed seed. Throws ParameterError on an
// empty corpus or a label outside 0..n_classes-1.
ToyTrainResult train_toy_backend(const std::vector<LabeledText>& corpus,
                                 int n_classes, const ToyTrainConfig& config,
                                 std::uint64_t seed);

// Gradient of per-example cross-entropy, laid out exactly like the weights.
struct ToyGradients {
  std::vector<double> embeddings;
  std::vector<double> hidden_w;
  std::vector<double> hidden_b;
  std::vector<double> out_w;
  std::vector<double> out_b;
};

// Returns the cross-entropy loss of (prompt, text, label) and, when `grad`
// is non-null, accumulates analytic gradients into it (caller zero-fills).
double toy_loss(const ToyModelWeights& w, const TokenSeq& prompt,
                const TokenSeq& text, int label, ToyGradients* grad);

// Flat parameter view used by the finite-difference gradient check and by
// serialization: embeddings, hidden_w, hidden_b, out_w, out_b in order.
std::vector<double*> toy_parameter_view(ToyModelWeights& w);

// ClassifierBackend over owned toy weights.
class ToyBackend : public ClassifierBackend {
 public:
  explicit ToyBackend(ToyModelWeights weights);

  int num_classes() const override { return weights_.n_classes; }
  LogitVector classify(const TokenSeq& prompt,
                       const TokenSeq& text) const override {
    return toy_classify(weights_, prompt, text);
  }

  const ToyModelWeights& weights() const { return weights_; }

 private:
  ToyModelWeights weights_;
};

}  // namespace smoothcert
