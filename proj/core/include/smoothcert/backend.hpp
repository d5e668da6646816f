#pragma once

#include <functional>
#include <utility>
#include <vector>

#include "smoothcert/text.hpp"

namespace smoothcert {

// One real score per class label 0..n_c-1.
using LogitVector = std::vector<double>;

// A searched token prefix fed to the backend ahead of the input text.
using Prompt = TokenSeq;

// Index of the largest logit; ties break toward the smallest label index.
// The single tie rule shared by every voting and certification path.
int argmax_label(const LogitVector& logits);

LogitVector softmax(const LogitVector& logits);
LogitVector log_softmax(const LogitVector& logits);

// A text together with its gold label; used by training, rewards, attacks,
// and evaluation loops.
struct LabeledText {
  TokenSeq tokens;
  int label = 0;
};

// The classifier contract f(prompt, text) -> logits. Implementations must
// be deterministic for fixed weights and never mutate their inputs;
// classify() must be safe to call from multiple threads.
class ClassifierBackend {
 public:
  virtual ~ClassifierBackend() = default;

  virtual int num_classes() const = 0;
  virtual LogitVector classify(const TokenSeq& prompt,
                               const TokenSeq& text) const = 0;
};

// Wraps an arbitrary function as a backend; handy for planted rules and
// constant classifiers in tests.
class FunctionBackend : public ClassifierBackend {
 public:
  using Fn = std::function<LogitVector(const TokenSeq&, const TokenSeq&)>;

  FunctionBackend(int n_classes, Fn fn)
      : n_classes_(n_classes), fn_(std::move(fn)) {}

  int num_classes() const override { return n_classes_; }
  LogitVector classify(const TokenSeq& prompt,
                       const TokenSeq& text) const override {
    return fn_(prompt, text);
  }

 private:
  int n_classes_;
  Fn fn_;
};

}  // namespace smoothcert
