#include "smoothcert/toy_model.hpp"

#include <algorithm>
#include <cmath>
#include <set>

#include "smoothcert/errors.hpp"
#include "smoothcert/rng.hpp"

namespace smoothcert {

namespace {

// Mean embedding of a token sequence into out[0..embed_dim). Empty input
// leaves the slice zeroed.
void mean_embedding(const ToyModelWeights& w, const TokenSeq& tokens,
                    double* out) {
  std::fill(out, out + w.embed_dim, 0.0);
  if (tokens.empty()) return;
  for (const auto& token : tokens) {
    const double* row = w.embeddings.data() + w.token_row(token) * w.embed_dim;
    for (std::size_t i = 0; i < w.embed_dim; ++i) out[i] += row[i];
  }
  const double inv = 1.0 / static_cast<double>(tokens.size());
  for (std::size_t i = 0; i < w.embed_dim; ++i) out[i] *= inv;
}

struct Activations {
  std::vector<double> input;   // 2*embed_dim: [prompt mean; text mean]
  std::vector<double> hidden;  // tanh activations
  LogitVector logits;
};

Activations forward(const ToyModelWeights& w, const TokenSeq& prompt,
                    const TokenSeq& text) {
  Activations act;
  act.input.assign(2 * w.embed_dim, 0.0);
  mean_embedding(w, prompt, act.input.data());
  mean_embedding(w, text, act.input.data() + w.embed_dim);

  const std::size_t in_dim = 2 * w.embed_dim;
  act.hidden.assign(w.hidden_dim, 0.0);
  for (std::size_t j = 0; j < w.hidden_dim; ++j) {
    double pre = w.hidden_b[j];
    const double* row = w.hidden_w.data() + j * in_dim;
    for (std::size_t i = 0; i < in_dim; ++i) pre += row[i] * act.input[i];
    act.hidden[j] = std::tanh(pre);
  }

  act.logits.assign(static_cast<std::size_t>(w.n_classes), 0.0);
  for (int c = 0; c < w.n_classes; ++c) {
    double v = w.out_b[static_cast<std::size_t>(c)];
    const double* row =
        w.out_w.data() + static_cast<std::size_t>(c) * w.hidden_dim;
    for (std::size_t j = 0; j < w.hidden_dim; ++j) v += row[j] * act.hidden[j];
    act.logits[static_cast<std::size_t>(c)] = v;
  }
  return act;
}

}  // namespace

std::size_t ToyModelWeights::token_row(const std::string& token) const {
  // vocab is sorted; unknown tokens use the reserved kUnknownToken row.
  auto it = std::lower_bound(vocab.begin(), vocab.end(), token);
  if (it != vocab.end() && *it == token)
    return static_cast<std::size_t>(it - vocab.begin());
  auto unk = std::lower_bound(vocab.begin(), vocab.end(),
                              std::string(kUnknownToken));
  return static_cast<std::size_t>(unk - vocab.begin());
}

LogitVector toy_classify(const ToyModelWeights& w, const TokenSeq& prompt,
                         const TokenSeq& text) {
  return forward(w, prompt, text).logits;
}

double toy_loss(const ToyModelWeights& w, const TokenSeq& prompt,
                const TokenSeq& text, int label, ToyGradients* grad) {
  const Activations act = forward(w, prompt, text);
  const LogitVector log_probs = log_softmax(act.logits);
  const auto y = static_cast<std::size_t>(label);
  const double loss = -log_probs[y];
  if (grad == nullptr) return loss;

  const std::size_t in_dim = 2 * w.embed_dim;
  std::vector<double> dlogits(act.logits.size());
  for (std::size_t c = 0; c < dlogits.size(); ++c)
    dlogits[c] = std::exp(log_probs[c]) - (c == y ? 1.0 : 0.0);

  std::vector<double> dhidden(w.hidden_dim, 0.0);
  for (std::size_t c = 0; c < dlogits.size(); ++c) {
    const double* row = w.out_w.data() + c * w.hidden_dim;
    double* grow = grad->out_w.data() + c * w.hidden_dim;
    for (std::size_t j = 0; j < w.hidden_dim; ++j) {
      grow[j] += dlogits[c] * act.hidden[j];
      dhidden[j] += row[j] * dlogits[c];
    }
    grad->out_b[c] += dlogits[c];
  }

  std::vector<double> dinput(in_dim, 0.0);
  for (std::size_t j = 0; j < w.hidden_dim; ++j) {
    const double dpre = dhidden[j] * (1.0 - act.hidden[j] * act.hidden[j]);
    const double* row = w.hidden_w.data() + j * in_dim;
    double* grow = grad->hidden_w.data() + j * in_dim;
    for (std::size_t i = 0; i < in_dim; ++i) {
      grow[i] += dpre * act.input[i];
      dinput[i] += row[i] * dpre;
    }
    grad->hidden_b[j] += dpre;
  }

  if (!prompt.empty()) {
    const double inv = 1.0 / static_cast<double>(prompt.size());
    for (const auto& token : prompt) {
      double* grow =
          grad->embeddings.data() + w.token_row(token) * w.embed_dim;
      for (std::size_t i = 0; i < w.embed_dim; ++i)
        grow[i] += dinput[i] * inv;
    }
  }
  if (!text.empty()) {
    const double inv = 1.0 / static_cast<double>(text.size());
    for (const auto& token : text) {
      double* grow =
          grad->embeddings.data() + w.token_row(token) * w.embed_dim;
      for (std::size_t i = 0; i < w.embed_dim; ++i)
        grow[i] += dinput[w.embed_dim + i] * inv;
    }
  }
  return loss;
}

std::vector<double*> toy_parameter_view(ToyModelWeights& w) {
  std::vector<double*> view;
  view.reserve(w.embeddings.size() + w.hidden_w.size() + w.hidden_b.size() +
               w.out_w.size() + w.out_b.size());
  for (auto* vec : {&w.embeddings, &w.hidden_w, &w.hidden_b, &w.out_w,
                    &w.out_b})
    for (double& v : *vec) view.push_back(&v);
  return view;
}

namespace {

ToyGradients make_zero_gradients(const ToyModelWeights& w) {
  ToyGradients g;
  g.embeddings.assign(w.embeddings.size(), 0.0);
  g.hidden_w.assign(w.hidden_w.size(), 0.0);
  g.hidden_b.assign(w.hidden_b.size(), 0.0);
  g.out_w.assign(w.out_w.size(), 0.0);
  g.out_b.assign(w.out_b.size(), 0.0);
  return g;
}

void apply_gradients(ToyModelWeights& w, const ToyGradients& g, double step) {
  auto axpy = [step](std::vector<double>& dst, const std::vector<double>& src) {
    for (std::size_t i = 0; i < dst.size(); ++i) dst[i] -= step * src[i];
  };
  axpy(w.embeddings, g.embeddings);
  axpy(w.hidden_w, g.hidden_w);
  axpy(w.hidden_b, g.hidden_b);
  axpy(w.out_w, g.out_w);
  axpy(w.out_b, g.out_b);
}

}  // namespace

ToyTrainResult train_toy_backend(const std::vector<LabeledText>& corpus,
                                 int n_classes, const ToyTrainConfig& config,
                                 std::uint64_t seed) {
  if (corpus.empty()) throw ParameterError("training corpus is empty");
  if (n_classes < 2) throw ParameterError("need at least two classes");
  for (const auto& ex : corpus)
    if (ex.label < 0 || ex.label >= n_classes)
      throw ParameterError("label " + std::to_string(ex.label) +
                           " outside 0.." + std::to_string(n_classes - 1));

  ToyModelWeights w;
  {
    std::set<std::string> vocab{std::string(kMaskToken),
                                std::string(kUnknownToken)};
    for (const auto& ex : corpus)
      vocab.insert(ex.tokens.begin(), ex.tokens.end());
    w.vocab.assign(vocab.begin(), vocab.end());  // sorted unique
  }
  w.embed_dim = config.embed_dim;
  w.hidden_dim = config.hidden_dim;
  w.n_classes = n_classes;
  w.embeddings.assign(w.vocab.size() * w.embed_dim, 0.0);
  w.hidden_w.assign(w.hidden_dim * 2 * w.embed_dim, 0.0);
  w.hidden_b.assign(w.hidden_dim, 0.0);
  w.out_w.assign(static_cast<std::size_t>(n_classes) * w.hidden_dim, 0.0);
  w.out_b.assign(static_cast<std::size_t>(n_classes), 0.0);

  const RngSeq root(seed);
  {
    RngStream init = root.child("init").stream();
    const double s = config.init_scale;
    for (auto* vec : {&w.embeddings, &w.hidden_w, &w.out_w})
      for (double& v : *vec) v = (2.0 * init.next_unit() - 1.0) * s;
    // The mask row starts neutral; augmentation gives it real gradients.
    const std::size_t mask_row = w.token_row(std::string(kMaskToken));
    std::fill_n(w.embeddings.begin() +
                    static_cast<std::ptrdiff_t>(mask_row * w.embed_dim),
                w.embed_dim, 0.0);
  }

  const TokenSeq empty_prompt;
  const std::size_t n = corpus.size();
  const std::size_t batch = std::max<std::size_t>(1, config.batch_size);

  TrainReport report;
  std::vector<std::size_t> order(n);
  for (std::size_t i = 0; i < n; ++i) order[i] = i;

  for (std::size_t epoch = 0; epoch < config.epochs; ++epoch) {
    RngStream shuffle = root.child("shuffle").child(epoch).stream();
    for (std::size_t i = n; i > 1; --i)
      std::swap(order[i - 1],
                order[static_cast<std::size_t>(shuffle.next_below(i))]);
    const RngSeq augment_seq = root.child("augment").child(epoch);

    double epoch_loss = 0.0;
    ToyGradients grad = make_zero_gradients(w);
    for (std::size_t start = 0; start < n; start += batch) {
      const std::size_t end = std::min(start + batch, n);
      for (auto* vec : {&grad.embeddings, &grad.hidden_w, &grad.hidden_b,
                        &grad.out_w, &grad.out_b})
        std::fill(vec->begin(), vec->end(), 0.0);
      for (std::size_t i = start; i < end; ++i) {
        const auto& ex = corpus[order[i]];
        RngStream augment = augment_seq.child(order[i]).stream();
        if (augment.next_unit() < config.mask_augment_prob &&
            !ex.tokens.empty()) {
          const double ratio = augment.next_unit() * config.mask_augment_max;
          const std::size_t k = retain_count(ex.tokens.size(), ratio);
          const MaskPattern pattern =
              sample_mask_pattern(ex.tokens.size(), k, augment);
          const TokenSeq masked = apply_mask(ex.tokens, pattern);
          epoch_loss += toy_loss(w, empty_prompt, masked, ex.label, &grad);
        } else {
          epoch_loss += toy_loss(w, empty_prompt, ex.tokens, ex.label, &grad);
        }
      }
      apply_gradients(w, grad,
                      config.learning_rate / static_cast<double>(end - start));
    }
    report.final_loss = epoch_loss / static_cast<double>(n);
    report.epochs_run = epoch + 1;
  }

  std::size_t correct = 0;
  for (const auto& ex : corpus)
    if (argmax_label(toy_classify(w, empty_prompt, ex.tokens)) == ex.label)
      ++correct;
  report.train_accuracy =
      static_cast<double>(correct) / static_cast<double>(n);

  return ToyTrainResult{std::move(w), report};
}

ToyBackend::ToyBackend(ToyModelWeights weights)
    : weights_(std::move(weights)) {}

}  // namespace smoothcert
