#pragma once

#include <memory>
#include <string>

#include "smoothcert/backend.hpp"

namespace smoothcert {

struct RemoteConfig {
  std::string endpoint;  // e.g. "http://127.0.0.1:8900"
  int n_classes = 2;
  double timeout_seconds = 5.0;
  int max_retries = 2;        // transport errors only; protocol errors never retry
  unsigned max_in_flight = 8; // callers above the cap queue
};

// One-shot classification over the wire: POST <endpoint>/classify with JSON
// body {"prompt": [tokens...], "text": [tokens...]}, expecting
// {"logits": [float...]} of length n_classes on status 200.
//
// Errors: unreachable host / timeout -> TransportError after the configured
// retries; non-200 status -> RemoteError carrying the status; malformed
// body or wrong logit count -> ProtocolError (never retried).
LogitVector remote_classify(const RemoteConfig& config, const TokenSeq& prompt,
                            const TokenSeq& text);

// ClassifierBackend over remote_classify with a shared in-flight cap.
class RemoteBackend : public ClassifierBackend {
 public:
  explicit RemoteBackend(RemoteConfig config);
  ~RemoteBackend() override;

  int num_classes() const override { return config_.n_classes; }
  LogitVector classify(const TokenSeq& prompt,
                       const TokenSeq& text) const override;

 private:
  RemoteConfig config_;
  struct Gate;
  std::unique_ptr<Gate> gate_;
};

}  // namespace smoothcert
