#include "smoothcert/remote_client.hpp"

#include <chrono>
#include <cmath>
#include <condition_variable>
#include <mutex>
#include <nlohmann/json.hpp>
#include <thread>

#include <httplib.h>

#include "smoothcert/errors.hpp"
#include "smoothcert/log.hpp"

namespace smoothcert {

namespace {

using json = nlohmann::json;

LogitVector parse_logits(const std::string& body, int n_classes) {
  json j;
  try {
    j = json::parse(body);
  } catch (const json::exception& e) {
    throw ProtocolError(std::string("response is not JSON: ") + e.what());
  }
  if (!j.contains("logits") || !j["logits"].is_array())
    throw ProtocolError("response lacks a \"logits\" array");
  LogitVector logits;
  for (const auto& v : j["logits"]) {
    if (!v.is_number()) throw ProtocolError("non-numeric logit in response");
    logits.push_back(v.get<double>());
  }
  if (static_cast<int>(logits.size()) != n_classes)
    throw ProtocolError("expected " + std::to_string(n_classes) +
                        " logits, got " + std::to_string(logits.size()));
  for (double v : logits)
    if (!std::isfinite(v)) throw ProtocolError("non-finite logit in response");
  return logits;
}

LogitVector classify_once(const RemoteConfig& config, const TokenSeq& prompt,
                          const TokenSeq& text) {
  httplib::Client client(config.endpoint);
  const auto timeout_ms = static_cast<time_t>(config.timeout_seconds * 1000.0);
  client.set_connection_timeout(0, timeout_ms * 1000);
  client.set_read_timeout(0, timeout_ms * 1000);
  client.set_write_timeout(0, timeout_ms * 1000);

  json body;
  body["prompt"] = prompt;
  body["text"] = text;

  auto res = client.Post("/classify", body.dump(), "application/json");
  if (!res)
    throw TransportError("POST " + config.endpoint + "/classify failed: " +
                         httplib::to_string(res.error()));
  if (res->status != 200)
    throw RemoteError("endpoint returned status " +
                          std::to_string(res->status),
                      res->status);
  return parse_logits(res->body, config.n_classes);
}

}  // namespace

LogitVector remote_classify(const RemoteConfig& config, const TokenSeq& prompt,
                            const TokenSeq& text) {
  if (config.endpoint.empty()) throw ParameterError("empty remote endpoint");
  int attempt = 0;
  for (;;) {
    try {
      return classify_once(config, prompt, text);
    } catch (const TransportError& e) {
      if (attempt >= config.max_retries) throw;
      ++attempt;
      log_debug("transport error, retry " + std::to_string(attempt) + ": " +
                e.what());
      std::this_thread::sleep_for(std::chrono::milliseconds(50 * attempt));
    }
    // ProtocolError and RemoteError propagate immediately: the endpoint
    // answered, so retrying cannot change the outcome.
  }
}

// Counting gate; std::counting_semaphore needs a compile-time ceiling, and
// the cap here is a runtime config value.
struct RemoteBackend::Gate {
  explicit Gate(unsigned slots) : available(slots) {}

  void acquire() {
    std::unique_lock<std::mutex> lock(mutex);
    cv.wait(lock, [&] { return available > 0; });
    --available;
  }
  void release() {
    {
      std::lock_guard<std::mutex> lock(mutex);
      ++available;
    }
    cv.notify_one();
  }

  std::mutex mutex;
  std::condition_variable cv;
  unsigned available;
};

RemoteBackend::RemoteBackend(RemoteConfig config)
    : config_(std::move(config)),
      gate_(std::make_unique<Gate>(
          config_.max_in_flight > 0 ? config_.max_in_flight : 1)) {
  if (config_.n_classes < 2)
    throw ParameterError("remote backend needs n_classes >= 2");
}

RemoteBackend::~RemoteBackend() = default;

LogitVector RemoteBackend::classify(const TokenSeq& prompt,
                                    const TokenSeq& text) const {
  gate_->acquire();
  struct Release {
    Gate* g;
    ~Release() { g->release(); }
  } release{gate_.get()};
  return remote_classify(config_, prompt, text);
}

}  // namespace smoothcert
