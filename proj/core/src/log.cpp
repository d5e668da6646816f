#include "smoothcert/log.hpp"

#include <cstdio>
#include <cstdlib>
#include <mutex>

namespace smoothcert {

namespace {

LogLevel read_level_from_env() {
  const char* v = std::getenv("SMOOTHCERT_LOG");
  if (v == nullptr) return LogLevel::kError;
  const std::string s(v);
  if (s == "debug") return LogLevel::kDebug;
  if (s == "info") return LogLevel::kInfo;
  return LogLevel::kError;
}

std::mutex& io_mutex() {
  static std::mutex m;
  return m;
}

void emit(const char* tag, const std::string& message) {
  std::lock_guard<std::mutex> lock(io_mutex());
  std::fprintf(stderr, "[smoothcert %s] %s\n", tag, message.c_str());
}

}  // namespace

LogLevel log_level() {
  static const LogLevel level = read_level_from_env();
  return level;
}

bool log_enabled(LogLevel level) {
  return static_cast<int>(level) <= static_cast<int>(log_level());
}

void log_error(const std::string& message) {
  if (log_enabled(LogLevel::kError)) emit("error", message);
}

void log_info(const std::string& message) {
  if (log_enabled(LogLevel::kInfo)) emit("info", message);
}

void log_debug(const std::string& message) {
  if (log_enabled(LogLevel::kDebug)) emit("debug", message);
}

}  // namespace smoothcert
