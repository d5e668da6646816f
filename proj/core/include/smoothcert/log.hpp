#pragma once

#include <string>

namespace smoothcert {

enum class LogLevel { kError = 0, kInfo = 1, kDebug = 2 };

// Level comes from the SMOOTHCERT_LOG environment variable
// (error | info | debug), read once. Default: error.
LogLevel log_level();

bool log_enabled(LogLevel level);

void log_error(const std::string& message);
void log_info(const std::string& message);
void log_debug(const std::string& message);

}  // namespace smoothcert
