// SPDX-License-Identifier: Apache-2.0
#include "dartnet/log.hpp"

#include <cstdlib>
#include <iostream>

namespace dartnet {

namespace {

LogLevel initial_level() {
  const char* env = std::getenv("DARTNET_LOG");
  if (!env) return LogLevel::info;
  const std::string value(env);
  if (value == "error") return LogLevel::error;
  if (value == "debug") return LogLevel::debug;
  return LogLevel::info;
}

LogLevel& level_ref() {
  static LogLevel level = initial_level();
  return level;
}

}  // namespace

LogLevel log_level() { return level_ref(); }
void set_log_level(LogLevel level) { level_ref() = level; }

void log_error(const std::string& message) {
  std::cerr << "dartnet: error: " << message << '\n';
}

void log_info(const std::string& message) {
  if (log_level() >= LogLevel::info) std::cerr << "dartnet: " << message << '\n';
}

void log_debug(const std::string& message) {
  if (log_level() >= LogLevel::debug) std::cerr << "dartnet: debug: " << message << '\n';
}

}  // namespace dartnet
