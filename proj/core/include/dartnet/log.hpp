// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <string>

namespace dartnet {

enum class LogLevel { error = 0, info = 1, debug = 2 };

/// Level comes from the DARTNET_LOG environment variable
/// (error|info|debug); defaults to info. Messages go to stderr.
LogLevel log_level();
void set_log_level(LogLevel level);

void log_error(const std::string& message);
void log_info(const std::string& message);
void log_debug(const std::string& message);

}  // namespace dartnet
