// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <cstdio>
#include <string_view>
#include <utility>

namespace mgdm::log {

enum class Level { kDebug = 0, kInfo = 1, kWarn = 2, kError = 3, kOff = 4 };

void set_level(Level level);
Level level();
// Accepts debug|info|warn|error|off. Throws InputError otherwise.
Level parse_level(std::string_view name);

void write(Level level, const char* text);

template <typename... Args>
void logf(Level lvl, const char* fmt, Args&&... args) {
  if (lvl < level()) return;
  char buf[1024];
  if constexpr (sizeof...(Args) == 0) {
    write(lvl, fmt);
  } else {
    std::snprintf(buf, sizeof(buf), fmt, std::forward<Args>(args)...);
    write(lvl, buf);
  }
}

#define MGDM_LOG_DEBUG(...) ::mgdm::log::logf(::mgdm::log::Level::kDebug, __VA_ARGS__)
#define MGDM_LOG_INFO(...) ::mgdm::log::logf(::mgdm::log::Level::kInfo, __VA_ARGS__)
#define MGDM_LOG_WARN(...) ::mgdm::log::logf(::mgdm::log::Level::kWarn, __VA_ARGS__)

}  // namespace mgdm::log
