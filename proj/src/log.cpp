// SPDX-License-Identifier: Apache-2.0
#include "mgdm/log.h"

#include <atomic>
#include <string>

#include "mgdm/error.h"

namespace mgdm::log {
namespace {
std::atomic<Level> g_level{Level::kInfo};
}

void set_level(Level level) { g_level.store(level); }
Level level() { return g_level.load(); }

Level parse_level(std::string_view name) {
  if (name == "debug") return Level::kDebug;
  if (name == "info") return Level::kInfo;
  if (name == "warn") return Level::kWarn;
  if (name == "error") return Level::kError;
  if (name == "off") return Level::kOff;
  throw InputError("unknown log level '" + std::string(name) + "'");
}

void write(Level lvl, const char* text) {
  static constexpr const char* kTags[] = {"debug", "info", "warn", "error", ""};
  std::fprintf(stderr, "[%s] %s\n", kTags[static_cast<int>(lvl)], text);
}

}  // namespace mgdm::log
