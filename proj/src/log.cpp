#include "sgmi/core/log.hpp"

#include <atomic>
#include <iostream>

namespace sgmi {
namespace {
std::atomic<LogLevel> g_level{LogLevel::Info};

const char* tag(LogLevel level) {
  switch (level) {
    case LogLevel::Debug:
      return "debug";
    case LogLevel::Info:
      return "info";
    case LogLevel::Warning:
      return "warning";
    case LogLevel::Error:
      return "error";
    default:
      return "";
  }
}
}  // namespace

void set_log_level(LogLevel level) { g_level = level; }
LogLevel log_level() { return g_level; }

void log(LogLevel level, std::string_view message) {
  if (level < g_level.load() || level == LogLevel::Off) return;
  std::cerr << "[sgmi " << tag(level) << "] " << message << '\n';
}

}  // namespace sgmi
