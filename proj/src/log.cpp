#include "recgpt/log.hpp"

#include <atomic>
#include <cstdlib>
#include <iostream>
#include <mutex>
#include <string>

namespace recgpt::log {

namespace {

Level initial_level() {
  const char* env = std::getenv("RECGPT_LOG_LEVEL");
  if (env == nullptr) return Level::kInfo;
  const std::string v(env);
  if (v == "debug") return Level::kDebug;
  if (v == "warn") return Level::kWarn;
  if (v == "error") return Level::kError;
  if (v == "off") return Level::kOff;
  return Level::kInfo;
}

std::atomic<Level>& current() {
  static std::atomic<Level> level{initial_level()};
  return level;
}

const char* tag(Level level) {
  switch (level) {
    case Level::kDebug: return "debug";
    case Level::kInfo: return "info";
    case Level::kWarn: return "warn";
    case Level::kError: return "error";
    case Level::kOff: return "";
  }
  return "";
}

}  // namespace

void set_level(Level level) { current() = level; }
Level level() { return current(); }

void write(Level level, std::string_view message) {
  if (level < current() || level == Level::kOff) return;
  static std::mutex mutex;
  std::lock_guard lock(mutex);
  std::cerr << "[recgpt " << tag(level) << "] " << message << '\n';
}

}  // namespace recgpt::log
