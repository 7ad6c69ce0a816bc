#pragma once

#include <functional>
#include <iostream>
#include <mutex>
#include <string>

namespace pubgml::log {

enum class Level { info = 1, warning = 0 };

namespace detail {
inline int& verbosity() {
  static int v = 0;
  return v;
}
inline std::function<void(Level, const std::string&)>& sink() {
  static std::function<void(Level, const std::string&)> s =
      [](Level level, const std::string& msg) {
        std::cerr << (level == Level::warning ? "warning: " : "") << msg << '\n';
      };
  return s;
}
inline std::mutex& mutex() {
  static std::mutex m;
  return m;
}
}  // namespace detail

/// 0 = warnings only, >= 1 adds per-iteration training logs.
inline void set_verbosity(int v) { detail::verbosity() = v; }
inline int verbosity() { return detail::verbosity(); }

/// Replace the destination of log lines (tests capture warnings this way).
/// Returns the previous sink so callers can restore it.
inline std::function<void(Level, const std::string&)> set_sink(
    std::function<void(Level, const std::string&)> s) {
  std::lock_guard lock(detail::mutex());
  auto old = std::move(detail::sink());
  detail::sink() = std::move(s);
  return old;
}

inline void warn(const std::string& msg) {
  std::lock_guard lock(detail::mutex());
  detail::sink()(Level::warning, msg);
}

inline void info(const std::string& msg) {
  if (detail::verbosity() < 1) return;
  std::lock_guard lock(detail::mutex());
  detail::sink()(Level::info, msg);
}

}  // namespace pubgml::log
