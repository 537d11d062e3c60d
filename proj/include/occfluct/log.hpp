#pragma once

#include <iostream>
#include <mutex>
#include <sstream>

namespace occfluct::log {

enum class Level { Quiet = 0, Warn = 1, Info = 2 };

Level level();
void set_level(Level l);
void emit(Level l, const std::string& msg);

template <class... Args>
void warn(const Args&... args) {
  if (level() < Level::Warn) return;
  std::ostringstream os;
  (os << ... << args);
  emit(Level::Warn, os.str());
}

template <class... Args>
void info(const Args&... args) {
  if (level() < Level::Info) return;
  std::ostringstream os;
  (os << ... << args);
  emit(Level::Info, os.str());
}

}  // namespace occfluct::log
