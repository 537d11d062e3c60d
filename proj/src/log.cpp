#include "occfluct/log.hpp"

#include <atomic>

namespace occfluct::log {

namespace {
std::atomic<Level> g_level{Level::Warn};
std::mutex g_mu;
}  // namespace

Level level() { return g_level.load(std::memory_order_relaxed); }
void set_level(Level l) { g_level.store(l, std::memory_order_relaxed); }

void emit(Level l, const std::string& msg) {
  std::lock_guard<std::mutex> lock(g_mu);
  std::clog << (l == Level::Warn ? "warning: " : "") << msg << '\n';
}

}  // namespace occfluct::log
