// SPDX-License-Identifier: Apache-2.0
#include "npform/log.hpp"

#include <atomic>
#include <cstdlib>
#include <iostream>
#include <mutex>
#include <string_view>

namespace npf::log {

namespace {

Level from_env() {
  const char* v = std::getenv("DIRICHLET_P_LOG");
  if (!v) return Level::Error;
  const std::string_view s(v);
  if (s == "debug") return Level::Debug;
  if (s == "info") return Level::Info;
  return Level::Error;
}

std::atomic<int>& level_store() {
  static std::atomic<int> level{int(from_env())};
  return level;
}

std::mutex& sink_mutex() {
  static std::mutex m;
  return m;
}

}  // namespace

Level threshold() { return Level(level_store().load()); }
void set_threshold(Level l) { level_store().store(int(l)); }
bool enabled(Level l) { return int(l) <= level_store().load(); }

void write(Level l, const std::string& msg) {
  if (!enabled(l)) return;
  static constexpr const char* names[] = {"error", "info", "debug"};
  std::lock_guard<std::mutex> lock(sink_mutex());
  std::cerr << "[npform " << names[int(l)] << "] " << msg << '\n';
}

}  // namespace npf::log
