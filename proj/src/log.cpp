#include "prices/log.hpp"

#include <atomic>
#include <iostream>
#include <mutex>

namespace prices::log {

namespace {
std::atomic<Level> g_level{Level::warn};
std::mutex g_mutex;
}  // namespace

void set_level(Level level) { g_level = level; }
Level level() { return g_level; }

void warn(std::string_view message) {
    if (g_level < Level::warn) return;
    std::lock_guard lock(g_mutex);
    std::cerr << "warning: " << message << '\n';
}

void info(std::string_view message) {
    if (g_level < Level::info) return;
    std::lock_guard lock(g_mutex);
    std::cerr << message << '\n';
}

}  // namespace prices::log
