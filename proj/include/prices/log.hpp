#pragma once

#include <string_view>

namespace prices::log {

enum class Level { quiet, warn, info };

void set_level(Level level);
Level level();

void warn(std::string_view message);
void info(std::string_view message);

}  // namespace prices::log
