#pragma once

#include <span>
#include <string_view>
#include <utility>

namespace ensnet::detail {

// Preset name -> JSON text, generated from configs/*.json at configure time.
std::span<const std::pair<std::string_view, std::string_view>> presets();

}  // namespace ensnet::detail
