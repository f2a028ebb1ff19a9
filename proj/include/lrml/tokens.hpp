#pragma once

#include <cstddef>
#include <functional>
#include <string_view>

namespace lrml::llm {

using TokenCounter = std::function<std::size_t(std::string_view)>;

/// ceil(codepoints / 4).
std::size_t count_tokens_heuristic(std::string_view text);

/// Heuristic counter inflated by `safety_margin` (0.1 adds 10%, rounded up).
TokenCounter heuristic_counter(double safety_margin = 0.0);

}  // namespace lrml::llm
