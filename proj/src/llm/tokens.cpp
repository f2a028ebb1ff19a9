#include <cmath>

#include "lrml/tokens.hpp"

namespace lrml::llm {

std::size_t count_tokens_heuristic(std::string_view text) {
  std::size_t codepoints = 0;
  for (char c : text) {
    // continuation bytes 10xxxxxx do not start a codepoint
    if ((static_cast<unsigned char>(c) & 0xC0) != 0x80) ++codepoints;
  }
  return (codepoints + 3) / 4;
}

TokenCounter heuristic_counter(double safety_margin) {
  if (safety_margin <= 0.0) return count_tokens_heuristic;
  return [safety_margin](std::string_view text) {
    double base = static_cast<double>(count_tokens_heuristic(text));
    return static_cast<std::size_t>(std::ceil(base * (1.0 + safety_margin) - 1e-9));  // 1.1 is not exact
  };
}

}  // namespace lrml::llm
