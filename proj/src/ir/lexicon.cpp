#include <algorithm>
#include <array>
#include <cctype>
#include <charconv>
#include <cmath>

#include "lrml/ir/ast.hpp"
#include "lrml/ir/codec.hpp"

namespace lrml::ir {

namespace {

bool is_upper(char c) { return std::isupper(static_cast<unsigned char>(c)) != 0; }
bool is_lower(char c) { return std::islower(static_cast<unsigned char>(c)) != 0; }
bool is_alpha(char c) { return std::isalpha(static_cast<unsigned char>(c)) != 0; }
bool is_space(char c) { return std::isspace(static_cast<unsigned char>(c)) != 0; }
char to_lower(char c) { return static_cast<char>(std::tolower(static_cast<unsigned char>(c))); }
char to_upper(char c) { return static_cast<char>(std::toupper(static_cast<unsigned char>(c))); }

// All letters uppercase, at least two of them, and a letter first: `NZS`, `AS`.
bool is_acronym(std::string_view word) {
  if (word.empty() || !is_alpha(word.front())) return false;
  int letters = 0;
  for (char c : word) {
    if (is_lower(c)) return false;
    if (is_alpha(c)) ++letters;
  }
  return letters >= 2;
}

// Splits before every uppercase letter and lowercases the pieces.
void split_camel(std::string_view word, std::vector<std::string>& out) {
  std::string current;
  for (char c : word) {
    if (is_upper(c) && !current.empty()) {
      out.push_back(std::move(current));
      current.clear();
    }
    current.push_back(to_lower(c));
  }
  if (!current.empty()) out.push_back(std::move(current));
}

std::vector<std::string> name_words(std::string_view name) {
  std::vector<std::string> words;
  std::size_t i = 0;
  while (i < name.size()) {
    while (i < name.size() && is_space(name[i])) ++i;
    std::size_t start = i;
    while (i < name.size() && !is_space(name[i])) ++i;
    if (start == i) break;
    std::string_view word = name.substr(start, i - start);
    if (is_acronym(word)) {
      std::string lowered(word);
      std::transform(lowered.begin(), lowered.end(), lowered.begin(), to_lower);
      words.push_back(std::move(lowered));
    } else {
      split_camel(word, words);
    }
  }
  return words;
}

const std::array<UnitLexiconEntry, 15> kUnits{{
    {"mm", "milli", "metre"},
    {"cm", "centi", "metre"},
    {"m", std::nullopt, "metre"},
    {"km", "kilo", "metre"},
    {"m2", std::nullopt, "squareMetre"},
    {"m3", std::nullopt, "cubicMetre"},
    {"deg", std::nullopt, "degree"},
    {"\xC2\xB0", std::nullopt, "degree"},
    {"kg/m2", std::nullopt, "kilogramPerSquareMetre"},
    {"kg", "kilo", "gram"},
    {"kPa", "kilo", "pascal"},
    {"%", std::nullopt, "percent"},
    {"l", std::nullopt, "litre"},
    {"s", std::nullopt, "second"},
    {"kW", "kilo", "watt"},
}};

bool starts_unit(std::string_view unit) {
  if (unit.empty()) return false;
  unsigned char c = static_cast<unsigned char>(unit.front());
  return is_alpha(unit.front()) || c == 0xC2 || unit.front() == '%';
}

}  // namespace

std::string_view to_string(DeonticKind kind) {
  switch (kind) {
    case DeonticKind::obligation:
      return "obligation";
    case DeonticKind::permission:
      return "permission";
    case DeonticKind::prohibition:
      return "prohibition";
  }
  return "obligation";
}

std::optional<DeonticKind> deontic_from_name(std::string_view name) {
  if (name == "obligation") return DeonticKind::obligation;
  if (name == "permission") return DeonticKind::permission;
  if (name == "prohibition") return DeonticKind::prohibition;
  return std::nullopt;
}

bool is_logical_functor(std::string_view functor) {
  return functor == "and" || functor == "or" || functor == "not";
}

bool is_connective(std::string_view functor) { return functor == "and" || functor == "or"; }

bool is_domain_predicate(const Apply& apply) {
  return !is_logical_functor(apply.functor) && !deontic_from_name(apply.functor);
}

std::size_t count_apply_nodes(const Expr& expr) {
  const Apply* apply = expr.as_apply();
  if (!apply) return 0;
  std::size_t n = 1;
  for (const Expr& arg : apply->args) n += count_apply_nodes(arg);
  return n;
}

std::string canonical_name(std::string_view name) {
  std::string out;
  bool first = true;
  for (std::string& word : name_words(name)) {
    if (!first && !word.empty()) word.front() = to_upper(word.front());
    out += word;
    first = false;
  }
  return out;
}

std::string spaced_name(std::string_view canonical) {
  std::string out;
  for (const std::string& word : name_words(canonical)) {
    if (!out.empty()) out.push_back(' ');
    out += word;
  }
  return out;
}

std::span<const UnitLexiconEntry> unit_lexicon() { return kUnits; }

std::optional<Quantity> parse_quantity(std::string_view token) {
  while (!token.empty() && is_space(token.front())) token.remove_prefix(1);
  while (!token.empty() && is_space(token.back())) token.remove_suffix(1);
  if (token.empty()) return std::nullopt;

  std::size_t i = 0;
  if (token[i] == '-' || token[i] == '+') ++i;
  std::size_t digits = 0;
  while (i < token.size() && std::isdigit(static_cast<unsigned char>(token[i]))) ++i, ++digits;
  if (i < token.size() && token[i] == '.') {
    ++i;
    while (i < token.size() && std::isdigit(static_cast<unsigned char>(token[i]))) ++i, ++digits;
  }
  if (digits == 0) return std::nullopt;
  std::string_view number = token.substr(0, i);
  if (number.back() == '.') return std::nullopt;

  std::string_view unit = token.substr(i);
  while (!unit.empty() && is_space(unit.front())) unit.remove_prefix(1);
  if (!starts_unit(unit)) return std::nullopt;
  if (std::any_of(unit.begin(), unit.end(), is_space)) return std::nullopt;

  if (number.front() == '+') number.remove_prefix(1);
  double value = 0.0;
  auto [ptr, ec] = std::from_chars(number.data(), number.data() + number.size(), value);
  if (ec != std::errc{} || ptr != number.data() + number.size() || !std::isfinite(value)) {
    return std::nullopt;
  }

  Quantity q;
  q.value = value;
  q.surface = std::string(token);
  auto entry = std::find_if(kUnits.begin(), kUnits.end(),
                            [&](const UnitLexiconEntry& e) { return e.surface == unit; });
  if (entry != kUnits.end()) {
    q.prefix = entry->prefix;
    q.kind = entry->kind;
  } else {
    q.kind = std::string(unit);
  }
  return q;
}

std::string format_decimal(double value) {
  std::array<char, 64> buf{};
  auto [ptr, ec] = std::to_chars(buf.data(), buf.data() + buf.size(), value);
  std::string out(buf.data(), ptr);
  if (out.find_first_of(".eEn") == std::string::npos) out += ".0";
  return out;
}

}  // namespace lrml::ir
