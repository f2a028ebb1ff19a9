#pragma once

#include <cstddef>
#include <optional>
#include <span>
#include <stdexcept>
#include <string>
#include <string_view>
#include <vector>

#include "lrml/ir/ast.hpp"

namespace lrml::ir {

enum class ParseErrorKind { unbalanced_brackets, missing_if_then, empty_argument, unexpected_token };

std::string_view to_string(ParseErrorKind kind);

class ParseError : public std::runtime_error {
 public:
  ParseError(ParseErrorKind kind, std::size_t offset, const std::string& detail);

  ParseErrorKind kind() const noexcept { return kind_; }
  std::size_t offset() const noexcept { return offset_; }

 private:
  ParseErrorKind kind_;
  std::size_t offset_;
};

class DistributionDepthExceeded : public std::runtime_error {
 public:
  explicit DistributionDepthExceeded(std::size_t limit);
};

enum class Style { canonical, spaced };
enum class StyleHint { automatic, canonical, spaced };

// ---------------------------------------------------------------------------
// Names

/// Folds a spaced or camelCase name into canonical camelCase. The result is a
/// fixed point: canonical_name(spaced_name(canonical_name(x))) == canonical_name(x).
std::string canonical_name(std::string_view name);

/// Splits canonical camelCase into lowercase words joined by single spaces.
std::string spaced_name(std::string_view canonical);

// ---------------------------------------------------------------------------
// Units and quantities

struct UnitLexiconEntry {
  std::string surface;
  std::optional<std::string> prefix;
  std::string kind;
};

/// Bundled unit table. Surfaces are unique.
std::span<const UnitLexiconEntry> unit_lexicon();

/// `40 mm`, `90°`, `17 kg/m2`. Unknown unit surfaces pass through as kind.
std::optional<Quantity> parse_quantity(std::string_view token);

/// Shortest round-trip decimal with at least one fractional digit (`40.0`).
std::string format_decimal(double value);

// ---------------------------------------------------------------------------
// Codec

RuleAst parse_ir(std::string_view text, StyleHint hint = StyleHint::automatic);

std::string serialize_ir(const RuleAst& rule, Style style);
std::string serialize_expr(const Expr& expr, Style style);

inline constexpr std::size_t kDefaultDistributionDepth = 32;

RuleAst distribute_connectives(const RuleAst& rule,
                               std::size_t max_depth = kDefaultDistributionDepth);
Expr distribute_connectives(const Expr& expr,
                            std::size_t max_depth = kDefaultDistributionDepth);

/// Back-translation into the verbose functional LRML form.
std::string to_original(const RuleAst& rule);

/// Minimal LegalRuleML-flavoured XML around the back-translated form.
std::string emit_legalruleml_xml(const RuleAst& rule);

}  // namespace lrml::ir
