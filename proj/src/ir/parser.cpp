#include <array>
#include <cctype>
#include <vector>

#include "lrml/ir/codec.hpp"

namespace lrml::ir {

namespace {

bool is_space(char c) { return std::isspace(static_cast<unsigned char>(c)) != 0; }
bool is_alpha(char c) { return std::isalpha(static_cast<unsigned char>(c)) != 0; }

std::string_view trim(std::string_view s) {
  while (!s.empty() && is_space(s.front())) s.remove_prefix(1);
  while (!s.empty() && is_space(s.back())) s.remove_suffix(1);
  return s;
}

// Document prefixes that mark a token as a reference into another document.
constexpr std::array<std::string_view, 8> kDocumentPrefixes{
    "asnzs", "nzbc", "nzs", "iso", "as", "bs", "en", "ce"};

std::optional<LegalRef> as_legal_ref(const std::string& token) {
  for (std::string_view prefix : kDocumentPrefixes) {
    if (token.size() <= prefix.size() || token.compare(0, prefix.size(), prefix) != 0) continue;
    char next = token[prefix.size()];
    if (std::isdigit(static_cast<unsigned char>(next)) ||
        std::isupper(static_cast<unsigned char>(next))) {
      return LegalRef{std::string(prefix), token.substr(prefix.size()), token};
    }
  }
  return std::nullopt;
}

// A dot separates entity from property only between letters: `floorWaste.diameter`
// and the spaced `floor waste. diameter` split, `t2.1` and `6.8` do not.
std::optional<std::size_t> entity_dot(std::string_view raw) {
  for (std::size_t i = 1; i < raw.size(); ++i) {
    if (raw[i] != '.' || !is_alpha(raw[i - 1])) continue;
    std::size_t j = i + 1;
    while (j < raw.size() && is_space(raw[j])) ++j;
    if (j < raw.size() && is_alpha(raw[j])) return i;
  }
  return std::nullopt;
}

Expr classify_atom(std::string_view raw) {
  if (auto q = parse_quantity(raw)) return *q;
  if (auto dot = entity_dot(raw)) {
    return EntityRef{canonical_name(raw.substr(0, *dot)), canonical_name(raw.substr(*dot + 1))};
  }
  std::string name = canonical_name(raw);
  if (auto ref = as_legal_ref(name)) return *ref;
  if (is_alpha(name.front())) return EntityRef{std::move(name), std::nullopt};
  return Term{std::move(name)};
}

// Checks bracket balance, skipping quoted string arguments.
void check_balance(std::string_view text) {
  std::vector<std::size_t> open;
  bool at_arg_start = false;
  for (std::size_t i = 0; i < text.size(); ++i) {
    char c = text[i];
    if (at_arg_start && c == '\'') {
      std::size_t close = text.find('\'', i + 1);
      if (close == std::string_view::npos) {
        throw ParseError(ParseErrorKind::unbalanced_brackets, i, "unterminated quoted string");
      }
      i = close;
      at_arg_start = false;
      continue;
    }
    if (c == '(') {
      open.push_back(i);
      at_arg_start = true;
    } else if (c == ')') {
      if (open.empty()) throw ParseError(ParseErrorKind::unbalanced_brackets, i, "unmatched ')'");
      open.pop_back();
      at_arg_start = false;
    } else if (c == ',') {
      at_arg_start = true;
    } else if (!is_space(c)) {
      at_arg_start = false;
    }
  }
  if (!open.empty()) {
    throw ParseError(ParseErrorKind::unbalanced_brackets, open.front(), "unclosed '('");
  }
}

class Parser {
 public:
  explicit Parser(std::string_view text) : text_(text) {}

  RuleAst parse_rule() {
    RuleAst rule;
    skip_space();
    expect_keyword("if");
    rule.condition = parse_args();
    skip_space();
    if (!eat(',')) throw ParseError(ParseErrorKind::missing_if_then, pos_, "expected ',' before then");
    skip_space();
    expect_keyword("then");
    std::vector<Expr> conclusion = parse_args();
    if (conclusion.size() == 1) {
      if (Apply* apply = conclusion.front().as_apply()) {
        if (auto kind = deontic_from_name(apply->functor)) {
          rule.deontic = kind;
          conclusion = std::move(apply->args);
        }
      }
    }
    rule.conclusion = std::move(conclusion);
    skip_space();
    if (pos_ != text_.size()) {
      throw ParseError(ParseErrorKind::unexpected_token, pos_, "trailing text after rule");
    }
    return rule;
  }

 private:
  void skip_space() {
    while (pos_ < text_.size() && is_space(text_[pos_])) ++pos_;
  }

  bool eat(char c) {
    if (pos_ < text_.size() && text_[pos_] == c) {
      ++pos_;
      return true;
    }
    return false;
  }

  void expect_keyword(std::string_view keyword) {
    std::size_t start = pos_;
    if (text_.substr(pos_, keyword.size()) != keyword) {
      throw ParseError(ParseErrorKind::missing_if_then, start,
                       "expected '" + std::string(keyword) + "('");
    }
    pos_ += keyword.size();
    skip_space();
    if (!eat('(')) {
      throw ParseError(ParseErrorKind::missing_if_then, start,
                       "expected '" + std::string(keyword) + "('");
    }
  }

  // Parses `arg, arg, ...)` after an opening bracket; consumes the ')'.
  std::vector<Expr> parse_args() {
    std::vector<Expr> args;
    while (true) {
      args.push_back(parse_expr());
      skip_space();
      if (eat(',')) continue;
      if (eat(')')) return args;
      throw ParseError(ParseErrorKind::unexpected_token, pos_, "expected ',' or ')'");
    }
  }

  Expr parse_expr() {
    skip_space();
    std::size_t start = pos_;
    if (pos_ < text_.size() && text_[pos_] == '\'') {
      std::size_t close = text_.find('\'', pos_ + 1);
      std::string raw(text_.substr(pos_ + 1, close - pos_ - 1));
      pos_ = close + 1;
      return StringExpr{std::move(raw)};
    }
    while (pos_ < text_.size() && text_[pos_] != '(' && text_[pos_] != ',' && text_[pos_] != ')') {
      ++pos_;
    }
    std::string_view raw = trim(text_.substr(start, pos_ - start));
    if (raw.empty()) throw ParseError(ParseErrorKind::empty_argument, start, "empty argument");
    if (pos_ < text_.size() && text_[pos_] == '(') {
      ++pos_;
      Apply apply;
      apply.functor = canonical_name(raw);
      apply.args = parse_args();
      return apply;
    }
    return classify_atom(raw);
  }

  std::string_view text_;
  std::size_t pos_ = 0;
};

}  // namespace

std::string_view to_string(ParseErrorKind kind) {
  switch (kind) {
    case ParseErrorKind::unbalanced_brackets:
      return "UnbalancedBrackets";
    case ParseErrorKind::missing_if_then:
      return "MissingIfThen";
    case ParseErrorKind::empty_argument:
      return "EmptyArgument";
    case ParseErrorKind::unexpected_token:
      return "UnexpectedToken";
  }
  return "ParseError";
}

ParseError::ParseError(ParseErrorKind kind, std::size_t offset, const std::string& detail)
    : std::runtime_error(std::string(to_string(kind)) + " at offset " + std::to_string(offset) +
                         ": " + detail),
      kind_(kind),
      offset_(offset) {}

DistributionDepthExceeded::DistributionDepthExceeded(std::size_t limit)
    : std::runtime_error("connective distribution exceeded depth " + std::to_string(limit)) {}

// Both token styles share one grammar, so the hint does not change the result.
RuleAst parse_ir(std::string_view text, StyleHint /*hint*/) {
  if (trim(text).empty()) throw ParseError(ParseErrorKind::missing_if_then, 0, "empty input");
  check_balance(text);
  return Parser(text).parse_rule();
}

}  // namespace lrml::ir
