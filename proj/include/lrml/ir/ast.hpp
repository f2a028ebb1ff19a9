#pragma once

#include <cstddef>
#include <optional>
#include <string>
#include <variant>
#include <vector>

namespace lrml::ir {

enum class DeonticKind { obligation, permission, prohibition };
enum class StatementKind { prescriptive, constitutive };

std::string_view to_string(DeonticKind kind);
std::optional<DeonticKind> deontic_from_name(std::string_view name);

struct Expr;

struct Apply {
  std::string functor;  // canonical camelCase
  std::vector<Expr> args;

  bool operator==(const Apply&) const;
};

struct EntityRef {
  std::string entity;
  std::optional<std::string> property;

  bool operator==(const EntityRef&) const = default;
};

struct Quantity {
  double value = 0.0;
  std::optional<std::string> prefix;
  std::string kind;
  std::string surface;

  bool operator==(const Quantity&) const = default;
};

/// Reference into another regulatory document, e.g. `nzbcCas2T2.1`.
struct LegalRef {
  std::string document;
  std::string locator;
  std::string token;  // full canonical token

  bool operator==(const LegalRef&) const = default;
};

struct StringExpr {
  std::string raw;

  bool operator==(const StringExpr&) const = default;
};

struct Term {
  std::string word;

  bool operator==(const Term&) const = default;
};

struct Expr {
  std::variant<Apply, EntityRef, Quantity, LegalRef, StringExpr, Term> node;

  Expr() = default;
  template <typename T>
  Expr(T value) : node(std::move(value)) {}  // NOLINT(google-explicit-constructor)

  bool operator==(const Expr&) const = default;

  const Apply* as_apply() const { return std::get_if<Apply>(&node); }
  Apply* as_apply() { return std::get_if<Apply>(&node); }
};

inline bool Apply::operator==(const Apply& other) const {
  return functor == other.functor && args == other.args;
}

/// One rule: `if(<condition...>),then(<deontic>(<conclusion...>))`.
///
/// Condition and conclusion are argument lists rather than single expressions:
/// `then(permission(a, b))` is valid IR and is kept distinct from
/// `then(permission(and(a, b)))` so that scoring can see the missing `and`.
struct RuleAst {
  std::vector<Expr> condition;
  std::optional<DeonticKind> deontic;
  std::vector<Expr> conclusion;

  StatementKind statement_kind() const {
    return deontic ? StatementKind::prescriptive : StatementKind::constitutive;
  }

  bool operator==(const RuleAst&) const = default;
};

bool is_logical_functor(std::string_view functor);
bool is_connective(std::string_view functor);  // and | or

/// True for applications that distribution may rewrite.
bool is_domain_predicate(const Apply& apply);

std::size_t count_apply_nodes(const Expr& expr);

}  // namespace lrml::ir
