#pragma once

#include <cstddef>
#include <optional>
#include <span>
#include <stdexcept>
#include <string>
#include <string_view>
#include <vector>

#include "lrml/ir/ast.hpp"

namespace lrml::metrics {

class LengthMismatch : public std::invalid_argument {
 public:
  LengthMismatch(std::size_t predictions, std::size_t references);
};

class GoldParseError : public std::runtime_error {
 public:
  explicit GoldParseError(const std::string& detail);
};

// ---------------------------------------------------------------------------
// BLEU

/// Splits on whitespace; `(`, `)` and `,` always stand alone.
std::vector<std::string> bleu_tokens(std::string_view text);

/// Corpus-level BLEU, no smoothing. A zero n-gram match count at any order gives 0.
double corpus_bleu(std::span<const std::string> predictions, std::span<const std::string> references,
                   int max_n = 4);

/// IR text in spaced form when it parses, otherwise the text unchanged.
std::string bleu_surface(std::string_view ir_text);

// ---------------------------------------------------------------------------
// Element bags

enum class OperatorKind { if_, then_, and_, or_, not_, obligation, permission, prohibition };

std::string_view to_string(OperatorKind kind);

/// A scored unit: an entity, a relation (domain predicate) or an operator.
/// Leaves that only appear as arguments (quantities, references, strings)
/// take part through the relations and operators that hold them.
struct Element {
  enum class Category { entity, relation, operator_ };
  Category category;
  std::optional<OperatorKind> op;  // operators only
  const ir::Expr* expr = nullptr;  // relation or entity node
  std::vector<const ir::Expr*> children;  // operators only: descendant relations and leaves
  std::string signature;
};

struct ElementBag {
  ir::RuleAst rule;  // distributed; elements point into it
  std::vector<Element> entities;
  std::vector<Element> relations;
  std::vector<Element> operators;

  ElementBag() = default;
  ElementBag(const ElementBag&) = delete;
  ElementBag& operator=(const ElementBag&) = delete;
};

/// Distributes connectives, then collects elements in pre-order.
void build_element_bag(const ir::RuleAst& rule, ElementBag& out);

/// Token-multiset F1 of the spaced entity + property words.
double entity_similarity(std::string_view a, std::string_view b);

struct CategoryScore {
  double matched = 0.0;
  std::size_t predicted = 0;
  std::size_t gold = 0;

  double precision() const;
  double recall() const;
  double f1() const;
};

struct MatchReport {
  double precision = 0.0;
  double recall = 0.0;
  double f1 = 0.0;
  CategoryScore entities;
  CategoryScore relations;
  CategoryScore operators;
  bool parse_failed = false;
};

/// Partial entity/relation F1 on the back-translated form. Throws GoldParseError.
MatchReport lrml_f1(std::string_view prediction, std::string_view gold);
MatchReport lrml_f1(const ir::RuleAst& prediction, const ir::RuleAst& gold);

struct OracleResult {
  std::size_t best_index = 0;
  double best_f1 = 0.0;
  std::vector<double> scores;
};

/// Argmax of lrml_f1 over options, ties to the lowest index.
OracleResult oracle_f1(std::span<const std::string> options, std::string_view gold);

double harmonic_mean(double p, double r);

}  // namespace lrml::metrics
