#pragma once

#include <cstddef>
#include <cstdint>
#include <functional>
#include <optional>
#include <span>
#include <stdexcept>
#include <string>
#include <string_view>
#include <vector>

#include "lrml/corpus.hpp"
#include "lrml/embeddings.hpp"
#include "lrml/prompting.hpp"
#include "lrml/tokens.hpp"

namespace lrml::retrieval {

enum class StrategyKind {
  random,
  handpicked,
  stratified,
  cluster,
  representative_global,
  per_clause_semantic,
  per_clause_ngram
};

std::string_view to_string(StrategyKind kind);
StrategyKind strategy_from_string(std::string_view name);
bool is_per_clause(StrategyKind kind);

enum class ClusterBasis { clause, lrml };

std::string_view to_string(ClusterBasis basis);
ClusterBasis cluster_basis_from_string(std::string_view name);

struct StrategyConfig {
  StrategyKind kind = StrategyKind::random;
  std::uint64_t seed = 0;
  std::optional<std::size_t> k;  // cap on the exemplar count
  ClusterBasis cluster_basis = ClusterBasis::clause;
  std::vector<std::size_t> n_orders{1, 2, 3};
  bool reversed = false;
  std::vector<std::string> curated_ids;  // handpicked order

  /// Throws std::invalid_argument on missing or out-of-range fields.
  void validate() const;
  bool operator==(const StrategyConfig&) const = default;
};

class ContextTooSmall : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

class CuratedIdMissing : public std::invalid_argument {
 public:
  explicit CuratedIdMissing(const std::string& id);
};

class EmptySplit : public std::invalid_argument {
 public:
  explicit EmptySplit(const std::string& which);
};

struct TokenBudget {
  std::size_t model_context_limit = 0;
  std::size_t scaffolding_cost = 0;
  std::size_t query_cost = 0;
  std::size_t available = 0;
};

/// Token cost of one exemplar including the blank line that follows it.
using ExemplarCost = std::function<std::size_t(const corpus::ClauseRecord&)>;

ExemplarCost exemplar_cost(const llm::TokenCounter& counter,
                           prompting::Rendering rendering = prompting::Rendering::plain);

/// query_cost is the worst validation record: its open query block plus its
/// gold IR as reserved output room. `extra_queries` are costed the same way;
/// those without gold reserve the longest validation gold instead.
/// Throws EmptySplit, ContextTooSmall.
TokenBudget compute_budget(const corpus::Corpus& corpus, std::string_view scaffolding_text,
                           const llm::TokenCounter& counter, std::size_t context_limit,
                           std::span<const corpus::ClauseRecord> extra_queries = {},
                           prompting::Rendering rendering = prompting::Rendering::plain);

/// Same costing over explicit query and training records. Queries without
/// gold reserve `output_reserve` tokens. Throws EmptySplit, ContextTooSmall.
TokenBudget compute_budget(std::span<const corpus::ClauseRecord> queries,
                           std::span<const corpus::ClauseRecord> train,
                           std::string_view scaffolding_text, const llm::TokenCounter& counter,
                           std::size_t context_limit, prompting::Rendering rendering,
                           std::size_t output_reserve);

struct ExemplarSelection {
  std::vector<corpus::ClauseRecord> exemplars;
  std::vector<std::size_t> costs;
  std::size_t total_cost = 0;

  std::vector<std::string> ids() const;
};

ExemplarSelection select_static(const StrategyConfig& strategy,
                                std::span<const corpus::ClauseRecord> train,
                                std::span<const corpus::ClauseRecord> valid,
                                const TokenBudget& budget,
                                const embeddings::EmbeddingProvider& provider,
                                const ExemplarCost& cost);

ExemplarSelection select_per_clause_semantic(std::span<const corpus::ClauseRecord> train,
                                             const corpus::ClauseRecord& query,
                                             const TokenBudget& budget, bool reversed,
                                             const embeddings::EmbeddingProvider& provider,
                                             const ExemplarCost& cost,
                                             std::optional<std::size_t> k = std::nullopt);

ExemplarSelection select_per_clause_ngram(std::span<const corpus::ClauseRecord> train,
                                          const corpus::ClauseRecord& query,
                                          const TokenBudget& budget, bool reversed,
                                          std::span<const std::size_t> n_orders,
                                          const ExemplarCost& cost,
                                          std::optional<std::size_t> k = std::nullopt);

/// Dispatches on the strategy kind; `query` is ignored by static strategies.
ExemplarSelection select(const StrategyConfig& strategy, std::span<const corpus::ClauseRecord> train,
                         std::span<const corpus::ClauseRecord> valid,
                         const corpus::ClauseRecord& query, const TokenBudget& budget,
                         const embeddings::EmbeddingProvider& provider, const ExemplarCost& cost);

/// Lowercased whitespace tokens with leading and trailing punctuation removed.
std::vector<std::string> ngram_words(std::string_view text);

}  // namespace lrml::retrieval
