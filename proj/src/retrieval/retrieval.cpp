#include "lrml/retrieval.hpp"

#include <algorithm>
#include <cctype>
#include <limits>
#include <map>
#include <numeric>
#include <random>
#include <set>
#include <sstream>

#include "lrml/ir/codec.hpp"

namespace lrml::retrieval {

using corpus::ClauseRecord;
using embeddings::EmbeddingVector;

namespace {

constexpr std::pair<StrategyKind, std::string_view> kStrategyNames[] = {
    {StrategyKind::random, "random"},
    {StrategyKind::handpicked, "handpicked"},
    {StrategyKind::stratified, "stratified"},
    {StrategyKind::cluster, "cluster"},
    {StrategyKind::representative_global, "representative_global"},
    {StrategyKind::per_clause_semantic, "per_clause_semantic"},
    {StrategyKind::per_clause_ngram, "per_clause_ngram"},
};

}  // namespace

std::string_view to_string(StrategyKind kind) {
  for (const auto& [k, name] : kStrategyNames) {
    if (k == kind) return name;
  }
  return "random";
}

StrategyKind strategy_from_string(std::string_view name) {
  for (const auto& [k, n] : kStrategyNames) {
    if (n == name) return k;
  }
  throw std::invalid_argument("unknown strategy: " + std::string(name));
}

bool is_per_clause(StrategyKind kind) {
  return kind == StrategyKind::per_clause_semantic || kind == StrategyKind::per_clause_ngram;
}

std::string_view to_string(ClusterBasis basis) { return basis == ClusterBasis::clause ? "clause" : "lrml"; }

ClusterBasis cluster_basis_from_string(std::string_view name) {
  if (name == "clause") return ClusterBasis::clause;
  if (name == "lrml") return ClusterBasis::lrml;
  throw std::invalid_argument("unknown cluster basis: " + std::string(name));
}

void StrategyConfig::validate() const {
  if (n_orders.empty()) throw std::invalid_argument("n_orders must not be empty");
  for (std::size_t n : n_orders) {
    if (n == 0) throw std::invalid_argument("n_orders entries must be at least 1");
  }
  if (k && *k == 0) throw std::invalid_argument("k must be at least 1");
  if (kind == StrategyKind::handpicked && curated_ids.empty()) {
    throw std::invalid_argument("handpicked strategy needs curated ids");
  }
}

CuratedIdMissing::CuratedIdMissing(const std::string& id)
    : std::invalid_argument("curated id not in training split: " + id) {}

EmptySplit::EmptySplit(const std::string& which) : std::invalid_argument(which + " split is empty") {}

std::vector<std::string> ExemplarSelection::ids() const {
  std::vector<std::string> out;
  for (const auto& r : exemplars) out.push_back(r.id);
  return out;
}

ExemplarCost exemplar_cost(const llm::TokenCounter& counter, prompting::Rendering rendering) {
  return [counter, rendering](const ClauseRecord& r) {
    return counter(prompting::render_exemplar(r, rendering) + "\n\n");
  };
}

TokenBudget compute_budget(std::span<const ClauseRecord> queries, std::span<const ClauseRecord> train,
                           std::string_view scaffolding_text, const llm::TokenCounter& counter,
                           std::size_t context_limit, prompting::Rendering rendering,
                           std::size_t output_reserve) {
  if (queries.empty()) throw EmptySplit("query");
  std::size_t worst = 0;
  for (const auto& r : queries) {
    std::size_t out = r.has_gold() ? counter(prompting::spaced_target(r)) : output_reserve;
    worst = std::max(worst, counter(prompting::render_query(r, rendering)) + out);
  }

  TokenBudget b;
  b.model_context_limit = context_limit;
  b.scaffolding_cost = scaffolding_text.empty() ? 0 : counter(std::string(scaffolding_text) + "\n\n");
  b.query_cost = worst;
  if (context_limit < b.scaffolding_cost + b.query_cost) {
    throw ContextTooSmall("context limit " + std::to_string(context_limit) +
                          " cannot hold scaffolding (" + std::to_string(b.scaffolding_cost) +
                          ") and query (" + std::to_string(b.query_cost) + ")");
  }
  b.available = context_limit - b.scaffolding_cost - b.query_cost;

  std::optional<std::size_t> smallest;
  auto cost = exemplar_cost(counter, prompting::Rendering::plain);
  for (const auto& r : train) {
    if (!r.has_gold()) continue;
    std::size_t c = cost(r);
    if (!smallest || c < *smallest) smallest = c;
  }
  if (smallest && b.available < *smallest) {
    throw ContextTooSmall("only " + std::to_string(b.available) +
                          " tokens left, smallest exemplar needs " + std::to_string(*smallest));
  }
  return b;
}

TokenBudget compute_budget(const corpus::Corpus& corpus, std::string_view scaffolding_text,
                           const llm::TokenCounter& counter, std::size_t context_limit,
                           std::span<const ClauseRecord> extra_queries,
                           prompting::Rendering rendering) {
  std::vector<ClauseRecord> queries = corpus.split(corpus::Split::valid);
  if (queries.empty()) throw EmptySplit("validation");
  std::size_t longest_gold = 0;
  for (const auto& r : queries) {
    if (r.has_gold()) longest_gold = std::max(longest_gold, counter(prompting::spaced_target(r)));
  }
  queries.insert(queries.end(), extra_queries.begin(), extra_queries.end());
  std::vector<ClauseRecord> train = corpus.split(corpus::Split::train);
  return compute_budget(queries, train, scaffolding_text, counter, context_limit, rendering,
                        longest_gold);
}

namespace {

// Appends candidates in order until the first one that does not fit.
ExemplarSelection greedy_prefix(const std::vector<const ClauseRecord*>& ordered,
                                const TokenBudget& budget, const ExemplarCost& cost,
                                std::optional<std::size_t> k) {
  ExemplarSelection sel;
  for (const ClauseRecord* r : ordered) {
    if (k && sel.exemplars.size() >= *k) break;
    std::size_t c = cost(*r);
    if (sel.total_cost + c > budget.available) break;
    sel.exemplars.push_back(*r);
    sel.costs.push_back(c);
    sel.total_cost += c;
  }
  return sel;
}

void reverse_selection(ExemplarSelection& sel) {
  std::reverse(sel.exemplars.begin(), sel.exemplars.end());
  std::reverse(sel.costs.begin(), sel.costs.end());
}

std::vector<const ClauseRecord*> labelled(std::span<const ClauseRecord> records) {
  std::vector<const ClauseRecord*> out;
  for (const auto& r : records) {
    if (r.has_gold()) out.push_back(&r);
  }
  return out;
}

std::vector<std::string> texts_of(const std::vector<const ClauseRecord*>& records, ClusterBasis basis) {
  std::vector<std::string> out;
  for (const ClauseRecord* r : records) {
    out.push_back(basis == ClusterBasis::clause ? r->source : prompting::spaced_target(*r));
  }
  return out;
}

std::size_t bounded(std::mt19937_64& rng, std::size_t bound) {
  const std::uint64_t range = std::numeric_limits<std::uint64_t>::max();
  const std::uint64_t limit = range - range % bound;
  std::uint64_t x = rng();
  while (x >= limit) x = rng();
  return static_cast<std::size_t>(x % bound);
}

ExemplarSelection select_random(const std::vector<const ClauseRecord*>& pool,
                                const StrategyConfig& s, const TokenBudget& budget,
                                const ExemplarCost& cost) {
  std::vector<const ClauseRecord*> order = pool;
  std::mt19937_64 rng(s.seed);
  // Fisher-Yates from the back
  for (std::size_t i = order.size(); i > 1; --i) std::swap(order[i - 1], order[bounded(rng, i)]);
  return greedy_prefix(order, budget, cost, s.k);
}

ExemplarSelection select_handpicked(const std::vector<const ClauseRecord*>& pool,
                                    const StrategyConfig& s, const TokenBudget& budget,
                                    const ExemplarCost& cost) {
  std::vector<const ClauseRecord*> order;
  for (const auto& id : s.curated_ids) {
    auto it = std::find_if(pool.begin(), pool.end(), [&](const ClauseRecord* r) { return r->id == id; });
    if (it == pool.end()) throw CuratedIdMissing(id);
    order.push_back(*it);
  }
  return greedy_prefix(order, budget, cost, s.k);
}

ExemplarSelection select_stratified(const std::vector<const ClauseRecord*>& pool,
                                    const StrategyConfig& s, const TokenBudget& budget,
                                    const ExemplarCost& cost) {
  std::map<std::string, std::vector<const ClauseRecord*>> by_doc;  // documents in sorted order
  for (const ClauseRecord* r : pool) by_doc[r->document].push_back(r);
  std::vector<const ClauseRecord*> order;
  for (std::size_t round = 0; order.size() < pool.size(); ++round) {
    for (const auto& [doc, recs] : by_doc) {
      if (round < recs.size()) order.push_back(recs[round]);
    }
  }
  return greedy_prefix(order, budget, cost, s.k);
}

ExemplarSelection medoid_selection(const std::vector<const ClauseRecord*>& pool,
                                   const std::vector<EmbeddingVector>& vectors, std::size_t k,
                                   std::uint64_t seed, const TokenBudget& budget,
                                   const ExemplarCost& cost) {
  auto result = embeddings::kmeans(vectors, k, seed);
  std::vector<const ClauseRecord*> order;
  for (std::size_t m : result.medoids) order.push_back(pool[m]);
  return greedy_prefix(order, budget, cost, std::nullopt);
}

ExemplarSelection select_cluster(const std::vector<const ClauseRecord*>& pool,
                                 const StrategyConfig& s, const TokenBudget& budget,
                                 const embeddings::EmbeddingProvider& provider,
                                 const ExemplarCost& cost) {
  std::vector<std::string> texts = texts_of(pool, s.cluster_basis);
  std::vector<EmbeddingVector> vectors = provider.embed(texts);
  if (s.k) return medoid_selection(pool, vectors, std::min(*s.k, pool.size()), s.seed, budget, cost);

  // Grow k until the medoid set no longer fits.
  ExemplarSelection best;
  for (std::size_t k = 1; k <= pool.size(); ++k) {
    ExemplarSelection sel = medoid_selection(pool, vectors, k, s.seed, budget, cost);
    if (sel.exemplars.size() < k) break;
    best = std::move(sel);
  }
  return best;
}

ExemplarSelection select_representative(const std::vector<const ClauseRecord*>& pool,
                                        std::span<const ClauseRecord> valid,
                                        const StrategyConfig& s, const TokenBudget& budget,
                                        const embeddings::EmbeddingProvider& provider,
                                        const ExemplarCost& cost) {
  if (valid.empty()) throw EmptySplit("validation");
  std::vector<EmbeddingVector> train_vecs = provider.embed(texts_of(pool, ClusterBasis::clause));
  std::vector<std::string> valid_texts;
  for (const auto& v : valid) valid_texts.push_back(v.source);
  std::vector<EmbeddingVector> valid_vecs = provider.embed(valid_texts);

  std::vector<std::size_t> wins(pool.size(), 0);
  for (const auto& q : valid_vecs) {
    std::size_t best = 0;
    double best_sim = embeddings::cosine(q, train_vecs[0]);
    for (std::size_t i = 1; i < pool.size(); ++i) {
      double sim = embeddings::cosine(q, train_vecs[i]);
      if (sim > best_sim || (sim == best_sim && pool[i]->id < pool[best]->id)) {
        best_sim = sim;
        best = i;
      }
    }
    ++wins[best];
  }

  std::vector<std::size_t> idx;
  for (std::size_t i = 0; i < pool.size(); ++i) {
    if (wins[i] > 0) idx.push_back(i);
  }
  std::sort(idx.begin(), idx.end(), [&](std::size_t a, std::size_t b) {
    if (wins[a] != wins[b]) return wins[a] > wins[b];
    return pool[a]->id < pool[b]->id;
  });
  std::vector<const ClauseRecord*> order;
  for (std::size_t i : idx) order.push_back(pool[i]);
  return greedy_prefix(order, budget, cost, s.k);
}

using NgramSet = std::set<std::vector<std::string>>;

NgramSet ngrams_of(const std::vector<std::string>& words, std::size_t n) {
  NgramSet out;
  for (std::size_t i = 0; i + n <= words.size(); ++i) {
    out.emplace(words.begin() + static_cast<std::ptrdiff_t>(i),
                words.begin() + static_cast<std::ptrdiff_t>(i + n));
  }
  return out;
}

}  // namespace

std::vector<std::string> ngram_words(std::string_view text) {
  std::vector<std::string> out;
  std::istringstream in{std::string(text)};
  for (std::string w; in >> w;) {
    std::size_t b = 0, e = w.size();
    while (b < e && std::ispunct(static_cast<unsigned char>(w[b]))) ++b;
    while (e > b && std::ispunct(static_cast<unsigned char>(w[e - 1]))) --e;
    if (b == e) continue;
    std::string t = w.substr(b, e - b);
    std::transform(t.begin(), t.end(), t.begin(),
                   [](unsigned char c) { return static_cast<char>(std::tolower(c)); });
    out.push_back(std::move(t));
  }
  return out;
}

ExemplarSelection select_static(const StrategyConfig& strategy, std::span<const ClauseRecord> train,
                                std::span<const ClauseRecord> valid, const TokenBudget& budget,
                                const embeddings::EmbeddingProvider& provider,
                                const ExemplarCost& cost) {
  strategy.validate();
  std::vector<const ClauseRecord*> pool = labelled(train);
  if (pool.empty()) throw EmptySplit("training");
  switch (strategy.kind) {
    case StrategyKind::random: return select_random(pool, strategy, budget, cost);
    case StrategyKind::handpicked: return select_handpicked(pool, strategy, budget, cost);
    case StrategyKind::stratified: return select_stratified(pool, strategy, budget, cost);
    case StrategyKind::cluster: return select_cluster(pool, strategy, budget, provider, cost);
    case StrategyKind::representative_global:
      return select_representative(pool, valid, strategy, budget, provider, cost);
    default:
      throw std::invalid_argument(std::string(to_string(strategy.kind)) + " is a per-clause strategy");
  }
}

ExemplarSelection select_per_clause_semantic(std::span<const ClauseRecord> train,
                                             const ClauseRecord& query, const TokenBudget& budget,
                                             bool reversed,
                                             const embeddings::EmbeddingProvider& provider,
                                             const ExemplarCost& cost, std::optional<std::size_t> k) {
  std::vector<const ClauseRecord*> pool = labelled(train);
  if (pool.empty()) throw EmptySplit("training");
  std::vector<EmbeddingVector> vecs = provider.embed(texts_of(pool, ClusterBasis::clause));
  EmbeddingVector q = provider.embed_one(query.source);

  std::vector<double> sims;
  for (const auto& v : vecs) sims.push_back(embeddings::cosine(q, v));
  std::vector<std::size_t> idx(pool.size());
  std::iota(idx.begin(), idx.end(), 0);
  std::sort(idx.begin(), idx.end(), [&](std::size_t a, std::size_t b) {
    if (sims[a] != sims[b]) return sims[a] > sims[b];
    return pool[a]->id < pool[b]->id;
  });
  std::vector<const ClauseRecord*> order;
  for (std::size_t i : idx) order.push_back(pool[i]);
  ExemplarSelection sel = greedy_prefix(order, budget, cost, k);
  if (reversed) reverse_selection(sel);
  return sel;
}

ExemplarSelection select_per_clause_ngram(std::span<const ClauseRecord> train,
                                          const ClauseRecord& query, const TokenBudget& budget,
                                          bool reversed, std::span<const std::size_t> n_orders,
                                          const ExemplarCost& cost, std::optional<std::size_t> k) {
  std::vector<const ClauseRecord*> pool = labelled(train);
  if (pool.empty()) throw EmptySplit("training");
  if (n_orders.empty()) throw std::invalid_argument("n_orders must not be empty");

  std::vector<std::string> query_words = ngram_words(query.source);
  std::vector<std::vector<std::string>> words;
  for (const ClauseRecord* r : pool) words.push_back(ngram_words(r->source));

  ExemplarSelection sel;
  std::vector<bool> taken(pool.size(), false);
  std::vector<std::size_t> taken_order;
  bool stopped = false;
  for (std::size_t n : n_orders) {
    if (stopped) break;
    if (n == 0) throw std::invalid_argument("n must be at least 1");
    NgramSet wanted = ngrams_of(query_words, n);
    std::vector<NgramSet> overlap(pool.size());
    for (std::size_t i = 0; i < pool.size(); ++i) {
      for (auto& g : ngrams_of(words[i], n)) {
        if (wanted.count(g)) overlap[i].insert(g);
      }
    }
    // n-grams already shown by earlier picks do not count as new
    NgramSet covered;
    for (std::size_t i : taken_order) covered.insert(overlap[i].begin(), overlap[i].end());

    while (!stopped) {
      if (k && sel.exemplars.size() >= *k) {
        stopped = true;
        break;
      }
      std::size_t best = pool.size();
      std::size_t best_gain = 0;
      for (std::size_t i = 0; i < pool.size(); ++i) {
        if (taken[i]) continue;
        std::size_t gain = 0;
        for (const auto& g : overlap[i]) gain += covered.count(g) ? 0 : 1;
        if (gain == 0) continue;
        bool better = best == pool.size() || gain > best_gain ||
                      (gain == best_gain && (overlap[i].size() > overlap[best].size() ||
                                             (overlap[i].size() == overlap[best].size() &&
                                              pool[i]->id < pool[best]->id)));
        if (better) {
          best = i;
          best_gain = gain;
        }
      }
      if (best == pool.size()) break;
      std::size_t c = cost(*pool[best]);
      if (sel.total_cost + c > budget.available) {
        stopped = true;
        break;
      }
      taken[best] = true;
      taken_order.push_back(best);
      covered.insert(overlap[best].begin(), overlap[best].end());
      sel.exemplars.push_back(*pool[best]);
      sel.costs.push_back(c);
      sel.total_cost += c;
    }
  }
  if (reversed) reverse_selection(sel);
  return sel;
}

ExemplarSelection select(const StrategyConfig& strategy, std::span<const ClauseRecord> train,
                         std::span<const ClauseRecord> valid, const ClauseRecord& query,
                         const TokenBudget& budget, const embeddings::EmbeddingProvider& provider,
                         const ExemplarCost& cost) {
  switch (strategy.kind) {
    case StrategyKind::per_clause_semantic:
      return select_per_clause_semantic(train, query, budget, strategy.reversed, provider, cost,
                                        strategy.k);
    case StrategyKind::per_clause_ngram:
      strategy.validate();
      return select_per_clause_ngram(train, query, budget, strategy.reversed, strategy.n_orders,
                                     cost, strategy.k);
    default: {
      ExemplarSelection sel = select_static(strategy, train, valid, budget, provider, cost);
      if (strategy.reversed) reverse_selection(sel);
      return sel;
    }
  }
}

}  // namespace lrml::retrieval
