#include "lrml/embeddings.hpp"

#include <algorithm>
#include <cctype>
#include <cmath>
#include <limits>
#include <numeric>
#include <random>

#include <nlohmann/json.hpp>

#include "lrml/util/http.hpp"

namespace lrml::embeddings {

DimensionMismatch::DimensionMismatch(std::size_t a, std::size_t b)
    : std::invalid_argument("embedding dimensions differ: " + std::to_string(a) + " vs " +
                            std::to_string(b)) {}

KTooLarge::KTooLarge(std::size_t k, std::size_t n)
    : std::invalid_argument("k = " + std::to_string(k) + " exceeds " + std::to_string(n) +
                            " vectors") {}

EmbeddingVector embed_fallback(std::string_view text) {
  EmbeddingVector v(kFallbackDimension, 0.0);
  std::string lowered(text);
  std::transform(lowered.begin(), lowered.end(), lowered.begin(),
                 [](unsigned char c) { return static_cast<char>(std::tolower(c)); });
  if (lowered.size() < 3) return v;

  for (std::size_t i = 0; i + 3 <= lowered.size(); ++i) {
    std::uint64_t h = kFallbackHashSeed;
    for (std::size_t j = i; j < i + 3; ++j) {
      h ^= static_cast<unsigned char>(lowered[j]);
      h *= 0x100000001b3ULL;
    }
    v[h % kFallbackDimension] += 1.0;
  }
  double n = norm(v);
  for (double& x : v) x /= n;
  return v;
}

double norm(std::span<const double> v) {
  return std::sqrt(std::inner_product(v.begin(), v.end(), v.begin(), 0.0));
}

double cosine(std::span<const double> a, std::span<const double> b) {
  if (a.size() != b.size()) throw DimensionMismatch(a.size(), b.size());
  double na = norm(a);
  double nb = norm(b);
  if (na == 0.0 || nb == 0.0) return 0.0;
  double c = std::inner_product(a.begin(), a.end(), b.begin(), 0.0) / (na * nb);
  return std::clamp(c, -1.0, 1.0);
}

namespace {

// Uniform integer in [0, bound) by rejection; std::uniform_int_distribution
// is not specified bit-exactly across standard libraries.
std::size_t bounded(std::mt19937_64& rng, std::size_t bound) {
  const std::uint64_t range = std::numeric_limits<std::uint64_t>::max();
  const std::uint64_t limit = range - range % bound;
  std::uint64_t x = rng();
  while (x >= limit) x = rng();
  return static_cast<std::size_t>(x % bound);
}

double squared_distance(std::span<const double> a, std::span<const double> b) {
  double d = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) d += (a[i] - b[i]) * (a[i] - b[i]);
  return d;
}

std::vector<EmbeddingVector> means(std::span<const EmbeddingVector> vectors,
                                   const std::vector<std::size_t>& assignments, std::size_t k,
                                   std::vector<EmbeddingVector> previous) {
  const std::size_t dim = vectors.front().size();
  std::vector<EmbeddingVector> sums(k, EmbeddingVector(dim, 0.0));
  std::vector<std::size_t> counts(k, 0);
  for (std::size_t i = 0; i < vectors.size(); ++i) {
    auto& s = sums[assignments[i]];
    for (std::size_t d = 0; d < dim; ++d) s[d] += vectors[i][d];
    ++counts[assignments[i]];
  }
  for (std::size_t c = 0; c < k; ++c) {
    if (counts[c] == 0) {
      sums[c] = std::move(previous[c]);
      continue;
    }
    for (double& x : sums[c]) x /= static_cast<double>(counts[c]);
  }
  return sums;
}

}  // namespace

std::vector<std::size_t> sample_without_replacement(std::size_t n, std::size_t count,
                                                    std::uint64_t seed) {
  std::vector<std::size_t> pool(n);
  std::iota(pool.begin(), pool.end(), 0);
  std::mt19937_64 rng(seed);
  count = std::min(count, n);
  for (std::size_t i = 0; i < count; ++i) {
    std::size_t j = i + bounded(rng, n - i);
    std::swap(pool[i], pool[j]);
  }
  pool.resize(count);
  return pool;
}

KMeansResult kmeans(std::span<const EmbeddingVector> vectors, std::size_t k, std::uint64_t seed,
                    std::size_t max_iters) {
  const std::size_t n = vectors.size();
  if (k == 0) throw std::invalid_argument("k must be at least 1");
  if (k > n) throw KTooLarge(k, n);
  const std::size_t dim = vectors.front().size();
  for (const auto& v : vectors) {
    if (v.size() != dim) throw DimensionMismatch(dim, v.size());
  }

  KMeansResult result;
  for (std::size_t idx : sample_without_replacement(n, k, seed)) {
    result.centroids.push_back(vectors[idx]);
  }
  result.assignments.assign(n, 0);
  std::vector<std::size_t> previous;

  for (std::size_t iter = 0; iter < std::max<std::size_t>(max_iters, 1); ++iter) {
    std::vector<double> dist(n);
    for (std::size_t i = 0; i < n; ++i) {
      std::size_t best = 0;
      double best_d = squared_distance(vectors[i], result.centroids[0]);
      for (std::size_t c = 1; c < k; ++c) {
        double d = squared_distance(vectors[i], result.centroids[c]);
        if (d < best_d) best_d = d, best = c;
      }
      result.assignments[i] = best;
      dist[i] = best_d;
    }

    // Empty clusters take the farthest point of a cluster that can spare one.
    std::vector<std::size_t> sizes(k, 0);
    for (std::size_t a : result.assignments) ++sizes[a];
    for (std::size_t c = 0; c < k; ++c) {
      if (sizes[c] != 0) continue;
      std::size_t pick = n;
      for (std::size_t i = 0; i < n; ++i) {
        if (sizes[result.assignments[i]] < 2) continue;
        if (pick == n || dist[i] > dist[pick]) pick = i;
      }
      --sizes[result.assignments[pick]];
      result.assignments[pick] = c;
      ++sizes[c];
      result.centroids[c] = vectors[pick];
      dist[pick] = 0.0;
    }

    result.objective_history.push_back(std::accumulate(dist.begin(), dist.end(), 0.0));
    if (result.assignments == previous) break;
    previous = result.assignments;
    result.centroids = means(vectors, result.assignments, k, std::move(result.centroids));
  }
  result.centroids = means(vectors, result.assignments, k, std::move(result.centroids));

  result.medoids.assign(k, n);
  std::vector<double> best(k, std::numeric_limits<double>::infinity());
  for (std::size_t i = 0; i < n; ++i) {
    std::size_t c = result.assignments[i];
    double d = squared_distance(vectors[i], result.centroids[c]);
    if (d < best[c]) best[c] = d, result.medoids[c] = i;
  }
  return result;
}

EmbeddingVector EmbeddingProvider::embed_one(const std::string& text) const {
  return embed(std::span<const std::string>(&text, 1)).front();
}

std::vector<EmbeddingVector> FallbackProvider::embed(std::span<const std::string> texts) const {
  std::vector<EmbeddingVector> out;
  out.reserve(texts.size());
  for (const std::string& t : texts) out.push_back(embed_fallback(t));
  return out;
}

RemoteProvider::RemoteProvider(RemoteEmbeddingConfig config) : config_(std::move(config)) {}

std::vector<EmbeddingVector> RemoteProvider::embed(std::span<const std::string> texts) const {
  using json = nlohmann::json;
  if (texts.empty()) return {};
  std::string key = http::api_key_from_env(config_.api_key_env);
  json body = {{"model", config_.model}, {"input", std::vector<std::string>(texts.begin(), texts.end())}};
  http::Response res =
      http::post_json(config_.base_url, "/embeddings", body.dump(), key, config_.timeout_seconds);

  std::vector<EmbeddingVector> out;
  try {
    json parsed = json::parse(res.body);
    for (const json& item : parsed.at("data")) {
      out.push_back(item.at("embedding").get<EmbeddingVector>());
    }
  } catch (const json::exception& e) {
    throw http::MalformedResponse(std::string("embeddings response: ") + e.what());
  }
  if (out.size() != texts.size()) {
    throw http::MalformedResponse("embeddings response has " + std::to_string(out.size()) +
                                  " vectors for " + std::to_string(texts.size()) + " inputs");
  }
  for (const auto& v : out) {
    if (!std::all_of(v.begin(), v.end(), [](double x) { return std::isfinite(x); })) {
      throw http::MalformedResponse("embeddings response contains non-finite components");
    }
  }
  return out;
}

std::vector<EmbeddingVector> MemoizedProvider::embed(std::span<const std::string> texts) const {
  std::vector<std::string> missing;
  {
    std::lock_guard lock(mutex_);
    for (const std::string& t : texts) {
      if (!memo_.count(t)) missing.push_back(t);
    }
  }
  if (!missing.empty()) {
    std::sort(missing.begin(), missing.end());
    missing.erase(std::unique(missing.begin(), missing.end()), missing.end());
    std::vector<EmbeddingVector> fresh = inner_.embed(missing);
    std::lock_guard lock(mutex_);
    for (std::size_t i = 0; i < missing.size(); ++i) memo_.emplace(missing[i], std::move(fresh[i]));
  }
  std::lock_guard lock(mutex_);
  std::vector<EmbeddingVector> out;
  out.reserve(texts.size());
  for (const std::string& t : texts) out.push_back(memo_.at(t));
  return out;
}

}  // namespace lrml::embeddings
