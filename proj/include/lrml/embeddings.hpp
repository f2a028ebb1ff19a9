#pragma once

#include <cstddef>
#include <cstdint>
#include <map>
#include <memory>
#include <mutex>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

namespace lrml::embeddings {

using EmbeddingVector = std::vector<double>;

inline constexpr std::size_t kFallbackDimension = 256;
/// FNV-1a 64-bit offset basis; each character 3-gram hashes into a bucket.
inline constexpr std::uint64_t kFallbackHashSeed = 0xcbf29ce484222325ULL;

class DimensionMismatch : public std::invalid_argument {
 public:
  DimensionMismatch(std::size_t a, std::size_t b);
};

class KTooLarge : public std::invalid_argument {
 public:
  KTooLarge(std::size_t k, std::size_t n);
};

/// Lowercased character 3-gram counts hashed into 256 buckets, L2-normalized.
EmbeddingVector embed_fallback(std::string_view text);

double norm(std::span<const double> v);

/// Zero vectors have cosine 0 against anything.
double cosine(std::span<const double> a, std::span<const double> b);

struct KMeansResult {
  std::vector<std::size_t> assignments;  // cluster id per vector
  std::vector<std::size_t> medoids;      // per cluster, index of the member nearest its centroid
  std::vector<EmbeddingVector> centroids;
  std::vector<double> objective_history;  // sum of squared distances after each assignment
};

KMeansResult kmeans(std::span<const EmbeddingVector> vectors, std::size_t k, std::uint64_t seed,
                    std::size_t max_iters = 100);

/// Draws `count` distinct indices from [0, n) with a platform-independent generator.
std::vector<std::size_t> sample_without_replacement(std::size_t n, std::size_t count,
                                                    std::uint64_t seed);

// ---------------------------------------------------------------------------
// Providers

class EmbeddingProvider {
 public:
  virtual ~EmbeddingProvider() = default;
  virtual std::vector<EmbeddingVector> embed(std::span<const std::string> texts) const = 0;

  EmbeddingVector embed_one(const std::string& text) const;
};

class FallbackProvider final : public EmbeddingProvider {
 public:
  std::vector<EmbeddingVector> embed(std::span<const std::string> texts) const override;
};

struct RemoteEmbeddingConfig {
  std::string base_url;
  std::string model;
  std::string api_key_env = "LLM_API_KEY";
  int timeout_seconds = 60;
};

/// POST {base_url}/embeddings with {"model", "input": [...]}.
class RemoteProvider final : public EmbeddingProvider {
 public:
  explicit RemoteProvider(RemoteEmbeddingConfig config);
  std::vector<EmbeddingVector> embed(std::span<const std::string> texts) const override;

 private:
  RemoteEmbeddingConfig config_;
};

/// Memoizes another provider by text. Thread-safe.
class MemoizedProvider final : public EmbeddingProvider {
 public:
  explicit MemoizedProvider(const EmbeddingProvider& inner) : inner_(inner) {}
  std::vector<EmbeddingVector> embed(std::span<const std::string> texts) const override;

 private:
  const EmbeddingProvider& inner_;
  mutable std::mutex mutex_;
  mutable std::map<std::string, EmbeddingVector> memo_;
};

}  // namespace lrml::embeddings
