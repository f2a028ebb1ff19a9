#pragma once

#include <atomic>
#include <condition_variable>
#include <cstddef>
#include <filesystem>
#include <functional>
#include <map>
#include <memory>
#include <mutex>
#include <optional>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "lrml/prompting.hpp"
#include "lrml/tokens.hpp"
#include "lrml/util/http.hpp"

namespace lrml::llm {

using prompting::Message;

struct ProviderConfig {
  std::string base_url = "https://api.openai.com/v1";
  std::string model = "gpt-3.5-turbo";
  std::size_t context_limit = 4096;
  std::size_t max_output_tokens = 512;
  std::string api_key_env = "LLM_API_KEY";
  std::size_t max_parallel_requests = 4;
  int timeout_seconds = 60;

  void validate() const;
  bool operator==(const ProviderConfig&) const = default;
};

inline const std::vector<double> kDefaultSchedule{0.0, 0.2, 0.4, 0.6, 0.8, 1.0};

struct CompletionTrace {
  std::string prompt_hash;
  std::vector<double> temperatures_tried;
  std::vector<std::string> responses;  // one per attempt
  std::string final_text;
  bool cache_hit = false;  // every attempt was served from the cache
  std::size_t attempts = 0;
  bool valid = false;
};

class AllAttemptsInvalid : public std::runtime_error {
 public:
  explicit AllAttemptsInvalid(CompletionTrace trace);
  const CompletionTrace& trace() const noexcept { return trace_; }

 private:
  CompletionTrace trace_;
};

/// sha256 of the canonical JSON message list.
std::string prompt_hash(std::span<const Message> messages);

/// sha256 of canonical JSON {model, messages, temperature}.
std::string cache_key(const std::string& model, std::span<const Message> messages, double temperature);

nlohmann::json messages_json(std::span<const Message> messages);

// ---------------------------------------------------------------------------
// Backends

class Backend {
 public:
  virtual ~Backend() = default;
  virtual std::string complete(const ProviderConfig& config, std::span<const Message> messages,
                               double temperature) = 0;
};

/// POST {base_url}/chat/completions; key from the configured env var.
class HttpBackend final : public Backend {
 public:
  std::string complete(const ProviderConfig& config, std::span<const Message> messages,
                       double temperature) override;
};

/// Scripted responses. Resolution order per call: ordinal call index, prompt
/// hash, option picking, gold echo, default. Unresolved calls return "".
///
/// Script keys:
///   "responses":    {"0": "...", "<prompt hash>": "..."}
///   "gold_echo":    corpus path (relative to the script); answers with the
///                   gold IR of the record named on the last Source line
///   "pick_option":  "first" | "longest" | "best" (best needs gold_echo)
///   "default":      fallback text
///   "latency_ms":   simulated service time
class MockBackend final : public Backend {
 public:
  using Responder = std::function<std::optional<std::string>(std::size_t ordinal,
                                                             std::span<const Message> messages,
                                                             double temperature)>;

  explicit MockBackend(Responder responder, int latency_ms = 0);
  static std::shared_ptr<MockBackend> from_json(const nlohmann::json& script,
                                                const std::filesystem::path& base_dir = {});
  static std::shared_ptr<MockBackend> from_file(const std::filesystem::path& path);

  std::string complete(const ProviderConfig& config, std::span<const Message> messages,
                       double temperature) override;

  std::size_t calls() const { return calls_.load(); }
  std::size_t max_in_flight() const { return max_in_flight_.load(); }

 private:
  Responder responder_;
  int latency_ms_;
  std::atomic<std::size_t> calls_{0};
  std::atomic<std::size_t> in_flight_{0};
  std::atomic<std::size_t> max_in_flight_{0};
};

/// The last `Source:` line of the final message, without the prefix.
std::string last_source(std::span<const Message> messages);

// ---------------------------------------------------------------------------
// Cache

/// One JSON file per key under <dir>/<first two hex>/<key>.json.
class DiskCache {
 public:
  explicit DiskCache(std::filesystem::path dir);

  std::optional<std::string> load(const std::string& key) const;
  void store(const std::string& key, const std::string& value) const;
  std::filesystem::path path_for(const std::string& key) const;

 private:
  std::filesystem::path dir_;
};

// ---------------------------------------------------------------------------
// Client

class Limiter {
 public:
  explicit Limiter(std::size_t slots);
  void acquire();
  void release();

 private:
  std::mutex mutex_;
  std::condition_variable cv_;
  std::size_t free_;
};

struct Completion {
  std::string text;
  bool cache_hit = false;
};

using Validator = std::function<bool(const std::string&)>;

/// extract_rule finds a rule.
bool default_validator(const std::string& text);

class Client {
 public:
  Client(ProviderConfig config, std::shared_ptr<Backend> backend,
         std::optional<std::filesystem::path> cache_dir = std::nullopt);

  /// Cache first, then the backend under the parallelism limiter.
  Completion complete(std::span<const Message> messages, double temperature);

  /// Tries each temperature until `validator` accepts. Throws AllAttemptsInvalid.
  CompletionTrace complete_with_escalation(std::span<const Message> messages,
                                           const Validator& validator = default_validator,
                                           std::span<const double> schedule = kDefaultSchedule);

  std::size_t network_calls() const { return network_calls_.load(); }
  const ProviderConfig& config() const { return config_; }

 private:
  ProviderConfig config_;
  std::shared_ptr<Backend> backend_;
  std::optional<DiskCache> cache_;
  Limiter limiter_;
  std::atomic<std::size_t> network_calls_{0};
};

}  // namespace lrml::llm
