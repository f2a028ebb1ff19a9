#include <chrono>
#include <fstream>
#include <sstream>
#include <thread>

#include "lrml/corpus.hpp"
#include "lrml/llm_client.hpp"
#include "lrml/metrics.hpp"
#include "lrml/util/fs.hpp"

namespace lrml::llm {

using json = nlohmann::json;

void ProviderConfig::validate() const {
  if (context_limit == 0) throw std::invalid_argument("context_limit must be positive");
  if (max_parallel_requests == 0) throw std::invalid_argument("max_parallel_requests must be at least 1");
  if (timeout_seconds <= 0) throw std::invalid_argument("timeout_seconds must be positive");
}

AllAttemptsInvalid::AllAttemptsInvalid(CompletionTrace trace)
    : std::runtime_error("no valid response after " + std::to_string(trace.attempts) + " attempts"),
      trace_(std::move(trace)) {}

json messages_json(std::span<const Message> messages) {
  json out = json::array();
  for (const auto& m : messages) out.push_back({{"role", m.role}, {"content", m.content}});
  return out;
}

std::string prompt_hash(std::span<const Message> messages) {
  return util::sha256_hex(messages_json(messages).dump());
}

std::string cache_key(const std::string& model, std::span<const Message> messages, double temperature) {
  // json objects keep keys sorted, so dump() is canonical
  json key = {{"model", model}, {"messages", messages_json(messages)}, {"temperature", temperature}};
  return util::sha256_hex(key.dump());
}

bool default_validator(const std::string& text) { return prompting::extract_rule(text).has_value(); }

// ---------------------------------------------------------------------------

std::string HttpBackend::complete(const ProviderConfig& config, std::span<const Message> messages,
                                  double temperature) {
  std::string key = http::api_key_from_env(config.api_key_env);
  json body = {{"model", config.model},
               {"messages", messages_json(messages)},
               {"temperature", temperature},
               {"max_tokens", config.max_output_tokens}};
  http::Response res =
      http::post_json(config.base_url, "/chat/completions", body.dump(), key, config.timeout_seconds);
  try {
    json parsed = json::parse(res.body);
    return parsed.at("choices").at(0).at("message").at("content").get<std::string>();
  } catch (const json::exception& e) {
    throw http::MalformedResponse(std::string("chat completion response: ") + e.what());
  }
}

// ---------------------------------------------------------------------------

std::string last_source(std::span<const Message> messages) {
  if (messages.empty()) return {};
  std::istringstream in(messages.back().content);
  std::string found;
  for (std::string line; std::getline(in, line);) {
    if (line.rfind("Source: ", 0) == 0) found = line.substr(8);
  }
  return found;
}

MockBackend::MockBackend(Responder responder, int latency_ms)
    : responder_(std::move(responder)), latency_ms_(latency_ms) {}

std::string MockBackend::complete(const ProviderConfig&, std::span<const Message> messages,
                                  double temperature) {
  std::size_t ordinal = calls_.fetch_add(1);
  std::size_t now = in_flight_.fetch_add(1) + 1;
  std::size_t seen = max_in_flight_.load();
  while (now > seen && !max_in_flight_.compare_exchange_weak(seen, now)) {
  }
  if (latency_ms_ > 0) std::this_thread::sleep_for(std::chrono::milliseconds(latency_ms_));
  std::optional<std::string> out = responder_(ordinal, messages, temperature);
  in_flight_.fetch_sub(1);
  return out.value_or("");
}

std::shared_ptr<MockBackend> MockBackend::from_json(const json& script,
                                                    const std::filesystem::path& base_dir) {
  std::map<std::string, std::string> responses;
  if (script.contains("responses")) {
    for (const auto& [k, v] : script.at("responses").items()) responses[k] = v.get<std::string>();
  }
  std::map<std::string, std::string> gold;
  if (script.contains("gold_echo")) {
    std::filesystem::path p = script.at("gold_echo").get<std::string>();
    if (p.is_relative()) p = base_dir / p;
    corpus::Corpus echo = corpus::load_corpus(p);
    for (const auto& r : echo.records()) {
      if (!r.has_gold()) continue;
      gold.emplace(r.document + " " + r.source, r.target_ir);
      gold.emplace(r.source, r.target_ir);
    }
  }
  std::string pick = script.value("pick_option", "");
  if (!pick.empty() && pick != "first" && pick != "longest" && pick != "best") {
    throw std::invalid_argument("unknown pick_option: " + pick);
  }
  std::optional<std::string> fallback;
  if (script.contains("default")) fallback = script.at("default").get<std::string>();
  int latency = script.value("latency_ms", 0);

  Responder responder = [responses, gold, pick, fallback](
                            std::size_t ordinal, std::span<const Message> messages,
                            double) -> std::optional<std::string> {
    if (auto it = responses.find(std::to_string(ordinal)); it != responses.end()) return it->second;
    if (auto it = responses.find(prompt_hash(messages)); it != responses.end()) return it->second;

    auto gold_it = gold.find(last_source(messages));
    if (!pick.empty() && !messages.empty()) {
      std::vector<std::string> options = prompting::query_options(messages.back().content);
      if (!options.empty()) {
        std::size_t idx = 0;
        if (pick == "longest") {
          for (std::size_t i = 1; i < options.size(); ++i) {
            if (options[i].size() > options[idx].size()) idx = i;
          }
        } else if (pick == "best" && gold_it != gold.end()) {
          idx = metrics::oracle_f1(options, gold_it->second).best_index;
        }
        return options[idx];
      }
    }
    if (gold_it != gold.end()) return gold_it->second;
    return fallback;
  };
  return std::make_shared<MockBackend>(std::move(responder), latency);
}

std::shared_ptr<MockBackend> MockBackend::from_file(const std::filesystem::path& path) {
  json script;
  try {
    script = json::parse(util::read_file(path));
  } catch (const json::exception& e) {
    throw std::invalid_argument("mock script " + path.string() + ": " + e.what());
  }
  return from_json(script, path.parent_path());
}

// ---------------------------------------------------------------------------

DiskCache::DiskCache(std::filesystem::path dir) : dir_(std::move(dir)) {}

std::filesystem::path DiskCache::path_for(const std::string& key) const {
  return dir_ / key.substr(0, 2) / (key + ".json");
}

std::optional<std::string> DiskCache::load(const std::string& key) const {
  std::filesystem::path p = path_for(key);
  std::error_code ec;
  if (!std::filesystem::is_regular_file(p, ec)) return std::nullopt;
  try {
    json entry = json::parse(util::read_file(p));
    if (entry.value("key", "") != key) return std::nullopt;
    return entry.at("response").get<std::string>();
  } catch (const std::exception&) {
    return std::nullopt;  // treat unreadable entries as misses
  }
}

void DiskCache::store(const std::string& key, const std::string& value) const {
  json entry = {{"key", key}, {"response", value}};
  util::write_file_atomic(path_for(key), entry.dump(2) + "\n");
}

// ---------------------------------------------------------------------------

Limiter::Limiter(std::size_t slots) : free_(slots) {}

void Limiter::acquire() {
  std::unique_lock lock(mutex_);
  cv_.wait(lock, [this] { return free_ > 0; });
  --free_;
}

void Limiter::release() {
  {
    std::lock_guard lock(mutex_);
    ++free_;
  }
  cv_.notify_one();
}

Client::Client(ProviderConfig config, std::shared_ptr<Backend> backend,
               std::optional<std::filesystem::path> cache_dir)
    : config_(std::move(config)),
      backend_(std::move(backend)),
      limiter_((config_.validate(), config_.max_parallel_requests)) {
  if (cache_dir) cache_.emplace(*cache_dir);
}

Completion Client::complete(std::span<const Message> messages, double temperature) {
  if (messages.empty()) throw std::invalid_argument("no messages to complete");
  if (temperature < 0.0 || temperature > 2.0) throw std::invalid_argument("temperature outside [0, 2]");

  std::string key;
  if (cache_) {
    key = cache_key(config_.model, messages, temperature);
    if (auto hit = cache_->load(key)) return {*hit, true};
  }

  limiter_.acquire();
  std::string text;
  try {
    network_calls_.fetch_add(1);
    text = backend_->complete(config_, messages, temperature);
  } catch (...) {
    limiter_.release();
    throw;
  }
  limiter_.release();

  if (cache_) cache_->store(key, text);
  return {text, false};
}

CompletionTrace Client::complete_with_escalation(std::span<const Message> messages,
                                                 const Validator& validator,
                                                 std::span<const double> schedule) {
  if (schedule.empty()) throw std::invalid_argument("empty temperature schedule");
  for (std::size_t i = 1; i < schedule.size(); ++i) {
    if (!(schedule[i] > schedule[i - 1])) {
      throw std::invalid_argument("temperature schedule must be strictly increasing");
    }
  }

  CompletionTrace trace;
  trace.prompt_hash = prompt_hash(messages);
  trace.cache_hit = true;
  for (double t : schedule) {
    Completion c = complete(messages, t);
    trace.temperatures_tried.push_back(t);
    trace.responses.push_back(c.text);
    trace.cache_hit = trace.cache_hit && c.cache_hit;
    trace.final_text = c.text;
    ++trace.attempts;
    if (validator(c.text)) {
      trace.valid = true;
      return trace;
    }
  }
  throw AllAttemptsInvalid(std::move(trace));
}

}  // namespace lrml::llm
