#include <fstream>

#include "lrml/pipeline.hpp"
#include "lrml/util/fs.hpp"

namespace lrml::pipeline {

using json = nlohmann::json;
using ojson = nlohmann::ordered_json;

UnknownClauseId::UnknownClauseId(const std::string& id)
    : std::invalid_argument("prediction id has no gold record: " + id) {}

ojson to_json(const RunConfig& c) {
  const auto& p = c.provider;
  const auto& s = c.strategy;
  const auto& x = c.context;
  ojson j;
  j["provider"] = {{"base_url", p.base_url},
                   {"model", p.model},
                   {"context_limit", p.context_limit},
                   {"max_output_tokens", p.max_output_tokens},
                   {"api_key_env", p.api_key_env},
                   {"max_parallel_requests", p.max_parallel_requests},
                   {"timeout_seconds", p.timeout_seconds}};
  ojson strategy = {{"kind", retrieval::to_string(s.kind)}};
  strategy["k"] = s.k ? ojson(*s.k) : ojson(nullptr);
  strategy["cluster_basis"] = retrieval::to_string(s.cluster_basis);
  strategy["n_orders"] = s.n_orders;
  strategy["reversed"] = s.reversed;
  strategy["curated_ids"] = s.curated_ids;
  j["strategy"] = std::move(strategy);
  j["context"] = {{"include_intro", x.include_intro},
                  {"include_format_spec", x.include_format_spec},
                  {"include_reference_notes", x.include_reference_notes},
                  {"include_common_terms", x.include_common_terms},
                  {"common_terms_k", x.common_terms_k}};
  j["rendering"] = prompting::to_string(c.rendering);
  j["plain_prefix"] = c.plain_prefix;
  j["schedule"] = c.schedule;
  j["seed"] = c.seed;
  j["corpus"] = c.corpus_path;
  j["translate_split"] = c.translate_split;
  j["embedding"] = {{"provider", c.embedding.provider}, {"model", c.embedding.model}};
  j["token_margin"] = c.token_margin;
  j["assets_dir"] = c.assets_dir;
  j["cache_dir"] = c.cache_dir;
  return j;
}

namespace {

template <typename T>
void read(const json& j, const char* key, T& into) {
  if (auto it = j.find(key); it != j.end() && !it->is_null()) into = it->get<T>();
}

}  // namespace

RunConfig config_from_json(const json& j) {
  RunConfig c;
  try {
    if (auto it = j.find("provider"); it != j.end()) {
      auto& p = c.provider;
      read(*it, "base_url", p.base_url);
      read(*it, "model", p.model);
      read(*it, "context_limit", p.context_limit);
      read(*it, "max_output_tokens", p.max_output_tokens);
      read(*it, "api_key_env", p.api_key_env);
      read(*it, "max_parallel_requests", p.max_parallel_requests);
      read(*it, "timeout_seconds", p.timeout_seconds);
    }
    if (auto it = j.find("strategy"); it != j.end()) {
      auto& s = c.strategy;
      std::string kind = retrieval::to_string(s.kind).data();
      read(*it, "kind", kind);
      s.kind = retrieval::strategy_from_string(kind);
      if (auto k = it->find("k"); k != it->end() && !k->is_null()) s.k = k->get<std::size_t>();
      std::string basis = "clause";
      read(*it, "cluster_basis", basis);
      s.cluster_basis = retrieval::cluster_basis_from_string(basis);
      read(*it, "n_orders", s.n_orders);
      read(*it, "reversed", s.reversed);
      read(*it, "curated_ids", s.curated_ids);
    }
    if (auto it = j.find("context"); it != j.end()) {
      auto& x = c.context;
      read(*it, "include_intro", x.include_intro);
      read(*it, "include_format_spec", x.include_format_spec);
      read(*it, "include_reference_notes", x.include_reference_notes);
      read(*it, "include_common_terms", x.include_common_terms);
      read(*it, "common_terms_k", x.common_terms_k);
    }
    std::string rendering = "plain";
    read(j, "rendering", rendering);
    c.rendering = prompting::rendering_from_string(rendering);
    read(j, "plain_prefix", c.plain_prefix);
    read(j, "schedule", c.schedule);
    read(j, "seed", c.seed);
    read(j, "corpus", c.corpus_path);
    read(j, "translate_split", c.translate_split);
    if (auto it = j.find("embedding"); it != j.end()) {
      read(*it, "provider", c.embedding.provider);
      read(*it, "model", c.embedding.model);
    }
    read(j, "token_margin", c.token_margin);
    read(j, "assets_dir", c.assets_dir);
    read(j, "cache_dir", c.cache_dir);
    read(j, "output_dir", c.output_dir);
  } catch (const json::exception& e) {
    throw std::invalid_argument(std::string("bad config: ") + e.what());
  }
  c.provider.validate();
  c.strategy.validate();
  if (c.embedding.provider != "fallback" && c.embedding.provider != "remote") {
    throw std::invalid_argument("embedding provider must be fallback or remote");
  }
  (void)corpus::split_from_string(c.translate_split);
  return c;
}

RunConfig load_config(const std::filesystem::path& path) {
  json j;
  try {
    j = json::parse(util::read_file(path));
  } catch (const json::exception& e) {
    throw std::invalid_argument("config " + path.string() + ": " + e.what());
  }
  return config_from_json(j);
}

std::string config_hash(const RunConfig& config) {
  ojson j = to_json(config);
  j.erase("cache_dir");  // where responses are kept does not change them
  return util::sha256_hex(j.dump());
}

}  // namespace lrml::pipeline
