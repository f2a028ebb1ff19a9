#include <algorithm>
#include <fstream>
#include <set>

#include "lrml/ir/codec.hpp"
#include "lrml/pipeline.hpp"
#include "lrml/util/fs.hpp"
#include "parallel.hpp"

namespace lrml::pipeline {

using corpus::ClauseRecord;
using json = nlohmann::json;
using ojson = nlohmann::ordered_json;
using prompting::Rendering;

std::string prediction_to_json_line(const PredictionRecord& p, const std::string& hash) {
  ojson j;
  j["id"] = p.id;
  j["config_hash"] = hash;
  j["prompt_hash"] = p.prompt_hash;
  j["exemplar_ids"] = p.exemplar_ids;
  j["extracted_ir"] = p.extracted_ir;
  j["temperatures_tried"] = p.temperatures_tried;
  j["attempts"] = p.attempts;
  j["prompt_tokens"] = p.prompt_tokens;
  j["valid"] = p.valid;
  if (!p.error.empty()) j["error"] = p.error;
  return j.dump();
}

PredictionRecord prediction_from_json_line(std::string_view line) {
  json j = json::parse(line);
  PredictionRecord p;
  p.id = j.at("id").get<std::string>();
  p.config_hash = j.value("config_hash", "");
  p.prompt_hash = j.value("prompt_hash", "");
  p.exemplar_ids = j.value("exemplar_ids", std::vector<std::string>{});
  p.extracted_ir = j.value("extracted_ir", "");
  p.temperatures_tried = j.value("temperatures_tried", std::vector<double>{});
  p.attempts = j.value("attempts", std::size_t{0});
  p.prompt_tokens = j.value("prompt_tokens", std::size_t{0});
  p.valid = j.value("valid", false);
  p.error = j.value("error", "");
  return p;
}

std::vector<PredictionRecord> load_predictions(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw corpus::IoError("cannot open predictions file " + path.string());
  std::vector<PredictionRecord> out;
  std::size_t n = 0;
  for (std::string line; std::getline(in, line);) {
    ++n;
    if (line.find_first_not_of(" \t\r") == std::string::npos) continue;
    try {
      out.push_back(prediction_from_json_line(line));
    } catch (const json::exception& e) {
      throw corpus::MalformedRecord(n, e.what());
    }
  }
  return out;
}

bool rule_validator(const std::string& response) {
  auto rule = prompting::extract_rule(response);
  if (!rule) return false;
  try {
    (void)ir::distribute_connectives(ir::parse_ir(*rule));
    return true;
  } catch (const std::exception&) {
    return false;
  }
}

std::unique_ptr<RunContext> make_context(const RunConfig& config, std::shared_ptr<llm::Client> client) {
  return make_context(config, corpus::load_corpus(config.corpus_path), std::move(client));
}

std::unique_ptr<RunContext> make_context(const RunConfig& config, corpus::Corpus corpus,
                                         std::shared_ptr<llm::Client> client) {
  auto issues = corpus::validate_corpus(corpus);
  if (!issues.empty()) {
    std::string msg = std::to_string(issues.size()) + " gold rules do not parse; first: " +
                      issues.front().id + ": " + issues.front().error;
    throw InvalidCorpus(msg);
  }

  auto ctx = std::make_unique<RunContext>();
  ctx->config = config;
  ctx->config.strategy.seed = config.seed;
  ctx->corpus = std::move(corpus);
  ctx->client = std::move(client);
  if (config.embedding.provider == "remote") {
    ctx->base_embeddings = std::make_unique<embeddings::RemoteProvider>(embeddings::RemoteEmbeddingConfig{
        config.provider.base_url, config.embedding.model, config.provider.api_key_env,
        config.provider.timeout_seconds});
  } else {
    ctx->base_embeddings = std::make_unique<embeddings::FallbackProvider>();
  }
  ctx->embeddings = std::make_unique<embeddings::MemoizedProvider>(*ctx->base_embeddings);
  ctx->assets = config.assets_dir.empty() ? prompting::ContextAssets::defaults()
                                          : prompting::ContextAssets::load(config.assets_dir);
  std::vector<corpus::TermCount> terms;
  if (config.context.include_common_terms) {
    terms = corpus::term_frequencies(ctx->corpus, config.context.common_terms_k);
  }
  ctx->context_text = prompting::render_context(config.context, ctx->assets, terms);
  ctx->counter = llm::heuristic_counter(config.token_margin);
  return ctx;
}

namespace {

bool is_cot(Rendering r) { return r == Rendering::cot_colloquial || r == Rendering::cot_alignment; }

std::size_t longest_gold(const RunContext& ctx, std::span<const ClauseRecord> a,
                         std::span<const ClauseRecord> b) {
  std::size_t out = 0;
  for (auto span : {a, b}) {
    for (const auto& r : span) {
      if (r.has_gold()) out = std::max(out, ctx.counter(prompting::spaced_target(r)));
    }
  }
  return out;
}

std::optional<retrieval::ExemplarSelection> fixed_selection(const RunContext& ctx,
                                                            std::span<const ClauseRecord> train,
                                                            std::span<const ClauseRecord> valid,
                                                            const retrieval::TokenBudget& budget) {
  const auto& s = ctx.config.strategy;
  if (retrieval::is_per_clause(s.kind) || ctx.config.rendering != Rendering::plain) return std::nullopt;
  auto sel = retrieval::select_static(s, train, valid, budget, *ctx.embeddings,
                                      retrieval::exemplar_cost(ctx.counter));
  if (s.reversed) std::reverse(sel.exemplars.begin(), sel.exemplars.end());
  return sel;
}

PredictionRecord translate_one(const RunContext& ctx, const prompting::PromptSpec& prompt) {
  PredictionRecord rec;
  rec.id = prompt.query_id;
  rec.exemplar_ids = prompt.exemplar_ids;
  rec.prompt_tokens = ctx.counter(prompt.text());
  try {
    llm::CompletionTrace trace =
        ctx.client->complete_with_escalation(prompt.messages, rule_validator, ctx.config.schedule);
    rec.prompt_hash = trace.prompt_hash;
    rec.temperatures_tried = trace.temperatures_tried;
    rec.attempts = trace.attempts;
    rec.extracted_ir = *prompting::extract_rule(trace.final_text);
    rec.valid = true;
  } catch (const llm::AllAttemptsInvalid& e) {
    rec.prompt_hash = e.trace().prompt_hash;
    rec.temperatures_tried = e.trace().temperatures_tried;
    rec.attempts = e.trace().attempts;
    rec.error = "AllAttemptsInvalid";
  }
  return rec;
}

void write_config(const RunContext& ctx, const std::filesystem::path& out_dir, const std::string& hash) {
  ojson j = to_json(ctx.config);
  j["config_hash"] = hash;
  util::write_file_atomic(out_dir / "config.json", j.dump(2) + "\n");
}

}  // namespace

retrieval::TokenBudget translate_budget(const RunContext& ctx, std::span<const ClauseRecord> queries,
                                        std::span<const ClauseRecord> train) {
  return retrieval::compute_budget(queries, train, ctx.context_text, ctx.counter,
                                   ctx.config.provider.context_limit, ctx.config.rendering,
                                   longest_gold(ctx, queries, train));
}

prompting::PromptSpec build_prompt(const RunContext& ctx, const ClauseRecord& query,
                                   std::span<const ClauseRecord> train,
                                   const retrieval::TokenBudget& budget,
                                   const std::optional<retrieval::ExemplarSelection>& fixed) {
  const RunConfig& cfg = ctx.config;
  std::vector<ClauseRecord> valid = ctx.corpus.split(corpus::Split::valid);

  if (!is_cot(cfg.rendering)) {
    if (cfg.rendering != Rendering::plain) {
      throw std::invalid_argument("translate runs render plain or chain-of-thought prompts");
    }
    retrieval::ExemplarSelection sel =
        fixed ? *fixed
              : retrieval::select(cfg.strategy, train, valid, query, budget, *ctx.embeddings,
                                  retrieval::exemplar_cost(ctx.counter));
    return prompting::render_fewshot(sel.exemplars, query, ctx.context_text);
  }

  auto style = cfg.rendering == Rendering::cot_colloquial ? corpus::RationaleStyle::colloquial
                                                          : corpus::RationaleStyle::alignment;
  std::vector<ClauseRecord> cot_pool;
  for (const auto& r : train) {
    if (r.rationale_style == style && !r.rationale.empty()) cot_pool.push_back(r);
  }
  retrieval::ExemplarSelection cot =
      retrieval::select(cfg.strategy, cot_pool, valid, query, budget, *ctx.embeddings,
                        retrieval::exemplar_cost(ctx.counter, cfg.rendering));

  retrieval::ExemplarSelection plain;
  if (cfg.plain_prefix > 0) {
    std::set<std::string> used;
    for (const auto& r : cot.exemplars) used.insert(r.id);
    std::vector<ClauseRecord> rest;
    for (const auto& r : train) {
      if (!used.count(r.id)) rest.push_back(r);
    }
    retrieval::TokenBudget left = budget;
    left.available -= cot.total_cost;
    retrieval::StrategyConfig s = cfg.strategy;
    s.k = cfg.plain_prefix;
    if (!rest.empty() && left.available > 0) {
      plain = retrieval::select(s, rest, valid, query, left, *ctx.embeddings,
                                retrieval::exemplar_cost(ctx.counter));
    }
  }
  return prompting::render_cot(cot.exemplars, query, style, plain.exemplars, ctx.context_text);
}

TranslateResult run_translate(RunContext& ctx, const std::filesystem::path& out_dir) {
  const RunConfig& cfg = ctx.config;
  std::vector<ClauseRecord> train = ctx.corpus.split(corpus::Split::train);
  std::vector<ClauseRecord> valid = ctx.corpus.split(corpus::Split::valid);
  std::vector<ClauseRecord> queries = ctx.corpus.split(corpus::split_from_string(cfg.translate_split));
  if (queries.empty()) throw retrieval::EmptySplit(cfg.translate_split);

  retrieval::TokenBudget budget = translate_budget(ctx, queries, train);
  auto fixed = fixed_selection(ctx, train, valid, budget);

  TranslateResult result;
  result.config_hash = config_hash(cfg);
  result.predictions.resize(queries.size());
  result.prompts.resize(queries.size());
  detail::parallel_for(queries.size(), cfg.provider.max_parallel_requests, [&](std::size_t i) {
    result.prompts[i] = build_prompt(ctx, queries[i], train, budget, fixed);
    result.predictions[i] = translate_one(ctx, result.prompts[i]);
  });
  for (const auto& p : result.predictions) result.failures += p.valid ? 0 : 1;

  if (!out_dir.empty()) {
    std::string body;
    for (const auto& p : result.predictions) body += prediction_to_json_line(p, result.config_hash) + "\n";
    result.predictions_path = out_dir / "predictions.jsonl";
    util::write_file_atomic(result.predictions_path, body);
    write_config(ctx, out_dir, result.config_hash);
  }
  return result;
}

TeacherResult run_teacher(RunContext& ctx, std::span<const ClauseRecord> seeds,
                          std::span<const ClauseRecord> untranslated,
                          const std::filesystem::path& out_dir) {
  std::vector<ClauseRecord> pool;
  for (const auto& s : seeds) {
    if (!s.has_gold()) throw prompting::MissingGoldIr(s.id);
    ClauseRecord r = s;
    r.split = corpus::Split::train;
    pool.push_back(std::move(r));
  }
  if (pool.empty()) throw corpus::EmptyTrainingSplit();
  std::vector<ClauseRecord> queries(untranslated.begin(), untranslated.end());

  TeacherResult result;
  result.config_hash = config_hash(ctx.config);
  std::vector<std::optional<ClauseRecord>> generated(queries.size());
  std::vector<std::string> reasons(queries.size());

  if (!queries.empty()) {
    retrieval::TokenBudget budget = translate_budget(ctx, queries, pool);
    auto fixed = fixed_selection(ctx, pool, queries, budget);
    detail::parallel_for(queries.size(), ctx.config.provider.max_parallel_requests, [&](std::size_t i) {
      auto prompt = build_prompt(ctx, queries[i], pool, budget, fixed);
      PredictionRecord p = translate_one(ctx, prompt);
      if (!p.valid) {
        reasons[i] = p.error;
        return;
      }
      ClauseRecord r = queries[i];
      r.target_ir = ir::serialize_ir(ir::parse_ir(p.extracted_ir), ir::Style::spaced);
      r.split = corpus::Split::train;
      r.generated = true;
      r.rationale.clear();
      r.rationale_style.reset();
      generated[i] = std::move(r);
    });
  }

  std::vector<ClauseRecord> out = pool;
  for (std::size_t i = 0; i < queries.size(); ++i) {
    if (generated[i]) {
      out.push_back(std::move(*generated[i]));
      ++result.generated;
    } else {
      result.skipped.push_back({queries[i].id, reasons[i]});
    }
  }
  result.augmented = corpus::Corpus(std::move(out));

  if (!out_dir.empty()) {
    result.corpus_path = out_dir / "augmented.jsonl";
    corpus::save_corpus(result.augmented, result.corpus_path);
    ojson report;
    report["config_hash"] = result.config_hash;
    report["corpus"] = "augmented.jsonl";
    report["corpus_sha256"] = util::sha256_hex(util::read_file(result.corpus_path));
    report["seeds"] = pool.size();
    report["generated"] = result.generated;
    ojson skipped = ojson::array();
    for (const auto& s : result.skipped) skipped.push_back({{"id", s.id}, {"reason", s.reason}});
    report["skipped"] = std::move(skipped);
    util::write_file_atomic(out_dir / "teacher_report.json", report.dump(2) + "\n");
    write_config(ctx, out_dir, result.config_hash);
  }
  return result;
}

}  // namespace lrml::pipeline
