#pragma once

#include <cstdint>
#include <filesystem>
#include <memory>
#include <optional>
#include <stdexcept>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "lrml/corpus.hpp"
#include "lrml/embeddings.hpp"
#include "lrml/llm_client.hpp"
#include "lrml/metrics.hpp"
#include "lrml/prompting.hpp"
#include "lrml/retrieval.hpp"

namespace lrml::pipeline {

class UnknownClauseId : public std::invalid_argument {
 public:
  explicit UnknownClauseId(const std::string& id);
};

class ClauseCoverageMismatch : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

class InvalidCorpus : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

struct EmbeddingConfig {
  std::string provider = "fallback";  // fallback | remote
  std::string model;

  bool operator==(const EmbeddingConfig&) const = default;
};

struct RunConfig {
  llm::ProviderConfig provider;
  retrieval::StrategyConfig strategy;
  prompting::ContextConfig context;
  prompting::Rendering rendering = prompting::Rendering::plain;
  std::size_t plain_prefix = 0;  // chain-of-thought runs: plain exemplars placed first
  std::vector<double> schedule = llm::kDefaultSchedule;
  std::uint64_t seed = 0;
  std::string corpus_path;
  std::string translate_split = "valid";
  EmbeddingConfig embedding;
  double token_margin = 0.1;
  std::string assets_dir;  // empty: built-in context text
  std::string cache_dir = "cache";  // empty: no cache
  std::string output_dir = "out";

  bool operator==(const RunConfig&) const = default;
};

/// Everything except output_dir, which only says where artifacts land.
nlohmann::ordered_json to_json(const RunConfig& config);
/// Missing keys keep their defaults.
RunConfig config_from_json(const nlohmann::json& j);
RunConfig load_config(const std::filesystem::path& path);
std::string config_hash(const RunConfig& config);

struct PredictionRecord {
  std::string id;
  std::string config_hash;  // filled on load
  std::string prompt_hash;
  std::vector<std::string> exemplar_ids;
  std::string extracted_ir;  // empty when every attempt was invalid
  std::vector<double> temperatures_tried;
  std::size_t attempts = 0;
  std::size_t prompt_tokens = 0;
  bool valid = false;
  std::string error;
};

std::string prediction_to_json_line(const PredictionRecord& p, const std::string& config_hash);
PredictionRecord prediction_from_json_line(std::string_view line);
std::vector<PredictionRecord> load_predictions(const std::filesystem::path& path);

/// Extraction succeeds and the rule parses.
bool rule_validator(const std::string& response);

/// Shared state of one run: corpus, provider, embeddings, context text.
struct RunContext {
  RunConfig config;
  corpus::Corpus corpus;
  std::shared_ptr<llm::Client> client;
  std::unique_ptr<embeddings::EmbeddingProvider> base_embeddings;
  std::unique_ptr<embeddings::MemoizedProvider> embeddings;
  prompting::ContextAssets assets;
  std::string context_text;
  llm::TokenCounter counter;
};

/// Loads and validates the corpus (InvalidCorpus), builds the embedding
/// provider and renders context sections.
std::unique_ptr<RunContext> make_context(const RunConfig& config, std::shared_ptr<llm::Client> client);
std::unique_ptr<RunContext> make_context(const RunConfig& config, corpus::Corpus corpus,
                                         std::shared_ptr<llm::Client> client);

struct TranslateResult {
  std::vector<PredictionRecord> predictions;
  std::vector<prompting::PromptSpec> prompts;
  std::size_t failures = 0;
  std::string config_hash;
  std::filesystem::path predictions_path;
};

/// Exemplar budget for translating `queries` from `train` under the run's
/// context limit; queries without gold reserve the longest gold seen.
retrieval::TokenBudget translate_budget(const RunContext& ctx,
                                        std::span<const corpus::ClauseRecord> queries,
                                        std::span<const corpus::ClauseRecord> train);

/// Prompt for one query, with the exemplars chosen by the configured strategy.
prompting::PromptSpec build_prompt(const RunContext& ctx, const corpus::ClauseRecord& query,
                                   std::span<const corpus::ClauseRecord> train,
                                   const retrieval::TokenBudget& budget,
                                   const std::optional<retrieval::ExemplarSelection>& fixed);

/// Translates the configured split. Transport errors abort; invalid responses
/// are recorded and the run continues. Writes predictions.jsonl and config.json.
TranslateResult run_translate(RunContext& ctx, const std::filesystem::path& out_dir);

struct ClauseScore {
  std::string id;
  std::size_t bleu_ref_len = 0;
  double f1 = 0.0;
  double precision = 0.0;
  double recall = 0.0;
  bool parse_failed = false;
};

struct ScoreReport {
  std::vector<ClauseScore> clauses;
  double bleu = 0.0;
  double mean_f1 = 0.0;
  double mean_precision = 0.0;
  double mean_recall = 0.0;
  std::size_t parse_failures = 0;
  std::string config_hash;
};

/// Scores (id, prediction) pairs against corpus gold. Throws UnknownClauseId.
ScoreReport score_predictions(const std::vector<std::pair<std::string, std::string>>& predictions,
                              const corpus::Corpus& gold);

nlohmann::ordered_json report_to_json(const ScoreReport& report);
std::string report_table(const ScoreReport& report);

/// Writes report.json and report.txt when out_dir is non-empty.
ScoreReport run_evaluate(const std::filesystem::path& predictions_path, const corpus::Corpus& corpus,
                         const std::filesystem::path& out_dir);

struct SelfConsistencyClause {
  std::string id;
  std::vector<std::string> options;
  std::string chosen_ir;
  std::string prompt_hash;
  std::vector<double> temperatures_tried;
  bool valid = false;
  bool snapped = false;
  std::optional<double> chosen_f1;
  std::optional<double> oracle_f1;
  std::optional<std::size_t> oracle_index;
  std::vector<double> option_f1;
  std::string error;
};

struct SelfConsistencyReport {
  std::vector<SelfConsistencyClause> clauses;
  prompting::SelfConsistencyMode mode = prompting::SelfConsistencyMode::choose;
  std::size_t scored = 0;  // clauses with gold
  double mean_chosen_f1 = 0.0;
  double mean_oracle_f1 = 0.0;
  double max_f1 = 0.0;      // best single prediction file
  double average_f1 = 0.0;  // mean over prediction files
  std::size_t failures = 0;
  std::string config_hash;
};

/// Bank lines are corpus records (target_ir = gold) with an "options" array.
std::vector<prompting::BankExemplar> load_bank(const std::filesystem::path& path,
                                               prompting::SelfConsistencyMode mode);

/// Choose mode snaps the response to the closest option, so the pick is
/// always one of the candidates. Writes sc_predictions.jsonl, sc_report.json
/// and sc_report.txt.
SelfConsistencyReport run_self_consistency(RunContext& ctx,
                                           const std::vector<std::filesystem::path>& prediction_files,
                                           std::span<const prompting::BankExemplar> bank,
                                           prompting::SelfConsistencyMode mode,
                                           const std::filesystem::path& out_dir);

struct TeacherSkip {
  std::string id;
  std::string reason;
};

struct TeacherResult {
  corpus::Corpus augmented;
  std::vector<TeacherSkip> skipped;
  std::size_t generated = 0;
  std::string config_hash;
  std::filesystem::path corpus_path;
};

/// Translates every untranslated record with the seeds as the exemplar pool;
/// writes augmented.jsonl (seeds, then generated records) and teacher_report.json.
TeacherResult run_teacher(RunContext& ctx, std::span<const corpus::ClauseRecord> seeds,
                          std::span<const corpus::ClauseRecord> untranslated,
                          const std::filesystem::path& out_dir);

}  // namespace lrml::pipeline
