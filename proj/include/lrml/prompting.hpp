#pragma once

#include <filesystem>
#include <optional>
#include <span>
#include <stdexcept>
#include <string>
#include <string_view>
#include <vector>

#include "lrml/corpus.hpp"

namespace lrml::prompting {

enum class Rendering {
  plain,
  cot_colloquial,
  cot_alignment,
  self_consistency_choose,
  self_consistency_predict
};

std::string_view to_string(Rendering r);
Rendering rendering_from_string(std::string_view name);

struct Message {
  std::string role;  // "system" | "user"
  std::string content;

  bool operator==(const Message&) const = default;
};

struct PromptSpec {
  std::vector<Message> messages;
  std::vector<std::string> exemplar_ids;
  std::string query_id;
  Rendering rendering = Rendering::plain;

  /// All message contents joined by blank lines.
  std::string text() const;
};

class MissingGoldIr : public std::invalid_argument {
 public:
  explicit MissingGoldIr(const std::string& id);
};

class RationaleStyleMismatch : public std::invalid_argument {
 public:
  explicit RationaleStyleMismatch(const std::string& id);
};

class TooFewOptions : public std::invalid_argument {
 public:
  explicit TooFewOptions(std::size_t count);
};

// ---------------------------------------------------------------------------
// Context sections

struct ContextConfig {
  bool include_intro = false;
  bool include_format_spec = false;
  bool include_reference_notes = false;
  bool include_common_terms = false;
  std::size_t common_terms_k = 100;

  bool any() const {
    return include_intro || include_format_spec || include_reference_notes || include_common_terms;
  }
  bool operator==(const ContextConfig&) const = default;
};

struct ContextAssets {
  std::string intro;
  std::string format_spec;
  std::string reference_notes;
  std::string terms_header;

  static ContextAssets defaults();
  /// Reads intro.txt, format_spec.txt, reference_notes.txt, terms_header.txt;
  /// missing files keep the built-in text.
  static ContextAssets load(const std::filesystem::path& dir);
};

/// Sections in the fixed order intro, format, references, terms. Empty when
/// no flag is set.
std::string render_context(const ContextConfig& config, const ContextAssets& assets,
                           std::span<const corpus::TermCount> terms);

// ---------------------------------------------------------------------------
// Blocks

inline constexpr std::string_view kCotCue = "Let's think step by step:";

std::string source_line(const corpus::ClauseRecord& record);

/// Gold IR in spaced form. Throws MissingGoldIr.
std::string spaced_target(const corpus::ClauseRecord& record);

/// One filled exemplar as it appears in a prompt of the given rendering.
std::string render_exemplar(const corpus::ClauseRecord& record, Rendering rendering);

/// The open block for the clause being translated.
std::string render_query(const corpus::ClauseRecord& query, Rendering rendering);

// ---------------------------------------------------------------------------
// Prompts

PromptSpec render_fewshot(std::span<const corpus::ClauseRecord> exemplars,
                          const corpus::ClauseRecord& query, const std::string& context_text = {});

PromptSpec render_cot(std::span<const corpus::ClauseRecord> cot_exemplars,
                      const corpus::ClauseRecord& query, corpus::RationaleStyle style,
                      std::span<const corpus::ClauseRecord> plain_prefix = {},
                      const std::string& context_text = {});

enum class SelfConsistencyMode { choose, predict };

struct BankExemplar {
  corpus::ClauseRecord record;  // target_ir holds the gold rule
  std::vector<std::string> options;
  std::string target;  // filled per mode before rendering
};

PromptSpec render_self_consistency(std::span<const BankExemplar> bank,
                                   const corpus::ClauseRecord& query,
                                   std::span<const std::string> options, SelfConsistencyMode mode);

/// Option lines of the final open block of a self-consistency prompt.
std::vector<std::string> query_options(std::string_view prompt_text);

/// First `if(` up to the end of the bracket-balanced rule that follows it.
std::optional<std::string> extract_rule(std::string_view response);

}  // namespace lrml::prompting
