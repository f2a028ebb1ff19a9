#include "lrml/prompting.hpp"

#include <cctype>
#include <sstream>

#include "context_defaults.hpp"
#include "lrml/ir/codec.hpp"
#include "lrml/util/fs.hpp"

namespace lrml::prompting {

using corpus::ClauseRecord;
using corpus::RationaleStyle;

std::string_view to_string(Rendering r) {
  switch (r) {
    case Rendering::plain: return "plain";
    case Rendering::cot_colloquial: return "cot_colloquial";
    case Rendering::cot_alignment: return "cot_alignment";
    case Rendering::self_consistency_choose: return "self_consistency_choose";
    case Rendering::self_consistency_predict: return "self_consistency_predict";
  }
  return "plain";
}

Rendering rendering_from_string(std::string_view name) {
  for (Rendering r : {Rendering::plain, Rendering::cot_colloquial, Rendering::cot_alignment,
                      Rendering::self_consistency_choose, Rendering::self_consistency_predict}) {
    if (to_string(r) == name) return r;
  }
  throw std::invalid_argument("unknown rendering: " + std::string(name));
}

std::string PromptSpec::text() const {
  std::string out;
  for (std::size_t i = 0; i < messages.size(); ++i) {
    if (i) out += "\n\n";
    out += messages[i].content;
  }
  return out;
}

MissingGoldIr::MissingGoldIr(const std::string& id)
    : std::invalid_argument("exemplar " + id + " has no gold IR") {}

RationaleStyleMismatch::RationaleStyleMismatch(const std::string& id)
    : std::invalid_argument("exemplar " + id + " lacks a rationale of the requested style") {}

TooFewOptions::TooFewOptions(std::size_t count)
    : std::invalid_argument("self-consistency needs at least 2 options, got " + std::to_string(count)) {}

namespace {

std::string trimmed(std::string_view s) {
  std::size_t b = 0, e = s.size();
  while (b < e && std::isspace(static_cast<unsigned char>(s[b]))) ++b;
  while (e > b && std::isspace(static_cast<unsigned char>(s[e - 1]))) --e;
  return std::string(s.substr(b, e - b));
}

void read_if_present(const std::filesystem::path& file, std::string& into) {
  std::error_code ec;
  if (std::filesystem::is_regular_file(file, ec)) into = trimmed(util::read_file(file));
}

std::string join_blocks(const std::vector<std::string>& blocks) {
  std::string out;
  for (const auto& b : blocks) {
    if (b.empty()) continue;
    if (!out.empty()) out += "\n\n";
    out += b;
  }
  return out;
}

PromptSpec single_user_prompt(std::vector<std::string> blocks, std::vector<std::string> ids,
                              const ClauseRecord& query, Rendering rendering) {
  PromptSpec spec;
  spec.messages.push_back({"user", join_blocks(blocks)});
  spec.exemplar_ids = std::move(ids);
  spec.query_id = query.id;
  spec.rendering = rendering;
  return spec;
}

std::string spaced_or_raw(std::string_view ir_text) {
  try {
    return ir::serialize_ir(ir::parse_ir(ir_text), ir::Style::spaced);
  } catch (const ir::ParseError&) {
    return trimmed(ir_text);
  }
}

}  // namespace

ContextAssets ContextAssets::defaults() {
  return {defaults::kIntro, defaults::kFormatSpec, defaults::kReferenceNotes, defaults::kTermsHeader};
}

ContextAssets ContextAssets::load(const std::filesystem::path& dir) {
  ContextAssets a = defaults();
  read_if_present(dir / "intro.txt", a.intro);
  read_if_present(dir / "format_spec.txt", a.format_spec);
  read_if_present(dir / "reference_notes.txt", a.reference_notes);
  read_if_present(dir / "terms_header.txt", a.terms_header);
  return a;
}

std::string render_context(const ContextConfig& config, const ContextAssets& assets,
                           std::span<const corpus::TermCount> terms) {
  std::vector<std::string> sections;
  if (config.include_intro) sections.push_back(assets.intro);
  if (config.include_format_spec) sections.push_back(assets.format_spec);
  if (config.include_reference_notes) sections.push_back(assets.reference_notes);
  if (config.include_common_terms && config.common_terms_k > 0 && !terms.empty()) {
    std::string list;
    std::size_t n = std::min(config.common_terms_k, terms.size());
    for (std::size_t i = 0; i < n; ++i) {
      if (i) list += ", ";
      list += terms[i].term;
    }
    sections.push_back(assets.terms_header + "\n" + list);
  }
  return join_blocks(sections);
}

std::string source_line(const ClauseRecord& record) {
  std::string line = "Source: ";
  if (!record.document.empty()) line += record.document + " ";
  return line + record.source;
}

std::string spaced_target(const ClauseRecord& record) {
  if (!record.has_gold()) throw MissingGoldIr(record.id);
  return ir::serialize_ir(ir::parse_ir(record.target_ir), ir::Style::spaced);
}

std::string render_exemplar(const ClauseRecord& record, Rendering rendering) {
  std::string out = source_line(record) + "\n";
  bool colloquial = rendering == Rendering::cot_colloquial;
  if (colloquial || rendering == Rendering::cot_alignment) {
    RationaleStyle want = colloquial ? RationaleStyle::colloquial : RationaleStyle::alignment;
    if (record.rationale.empty() || record.rationale_style != want) {
      throw RationaleStyleMismatch(record.id);
    }
    if (colloquial) out += std::string(kCotCue) + "\n";
    for (const auto& line : record.rationale) out += line + "\n";
  }
  return out + "Target: " + spaced_target(record);
}

std::string render_query(const ClauseRecord& query, Rendering rendering) {
  switch (rendering) {
    case Rendering::cot_colloquial: return source_line(query) + "\n" + std::string(kCotCue);
    // the model continues with alignment lines, then its own Target line
    case Rendering::cot_alignment: return source_line(query);
    default: return source_line(query) + "\nTarget:";
  }
}

PromptSpec render_fewshot(std::span<const ClauseRecord> exemplars, const ClauseRecord& query,
                          const std::string& context_text) {
  std::vector<std::string> blocks{context_text};
  std::vector<std::string> ids;
  for (const auto& ex : exemplars) {
    blocks.push_back(render_exemplar(ex, Rendering::plain));
    ids.push_back(ex.id);
  }
  blocks.push_back(render_query(query, Rendering::plain));
  return single_user_prompt(std::move(blocks), std::move(ids), query, Rendering::plain);
}

PromptSpec render_cot(std::span<const ClauseRecord> cot_exemplars, const ClauseRecord& query,
                      RationaleStyle style, std::span<const ClauseRecord> plain_prefix,
                      const std::string& context_text) {
  Rendering rendering =
      style == RationaleStyle::colloquial ? Rendering::cot_colloquial : Rendering::cot_alignment;
  std::vector<std::string> blocks{context_text};
  std::vector<std::string> ids;
  for (const auto& ex : plain_prefix) {
    blocks.push_back(render_exemplar(ex, Rendering::plain));
    ids.push_back(ex.id);
  }
  for (const auto& ex : cot_exemplars) {
    blocks.push_back(render_exemplar(ex, rendering));
    ids.push_back(ex.id);
  }
  blocks.push_back(render_query(query, rendering));
  return single_user_prompt(std::move(blocks), std::move(ids), query, rendering);
}

PromptSpec render_self_consistency(std::span<const BankExemplar> bank, const ClauseRecord& query,
                                   std::span<const std::string> options, SelfConsistencyMode mode) {
  if (options.size() < 2) throw TooFewOptions(options.size());
  std::vector<std::string> blocks;
  std::vector<std::string> ids;
  for (const auto& ex : bank) {
    if (ex.options.size() < 2) throw TooFewOptions(ex.options.size());
    std::string block = source_line(ex.record) + "\n";
    for (const auto& opt : ex.options) block += trimmed(opt) + "\n";
    block += "Target: " + spaced_or_raw(ex.target);
    blocks.push_back(std::move(block));
    ids.push_back(ex.record.id);
  }
  std::string q = source_line(query) + "\n";
  for (const auto& opt : options) q += trimmed(opt) + "\n";
  blocks.push_back(q + "Target:");
  return single_user_prompt(std::move(blocks), std::move(ids), query,
                            mode == SelfConsistencyMode::choose ? Rendering::self_consistency_choose
                                                                : Rendering::self_consistency_predict);
}

std::vector<std::string> query_options(std::string_view prompt_text) {
  std::vector<std::string> lines;
  std::istringstream in{std::string(prompt_text)};
  for (std::string line; std::getline(in, line);) lines.push_back(line);

  std::size_t start = lines.size();
  for (std::size_t i = lines.size(); i-- > 0;) {
    if (lines[i].rfind("Source:", 0) == 0) {
      start = i;
      break;
    }
  }
  std::vector<std::string> out;
  for (std::size_t i = start + 1; i < lines.size(); ++i) {
    if (lines[i].rfind("Target:", 0) == 0) break;
    std::string t = trimmed(lines[i]);
    if (!t.empty()) out.push_back(std::move(t));
  }
  return out;
}

namespace {

// Index one past the ')' closing the group opened at `open`, or npos.
std::size_t close_group(std::string_view text, std::size_t open) {
  int depth = 0;
  bool quoted = false;
  for (std::size_t i = open; i < text.size(); ++i) {
    char c = text[i];
    if (quoted) {
      if (c == '\'') quoted = false;
    } else if (c == '\'') {
      quoted = depth > 0;
    } else if (c == '(') {
      ++depth;
    } else if (c == ')' && --depth == 0) {
      return i + 1;
    }
  }
  return std::string_view::npos;
}

}  // namespace

std::optional<std::string> extract_rule(std::string_view response) {
  std::size_t start = response.find("if(");
  if (start == std::string_view::npos) return std::nullopt;
  std::size_t end = close_group(response, start + 2);
  if (end == std::string_view::npos) return std::nullopt;

  // `, then(...)` may follow, with any spacing around the comma
  std::size_t i = end;
  while (i < response.size() && (std::isspace(static_cast<unsigned char>(response[i])) || response[i] == ',')) ++i;
  if (response.substr(i, 4) == "then") {
    std::size_t j = i + 4;
    while (j < response.size() && response[j] == ' ') ++j;
    if (j < response.size() && response[j] == '(') {
      std::size_t then_end = close_group(response, j);
      if (then_end != std::string_view::npos) end = then_end;
    }
  }
  return trimmed(response.substr(start, end - start));
}

}  // namespace lrml::prompting
