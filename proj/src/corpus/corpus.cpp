#include "lrml/corpus.hpp"

#include <algorithm>
#include <fstream>
#include <map>
#include <set>
#include <sstream>
#include <unordered_set>

#include <nlohmann/json.hpp>

#include "lrml/ir/codec.hpp"
#include "lrml/util/fs.hpp"

namespace lrml::corpus {

using json = nlohmann::json;

std::string_view to_string(Split split) {
  switch (split) {
    case Split::train: return "train";
    case Split::valid: return "valid";
    case Split::test: return "test";
    case Split::unlabeled: return "unlabeled";
  }
  return "train";
}

Split split_from_string(std::string_view name) {
  if (name == "train") return Split::train;
  if (name == "valid") return Split::valid;
  if (name == "test") return Split::test;
  if (name == "unlabeled") return Split::unlabeled;
  throw std::invalid_argument("unknown split '" + std::string(name) + "'");
}

std::string_view to_string(RationaleStyle style) {
  return style == RationaleStyle::colloquial ? "colloquial" : "alignment";
}

RationaleStyle rationale_style_from_string(std::string_view name) {
  if (name == "colloquial") return RationaleStyle::colloquial;
  if (name == "alignment") return RationaleStyle::alignment;
  throw std::invalid_argument("unknown rationale style '" + std::string(name) + "'");
}

MalformedRecord::MalformedRecord(std::size_t line, const std::string& detail)
    : std::runtime_error("malformed record on line " + std::to_string(line) + ": " + detail),
      line_(line) {}

DuplicateId::DuplicateId(const std::string& id)
    : std::runtime_error("duplicate record id '" + id + "'") {}

Corpus::Corpus(std::vector<ClauseRecord> records) : records_(std::move(records)) {
  std::unordered_set<std::string> seen;
  for (const ClauseRecord& r : records_) {
    if (!seen.insert(r.id).second) throw DuplicateId(r.id);
  }
}

std::vector<ClauseRecord> Corpus::split(Split which) const {
  std::vector<ClauseRecord> out;
  std::copy_if(records_.begin(), records_.end(), std::back_inserter(out),
               [which](const ClauseRecord& r) { return r.split == which; });
  return out;
}

const ClauseRecord* Corpus::find(std::string_view id) const {
  auto it = std::find_if(records_.begin(), records_.end(),
                         [id](const ClauseRecord& r) { return r.id == id; });
  return it == records_.end() ? nullptr : &*it;
}

std::string record_to_json_line(const ClauseRecord& record) {
  // Insertion-ordered so saved files diff cleanly.
  nlohmann::ordered_json j;
  j["id"] = record.id;
  j["document"] = record.document;
  j["source"] = record.source;
  j["target_ir"] = record.target_ir;
  j["split"] = to_string(record.split);
  if (!record.rationale.empty()) j["rationale"] = record.rationale;
  if (record.rationale_style) j["rationale_style"] = to_string(*record.rationale_style);
  if (record.generated) j["generated"] = true;
  return j.dump();
}

ClauseRecord record_from_json_line(std::string_view line, std::size_t line_number) {
  json j;
  try {
    j = json::parse(line);
  } catch (const json::exception& e) {
    throw MalformedRecord(line_number, e.what());
  }
  if (!j.is_object()) throw MalformedRecord(line_number, "expected a JSON object");

  auto required_string = [&](const char* key) -> std::string {
    auto it = j.find(key);
    if (it == j.end() || !it->is_string()) {
      throw MalformedRecord(line_number, std::string("missing string field '") + key + "'");
    }
    return it->get<std::string>();
  };

  ClauseRecord r;
  r.id = required_string("id");
  r.source = required_string("source");
  r.document = j.value("document", std::string{});
  if (r.id.empty()) throw MalformedRecord(line_number, "empty id");
  if (r.source.empty()) throw MalformedRecord(line_number, "empty source");
  try {
    r.split = split_from_string(required_string("split"));
    if (auto it = j.find("target_ir"); it != j.end() && !it->is_null()) {
      r.target_ir = it->get<std::string>();
    }
    if (auto it = j.find("rationale"); it != j.end() && !it->is_null()) {
      r.rationale = it->get<std::vector<std::string>>();
    }
    if (auto it = j.find("rationale_style"); it != j.end() && !it->is_null()) {
      r.rationale_style = rationale_style_from_string(it->get<std::string>());
    }
    r.generated = j.value("generated", false);
  } catch (const MalformedRecord&) {
    throw;
  } catch (const std::exception& e) {
    throw MalformedRecord(line_number, e.what());
  }
  return r;
}

Corpus load_corpus(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot open corpus file " + path.string());
  std::vector<ClauseRecord> records;
  std::string line;
  std::size_t line_number = 0;
  while (std::getline(in, line)) {
    ++line_number;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.find_first_not_of(" \t") == std::string::npos) continue;
    records.push_back(record_from_json_line(line, line_number));
  }
  return Corpus(std::move(records));
}

void save_corpus(const Corpus& corpus, const std::filesystem::path& path) {
  std::string body;
  for (const ClauseRecord& r : corpus.records()) {
    body += record_to_json_line(r);
    body.push_back('\n');
  }
  try {
    util::write_file_atomic(path, body);
  } catch (const std::exception& e) {
    throw IoError(e.what());
  }
}

std::vector<ValidationIssue> validate_corpus(const Corpus& corpus) {
  std::vector<ValidationIssue> issues;
  for (const ClauseRecord& r : corpus.records()) {
    if (!r.has_gold()) continue;
    try {
      (void)ir::parse_ir(r.target_ir);
    } catch (const ir::ParseError& e) {
      issues.push_back({r.id, e.what()});
    }
  }
  return issues;
}

namespace {

void collect_terms(const ir::Expr& expr, std::set<std::string>& terms) {
  if (const auto* apply = expr.as_apply()) {
    if (!ir::is_logical_functor(apply->functor)) terms.insert(ir::spaced_name(apply->functor));
    for (const ir::Expr& arg : apply->args) collect_terms(arg, terms);
  } else if (const auto* entity = std::get_if<ir::EntityRef>(&expr.node)) {
    terms.insert(ir::spaced_name(entity->entity));
    if (entity->property) terms.insert(ir::spaced_name(*entity->property));
  }
}

}  // namespace

std::vector<TermCount> term_frequencies(const Corpus& corpus, std::size_t top_k) {
  std::vector<ClauseRecord> train = corpus.split(Split::train);
  if (train.empty()) throw EmptyTrainingSplit();

  std::map<std::string, std::size_t> counts;
  for (const ClauseRecord& r : train) {
    if (!r.has_gold()) continue;
    ir::RuleAst rule;
    try {
      rule = ir::parse_ir(r.target_ir);
    } catch (const ir::ParseError&) {
      continue;
    }
    std::set<std::string> terms;
    for (const ir::Expr& e : rule.condition) collect_terms(e, terms);
    for (const ir::Expr& e : rule.conclusion) collect_terms(e, terms);
    for (const std::string& t : terms) ++counts[t];
  }

  std::vector<TermCount> ranked;
  ranked.reserve(counts.size());
  for (auto& [term, count] : counts) ranked.push_back({term, count});
  std::stable_sort(ranked.begin(), ranked.end(),
                   [](const TermCount& a, const TermCount& b) { return a.count > b.count; });
  if (ranked.size() > top_k) ranked.resize(top_k);
  return ranked;
}

}  // namespace lrml::corpus
