#pragma once

#include <cstddef>
#include <filesystem>
#include <optional>
#include <stdexcept>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

namespace lrml::corpus {

enum class Split { train, valid, test, unlabeled };
enum class RationaleStyle { colloquial, alignment };

std::string_view to_string(Split split);
Split split_from_string(std::string_view name);
std::string_view to_string(RationaleStyle style);
RationaleStyle rationale_style_from_string(std::string_view name);

struct ClauseRecord {
  std::string id;
  std::string document;
  std::string source;
  std::string target_ir;  // empty when untranslated
  Split split = Split::train;
  std::vector<std::string> rationale;
  std::optional<RationaleStyle> rationale_style;
  bool generated = false;

  bool has_gold() const { return !target_ir.empty(); }
  bool operator==(const ClauseRecord&) const = default;
};

class MalformedRecord : public std::runtime_error {
 public:
  MalformedRecord(std::size_t line, const std::string& detail);
  std::size_t line() const noexcept { return line_; }

 private:
  std::size_t line_;
};

class DuplicateId : public std::runtime_error {
 public:
  explicit DuplicateId(const std::string& id);
};

class EmptyTrainingSplit : public std::runtime_error {
 public:
  EmptyTrainingSplit() : std::runtime_error("training split is empty") {}
};

class IoError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Aligned clause/IR records in file order.
class Corpus {
 public:
  Corpus() = default;
  /// Throws DuplicateId.
  explicit Corpus(std::vector<ClauseRecord> records);

  const std::vector<ClauseRecord>& records() const { return records_; }
  std::vector<ClauseRecord> split(Split which) const;
  const ClauseRecord* find(std::string_view id) const;
  std::size_t size() const { return records_.size(); }
  bool empty() const { return records_.empty(); }

  bool operator==(const Corpus&) const = default;

 private:
  std::vector<ClauseRecord> records_;
};

// JSON-lines record codec, one object per line.
std::string record_to_json_line(const ClauseRecord& record);
ClauseRecord record_from_json_line(std::string_view line, std::size_t line_number);

Corpus load_corpus(const std::filesystem::path& path);

/// Writes to a temporary sibling and renames over the target.
void save_corpus(const Corpus& corpus, const std::filesystem::path& path);

struct ValidationIssue {
  std::string id;
  std::string error;
};

/// Parses every non-empty target; empty result means all parse.
std::vector<ValidationIssue> validate_corpus(const Corpus& corpus);

struct TermCount {
  std::string term;  // spaced form
  std::size_t count = 0;
};

/// Number of training rules mentioning each entity, property or predicate
/// (maximal spaced word sequences), descending, ties lexicographic.
std::vector<TermCount> term_frequencies(const Corpus& corpus, std::size_t top_k);

}  // namespace lrml::corpus
