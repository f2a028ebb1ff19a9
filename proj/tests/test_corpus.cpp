#include <algorithm>
#include <regex>

#include "doctest.h"
#include "lrml/corpus.hpp"
#include "lrml/util/fs.hpp"
#include "support.hpp"

using namespace lrml::corpus;
using testing::fixture_corpus;
using testing::TempDir;

TEST_CASE("fixture loads with all splits") {
  const Corpus& c = fixture_corpus();
  CHECK(c.size() == 60);
  CHECK(c.split(Split::train).size() == 42);
  CHECK(c.split(Split::valid).size() == 10);
  CHECK(c.split(Split::unlabeled).size() == 5);
  CHECK(validate_corpus(c).empty());
  for (const auto& r : c.split(Split::unlabeled)) CHECK_FALSE(r.has_gold());
}

TEST_CASE("save and load is lossless") {
  TempDir tmp;
  save_corpus(fixture_corpus(), tmp / "c.jsonl");
  Corpus back = load_corpus(tmp / "c.jsonl");
  CHECK(back == fixture_corpus());
  save_corpus(back, tmp / "d.jsonl");
  CHECK(testing::slurp(tmp / "c.jsonl") == testing::slurp(tmp / "d.jsonl"));
}

TEST_CASE("record codec keeps every field") {
  ClauseRecord r{"X-1", "X", "1 A thing shall exist.", "if(exist(thing)), then(obligation(exist(thing)))",
                 Split::train, {"A thing: exist(thing)"}, RationaleStyle::alignment, true};
  CHECK(record_from_json_line(record_to_json_line(r), 1) == r);
}

TEST_CASE("malformed lines report their line number") {
  TempDir tmp;
  auto write = [&](const std::string& body) {
    lrml::util::write_file_atomic(tmp / "bad.jsonl", body);
    return tmp / "bad.jsonl";
  };
  auto line_of = [&](const std::string& body) -> std::size_t {
    try {
      load_corpus(write(body));
    } catch (const MalformedRecord& e) {
      return e.line();
    }
    return 0;
  };
  std::string ok = R"({"id":"a","source":"s","split":"train"})";
  CHECK(line_of(ok + "\n\n{not json}\n") == 3);
  CHECK(line_of(ok + "\n" + R"({"id":"b","split":"train"})" + "\n") == 2);
  CHECK(line_of(R"({"id":"b","source":"s","split":"holdout"})") == 1);
  CHECK_THROWS_AS(load_corpus(write(ok + "\n" + ok + "\n")), DuplicateId);
  CHECK_THROWS_AS(load_corpus(tmp / "missing.jsonl"), IoError);
  // unknown keys are tolerated
  CHECK(load_corpus(write(R"({"id":"a","source":"s","split":"valid","extra":1})")).size() == 1);
}

TEST_CASE("invalid gold is reported, not thrown") {
  Corpus c({{"a", "D", "s", "if(exist(x)", Split::train, {}, std::nullopt, false},
            {"b", "D", "s", "if(exist(x)), then(obligation(has(x, y)))", Split::train, {}, std::nullopt, false}});
  auto issues = validate_corpus(c);
  REQUIRE(issues.size() == 1);
  CHECK(issues[0].id == "a");
}

TEST_CASE("term frequencies count training rules per term") {
  auto terms = term_frequencies(fixture_corpus(), 200);
  REQUIRE(!terms.empty());
  // independent count: training rules whose text applies the predicate
  auto rules_with = [](const std::string& functor) {
    std::size_t n = 0;
    for (const auto& r : fixture_corpus().split(Split::train)) {
      if (r.target_ir.find(functor + "(") != std::string::npos) ++n;
    }
    return n;
  };
  auto count_of = [&](const std::string& t) {
    auto it = std::find_if(terms.begin(), terms.end(), [&](const TermCount& x) { return x.term == t; });
    return it == terms.end() ? std::size_t{0} : it->count;
  };
  CHECK(count_of("exist") == rules_with("exist"));
  CHECK(count_of("greater than equal") == rules_with("greater than equal"));
  CHECK(terms.front().term == "exist");
  for (std::size_t i = 1; i < terms.size(); ++i) {
    bool ordered = terms[i - 1].count > terms[i].count ||
                   (terms[i - 1].count == terms[i].count && terms[i - 1].term < terms[i].term);
    CHECK(ordered);
  }
  CHECK(term_frequencies(fixture_corpus(), 5).size() == 5);
  CHECK_THROWS_AS(term_frequencies(Corpus{}, 5), EmptyTrainingSplit);
}
