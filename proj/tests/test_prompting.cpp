#include "doctest.h"
#include "lrml/prompting.hpp"
#include "lrml/util/fs.hpp"
#include "support.hpp"

using namespace lrml::prompting;
using lrml::corpus::ClauseRecord;
using lrml::corpus::RationaleStyle;
using lrml::corpus::Split;

namespace {

ClauseRecord rec(std::string id, std::string doc, std::string src, std::string ir) {
  ClauseRecord r;
  r.id = std::move(id);
  r.document = std::move(doc);
  r.source = std::move(src);
  r.target_ir = std::move(ir);
  r.split = Split::train;
  return r;
}

const ClauseRecord kFloor = rec("G13AS1-3.4.2", "G13AS1", "3.4.2 The floor waste shall have a minimum diameter of 40 mm.",
                                "if(exist(floorWaste)),then(obligation(greaterThanEqual(floorWaste.diameter,40 mm)))");
const ClauseRecord kQuery = rec("E1AS1-3.0.1", "E1AS1", "3.0.1 Changes in direction of drains shall not exceed 90 degrees.", "");

std::string trim(std::string s) {
  while (!s.empty() && std::isspace(static_cast<unsigned char>(s.back()))) s.pop_back();
  std::size_t b = 0;
  while (b < s.size() && std::isspace(static_cast<unsigned char>(s[b]))) ++b;
  return s.substr(b);
}

}  // namespace

TEST_CASE("few-shot prompt layout") {
  std::vector<ClauseRecord> ex{kFloor};
  auto p = render_fewshot(ex, kQuery);
  REQUIRE(p.messages.size() == 1);
  CHECK(p.messages[0].role == "user");
  CHECK(p.messages[0].content ==
        "Source: G13AS1 3.4.2 The floor waste shall have a minimum diameter of 40 mm.\n"
        "Target: if(exist(floor waste)), then(obligation(greater than equal(floor waste. diameter, 40 mm)))\n\n"
        "Source: E1AS1 3.0.1 Changes in direction of drains shall not exceed 90 degrees.\n"
        "Target:");
  CHECK(p.exemplar_ids == std::vector<std::string>{"G13AS1-3.4.2"});
  CHECK(p.query_id == "E1AS1-3.0.1");

  auto with_ctx = render_fewshot(ex, kQuery, "Intro text.");
  CHECK(with_ctx.messages[0].content.rfind("Intro text.\n\nSource: G13AS1", 0) == 0);
  CHECK(with_ctx.text() == with_ctx.messages[0].content);
}

TEST_CASE("chain-of-thought layouts") {
  ClauseRecord coll = kFloor;
  coll.rationale = {"The floor waste is the subject: exist(floor waste)", "There is a shall: obligation"};
  coll.rationale_style = RationaleStyle::colloquial;
  ClauseRecord align = kFloor;
  align.id = "A";
  align.rationale = {"The floor waste: exist(floor waste)", "shall: obligation"};
  align.rationale_style = RationaleStyle::alignment;

  std::vector<ClauseRecord> c{coll};
  auto p = render_cot(c, kQuery, RationaleStyle::colloquial);
  CHECK(p.messages[0].content ==
        "Source: G13AS1 3.4.2 The floor waste shall have a minimum diameter of 40 mm.\n"
        "Let's think step by step:\n"
        "The floor waste is the subject: exist(floor waste)\n"
        "There is a shall: obligation\n"
        "Target: if(exist(floor waste)), then(obligation(greater than equal(floor waste. diameter, 40 mm)))\n\n"
        "Source: E1AS1 3.0.1 Changes in direction of drains shall not exceed 90 degrees.\n"
        "Let's think step by step:");

  std::vector<ClauseRecord> a{align}, plain{kFloor};
  auto q = render_cot(a, kQuery, RationaleStyle::alignment, plain);
  const std::string& t = q.messages[0].content;
  CHECK(q.exemplar_ids == std::vector<std::string>{"G13AS1-3.4.2", "A"});
  CHECK(t.find("Target: if(exist(floor waste))") < t.find("The floor waste: exist(floor waste)"));
  CHECK(t.find(std::string(kCotCue)) == std::string::npos);
  const std::string last = "\n\nSource: E1AS1 3.0.1 Changes in direction of drains shall not exceed 90 degrees.";
  CHECK(t.substr(t.size() - last.size()) == last);

  CHECK_THROWS_AS(render_cot(c, kQuery, RationaleStyle::alignment), RationaleStyleMismatch);
  std::vector<ClauseRecord> nogold{kQuery};
  CHECK_THROWS_AS(render_fewshot(nogold, kQuery), MissingGoldIr);
}

TEST_CASE("context sections") {
  auto assets = ContextAssets::defaults();
  ContextConfig none;
  CHECK(render_context(none, assets, {}).empty());
  CHECK_FALSE(none.any());

  ContextConfig all;
  all.include_intro = all.include_format_spec = all.include_reference_notes = all.include_common_terms = true;
  all.common_terms_k = 2;
  std::vector<lrml::corpus::TermCount> terms{{"exist", 28}, {"greater than equal", 14}, {"is", 13}};
  std::string ctx = render_context(all, assets, terms);
  CHECK(ctx == assets.intro + "\n\n" + assets.format_spec + "\n\n" + assets.reference_notes + "\n\n" +
                   assets.terms_header + "\nexist, greater than equal");
  CHECK(assets.intro.rfind("You are an expert in knowledge engineering, law, and construction.", 0) == 0);
}

TEST_CASE("built-in context text is the shipped asset text") {
  auto builtin = ContextAssets::defaults();
  auto dir = std::filesystem::path(LRML_ASSET_DIR) / "context";
  CHECK(builtin.intro == trim(testing::slurp(dir / "intro.txt")));
  CHECK(builtin.format_spec == trim(testing::slurp(dir / "format_spec.txt")));
  CHECK(builtin.reference_notes == trim(testing::slurp(dir / "reference_notes.txt")));
  CHECK(builtin.terms_header == trim(testing::slurp(dir / "terms_header.txt")));

  testing::TempDir tmp;
  lrml::util::write_file_atomic(tmp / "intro.txt", "  Custom intro.\n");
  auto loaded = ContextAssets::load(tmp.path());
  CHECK(loaded.intro == "Custom intro.");
  CHECK(loaded.format_spec == builtin.format_spec);
}

TEST_CASE("self-consistency prompt lists every option") {
  BankExemplar b{kFloor,
                 {"if(exist(floor waste)), then(obligation(has(floor waste, diameter)))",
                  "if(exist(floor waste)), then(obligation(greater than equal(floor waste. diameter, 40 mm)))"},
                 "if(exist(floor waste)), then(obligation(greater than equal(floor waste. diameter, 40 mm)))"};
  std::vector<BankExemplar> bank{b};
  std::vector<std::string> opts{"if(exist(drain)), then(obligation(has(drain, bend)))",
                                "if(exist(drain)), then(prohibition(exceed(drain. bend, 90 deg)))",
                                "if(has(drain, change in direction)), then(obligation(less than equal(change in direction, 90 deg)))"};
  auto p = render_self_consistency(bank, kQuery, opts, SelfConsistencyMode::choose);
  CHECK(p.rendering == Rendering::self_consistency_choose);
  CHECK(query_options(p.text()) == opts);
  CHECK(p.text().substr(p.text().size() - 7) == "Target:");
  CHECK(p.exemplar_ids == std::vector<std::string>{kFloor.id});
  std::vector<std::string> one{opts[0]};
  CHECK_THROWS_AS(render_self_consistency(bank, kQuery, one, SelfConsistencyMode::predict), TooFewOptions);
}

TEST_CASE("rule extraction") {
  CHECK(extract_rule("Target: if(exist(a)), then(obligation(has(a, b)))") ==
        std::optional<std::string>("if(exist(a)), then(obligation(has(a, b)))"));
  CHECK(extract_rule("Sure!\nif(exist(a)),then(obligation(has(a, b))) (this is the rule)") ==
        std::optional<std::string>("if(exist(a)),then(obligation(has(a, b)))"));
  CHECK(extract_rule("if(is(a, 'x (y)')), then(is(b, c))\nMore text") ==
        std::optional<std::string>("if(is(a, 'x (y)')), then(is(b, c))"));
  CHECK_FALSE(extract_rule("I do not know."));
  CHECK_FALSE(extract_rule("if(exist(a), then(obligation(b)"));
  // alignment output: lines first, then the target line
  CHECK(extract_rule("The drain: exist(drain)\nTarget: if(exist(drain)), then(obligation(has(drain, trap)))") ==
        std::optional<std::string>("if(exist(drain)), then(obligation(has(drain, trap)))"));
}

TEST_CASE("rendering names") {
  for (auto r : {Rendering::plain, Rendering::cot_colloquial, Rendering::cot_alignment,
                 Rendering::self_consistency_choose, Rendering::self_consistency_predict}) {
    CHECK(rendering_from_string(to_string(r)) == r);
  }
  CHECK_THROWS(rendering_from_string("fancy"));
}
