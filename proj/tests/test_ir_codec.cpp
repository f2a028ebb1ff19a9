#include <chrono>
#include <set>

#include "doctest.h"
#include "lrml/ir/codec.hpp"
#include "support.hpp"

using namespace lrml::ir;
using testing::fixture_corpus;

namespace {

void collect_names(const Expr& e, std::set<std::string>& out) {
  if (auto* a = std::get_if<Apply>(&e.node)) {
    out.insert(a->functor);
    for (const auto& x : a->args) collect_names(x, out);
  } else if (auto* r = std::get_if<EntityRef>(&e.node)) {
    out.insert(r->entity);
    if (r->property) out.insert(*r->property);
  }
}

// Counts '(' minus ')' outside quotes; an independent check on the emitter.
int bracket_balance(const std::string& s) {
  int depth = 0;
  bool quoted = false;
  for (char c : s) {
    if (c == '\'') quoted = !quoted;
    if (quoted) continue;
    depth += c == '(' ? 1 : c == ')' ? -1 : 0;
    if (depth < 0) return -1;
  }
  return depth;
}

}  // namespace

TEST_CASE("every fixture rule round-trips in both styles") {
  auto start = std::chrono::steady_clock::now();
  std::size_t n = 0;
  for (const auto& r : fixture_corpus().records()) {
    if (!r.has_gold()) continue;
    ++n;
    RuleAst ast = parse_ir(r.target_ir);
    for (Style s : {Style::canonical, Style::spaced}) {
      std::string text = serialize_ir(ast, s);
      CAPTURE(r.id);
      CAPTURE(text);
      CHECK(parse_ir(text) == ast);
      CHECK(serialize_ir(parse_ir(text), s) == text);
      CHECK(bracket_balance(text) == 0);
    }
  }
  CHECK(n >= 50);
  auto ms = std::chrono::duration_cast<std::chrono::milliseconds>(std::chrono::steady_clock::now() - start);
  CHECK(ms.count() < 1000);
}

TEST_CASE("fixture covers rule constructs") {
  bool deontic[3] = {false, false, false}, constitutive = false, quantity = false, ref = false,
       string = false, property = false, orr = false, andd = false, nott = false, loop = false;
  std::function<void(const Expr&)> walk = [&](const Expr& e) {
    std::visit(
        [&](const auto& n) {
          using T = std::decay_t<decltype(n)>;
          if constexpr (std::is_same_v<T, Apply>) {
            orr |= n.functor == "or";
            andd |= n.functor == "and";
            nott |= n.functor == "not";
            loop |= n.functor == "loop";
            for (const auto& a : n.args) walk(a);
          } else if constexpr (std::is_same_v<T, EntityRef>) {
            property |= n.property.has_value();
          } else if constexpr (std::is_same_v<T, Quantity>) {
            quantity = true;
          } else if constexpr (std::is_same_v<T, LegalRef>) {
            ref = true;
          } else if constexpr (std::is_same_v<T, StringExpr>) {
            string = true;
          }
        },
        e.node);
  };
  for (const auto& r : fixture_corpus().records()) {
    if (!r.has_gold()) continue;
    RuleAst a = parse_ir(r.target_ir);
    if (a.deontic) deontic[static_cast<int>(*a.deontic)] = true;
    else constitutive = true;
    for (const auto& e : a.condition) walk(e);
    for (const auto& e : a.conclusion) walk(e);
  }
  CHECK(deontic[0]);
  CHECK(deontic[1]);
  CHECK(deontic[2]);
  CHECK(constitutive);
  CHECK(quantity);
  CHECK(ref);
  CHECK(string);
  CHECK(property);
  CHECK(orr);
  CHECK(andd);
  CHECK(nott);
  CHECK(loop);
}

TEST_CASE("back-translation of the floor waste rule") {
  auto w = testing::worked()["unit_rule"];
  std::string orig = to_original(parse_ir(w["ir"].get<std::string>()));
  CHECK(orig == w["original"].get<std::string>());
  CHECK(orig.find("baseunit(prefix(milli),kind(metre))") != std::string::npos);
  CHECK(orig.find("value(40.0)") != std::string::npos);
}

TEST_CASE("merged or is distributed back into two predicates") {
  auto w = testing::worked()["merged_or"];
  RuleAst gold = distribute_connectives(parse_ir(w["gold"].get<std::string>()));
  REQUIRE(gold.condition.size() == 1);
  CHECK(serialize_expr(gold.condition[0], Style::spaced) == w["distributed_condition"].get<std::string>());
}

TEST_CASE("distribution depth is bounded") {
  RuleAst r = parse_ir("if(is(a. type, or(b, c))), then(obligation(has(a, d)))");
  CHECK_THROWS_AS(distribute_connectives(r, 0), DistributionDepthExceeded);
  CHECK_NOTHROW(distribute_connectives(r, 1));
}

TEST_CASE("parse errors carry kind and offset") {
  auto kind_at = [](const std::string& text) -> std::pair<ParseErrorKind, std::size_t> {
    try {
      parse_ir(text);
    } catch (const ParseError& e) {
      return {e.kind(), e.offset()};
    }
    FAIL("no error for " << text);
    return {};
  };
  CHECK(kind_at("if(exist(x)") == std::pair{ParseErrorKind::unbalanced_brackets, std::size_t{2}});
  CHECK(kind_at("if(exist(x))), then(obligation(y))").first == ParseErrorKind::unbalanced_brackets);
  CHECK(kind_at("exist(x)").first == ParseErrorKind::missing_if_then);
  CHECK(kind_at("").first == ParseErrorKind::missing_if_then);
  CHECK(kind_at("if(exist(x,)), then(obligation(has(x, y)))").first == ParseErrorKind::empty_argument);
  CHECK(kind_at("if(exist(x)), then(obligation(has(x, y))) extra").first == ParseErrorKind::unexpected_token);
}

TEST_CASE("names fold to a fixed point") {
  std::set<std::string> names;
  for (const auto& r : fixture_corpus().records()) {
    if (!r.has_gold()) continue;
    RuleAst a = parse_ir(r.target_ir);
    for (const auto& e : a.condition) collect_names(e, names);
    for (const auto& e : a.conclusion) collect_names(e, names);
  }
  for (const auto& n : names) {
    CAPTURE(n);
    CHECK(canonical_name(spaced_name(n)) == n);
    CHECK(canonical_name(n) == n);
  }
  CHECK(canonical_name("floor waste") == "floorWaste");
  CHECK(spaced_name("greaterThanEqual") == "greater than equal");
}

TEST_CASE("quantities") {
  auto q = parse_quantity("40 mm");
  REQUIRE(q);
  CHECK(q->value == 40.0);
  CHECK(q->prefix == std::optional<std::string>("milli"));
  CHECK(q->kind == "metre");
  CHECK(format_decimal(40) == "40.0");
  CHECK(format_decimal(1.5) == "1.5");
  CHECK_FALSE(parse_quantity("drain"));
  std::set<std::string> surfaces;
  for (const auto& u : unit_lexicon()) CHECK(surfaces.insert(u.surface).second);
}

TEST_CASE("statement kinds") {
  CHECK(parse_ir("if(exist(a)), then(obligation(has(a, b)))").statement_kind() == StatementKind::prescriptive);
  CHECK(parse_ir("if(exist(a)), then(is(a, b))").statement_kind() == StatementKind::constitutive);
}

TEST_CASE("xml wraps the back-translated rule") {
  RuleAst r = parse_ir(fixture_corpus().records().front().target_ir);
  std::string xml = emit_legalruleml_xml(r);
  CHECK(xml.find("<") == 0);
  CHECK(xml.find(to_original(r)) == std::string::npos);  // escaped or structured, never raw
}
