#include <algorithm>
#include <cmath>
#include <map>
#include <random>

#include "doctest.h"
#include "lrml/ir/codec.hpp"
#include "lrml/metrics.hpp"
#include "support.hpp"

using namespace lrml;
using namespace lrml::metrics;
using testing::fixture_corpus;

namespace {

std::vector<std::string> gold_rules() {
  std::vector<std::string> out;
  for (const auto& r : fixture_corpus().records()) {
    if (r.has_gold()) out.push_back(r.target_ir);
  }
  return out;
}

// Textbook corpus BLEU written out separately from the library version.
double oracle_bleu(const std::vector<std::vector<std::string>>& hyp,
                   const std::vector<std::vector<std::string>>& ref) {
  double log_p = 0;
  std::size_t c = 0, r = 0;
  for (std::size_t i = 0; i < hyp.size(); ++i) {
    c += hyp[i].size();
    r += ref[i].size();
  }
  for (std::size_t n = 1; n <= 4; ++n) {
    double match = 0, total = 0;
    for (std::size_t i = 0; i < hyp.size(); ++i) {
      std::map<std::vector<std::string>, int> h, g;
      for (std::size_t k = 0; k + n <= hyp[i].size(); ++k)
        h[{hyp[i].begin() + k, hyp[i].begin() + k + n}]++;
      for (std::size_t k = 0; k + n <= ref[i].size(); ++k)
        g[{ref[i].begin() + k, ref[i].begin() + k + n}]++;
      for (auto& [gram, cnt] : h) {
        total += cnt;
        auto it = g.find(gram);
        if (it != g.end()) match += std::min(cnt, it->second);
      }
    }
    if (match == 0) return 0;
    log_p += std::log(match / total) / 4;
  }
  double bp = c > r ? 1.0 : std::exp(1.0 - double(r) / double(c));
  return bp * std::exp(log_p);
}

std::string join(const std::vector<std::string>& t) {
  std::string s;
  for (const auto& x : t) s += (s.empty() ? "" : " ") + x;
  return s;
}

// Shuffle the children of every and/or node.
void shuffle_connectives(ir::Expr& e, std::mt19937_64& rng) {
  if (auto* a = e.as_apply()) {
    for (auto& x : a->args) shuffle_connectives(x, rng);
    if (ir::is_connective(a->functor)) std::shuffle(a->args.begin(), a->args.end(), rng);
  }
}

// Every (apply, arg index) whose argument is a plain entity and which has a sibling.
void entity_slots(ir::Expr& e, std::vector<std::pair<ir::Apply*, std::size_t>>& out) {
  if (auto* a = e.as_apply()) {
    for (std::size_t i = 0; i < a->args.size(); ++i) {
      if (a->args.size() > 1 && std::holds_alternative<ir::EntityRef>(a->args[i].node)) out.push_back({a, i});
      entity_slots(a->args[i], out);
    }
  }
}

}  // namespace

TEST_CASE("bleu tokens split brackets and commas") {
  CHECK(bleu_tokens("if(exist(drain)), then(x)") ==
        std::vector<std::string>{"if", "(", "exist", "(", "drain", ")", ")", ",", "then", "(", "x", ")"});
}

TEST_CASE("drain and pipe example matches the hand computation") {
  auto w = testing::worked()["bleu_drain_pipe"];
  std::vector<std::string> p{w["prediction"].get<std::string>()}, r{w["reference"].get<std::string>()};
  double hand = std::pow((6.0 / 7.0) * (4.0 / 6.0) * (2.0 / 5.0) * (1.0 / 4.0), 0.25);
  CHECK(std::abs(corpus_bleu(p, r) - hand) < 1e-9);
  CHECK(std::abs(corpus_bleu(p, r) - 0.489) < 5e-4);
}

TEST_CASE("corpus bleu agrees with an independent implementation") {
  std::mt19937_64 rng(5);
  const std::vector<std::string> vocab{"if", "(", ")", ",", "then", "drain", "pipe", "exist", "has", "90"};
  for (int trial = 0; trial < 200; ++trial) {
    std::vector<std::vector<std::string>> h, g;
    std::vector<std::string> hs, gs;
    std::size_t n = 1 + rng() % 4;
    for (std::size_t i = 0; i < n; ++i) {
      std::vector<std::string> a, b;
      std::size_t la = 4 + rng() % 10, lb = 4 + rng() % 10;
      for (std::size_t k = 0; k < lb; ++k) b.push_back(vocab[rng() % 4 == 0 ? rng() % vocab.size() : k % 5]);
      for (std::size_t k = 0; k < la; ++k) a.push_back(rng() % 3 ? b[k % lb] : vocab[rng() % vocab.size()]);
      h.push_back(a);
      g.push_back(b);
      hs.push_back(join(a));
      gs.push_back(join(b));
    }
    CHECK(corpus_bleu(hs, gs) == doctest::Approx(oracle_bleu(h, g)).epsilon(1e-12));
  }
}

TEST_CASE("bleu identity and degenerate cases") {
  std::vector<std::string> surf;
  for (const auto& r : gold_rules()) surf.push_back(bleu_surface(r));
  CHECK(corpus_bleu(surf, surf) == doctest::Approx(1.0).epsilon(1e-15));
  std::vector<std::string> a{"x y"}, b{"x y z"}, one{"a"};
  CHECK_THROWS_AS(corpus_bleu(a, std::vector<std::string>{}), LengthMismatch);
  CHECK(corpus_bleu(one, std::vector<std::string>{"b"}) == 0.0);
  CHECK(corpus_bleu(std::vector<std::string>{""}, std::vector<std::string>{"a b"}) == 0.0);
}

TEST_CASE("f1 identity on every fixture rule") {
  for (const auto& r : gold_rules()) {
    auto m = lrml_f1(r, r);
    CAPTURE(r);
    CHECK(m.f1 == 1.0);
    CHECK(m.precision == 1.0);
    CHECK(m.recall == 1.0);
  }
}

TEST_CASE("disjoint and unparseable predictions") {
  auto m = lrml_f1("if(near(qqq, rrr)), then(zzz(www))", "if(has(drain, bend)), then(permission(exceed(bend. angle, 90 deg)))");
  CHECK(m.f1 == 0.0);
  auto bad = lrml_f1("if(exist(drain)", "if(exist(drain)), then(obligation(has(drain, trap)))");
  CHECK(bad.parse_failed);
  CHECK(bad.f1 == 0.0);
  auto empty = lrml_f1("", "if(exist(drain)), then(obligation(has(drain, trap)))");
  CHECK(empty.parse_failed);
  CHECK_THROWS_AS(lrml_f1("if(exist(drain)), then(obligation(has(drain, trap)))", "if(("), GoldParseError);
}

TEST_CASE("worked examples are ordered as published") {
  auto w = testing::worked();
  auto f = [&](const char* key) {
    return lrml_f1(w[key]["prediction"].get<std::string>(), w[key]["gold"].get<std::string>()).f1;
  };
  double near = f("near_miss"), mid = f("merged_or"), weak = f("weak_match");
  CHECK(near >= 0.80);
  CHECK(near <= 0.95);
  CHECK(near > mid);
  CHECK(mid > weak);

  auto opts = w["drain_options"]["options"].get<std::vector<std::string>>();
  auto o = oracle_f1(opts, w["drain_options"]["gold"].get<std::string>());
  CHECK(o.best_index == 1);
  CHECK(o.scores[1] > o.scores[2]);
}

TEST_CASE("element bag of the floor waste rule") {
  ElementBag bag;
  build_element_bag(ir::parse_ir("if(exist(floor waste)), then(obligation(greater than equal(floor waste. diameter, 40 mm)))"), bag);
  CHECK(bag.entities.size() == 2);
  CHECK(bag.relations.size() == 2);
  REQUIRE(bag.operators.size() == 3);
  CHECK(bag.operators[0].op == OperatorKind::if_);
}

TEST_CASE("entity similarity") {
  CHECK(entity_similarity("floor waste", "floor waste") == 1.0);
  CHECK(entity_similarity("water heater. type", "storage water heater. type") == doctest::Approx(2.0 * 3 / 7));
  CHECK(entity_similarity("drain", "pipe") == 0.0);
}

TEST_CASE("permuting and/or children leaves f1 unchanged") {
  auto rules = gold_rules();
  std::mt19937_64 rng(17);
  for (std::size_t t = 0; t < 300; ++t) {
    const auto& pred = rules[rng() % rules.size()];
    const auto& gold = rules[rng() % rules.size()];
    ir::RuleAst shuffled = ir::parse_ir(pred);
    for (auto& e : shuffled.condition) shuffle_connectives(e, rng);
    for (auto& e : shuffled.conclusion) shuffle_connectives(e, rng);
    CAPTURE(pred);
    CAPTURE(gold);
    CHECK(lrml_f1(ir::serialize_ir(shuffled, ir::Style::spaced), gold).f1 ==
          doctest::Approx(lrml_f1(pred, gold).f1).epsilon(1e-12));
  }
}

TEST_CASE("deleting an entity never raises entity recall") {
  auto rules = gold_rules();
  std::mt19937_64 rng(23);
  for (std::size_t t = 0; t < 300; ++t) {
    ir::RuleAst pred = ir::parse_ir(rules[rng() % rules.size()]);
    ir::RuleAst gold = ir::parse_ir(rules[rng() % rules.size()]);
    std::vector<std::pair<ir::Apply*, std::size_t>> slots;
    for (auto& e : pred.condition) entity_slots(e, slots);
    for (auto& e : pred.conclusion) entity_slots(e, slots);
    if (slots.empty()) continue;
    double before = lrml_f1(pred, gold).entities.recall();
    auto [apply, i] = slots[rng() % slots.size()];
    apply->args.erase(apply->args.begin() + static_cast<long>(i));
    CHECK(lrml_f1(pred, gold).entities.recall() <= before + 1e-12);
  }
}

TEST_CASE("a spurious relation never raises precision") {
  auto rules = gold_rules();
  std::mt19937_64 rng(29);
  for (std::size_t t = 0; t < 300; ++t) {
    const auto& p = rules[rng() % rules.size()];
    const auto& g = rules[rng() % rules.size()];
    ir::RuleAst pred = ir::parse_ir(p);
    auto before = lrml_f1(pred, ir::parse_ir(g));
    ir::Apply spurious{"zorbleWith", {ir::EntityRef{"quuxGadget", std::nullopt}, ir::Term{"frobnitz"}}};
    pred.conclusion.push_back(ir::Expr(std::move(spurious)));
    auto after = lrml_f1(pred, ir::parse_ir(g));
    CAPTURE(p);
    CAPTURE(g);
    CHECK(after.relations.precision() <= before.relations.precision() + 1e-12);
    CHECK(after.precision <= before.precision + 1e-12);
  }
}

TEST_CASE("oracle bounds every option") {
  auto rules = gold_rules();
  std::mt19937_64 rng(31);
  for (int t = 0; t < 50; ++t) {
    std::vector<std::string> opts;
    for (int k = 0; k < 3; ++k) opts.push_back(rules[rng() % rules.size()]);
    const auto& g = rules[rng() % rules.size()];
    auto o = oracle_f1(opts, g);
    for (const auto& x : opts) CHECK(o.best_f1 >= lrml_f1(x, g).f1);
    CHECK(o.best_f1 == o.scores[o.best_index]);
  }
  CHECK(harmonic_mean(0, 0) == 0.0);
  CHECK(harmonic_mean(1, 0.5) == doctest::Approx(2.0 / 3));
}
