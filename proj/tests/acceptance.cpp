// One line per acceptance criterion; exit status is the number of failures.
#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <functional>
#include <map>
#include <random>
#include <set>

#include "lrml/ir/codec.hpp"
#include "lrml/metrics.hpp"
#include "lrml/pipeline.hpp"
#include "support.hpp"

using namespace lrml;
using json = nlohmann::json;
namespace fs = std::filesystem;

namespace {

struct Outcome {
  bool ok = true;
  std::string detail;

  void expect(bool cond, const std::string& what) {
    if (!cond && ok) {
      ok = false;
      detail = what;
    }
  }
};

std::vector<std::string> golds() {
  std::vector<std::string> out;
  for (const auto& r : testing::fixture_corpus().records()) {
    if (r.has_gold()) out.push_back(r.target_ir);
  }
  return out;
}

pipeline::RunConfig preset(const std::string& name) {
  auto c = pipeline::load_config(fs::path(LRML_CONFIG_DIR) / (name + ".json"));
  c.corpus_path = (fs::path(LRML_CONFIG_DIR) / c.corpus_path).lexically_normal().string();
  return c;
}

std::shared_ptr<llm::Client> mock(const pipeline::RunConfig& c, const std::string& script,
                                  std::optional<fs::path> cache = std::nullopt) {
  return std::make_shared<llm::Client>(c.provider, llm::MockBackend::from_file(testing::fixture(script)), cache);
}

std::shared_ptr<llm::Client> fixed(const pipeline::RunConfig& c, std::string reply) {
  return std::make_shared<llm::Client>(
      c.provider, std::make_shared<llm::MockBackend>(
                      [reply](std::size_t, std::span<const llm::Message>, double) -> std::optional<std::string> {
                        return reply;
                      }));
}

Outcome codec_roundtrip() {
  Outcome o;
  auto start = std::chrono::steady_clock::now();
  for (const auto& g : golds()) {
    auto ast = ir::parse_ir(g);
    for (auto style : {ir::Style::canonical, ir::Style::spaced}) {
      o.expect(ir::parse_ir(ir::serialize_ir(ast, style)) == ast, "round trip differs for " + g);
    }
  }
  double secs = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
  o.expect(secs < 1.0, "round trip took " + std::to_string(secs) + " s");
  if (o.ok) o.detail = std::to_string(golds().size()) + " rules, both styles";
  return o;
}

Outcome back_translation() {
  Outcome o;
  auto w = testing::worked();
  o.expect(ir::to_original(ir::parse_ir(w["unit_rule"]["ir"].get<std::string>())) ==
               w["unit_rule"]["original"].get<std::string>(),
           "original form differs");
  auto dist = ir::distribute_connectives(ir::parse_ir(w["merged_or"]["gold"].get<std::string>()));
  o.expect(dist.condition.size() == 1 &&
               ir::serialize_expr(dist.condition[0], ir::Style::spaced) ==
                   w["merged_or"]["distributed_condition"].get<std::string>(),
           "distributed condition differs");
  return o;
}

Outcome metric_identity() {
  Outcome o;
  std::vector<std::string> surf;
  for (const auto& g : golds()) {
    auto r = metrics::lrml_f1(g, g);
    o.expect(std::abs(r.f1 - 1.0) < 1e-12, "self F1 below 1 for " + g);
    surf.push_back(metrics::bleu_surface(g));
  }
  o.expect(std::abs(metrics::corpus_bleu(surf, surf) - 1.0) < 1e-12, "self BLEU below 1");
  auto bad = metrics::lrml_f1("if(exist(drain", golds().front());
  o.expect(bad.parse_failed && bad.f1 == 0.0, "unparseable prediction scored");
  auto disjoint = metrics::lrml_f1("if(near(qqq, rrr)), then(zzz(www))",
                                   "if(has(drain, bend)), then(permission(exceed(bend. angle, 90 deg)))");
  o.expect(disjoint.f1 == 0.0, "disjoint rules scored " + std::to_string(disjoint.f1));
  return o;
}

Outcome calibration() {
  Outcome o;
  auto w = testing::worked();
  auto f = [&](const char* key) {
    return metrics::lrml_f1(w[key]["prediction"].get<std::string>(), w[key]["gold"].get<std::string>()).f1;
  };
  double near = f("near_miss"), mid = f("merged_or"), weak = f("weak_match");
  o.expect(near >= 0.80 && near <= 0.95, "near-miss score out of band");
  o.expect(near > mid && mid > weak, "graded examples out of order");
  auto opts = w["drain_options"]["options"].get<std::vector<std::string>>();
  o.expect(metrics::oracle_f1(opts, w["drain_options"]["gold"].get<std::string>()).best_index == 1,
           "oracle picked the wrong option");
  char buf[96];
  std::snprintf(buf, sizeof buf, "%.3f > %.3f > %.3f", near, mid, weak);
  if (o.ok) o.detail = buf;
  return o;
}

// counts n-grams by hand, independent of the library
double reference_bleu(const std::vector<std::vector<std::string>>& hyp,
                      const std::vector<std::vector<std::string>>& ref) {
  double log_p = 0;
  std::size_t c = 0, r = 0;
  for (std::size_t i = 0; i < hyp.size(); ++i) c += hyp[i].size(), r += ref[i].size();
  for (std::size_t n = 1; n <= 4; ++n) {
    double match = 0, total = 0;
    for (std::size_t i = 0; i < hyp.size(); ++i) {
      std::map<std::vector<std::string>, int> h, g;
      for (std::size_t k = 0; k + n <= hyp[i].size(); ++k) h[{hyp[i].begin() + k, hyp[i].begin() + k + n}]++;
      for (std::size_t k = 0; k + n <= ref[i].size(); ++k) g[{ref[i].begin() + k, ref[i].begin() + k + n}]++;
      for (auto& [gram, cnt] : h) {
        total += cnt;
        if (auto it = g.find(gram); it != g.end()) match += std::min(cnt, it->second);
      }
    }
    if (match == 0) return 0;
    log_p += std::log(match / total) / 4;
  }
  return (c > r ? 1.0 : std::exp(1.0 - double(r) / double(c))) * std::exp(log_p);
}

Outcome bleu_oracle() {
  Outcome o;
  auto w = testing::worked()["bleu_drain_pipe"];
  std::vector<std::string> p{w["prediction"].get<std::string>()}, g{w["reference"].get<std::string>()};
  // 7 tokens each; 6/7 4/6 2/5 1/4 n-grams match
  double hand = std::pow(6.0 / 7 * 4.0 / 6 * 2.0 / 5 * 1.0 / 4, 0.25);
  o.expect(std::abs(metrics::corpus_bleu(p, g) - hand) < 1e-9, "worked pair differs from hand value");
  std::mt19937_64 rng(11);
  const std::vector<std::string> vocab{"if", "(", ")", ",", "then", "drain", "pipe", "exist"};
  for (int t = 0; t < 100; ++t) {
    std::vector<std::vector<std::string>> h, r;
    std::vector<std::string> hs, rs;
    for (int i = 0; i < 3; ++i) {
      std::vector<std::string> a, b;
      for (int k = 0; k < 12; ++k) b.push_back(vocab[k % 6]);
      for (int k = 0; k < 10 + int(rng() % 4); ++k) a.push_back(rng() % 3 ? b[k % 12] : vocab[rng() % vocab.size()]);
      std::string as, bs;
      for (auto& x : a) as += x + " ";
      for (auto& x : b) bs += x + " ";
      h.push_back(a), r.push_back(b), hs.push_back(as), rs.push_back(bs);
    }
    o.expect(std::abs(metrics::corpus_bleu(hs, rs) - reference_bleu(h, r)) < 1e-12, "random trial differs");
  }
  return o;
}

using Grams = std::set<std::vector<std::string>>;

Grams grams(const std::string& text, std::size_t n) {
  auto w = retrieval::ngram_words(text);
  Grams out;
  for (std::size_t i = 0; i + n <= w.size(); ++i) out.insert({w.begin() + i, w.begin() + i + n});
  return out;
}

Grams overlap(const std::string& text, const Grams& want, std::size_t n) {
  Grams out;
  for (const auto& g : grams(text, n)) {
    if (want.count(g)) out.insert(g);
  }
  return out;
}

Outcome retrieval_checks() {
  Outcome o;
  std::vector<corpus::ClauseRecord> gold;
  for (const auto& r : testing::fixture_corpus().records()) {
    if (r.has_gold()) gold.push_back(r);
  }
  retrieval::TokenBudget open;
  open.available = std::size_t{1} << 40;
  auto cost = retrieval::exemplar_cost(llm::heuristic_counter(0.1));
  const std::vector<std::size_t> orders{1, 2, 3};
  for (std::uint64_t trial = 0; trial < 100; ++trial) {
    std::mt19937_64 rng(trial);
    auto pool = gold;
    std::shuffle(pool.begin(), pool.end(), rng);
    auto query = pool.back();
    pool.pop_back();
    pool.resize(10 + rng() % (pool.size() - 10));
    auto sel = retrieval::select_per_clause_ngram(pool, query, open, false, orders, cost);
    for (std::size_t n : orders) {
      Grams want = grams(query.source, n), reachable, covered;
      for (const auto& r : pool) {
        auto g = overlap(r.source, want, n);
        reachable.insert(g.begin(), g.end());
      }
      for (const auto& r : sel.exemplars) {
        auto g = overlap(r.source, want, n);
        covered.insert(g.begin(), g.end());
      }
      o.expect(covered == reachable, "trial " + std::to_string(trial) + " misses reachable n-grams");
    }
    auto ids = sel.ids();
    o.expect(retrieval::select_per_clause_ngram(pool, query, open, false, orders, cost).ids() == ids,
             "n-gram selection not deterministic");
    std::reverse(ids.begin(), ids.end());
    o.expect(retrieval::select_per_clause_ngram(pool, query, open, true, orders, cost).ids() == ids,
             "n-gram reversal not exact");
  }

  for (const char* name : {"random", "stratified", "cluster_clause", "representative_global", "per_clause_semantic",
                           "per_clause_semantic_reversed", "per_clause_ngram", "per_clause_ngram_reversed",
                           "context_full", "cot_colloquial", "cot_alignment_mixed"}) {
    auto c = preset(name);
    auto ctx = pipeline::make_context(c, fixed(c, ""));
    auto queries = ctx->corpus.split(corpus::Split::valid);
    auto train = ctx->corpus.split(corpus::Split::train);
    auto budget = pipeline::translate_budget(*ctx, queries, train);
    for (const auto& q : queries) {
      auto spec = pipeline::build_prompt(*ctx, q, train, budget, std::nullopt);
      std::string text;
      for (const auto& m : spec.messages) text += m.content;
      o.expect(ctx->counter(text) + c.provider.max_output_tokens <= c.provider.context_limit,
               std::string(name) + " prompt over the limit");
      auto again = pipeline::build_prompt(*ctx, q, train, budget, std::nullopt);
      o.expect(again.messages == spec.messages, std::string(name) + " prompt not deterministic");
    }
  }
  for (const char* base : {"per_clause_semantic", "per_clause_ngram"}) {
    auto fwd = preset(base);
    auto ctx = pipeline::make_context(fwd, fixed(fwd, ""));
    auto queries = ctx->corpus.split(corpus::Split::valid);
    auto train = ctx->corpus.split(corpus::Split::train);
    auto budget = pipeline::translate_budget(*ctx, queries, train);
    auto rev_cfg = fwd.strategy;
    rev_cfg.reversed = true;
    auto c = retrieval::exemplar_cost(ctx->counter);
    for (const auto& q : queries) {
      auto ids = retrieval::select(fwd.strategy, train, queries, q, budget, *ctx->embeddings, c).ids();
      std::reverse(ids.begin(), ids.end());
      o.expect(retrieval::select(rev_cfg, train, queries, q, budget, *ctx->embeddings, c).ids() == ids,
               std::string(base) + " reversal not exact");
    }
  }
  return o;
}

Outcome escalation() {
  Outcome o;
  pipeline::RunConfig c;
  llm::Client client(c.provider, llm::MockBackend::from_file(testing::fixture("mock_escalation.json")));
  std::vector<llm::Message> m{{"user", "Source: x\nTarget:"}};
  auto trace = client.complete_with_escalation(m, pipeline::rule_validator);
  o.expect(trace.temperatures_tried == std::vector<double>{0.0, 0.2, 0.4}, "wrong temperatures");
  o.expect(trace.valid && trace.attempts == 3, "third attempt not accepted");
  llm::Client dud(c.provider, llm::MockBackend::from_file(testing::fixture("mock_all_fail.json")));
  try {
    dud.complete_with_escalation(m, pipeline::rule_validator);
    o.expect(false, "no error after the schedule");
  } catch (const llm::AllAttemptsInvalid& e) {
    o.expect(e.trace().attempts == 6, "wrong attempt count");
  }
  return o;
}

Outcome end_to_end() {
  Outcome o;
  testing::TempDir tmp;
  auto c = preset("per_clause_ngram");
  auto ctx = pipeline::make_context(c, mock(c, "mock_gold_echo.json", tmp / "cache"));
  auto res = pipeline::run_translate(*ctx, tmp / "a");
  auto rep = pipeline::run_evaluate(res.predictions_path, ctx->corpus, tmp / "a");
  o.expect(std::abs(rep.bleu - 1.0) < 1e-12 && std::abs(rep.mean_f1 - 1.0) < 1e-12, "echo run not perfect");
  auto warm = pipeline::make_context(c, mock(c, "mock_all_fail.json", tmp / "cache"));
  pipeline::run_translate(*warm, tmp / "b");
  pipeline::run_evaluate(tmp / "b" / "predictions.jsonl", warm->corpus, tmp / "b");
  o.expect(warm->client->network_calls() == 0, "warm cache hit the network");
  for (const char* f : {"predictions.jsonl", "config.json", "report.json", "report.txt"}) {
    o.expect(testing::slurp(tmp / "a" / f) == testing::slurp(tmp / "b" / f), std::string(f) + " differs");
  }
  return o;
}

Outcome self_consistency() {
  Outcome o;
  testing::TempDir tmp;
  auto c = preset("self_consistency");
  pipeline::run_translate(*pipeline::make_context(c, mock(c, "mock_gold_echo.json")), tmp / "g");
  pipeline::run_translate(*pipeline::make_context(c, fixed(c, "if(exist(drain)), then(obligation(has(drain, trap)))")),
                          tmp / "d");
  pipeline::run_translate(*pipeline::make_context(c, fixed(c, "if(exist(pipe)), then(obligation(has(pipe, size)))")),
                          tmp / "p");
  std::vector<fs::path> files{tmp / "d" / "predictions.jsonl", tmp / "g" / "predictions.jsonl",
                              tmp / "p" / "predictions.jsonl"};
  auto bank = pipeline::load_bank(testing::fixture("sc_bank.jsonl"), prompting::SelfConsistencyMode::choose);
  for (const char* script : {"mock_sc_longest.json", "mock_sc_first.json", "mock_sc_best.json"}) {
    auto ctx = pipeline::make_context(c, mock(c, script));
    auto rep = pipeline::run_self_consistency(*ctx, files, bank, prompting::SelfConsistencyMode::choose, tmp / "sc");
    for (const auto& cl : rep.clauses) {
      o.expect(cl.valid && cl.chosen_f1 && cl.oracle_f1, "clause " + cl.id + " unscored");
      if (cl.chosen_f1 && cl.oracle_f1) o.expect(*cl.chosen_f1 <= *cl.oracle_f1 + 1e-12, "pick beat oracle");
    }
    if (std::string(script) == "mock_sc_best.json") {
      o.expect(std::abs(rep.mean_chosen_f1 - rep.mean_oracle_f1) < 1e-12, "best pick below oracle");
    }
  }
  return o;
}

Outcome teacher() {
  Outcome o;
  testing::TempDir tmp;
  auto c = preset("teacher_seeds");
  auto ctx = pipeline::make_context(c, mock(c, "mock_teacher.json"));
  std::vector<corpus::ClauseRecord> seeds, todo;
  for (const auto& r : ctx->corpus.records()) (r.has_gold() ? seeds : todo).push_back(r);
  auto res = pipeline::run_teacher(*ctx, seeds, todo, tmp.path());
  o.expect(res.generated == todo.size() && res.skipped.empty(), "some clauses skipped");
  o.expect(res.augmented.split(corpus::Split::train).size() == seeds.size() + todo.size(), "wrong train size");
  auto flagged = std::count_if(res.augmented.records().begin(), res.augmented.records().end(),
                               [](const corpus::ClauseRecord& r) { return r.generated; });
  o.expect(flagged == static_cast<long>(todo.size()), "wrong generated count");
  o.expect(corpus::load_corpus(res.corpus_path) == res.augmented, "augmented corpus does not reload");
  return o;
}

}  // namespace

int main() {
  const std::vector<std::pair<const char*, std::function<Outcome()>>> criteria{
      {"codec round trip", codec_roundtrip},
      {"back translation", back_translation},
      {"metric identity and degeneracy", metric_identity},
      {"metric calibration", calibration},
      {"bleu against reference", bleu_oracle},
      {"retrieval", retrieval_checks},
      {"temperature escalation", escalation},
      {"end to end reproducibility", end_to_end},
      {"self-consistency dominance", self_consistency},
      {"teacher augmentation", teacher},
  };
  int failed = 0;
  for (const auto& [name, fn] : criteria) {
    Outcome o;
    try {
      o = fn();
    } catch (const std::exception& e) {
      o = {false, std::string("threw: ") + e.what()};
    }
    failed += !o.ok;
    std::printf("[%s] %s%s%s\n", o.ok ? "PASS" : "FAIL", name, o.detail.empty() ? "" : "  ", o.detail.c_str());
  }
  std::printf("%d/%zu criteria passed\n", int(criteria.size()) - failed, criteria.size());
  return failed;
}
