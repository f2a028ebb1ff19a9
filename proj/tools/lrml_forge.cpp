// lrml-forge: translate clauses to LRML IR with few-shot prompting, score
// the results, and inspect corpora and rules.
#include <cstdio>
#include <fstream>
#include <iostream>
#include <iterator>
#include <sstream>

#include "CLI11.hpp"
#include "lrml/ir/codec.hpp"
#include "lrml/pipeline.hpp"
#include "lrml/util/fs.hpp"

namespace fs = std::filesystem;
using namespace lrml;
using ojson = nlohmann::ordered_json;

namespace {

enum Exit { kOk = 0, kPartial = 1, kFatal = 2 };

struct Common {
  std::string config;
  std::string corpus;
  std::string out;
  std::string mock;
  std::optional<std::uint64_t> seed;
  std::string base_url;
  std::string model;
  bool no_cache = false;
  std::string cache_dir;
  std::string curated;
};

void add_common(CLI::App* cmd, Common& c, bool with_provider) {
  cmd->add_option("--config", c.config, "run config JSON")->check(CLI::ExistingFile);
  cmd->add_option("--corpus", c.corpus, "corpus JSONL (overrides the config)");
  cmd->add_option("--out", c.out, "output directory");
  cmd->add_option("--seed", c.seed, "sampling seed");
  cmd->add_option("--curated", c.curated, "file of curated exemplar ids, one per line");
  if (!with_provider) return;
  cmd->add_option("--mock", c.mock, "scripted mock responses instead of the HTTP provider")
      ->check(CLI::ExistingFile);
  cmd->add_option("--base-url", c.base_url, "chat completion endpoint base URL");
  cmd->add_option("--model", c.model, "model name");
  cmd->add_flag("--no-cache", c.no_cache, "skip the response cache");
  cmd->add_option("--cache-dir", c.cache_dir, "response cache directory");
}

std::vector<std::string> read_lines(const fs::path& p) {
  std::istringstream in(util::read_file(p));
  std::vector<std::string> out;
  for (std::string line; std::getline(in, line);) {
    if (!line.empty() && line.back() == '\r') line.pop_back();
    out.push_back(line);
  }
  return out;
}

struct Loaded {
  pipeline::RunConfig config;
  fs::path corpus_file;  // corpus path as opened
};

// Relative paths inside a config file resolve against the file's directory;
// paths given on the command line resolve against the working directory.
Loaded resolve(const Common& c) {
  Loaded l;
  fs::path base;
  if (!c.config.empty()) {
    l.config = pipeline::load_config(c.config);
    base = fs::path(c.config).parent_path();
  }
  auto& cfg = l.config;
  if (!c.corpus.empty()) {
    cfg.corpus_path = c.corpus;
    l.corpus_file = c.corpus;
  } else {
    fs::path p = cfg.corpus_path;
    l.corpus_file = p.is_relative() ? base / p : p;
  }
  if (!cfg.assets_dir.empty() && fs::path(cfg.assets_dir).is_relative()) {
    cfg.assets_dir = (base / cfg.assets_dir).string();
  }
  if (c.seed) cfg.seed = *c.seed;
  if (!c.base_url.empty()) cfg.provider.base_url = c.base_url;
  if (!c.model.empty()) cfg.provider.model = c.model;
  if (!c.cache_dir.empty()) cfg.cache_dir = c.cache_dir;
  if (!c.curated.empty()) {
    cfg.strategy.curated_ids.clear();
    for (auto& line : read_lines(c.curated)) {
      if (!line.empty() && line[0] != '#') cfg.strategy.curated_ids.push_back(line);
    }
  }
  if (!c.out.empty()) cfg.output_dir = c.out;
  cfg.strategy.validate();
  return l;
}

std::shared_ptr<llm::Client> make_client(const Common& c, const pipeline::RunConfig& cfg) {
  std::shared_ptr<llm::Backend> backend;
  if (!c.mock.empty()) {
    backend = llm::MockBackend::from_file(c.mock);
  } else {
    backend = std::make_shared<llm::HttpBackend>();
  }
  std::optional<fs::path> cache;
  if (!c.no_cache && !cfg.cache_dir.empty()) cache = fs::path(cfg.cache_dir);
  return std::make_shared<llm::Client>(cfg.provider, backend, cache);
}

std::unique_ptr<pipeline::RunContext> context_for(const Common& c, const Loaded& l) {
  if (l.corpus_file.empty()) throw std::invalid_argument("no corpus given (--corpus or config \"corpus\")");
  return pipeline::make_context(l.config, corpus::load_corpus(l.corpus_file), make_client(c, l.config));
}

fs::path out_dir(const pipeline::RunConfig& cfg) {
  fs::path p = cfg.output_dir;
  fs::create_directories(p);
  return p;
}

// ---------------------------------------------------------------------------

int cmd_translate(const Common& c) {
  Loaded l = resolve(c);
  auto ctx = context_for(c, l);
  fs::path dir = out_dir(ctx->config);
  auto r = pipeline::run_translate(*ctx, dir);
  std::cout << "translated " << r.predictions.size() << " clauses, " << r.failures << " failed, "
            << ctx->client->network_calls() << " network calls\n"
            << "predictions: " << r.predictions_path.string() << "\n";
  return r.failures ? kPartial : kOk;
}

int cmd_evaluate(const Common& c, const std::string& pred) {
  Loaded l = resolve(c);
  corpus::Corpus gold = corpus::load_corpus(l.corpus_file);
  fs::path dir = c.out.empty() ? fs::path(pred).parent_path() : fs::path(c.out);
  if (!dir.empty()) fs::create_directories(dir);
  auto report = pipeline::run_evaluate(pred, gold, dir);
  std::cout << pipeline::report_table(report);
  return report.parse_failures ? kPartial : kOk;
}

int cmd_selfcheck(const Common& c, const std::vector<std::string>& preds, const std::string& bank_path,
                  const std::string& mode_name) {
  Loaded l = resolve(c);
  auto mode = mode_name == "predict" ? prompting::SelfConsistencyMode::predict
                                     : prompting::SelfConsistencyMode::choose;
  auto bank = pipeline::load_bank(bank_path, mode);
  auto ctx = context_for(c, l);
  fs::path dir = out_dir(ctx->config);
  std::vector<fs::path> files(preds.begin(), preds.end());
  auto r = pipeline::run_self_consistency(*ctx, files, bank, mode, dir);
  std::cout << util::read_file(dir / "sc_report.txt");
  return r.failures ? kPartial : kOk;
}

int cmd_teach(const Common& c) {
  Loaded l = resolve(c);
  corpus::Corpus all = corpus::load_corpus(l.corpus_file);
  std::vector<corpus::ClauseRecord> seeds, todo;
  for (const auto& r : all.records()) (r.has_gold() ? seeds : todo).push_back(r);
  auto ctx = pipeline::make_context(l.config, corpus::Corpus(seeds), make_client(c, l.config));
  fs::path dir = out_dir(ctx->config);
  auto r = pipeline::run_teacher(*ctx, seeds, todo, dir);
  std::cout << "seeds " << seeds.size() << ", generated " << r.generated << ", skipped "
            << r.skipped.size() << "\n"
            << "corpus: " << r.corpus_path.string() << "\n";
  for (const auto& s : r.skipped) std::cout << "  skipped " << s.id << ": " << s.reason << "\n";
  return r.skipped.empty() ? kOk : kPartial;
}

struct RetrieveOpts {
  std::string strategy;
  bool reversed = false;
  std::vector<std::size_t> n_orders;
  std::string query_id;
  std::optional<std::size_t> k;
};

int cmd_retrieve(const Common& c, const RetrieveOpts& o) {
  Loaded l = resolve(c);
  auto& s = l.config.strategy;
  if (!o.strategy.empty()) s.kind = retrieval::strategy_from_string(o.strategy);
  if (o.reversed) s.reversed = true;
  if (!o.n_orders.empty()) s.n_orders = o.n_orders;
  if (o.k) s.k = o.k;
  s.validate();
  l.config.rendering = prompting::Rendering::plain;
  auto ctx = pipeline::make_context(l.config, corpus::load_corpus(l.corpus_file),
                                    std::make_shared<llm::Client>(l.config.provider,
                                                                  std::make_shared<llm::HttpBackend>()));
  auto train = ctx->corpus.split(corpus::Split::train);
  auto valid = ctx->corpus.split(corpus::Split::valid);
  auto queries = ctx->corpus.split(corpus::split_from_string(ctx->config.translate_split));
  if (!o.query_id.empty()) {
    const corpus::ClauseRecord* q = ctx->corpus.find(o.query_id);
    if (!q) throw pipeline::UnknownClauseId(o.query_id);
    // budget stays the one translate would use
    bool in_split = std::any_of(queries.begin(), queries.end(),
                                [&](const auto& r) { return r.id == o.query_id; });
    if (!in_split) queries.push_back(*q);
  }
  auto budget = pipeline::translate_budget(*ctx, queries, train);
  auto cost = retrieval::exemplar_cost(ctx->counter);

  auto emit = [&](const std::string& qid, const retrieval::ExemplarSelection& sel) {
    ojson j;
    if (!qid.empty()) j["query_id"] = qid;
    j["strategy"] = retrieval::to_string(s.kind);
    j["exemplar_ids"] = sel.ids();
    j["tokens"] = sel.total_cost;
    j["available"] = budget.available;
    std::cout << j.dump() << "\n";
  };
  if (!retrieval::is_per_clause(s.kind)) {
    emit("", retrieval::select(ctx->config.strategy, train, valid, queries.front(), budget,
                               *ctx->embeddings, cost));
    return kOk;
  }
  for (const auto& q : queries) {
    if (!o.query_id.empty() && q.id != o.query_id) continue;
    // a train clause must not retrieve itself
    std::vector<corpus::ClauseRecord> pool;
    std::copy_if(train.begin(), train.end(), std::back_inserter(pool), [&](const auto& r) { return r.id != q.id; });
    emit(q.id, retrieval::select(ctx->config.strategy, pool, valid, q, budget, *ctx->embeddings, cost));
  }
  return kOk;
}

int cmd_score(const std::string& pred, const std::string& gold) {
  auto p = read_lines(pred);
  auto g = read_lines(gold);
  while (!p.empty() && p.back().empty()) p.pop_back();
  while (!g.empty() && g.back().empty()) g.pop_back();
  if (p.size() != g.size()) throw metrics::LengthMismatch(p.size(), g.size());
  std::vector<std::string> ps, gs;
  double f1 = 0.0;
  std::size_t failed = 0;
  for (std::size_t i = 0; i < p.size(); ++i) {
    auto m = metrics::lrml_f1(p[i], g[i]);
    ojson j = {{"line", i + 1},
               {"f1", m.f1},
               {"precision", m.precision},
               {"recall", m.recall},
               {"parse_failed", m.parse_failed}};
    std::cout << j.dump() << "\n";
    f1 += m.f1;
    failed += m.parse_failed;
    ps.push_back(metrics::bleu_surface(p[i]));
    gs.push_back(metrics::bleu_surface(g[i]));
  }
  ojson agg = {{"pairs", p.size()},
               {"bleu", ps.empty() ? 0.0 : metrics::corpus_bleu(ps, gs)},
               {"mean_f1", p.empty() ? 0.0 : f1 / static_cast<double>(p.size())},
               {"parse_failures", failed}};
  std::cout << ojson{{"aggregate", agg}}.dump() << "\n";
  return failed ? kPartial : kOk;
}

void dump_expr(std::ostream& os, const ir::Expr& e, int depth) {
  std::string ind(static_cast<std::size_t>(depth) * 2, ' ');
  std::visit(
      [&](const auto& n) {
        using T = std::decay_t<decltype(n)>;
        if constexpr (std::is_same_v<T, ir::Apply>) {
          os << ind << n.functor << "\n";
          for (const auto& a : n.args) dump_expr(os, a, depth + 1);
        } else if constexpr (std::is_same_v<T, ir::EntityRef>) {
          os << ind << "entity " << n.entity;
          if (n.property) os << " ." << *n.property;
          os << "\n";
        } else if constexpr (std::is_same_v<T, ir::Quantity>) {
          os << ind << "quantity " << ir::format_decimal(n.value) << " " << n.prefix.value_or("")
             << (n.prefix ? " " : "") << n.kind << "\n";
        } else if constexpr (std::is_same_v<T, ir::LegalRef>) {
          os << ind << "ref " << n.token << "\n";
        } else if constexpr (std::is_same_v<T, ir::StringExpr>) {
          os << ind << "string " << n.raw << "\n";
        } else {
          os << ind << "term " << n.word << "\n";
        }
      },
      e.node);
}

int cmd_codec(const std::string& action, const std::string& file, const std::string& style_name) {
  std::string text = file.empty() ? std::string(std::istreambuf_iterator<char>(std::cin), {})
                                  : util::read_file(file);
  while (!text.empty() && std::isspace(static_cast<unsigned char>(text.back()))) text.pop_back();
  ir::Style style = style_name == "spaced" ? ir::Style::spaced : ir::Style::canonical;
  ir::RuleAst rule;
  try {
    rule = ir::parse_ir(text);
  } catch (const ir::ParseError& e) {
    std::cerr << "parse error (" << ir::to_string(e.kind()) << ") at offset " << e.offset() << ": "
              << e.what() << "\n";
    return kFatal;
  }
  if (action == "parse") {
    std::cout << (rule.deontic ? "prescriptive " + std::string(ir::to_string(*rule.deontic)) : "constitutive")
              << "\nif\n";
    for (const auto& e : rule.condition) dump_expr(std::cout, e, 1);
    std::cout << "then\n";
    for (const auto& e : rule.conclusion) dump_expr(std::cout, e, 1);
  } else if (action == "emit") {
    std::cout << ir::serialize_ir(rule, style) << "\n";
  } else if (action == "original") {
    std::cout << ir::to_original(rule) << "\n";
  } else if (action == "xml") {
    std::cout << ir::emit_legalruleml_xml(rule);
  } else {  // roundtrip
    bool ok = true;
    for (ir::Style s : {ir::Style::canonical, ir::Style::spaced}) {
      std::string once = ir::serialize_ir(rule, s);
      bool same = ir::parse_ir(once) == rule && ir::serialize_ir(ir::parse_ir(once), s) == once;
      std::cout << (s == ir::Style::canonical ? "canonical " : "spaced    ") << (same ? "ok" : "MISMATCH")
                << "\n";
      ok = ok && same;
    }
    return ok ? kOk : kPartial;
  }
  return kOk;
}

int cmd_stats(const Common& c, std::size_t top) {
  Loaded l = resolve(c);
  corpus::Corpus corp = corpus::load_corpus(l.corpus_file);
  ojson j;
  j["records"] = corp.size();
  ojson splits;
  for (auto s : {corpus::Split::train, corpus::Split::valid, corpus::Split::test, corpus::Split::unlabeled}) {
    splits[std::string(corpus::to_string(s))] = corp.split(s).size();
  }
  j["splits"] = splits;
  std::size_t gold = 0, generated = 0, colloquial = 0, alignment = 0;
  for (const auto& r : corp.records()) {
    gold += r.has_gold();
    generated += r.generated;
    if (r.rationale_style == corpus::RationaleStyle::colloquial) ++colloquial;
    if (r.rationale_style == corpus::RationaleStyle::alignment) ++alignment;
  }
  j["with_gold"] = gold;
  j["generated"] = generated;
  j["rationales"] = {{"colloquial", colloquial}, {"alignment", alignment}};
  auto issues = corpus::validate_corpus(corp);
  ojson bad = ojson::array();
  for (const auto& i : issues) bad.push_back({{"id", i.id}, {"error", i.error}});
  j["invalid"] = bad;
  ojson terms = ojson::array();
  for (const auto& t : corpus::term_frequencies(corp, top)) terms.push_back({t.term, t.count});
  j["top_terms"] = terms;
  std::cout << j.dump(2) << "\n";
  return issues.empty() ? kOk : kPartial;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Few-shot translation of building-code clauses into LRML rules"};
  app.require_subcommand(1);

  Common common;
  std::function<int()> run;

  auto* tr = app.add_subcommand("translate", "translate a corpus split with the configured strategy");
  add_common(tr, common, true);
  tr->callback([&] { run = [&] { return cmd_translate(common); }; });

  std::string pred;
  auto* ev = app.add_subcommand("evaluate", "score predictions.jsonl against corpus gold");
  add_common(ev, common, false);
  ev->add_option("--pred", pred, "predictions.jsonl")->required()->check(CLI::ExistingFile);
  ev->callback([&] { run = [&] { return cmd_evaluate(common, pred); }; });

  std::vector<std::string> sc_preds;
  std::string bank, mode = "choose";
  auto* sc = app.add_subcommand("selfcheck", "let the model choose among earlier predictions");
  add_common(sc, common, true);
  sc->add_option("--pred", sc_preds, "prediction files (two or more)")->required()->check(CLI::ExistingFile);
  sc->add_option("--bank", bank, "exemplar bank JSONL with options")->required()->check(CLI::ExistingFile);
  sc->add_option("--mode", mode, "choose or predict")->check(CLI::IsMember({"choose", "predict"}));
  sc->callback([&] { run = [&] { return cmd_selfcheck(common, sc_preds, bank, mode); }; });

  auto* te = app.add_subcommand("teach", "translate untranslated records into synthetic training data");
  add_common(te, common, true);
  te->callback([&] { run = [&] { return cmd_teach(common); }; });

  RetrieveOpts ro;
  auto* re = app.add_subcommand("retrieve", "print the exemplars a strategy selects");
  add_common(re, common, false);
  re->add_option("--strategy", ro.strategy, "strategy kind");
  re->add_flag("--reversed", ro.reversed, "most similar exemplar last");
  re->add_option("--n-orders", ro.n_orders, "n-gram orders for per_clause_ngram");
  re->add_option("--query-id", ro.query_id, "only this clause");
  re->add_option("--k", ro.k, "cap on exemplar count");
  re->callback([&] { run = [&] { return cmd_retrieve(common, ro); }; });

  std::string sp, sg;
  auto* so = app.add_subcommand("score", "score aligned rule files, one rule per line");
  so->add_option("--pred", sp, "predicted rules")->required()->check(CLI::ExistingFile);
  so->add_option("--gold", sg, "gold rules")->required()->check(CLI::ExistingFile);
  so->callback([&] { run = [&] { return cmd_score(sp, sg); }; });

  std::string action, file, style = "canonical";
  auto* co = app.add_subcommand("codec", "parse and re-emit one rule");
  co->add_option("action", action, "parse | emit | original | xml | roundtrip")
      ->required()
      ->check(CLI::IsMember({"parse", "emit", "original", "xml", "roundtrip"}));
  co->add_option("--file", file, "read the rule from a file instead of stdin")->check(CLI::ExistingFile);
  co->add_option("--style", style, "canonical or spaced")->check(CLI::IsMember({"canonical", "spaced"}));
  co->callback([&] { run = [&] { return cmd_codec(action, file, style); }; });

  std::size_t top = 10;
  auto* st = app.add_subcommand("stats", "corpus summary");
  add_common(st, common, false);
  st->add_option("--top", top, "number of common terms");
  st->callback([&] { run = [&] { return cmd_stats(common, top); }; });

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    int rc = app.exit(e);
    return rc == 0 ? kOk : kFatal;
  }
  try {
    return run();
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kFatal;
  }
}
