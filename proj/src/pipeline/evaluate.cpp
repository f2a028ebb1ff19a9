#include <algorithm>
#include <cstdio>
#include <fstream>
#include <map>
#include <set>

#include "lrml/pipeline.hpp"
#include "lrml/util/fs.hpp"
#include "parallel.hpp"

namespace lrml::pipeline {

using corpus::ClauseRecord;
using json = nlohmann::json;
using ojson = nlohmann::ordered_json;

namespace {

std::string fixed4(double v) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.4f", v);
  return buf;
}

double mean(const std::vector<double>& xs) {
  if (xs.empty()) return 0.0;
  double s = 0.0;
  for (double x : xs) s += x;
  return s / static_cast<double>(xs.size());
}

const ClauseRecord& gold_for(const corpus::Corpus& gold, const std::string& id) {
  const ClauseRecord* r = gold.find(id);
  if (!r || !r->has_gold()) throw UnknownClauseId(id);
  return *r;
}

std::string pad(std::string s, std::size_t w) {
  if (s.size() < w) s.append(w - s.size(), ' ');
  return s;
}

std::string lpad(const std::string& s, std::size_t w) {
  return s.size() < w ? std::string(w - s.size(), ' ') + s : s;
}

}  // namespace

ScoreReport score_predictions(const std::vector<std::pair<std::string, std::string>>& predictions,
                              const corpus::Corpus& gold) {
  ScoreReport report;
  std::vector<std::string> preds, refs;
  std::vector<double> f1s, ps, rs;
  for (const auto& [id, pred] : predictions) {
    const ClauseRecord& g = gold_for(gold, id);
    preds.push_back(metrics::bleu_surface(pred));
    refs.push_back(metrics::bleu_surface(g.target_ir));
    metrics::MatchReport m = metrics::lrml_f1(pred, g.target_ir);
    ClauseScore c;
    c.id = id;
    c.bleu_ref_len = metrics::bleu_tokens(refs.back()).size();
    c.f1 = m.f1;
    c.precision = m.precision;
    c.recall = m.recall;
    c.parse_failed = m.parse_failed;
    report.parse_failures += m.parse_failed ? 1 : 0;
    f1s.push_back(m.f1);
    ps.push_back(m.precision);
    rs.push_back(m.recall);
    report.clauses.push_back(std::move(c));
  }
  report.bleu = preds.empty() ? 0.0 : metrics::corpus_bleu(preds, refs);
  report.mean_f1 = mean(f1s);
  report.mean_precision = mean(ps);
  report.mean_recall = mean(rs);
  return report;
}

ojson report_to_json(const ScoreReport& report) {
  ojson j;
  j["config_hash"] = report.config_hash;
  j["aggregates"] = {{"clauses", report.clauses.size()},
                     {"bleu", report.bleu},
                     {"f1", report.mean_f1},
                     {"precision", report.mean_precision},
                     {"recall", report.mean_recall},
                     {"parse_failures", report.parse_failures}};
  ojson per = ojson::array();
  for (const auto& c : report.clauses) {
    per.push_back({{"id", c.id},
                   {"f1", c.f1},
                   {"precision", c.precision},
                   {"recall", c.recall},
                   {"parse_failed", c.parse_failed}});
  }
  j["per_clause"] = std::move(per);
  return j;
}

std::string report_table(const ScoreReport& report) {
  std::size_t w = 8;
  for (const auto& c : report.clauses) w = std::max(w, c.id.size());
  std::string out = pad("id", w) + "  " + lpad("f1", 6) + "  " + lpad("prec", 6) + "  " + lpad("rec", 6) + "\n";
  for (const auto& c : report.clauses) {
    out += pad(c.id, w) + "  " + lpad(fixed4(c.f1), 6) + "  " + lpad(fixed4(c.precision), 6) + "  " +
           lpad(fixed4(c.recall), 6) + (c.parse_failed ? "  parse-failed" : "") + "\n";
  }
  out += pad("mean", w) + "  " + lpad(fixed4(report.mean_f1), 6) + "  " +
         lpad(fixed4(report.mean_precision), 6) + "  " + lpad(fixed4(report.mean_recall), 6) + "\n";
  out += "BLEU " + fixed4(report.bleu) + "  clauses " + std::to_string(report.clauses.size()) +
         "  parse failures " + std::to_string(report.parse_failures) + "\n";
  return out;
}

ScoreReport run_evaluate(const std::filesystem::path& predictions_path, const corpus::Corpus& corpus,
                         const std::filesystem::path& out_dir) {
  std::vector<PredictionRecord> preds = load_predictions(predictions_path);
  std::vector<std::pair<std::string, std::string>> pairs;
  for (const auto& p : preds) pairs.emplace_back(p.id, p.extracted_ir);
  ScoreReport report = score_predictions(pairs, corpus);
  if (!preds.empty()) report.config_hash = preds.front().config_hash;
  if (!out_dir.empty()) {
    util::write_file_atomic(out_dir / "report.json", report_to_json(report).dump(2) + "\n");
    util::write_file_atomic(out_dir / "report.txt", report_table(report));
  }
  return report;
}

// ---------------------------------------------------------------------------

std::vector<prompting::BankExemplar> load_bank(const std::filesystem::path& path,
                                               prompting::SelfConsistencyMode mode) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw corpus::IoError("cannot open bank " + path.string());
  std::vector<prompting::BankExemplar> out;
  std::size_t n = 0;
  for (std::string line; std::getline(in, line);) {
    ++n;
    if (line.find_first_not_of(" \t\r") == std::string::npos) continue;
    prompting::BankExemplar ex;
    ex.record = corpus::record_from_json_line(line, n);
    try {
      ex.options = json::parse(line).at("options").get<std::vector<std::string>>();
    } catch (const json::exception& e) {
      throw corpus::MalformedRecord(n, e.what());
    }
    if (!ex.record.has_gold()) throw prompting::MissingGoldIr(ex.record.id);
    if (ex.options.size() < 2) throw prompting::TooFewOptions(ex.options.size());
    if (mode == prompting::SelfConsistencyMode::choose) {
      ex.target = ex.options[metrics::oracle_f1(ex.options, ex.record.target_ir).best_index];
    } else {
      ex.target = ex.record.target_ir;
    }
    out.push_back(std::move(ex));
  }
  return out;
}

namespace {

double option_similarity(const std::string& response, const std::string& option) {
  try {
    return metrics::lrml_f1(response, option).f1;
  } catch (const metrics::GoldParseError&) {
    return 0.0;
  }
}

std::string sc_line(const SelfConsistencyClause& c, const std::string& hash) {
  ojson j;
  j["id"] = c.id;
  j["config_hash"] = hash;
  j["prompt_hash"] = c.prompt_hash;
  j["options"] = c.options;
  j["extracted_ir"] = c.chosen_ir;
  j["snapped"] = c.snapped;
  j["temperatures_tried"] = c.temperatures_tried;
  j["valid"] = c.valid;
  if (!c.error.empty()) j["error"] = c.error;
  return j.dump();
}

}  // namespace

SelfConsistencyReport run_self_consistency(RunContext& ctx,
                                           const std::vector<std::filesystem::path>& prediction_files,
                                           std::span<const prompting::BankExemplar> bank,
                                           prompting::SelfConsistencyMode mode,
                                           const std::filesystem::path& out_dir) {
  if (prediction_files.size() < 2) {
    throw ClauseCoverageMismatch("self-consistency needs at least 2 prediction files");
  }
  std::vector<std::vector<PredictionRecord>> files;
  for (const auto& p : prediction_files) files.push_back(load_predictions(p));

  std::vector<std::string> ids;
  for (const auto& p : files.front()) ids.push_back(p.id);
  const std::set<std::string> id_set(ids.begin(), ids.end());
  std::vector<std::map<std::string, std::string>> by_id(files.size());
  for (std::size_t f = 0; f < files.size(); ++f) {
    std::set<std::string> seen;
    for (const auto& p : files[f]) {
      seen.insert(p.id);
      by_id[f][p.id] = p.extracted_ir;
    }
    if (seen != id_set) {
      throw ClauseCoverageMismatch(prediction_files[f].string() + " covers different clauses than " +
                                   prediction_files.front().string());
    }
  }

  SelfConsistencyReport report;
  report.mode = mode;
  report.config_hash = config_hash(ctx.config);
  report.clauses.resize(ids.size());

  detail::parallel_for(ids.size(), ctx.config.provider.max_parallel_requests, [&](std::size_t i) {
    SelfConsistencyClause& c = report.clauses[i];
    c.id = ids[i];
    for (const auto& m : by_id) {
      const std::string& opt = m.at(c.id);
      if (!opt.empty()) c.options.push_back(opt);
    }
    const ClauseRecord* rec = ctx.corpus.find(c.id);
    if (!rec) throw UnknownClauseId(c.id);
    if (c.options.size() < 2) {
      c.error = "TooFewOptions";
      return;
    }
    auto prompt = prompting::render_self_consistency(bank, *rec, c.options, mode);
    try {
      auto trace = ctx.client->complete_with_escalation(prompt.messages, rule_validator, ctx.config.schedule);
      c.prompt_hash = trace.prompt_hash;
      c.temperatures_tried = trace.temperatures_tried;
      c.chosen_ir = *prompting::extract_rule(trace.final_text);
      c.valid = true;
    } catch (const llm::AllAttemptsInvalid& e) {
      c.prompt_hash = e.trace().prompt_hash;
      c.temperatures_tried = e.trace().temperatures_tried;
      c.error = "AllAttemptsInvalid";
      return;
    }
    if (mode == prompting::SelfConsistencyMode::choose) {
      // snap to the nearest candidate; ties keep the earlier option
      std::size_t best = 0;
      double best_sim = -1.0;
      for (std::size_t k = 0; k < c.options.size(); ++k) {
        double s = option_similarity(c.chosen_ir, c.options[k]);
        if (s > best_sim) {
          best_sim = s;
          best = k;
        }
      }
      c.snapped = c.chosen_ir != c.options[best];
      c.chosen_ir = c.options[best];
    }
  });

  std::vector<double> chosen, oracle;
  std::vector<std::vector<double>> per_file(files.size());
  for (auto& c : report.clauses) {
    if (!c.valid) ++report.failures;
    const ClauseRecord* rec = ctx.corpus.find(c.id);
    if (!rec->has_gold()) continue;
    ++report.scored;
    for (const auto& opt : c.options) c.option_f1.push_back(metrics::lrml_f1(opt, rec->target_ir).f1);
    if (!c.option_f1.empty()) {
      auto it = std::max_element(c.option_f1.begin(), c.option_f1.end());
      c.oracle_f1 = *it;
      c.oracle_index = static_cast<std::size_t>(it - c.option_f1.begin());
    }
    c.chosen_f1 = c.valid ? metrics::lrml_f1(c.chosen_ir, rec->target_ir).f1 : 0.0;
    chosen.push_back(*c.chosen_f1);
    oracle.push_back(c.oracle_f1.value_or(0.0));
    for (std::size_t f = 0; f < files.size(); ++f) {
      per_file[f].push_back(metrics::lrml_f1(by_id[f].at(c.id), rec->target_ir).f1);
    }
  }
  report.mean_chosen_f1 = mean(chosen);
  report.mean_oracle_f1 = mean(oracle);
  std::vector<double> file_means;
  for (const auto& v : per_file) file_means.push_back(mean(v));
  report.max_f1 = *std::max_element(file_means.begin(), file_means.end());
  report.average_f1 = mean(file_means);

  if (!out_dir.empty()) {
    std::string body;
    for (const auto& c : report.clauses) body += sc_line(c, report.config_hash) + "\n";
    util::write_file_atomic(out_dir / "sc_predictions.jsonl", body);

    ojson j;
    j["config_hash"] = report.config_hash;
    j["mode"] = mode == prompting::SelfConsistencyMode::choose ? "choose" : "predict";
    j["aggregates"] = {{"clauses", report.clauses.size()},
                       {"scored", report.scored},
                       {"failures", report.failures},
                       {"chosen_f1", report.mean_chosen_f1},
                       {"oracle_f1", report.mean_oracle_f1},
                       {"max_f1", report.max_f1},
                       {"average_f1", report.average_f1}};
    ojson per = ojson::array();
    for (const auto& c : report.clauses) {
      ojson e = {{"id", c.id}, {"option_f1", c.option_f1}};
      e["oracle_f1"] = c.oracle_f1 ? ojson(*c.oracle_f1) : ojson(nullptr);
      e["chosen_f1"] = c.chosen_f1 ? ojson(*c.chosen_f1) : ojson(nullptr);
      per.push_back(std::move(e));
    }
    j["per_clause"] = std::move(per);
    util::write_file_atomic(out_dir / "sc_report.json", j.dump(2) + "\n");

    std::string txt = "mode " + j["mode"].get<std::string>() + "\n";
    txt += "chosen F1   " + fixed4(report.mean_chosen_f1) + "\n";
    txt += "oracle F1   " + fixed4(report.mean_oracle_f1) + "\n";
    txt += "max F1      " + fixed4(report.max_f1) + "\n";
    txt += "average F1  " + fixed4(report.average_f1) + "\n";
    txt += "failures    " + std::to_string(report.failures) + "\n";
    util::write_file_atomic(out_dir / "sc_report.txt", txt);
  }
  return report;
}

}  // namespace lrml::pipeline
