#include <algorithm>
#include <map>
#include <sstream>
#include <tuple>

#include "lrml/ir/codec.hpp"
#include "lrml/metrics.hpp"

namespace lrml::metrics {

using ir::Apply;
using ir::Expr;

GoldParseError::GoldParseError(const std::string& detail)
    : std::runtime_error("gold rule does not parse: " + detail) {}

std::string_view to_string(OperatorKind kind) {
  switch (kind) {
    case OperatorKind::if_: return "if";
    case OperatorKind::then_: return "then";
    case OperatorKind::and_: return "and";
    case OperatorKind::or_: return "or";
    case OperatorKind::not_: return "not";
    case OperatorKind::obligation: return "obligation";
    case OperatorKind::permission: return "permission";
    case OperatorKind::prohibition: return "prohibition";
  }
  return "?";
}

double harmonic_mean(double p, double r) { return p + r == 0.0 ? 0.0 : 2.0 * p * r / (p + r); }

double CategoryScore::precision() const {
  return predicted == 0 ? (gold == 0 ? 1.0 : 0.0) : matched / static_cast<double>(predicted);
}
double CategoryScore::recall() const {
  return gold == 0 ? (predicted == 0 ? 1.0 : 0.0) : matched / static_cast<double>(gold);
}
double CategoryScore::f1() const { return harmonic_mean(precision(), recall()); }

namespace {

std::vector<std::string> words(std::string_view text) {
  std::vector<std::string> out;
  std::istringstream in{std::string(text)};
  for (std::string w; in >> w;) out.push_back(w);
  return out;
}

std::string entity_words(const Expr& e) {
  if (const auto* ref = std::get_if<ir::EntityRef>(&e.node)) {
    std::string s = ir::spaced_name(ref->entity);
    if (ref->property) s += " " + ir::spaced_name(*ref->property);
    return s;
  }
  if (const auto* term = std::get_if<ir::Term>(&e.node)) return ir::spaced_name(term->word);
  return {};
}

bool is_entity_like(const Expr& e) {
  return std::holds_alternative<ir::EntityRef>(e.node) || std::holds_alternative<ir::Term>(e.node);
}

// Canonical text, except connective children are sorted so that permuted
// and/or arguments share a signature.
std::string signature(const Expr& e) {
  const Apply* a = e.as_apply();
  if (!a) return ir::serialize_expr(e, ir::Style::canonical);
  std::vector<std::string> parts;
  for (const Expr& arg : a->args) parts.push_back(signature(arg));
  if (ir::is_connective(a->functor)) std::sort(parts.begin(), parts.end());
  std::string out = a->functor + "(";
  for (std::size_t i = 0; i < parts.size(); ++i) {
    if (i) out += ",";
    out += parts[i];
  }
  return out + ")";
}

struct Candidate {
  double score;
  const std::string* pred_sig;
  const std::string* gold_sig;
  std::size_t i;
  std::size_t j;
};

// Greedy one-to-one matching, best pairs first. Ties fall back to element
// signatures, so the result does not depend on the order of the inputs.
template <typename ScoreFn>
double greedy_match(std::size_t n_pred, std::size_t n_gold, const std::vector<std::string>& pred_sig,
                    const std::vector<std::string>& gold_sig, ScoreFn score) {
  std::vector<Candidate> cands;
  for (std::size_t i = 0; i < n_pred; ++i) {
    for (std::size_t j = 0; j < n_gold; ++j) {
      double s = score(i, j);
      if (s > 0.0) cands.push_back({s, &pred_sig[i], &gold_sig[j], i, j});
    }
  }
  std::sort(cands.begin(), cands.end(), [](const Candidate& x, const Candidate& y) {
    if (x.score != y.score) return x.score > y.score;
    if (*x.pred_sig != *y.pred_sig) return *x.pred_sig < *y.pred_sig;
    if (*x.gold_sig != *y.gold_sig) return *x.gold_sig < *y.gold_sig;
    return std::tie(x.i, x.j) < std::tie(y.i, y.j);
  });
  std::vector<bool> used_p(n_pred, false), used_g(n_gold, false);
  double total = 0.0;
  for (const Candidate& c : cands) {
    if (used_p[c.i] || used_g[c.j]) continue;
    used_p[c.i] = used_g[c.j] = true;
    total += c.score;
  }
  return total;
}

double expr_similarity(const Expr& a, const Expr& b);

double list_similarity(const std::vector<const Expr*>& a, const std::vector<const Expr*>& b) {
  if (a.empty() && b.empty()) return 1.0;
  std::vector<std::string> sa, sb;
  for (const Expr* e : a) sa.push_back(signature(*e));
  for (const Expr* e : b) sb.push_back(signature(*e));
  double matched = greedy_match(a.size(), b.size(), sa, sb,
                                [&](std::size_t i, std::size_t j) { return expr_similarity(*a[i], *b[j]); });
  return matched / static_cast<double>(std::max(a.size(), b.size()));
}

double relation_similarity(const Apply& a, const Apply& b) {
  if (a.functor != b.functor) return 0.0;
  std::size_t common = std::min(a.args.size(), b.args.size());
  double sum = 0.0;
  for (std::size_t i = 0; i < common; ++i) sum += expr_similarity(a.args[i], b.args[i]);
  return sum / static_cast<double>(std::max(a.args.size(), b.args.size()));
}

double expr_similarity(const Expr& a, const Expr& b) {
  const Apply* fa = a.as_apply();
  const Apply* fb = b.as_apply();
  if (fa && fb) {
    bool da = ir::is_domain_predicate(*fa);
    if (da != ir::is_domain_predicate(*fb)) return 0.0;
    if (da) return relation_similarity(*fa, *fb);
    if (fa->functor != fb->functor) return 0.0;
    std::vector<const Expr*> ca, cb;
    for (const Expr& e : fa->args) ca.push_back(&e);
    for (const Expr& e : fb->args) cb.push_back(&e);
    return list_similarity(ca, cb);
  }
  if (fa || fb) return 0.0;
  if (is_entity_like(a) && is_entity_like(b)) return entity_similarity(entity_words(a), entity_words(b));
  if (const auto* qa = std::get_if<ir::Quantity>(&a.node)) {
    const auto* qb = std::get_if<ir::Quantity>(&b.node);
    return qb && qa->value == qb->value && qa->prefix == qb->prefix && qa->kind == qb->kind ? 1.0 : 0.0;
  }
  if (const auto* ra = std::get_if<ir::LegalRef>(&a.node)) {
    const auto* rb = std::get_if<ir::LegalRef>(&b.node);
    return rb && ra->token == rb->token ? 1.0 : 0.0;
  }
  if (const auto* sa = std::get_if<ir::StringExpr>(&a.node)) {
    const auto* sb = std::get_if<ir::StringExpr>(&b.node);
    return sb && sa->raw == sb->raw ? 1.0 : 0.0;
  }
  return 0.0;
}

// Relations and leaves below `e`, looking through logical operators.
void collect_descendants(const Expr& e, std::vector<const Expr*>& out) {
  if (const Apply* a = e.as_apply()) {
    if (ir::is_domain_predicate(*a)) out.push_back(&e);
    for (const Expr& arg : a->args) collect_descendants(arg, out);
    return;
  }
  out.push_back(&e);
}

std::vector<const Expr*> descendants(const std::vector<Expr>& exprs) {
  std::vector<const Expr*> out;
  for (const Expr& e : exprs) collect_descendants(e, out);
  return out;
}

Element make_operator(OperatorKind kind, std::vector<const Expr*> children) {
  Element el{Element::Category::operator_, kind, nullptr, std::move(children), {}};
  std::vector<std::string> sigs;
  for (const Expr* c : el.children) sigs.push_back(signature(*c));
  std::sort(sigs.begin(), sigs.end());
  el.signature = std::string(to_string(kind)) + "{";
  for (const auto& s : sigs) el.signature += s + ";";
  el.signature += "}";
  return el;
}

void walk(const Expr& e, ElementBag& bag) {
  if (const Apply* a = e.as_apply()) {
    if (ir::is_domain_predicate(*a)) {
      bag.relations.push_back({Element::Category::relation, std::nullopt, &e, {}, signature(e)});
    } else {
      OperatorKind kind = a->functor == "and" ? OperatorKind::and_
                          : a->functor == "or" ? OperatorKind::or_
                                               : OperatorKind::not_;
      std::vector<const Expr*> children;
      for (const Expr& arg : a->args) collect_descendants(arg, children);
      bag.operators.push_back(make_operator(kind, std::move(children)));
    }
    for (const Expr& arg : a->args) walk(arg, bag);
    return;
  }
  if (is_entity_like(e)) {
    bag.entities.push_back({Element::Category::entity, std::nullopt, &e, {}, signature(e)});
  }
}

OperatorKind deontic_operator(ir::DeonticKind k) {
  switch (k) {
    case ir::DeonticKind::obligation: return OperatorKind::obligation;
    case ir::DeonticKind::permission: return OperatorKind::permission;
    case ir::DeonticKind::prohibition: return OperatorKind::prohibition;
  }
  return OperatorKind::obligation;
}

double element_similarity(const Element& p, const Element& g) {
  switch (p.category) {
    case Element::Category::entity:
      return entity_similarity(entity_words(*p.expr), entity_words(*g.expr));
    case Element::Category::relation:
      return relation_similarity(*p.expr->as_apply(), *g.expr->as_apply());
    case Element::Category::operator_:
      if (p.op != g.op) return 0.0;
      return list_similarity(p.children, g.children);
  }
  return 0.0;
}

CategoryScore score_category(const std::vector<Element>& pred, const std::vector<Element>& gold) {
  CategoryScore s;
  s.predicted = pred.size();
  s.gold = gold.size();
  std::vector<std::string> ps, gs;
  for (const auto& e : pred) ps.push_back(e.signature);
  for (const auto& e : gold) gs.push_back(e.signature);
  s.matched = greedy_match(pred.size(), gold.size(), ps, gs,
                           [&](std::size_t i, std::size_t j) { return element_similarity(pred[i], gold[j]); });
  return s;
}

}  // namespace

double entity_similarity(std::string_view a, std::string_view b) {
  std::vector<std::string> wa = words(a), wb = words(b);
  if (wa.empty() && wb.empty()) return 1.0;
  std::map<std::string, int> counts;
  for (const auto& w : wa) ++counts[w];
  std::size_t common = 0;
  for (const auto& w : wb) {
    auto it = counts.find(w);
    if (it != counts.end() && it->second > 0) {
      --it->second;
      ++common;
    }
  }
  return 2.0 * static_cast<double>(common) / static_cast<double>(wa.size() + wb.size());
}

void build_element_bag(const ir::RuleAst& rule, ElementBag& out) {
  out.rule = ir::distribute_connectives(rule);
  out.entities.clear();
  out.relations.clear();
  out.operators.clear();
  const ir::RuleAst& r = out.rule;

  out.operators.push_back(make_operator(OperatorKind::if_, descendants(r.condition)));
  for (const Expr& e : r.condition) walk(e, out);
  std::vector<const Expr*> then_children = descendants(r.conclusion);
  out.operators.push_back(make_operator(OperatorKind::then_, then_children));
  if (r.deontic) out.operators.push_back(make_operator(deontic_operator(*r.deontic), then_children));
  for (const Expr& e : r.conclusion) walk(e, out);
}

MatchReport lrml_f1(const ir::RuleAst& prediction, const ir::RuleAst& gold) {
  ElementBag p, g;
  build_element_bag(prediction, p);
  build_element_bag(gold, g);

  MatchReport report;
  report.entities = score_category(p.entities, g.entities);
  report.relations = score_category(p.relations, g.relations);
  report.operators = score_category(p.operators, g.operators);

  double matched = report.entities.matched + report.relations.matched + report.operators.matched;
  std::size_t n_pred = p.entities.size() + p.relations.size() + p.operators.size();
  std::size_t n_gold = g.entities.size() + g.relations.size() + g.operators.size();
  report.precision = matched / static_cast<double>(n_pred);
  report.recall = matched / static_cast<double>(n_gold);
  report.f1 = harmonic_mean(report.precision, report.recall);
  return report;
}

MatchReport lrml_f1(std::string_view prediction, std::string_view gold) {
  ir::RuleAst gold_ast;
  try {
    gold_ast = ir::parse_ir(gold);
    (void)ir::distribute_connectives(gold_ast);
  } catch (const std::exception& e) {
    throw GoldParseError(e.what());
  }
  ir::RuleAst pred_ast;
  try {
    pred_ast = ir::parse_ir(prediction);
    (void)ir::distribute_connectives(pred_ast);
  } catch (const ir::ParseError&) {
    MatchReport failed;
    failed.parse_failed = true;
    return failed;
  } catch (const ir::DistributionDepthExceeded&) {
    MatchReport failed;
    failed.parse_failed = true;
    return failed;
  }
  return lrml_f1(pred_ast, gold_ast);
}

OracleResult oracle_f1(std::span<const std::string> options, std::string_view gold) {
  if (options.empty()) throw std::invalid_argument("oracle_f1 needs at least one option");
  OracleResult out;
  for (std::size_t i = 0; i < options.size(); ++i) {
    double f = lrml_f1(options[i], gold).f1;
    out.scores.push_back(f);
    if (i == 0 || f > out.best_f1) {
      out.best_f1 = f;
      out.best_index = i;
    }
  }
  return out;
}

}  // namespace lrml::metrics
