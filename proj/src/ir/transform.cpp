#include <sstream>

#include "lrml/ir/codec.hpp"

namespace lrml::ir {

namespace {

std::string name_in(std::string_view canonical, Style style) {
  return style == Style::canonical ? std::string(canonical) : spaced_name(canonical);
}

std::string join_exprs(const std::vector<Expr>& exprs, Style style) {
  std::string out;
  const char* sep = style == Style::canonical ? "," : ", ";
  for (std::size_t i = 0; i < exprs.size(); ++i) {
    if (i) out += sep;
    out += serialize_expr(exprs[i], style);
  }
  return out;
}

struct ExprPrinter {
  Style style;

  std::string operator()(const Apply& a) const {
    return name_in(a.functor, style) + "(" + join_exprs(a.args, style) + ")";
  }
  std::string operator()(const EntityRef& e) const {
    std::string out = name_in(e.entity, style);
    if (e.property) {
      out += style == Style::canonical ? "." : ". ";
      out += name_in(*e.property, style);
    }
    return out;
  }
  std::string operator()(const Quantity& q) const { return q.surface; }
  std::string operator()(const LegalRef& r) const { return name_in(r.token, style); }
  std::string operator()(const StringExpr& s) const { return "'" + s.raw + "'"; }
  std::string operator()(const Term& t) const { return name_in(t.word, style); }
};

// ---------------------------------------------------------------------------
// Distribution

Expr distribute(const Expr& expr, std::size_t depth, std::size_t max_depth) {
  const Apply* source = expr.as_apply();
  if (!source) return expr;

  Apply apply;
  apply.functor = source->functor;
  apply.args.reserve(source->args.size());
  for (const Expr& arg : source->args) apply.args.push_back(distribute(arg, depth, max_depth));

  if (!is_domain_predicate(apply)) return apply;

  for (std::size_t i = 0; i < apply.args.size(); ++i) {
    const Apply* connective = apply.args[i].as_apply();
    if (!connective || !is_connective(connective->functor)) continue;
    if (depth >= max_depth) throw DistributionDepthExceeded(max_depth);

    Apply rewritten;
    rewritten.functor = connective->functor;
    for (const Expr& child : connective->args) {
      Apply branch = apply;
      branch.args[i] = child;
      rewritten.args.push_back(distribute(Expr(std::move(branch)), depth + 1, max_depth));
    }
    return rewritten;
  }
  return apply;
}

// ---------------------------------------------------------------------------
// Verbose form: a generic labelled tree that renders as brackets or XML.

struct Node {
  std::string label;
  std::vector<Node> children;
  bool leaf = false;

  static Node text(std::string value) { return Node{std::move(value), {}, true}; }
  static Node of(std::string label, std::vector<Node> children) {
    return Node{std::move(label), std::move(children), false};
  }
};

Node wrap(std::string label, std::string text) { return Node::of(std::move(label), {Node::text(std::move(text))}); }

Node expand(const Expr& expr);

struct Expander {
  Node operator()(const Apply& a) const {
    std::vector<Node> children;
    if (is_logical_functor(a.functor) || deontic_from_name(a.functor)) {
      for (const Expr& arg : a.args) children.push_back(expand(arg));
      return Node::of(a.functor, std::move(children));
    }
    children.push_back(wrap("fun", a.functor));
    for (const Expr& arg : a.args) children.push_back(expand(arg));
    return Node::of("expr", std::move(children));
  }
  Node operator()(const EntityRef& e) const {
    if (e.property) return Node::of("atom", {wrap("rel", *e.property), wrap("var", e.entity)});
    return Node::of("atom", {wrap("var", e.entity)});
  }
  Node operator()(const Quantity& q) const {
    std::vector<Node> unit;
    if (q.prefix) unit.push_back(wrap("prefix", *q.prefix));
    unit.push_back(wrap("kind", q.kind));
    return Node::of("data", {Node::of("baseunit", std::move(unit)), wrap("value", format_decimal(q.value))});
  }
  Node operator()(const LegalRef& r) const { return Node::of("atom", {wrap("var", r.token)}); }
  Node operator()(const StringExpr& s) const { return Node::of("data", {wrap("value", "'" + s.raw + "'")}); }
  Node operator()(const Term& t) const { return Node::of("atom", {wrap("var", t.word)}); }
};

Node expand(const Expr& expr) { return std::visit(Expander{}, expr.node); }

std::vector<Node> expand_all(const std::vector<Expr>& exprs) {
  std::vector<Node> out;
  out.reserve(exprs.size());
  for (const Expr& e : exprs) out.push_back(expand(e));
  return out;
}

std::pair<Node, Node> expand_rule(const RuleAst& rule) {
  RuleAst distributed = distribute_connectives(rule);
  Node condition = Node::of("if", expand_all(distributed.condition));
  std::vector<Node> conclusion = expand_all(distributed.conclusion);
  if (distributed.deontic) {
    conclusion = {Node::of(std::string(to_string(*distributed.deontic)), std::move(conclusion))};
  }
  return {std::move(condition), Node::of("then", std::move(conclusion))};
}

void render_brackets(const Node& node, std::string& out) {
  out += node.label;
  if (node.leaf) return;
  out.push_back('(');
  for (std::size_t i = 0; i < node.children.size(); ++i) {
    if (i) out.push_back(',');
    render_brackets(node.children[i], out);
  }
  out.push_back(')');
}

void xml_escape(std::string_view text, std::string& out) {
  for (char c : text) {
    switch (c) {
      case '&': out += "&amp;"; break;
      case '<': out += "&lt;"; break;
      case '>': out += "&gt;"; break;
      case '"': out += "&quot;"; break;
      case '\'': out += "&apos;"; break;
      default: out.push_back(c);
    }
  }
}

void render_xml(const Node& node, std::string& out) {
  if (node.leaf) {
    xml_escape(node.label, out);
    return;
  }
  out += "<" + node.label + ">";
  for (const Node& child : node.children) render_xml(child, out);
  out += "</" + node.label + ">";
}

}  // namespace

std::string serialize_expr(const Expr& expr, Style style) {
  return std::visit(ExprPrinter{style}, expr.node);
}

std::string serialize_ir(const RuleAst& rule, Style style) {
  std::string out = "if(" + join_exprs(rule.condition, style) + ")";
  out += style == Style::canonical ? ",then(" : ", then(";
  if (rule.deontic) {
    out += std::string(to_string(*rule.deontic)) + "(" + join_exprs(rule.conclusion, style) + ")";
  } else {
    out += join_exprs(rule.conclusion, style);
  }
  out += ")";
  return out;
}

Expr distribute_connectives(const Expr& expr, std::size_t max_depth) {
  return distribute(expr, 0, max_depth);
}

RuleAst distribute_connectives(const RuleAst& rule, std::size_t max_depth) {
  RuleAst out;
  out.deontic = rule.deontic;
  for (const Expr& e : rule.condition) out.condition.push_back(distribute(e, 0, max_depth));
  for (const Expr& e : rule.conclusion) out.conclusion.push_back(distribute(e, 0, max_depth));
  return out;
}

std::string to_original(const RuleAst& rule) {
  auto [condition, conclusion] = expand_rule(rule);
  std::string out;
  render_brackets(condition, out);
  out.push_back(',');
  render_brackets(conclusion, out);
  return out;
}

std::string emit_legalruleml_xml(const RuleAst& rule) {
  auto [condition, conclusion] = expand_rule(rule);
  const char* root = rule.statement_kind() == StatementKind::prescriptive ? "PrescriptiveStatement"
                                                                          : "ConstitutiveStatement";
  std::string out = "<?xml version=\"1.0\" encoding=\"UTF-8\"?>\n";
  out += "<" + std::string(root) + ">";
  render_xml(condition, out);
  render_xml(conclusion, out);
  out += "</" + std::string(root) + ">\n";
  return out;
}

}  // namespace lrml::ir
