#pragma once

#include <cctype>
#include <fstream>
#include <sstream>
#include <string>
#include <string_view>
#include <vector>

#include <json.hpp>

#include "frote/rules.hpp"

// Rule DSL, one rule per line, '#' starts a comment:
//
//   rule      := "IF" predicate ("AND" predicate)* "THEN" "class" outcome
//   outcome   := "=" LABEL | "~" "{" LABEL ":" PROB ("," LABEL ":" PROB)* "}"
//   predicate := IDENT OP literal        OP in { =, !=, <, <=, >, >= }
//   literal   := STRING | NUMBER
//
// Keywords are case-insensitive. Labels may be quoted strings, identifiers or numbers.

namespace frote {

namespace dsl {

enum class TokenKind { ident, string, number, op, tilde, lbrace, rbrace, colon, comma, end };

struct Token {
  TokenKind kind = TokenKind::end;
  std::string text;
  std::size_t column = 1;
};

inline bool ident_start(char c) { return std::isalpha(static_cast<unsigned char>(c)) || c == '_'; }
inline bool ident_char(char c) {
  return std::isalnum(static_cast<unsigned char>(c)) || c == '_' || c == '.' || c == '-';
}

inline std::vector<Token> tokenize(std::string_view line, std::size_t line_no) {
  std::vector<Token> out;
  std::size_t i = 0;
  while (i < line.size()) {
    const char c = line[i];
    const std::size_t col = i + 1;
    if (c == '#') break;
    if (std::isspace(static_cast<unsigned char>(c))) {
      ++i;
      continue;
    }
    if (ident_start(c)) {
      std::size_t j = i + 1;
      while (j < line.size() && ident_char(line[j])) ++j;
      out.push_back({TokenKind::ident, std::string(line.substr(i, j - i)), col});
      i = j;
    } else if (std::isdigit(static_cast<unsigned char>(c)) || c == '-' || c == '+' || c == '.') {
      std::size_t j = i + 1;
      while (j < line.size() && (std::isalnum(static_cast<unsigned char>(line[j])) || line[j] == '.' ||
                                 ((line[j] == '-' || line[j] == '+') && (line[j - 1] == 'e' || line[j - 1] == 'E'))))
        ++j;
      const auto text = line.substr(i, j - i);
      if (!parse_number(text)) throw ParseError(line_no, col, "malformed number '" + std::string(text) + "'");
      out.push_back({TokenKind::number, std::string(text), col});
      i = j;
    } else if (c == '"') {
      std::string s;
      std::size_t j = i + 1;
      bool closed = false;
      while (j < line.size()) {
        if (line[j] == '\\' && j + 1 < line.size()) {
          s.push_back(line[j + 1]);
          j += 2;
        } else if (line[j] == '"') {
          closed = true;
          ++j;
          break;
        } else {
          s.push_back(line[j++]);
        }
      }
      if (!closed) throw ParseError(line_no, col, "unterminated string literal");
      out.push_back({TokenKind::string, std::move(s), col});
      i = j;
    } else if (c == '<' || c == '>' || c == '=' || c == '!') {
      std::size_t len = (i + 1 < line.size() && line[i + 1] == '=') ? 2 : 1;
      const auto text = line.substr(i, len);
      if (!parse_op(text)) throw ParseError(line_no, col, "unknown operator '" + std::string(text) + "'");
      out.push_back({TokenKind::op, std::string(text), col});
      i += len;
    } else if (c == '~') {
      out.push_back({TokenKind::tilde, "~", col});
      ++i;
    } else if (c == '{') {
      out.push_back({TokenKind::lbrace, "{", col});
      ++i;
    } else if (c == '}') {
      out.push_back({TokenKind::rbrace, "}", col});
      ++i;
    } else if (c == ':') {
      out.push_back({TokenKind::colon, ":", col});
      ++i;
    } else if (c == ',') {
      out.push_back({TokenKind::comma, ",", col});
      ++i;
    } else {
      throw ParseError(line_no, col, std::string("unexpected character '") + c + "'");
    }
  }
  out.push_back({TokenKind::end, "", line.size() + 1});
  return out;
}

inline bool iequals(std::string_view a, std::string_view b) {
  if (a.size() != b.size()) return false;
  for (std::size_t i = 0; i < a.size(); ++i)
    if (std::tolower(static_cast<unsigned char>(a[i])) != std::tolower(static_cast<unsigned char>(b[i]))) return false;
  return true;
}

class LineParser {
 public:
  LineParser(std::vector<Token> tokens, std::size_t line_no, const Schema& schema)
      : toks_(std::move(tokens)), line_(line_no), schema_(schema) {}

  FeedbackRule parse(std::string id) {
    keyword("IF");
    Clause clause;
    clause.predicates.push_back(predicate());
    while (peek_keyword("AND")) {
      next();
      clause.predicates.push_back(predicate());
    }
    keyword("THEN");
    const auto& cls = next();
    if (cls.kind != TokenKind::ident || !(iequals(cls.text, "class") || cls.text == schema_.label_name()))
      fail(cls, "expected 'class'");
    LabelDistribution dist = outcome();
    if (peek().kind != TokenKind::end) fail(peek(), "unexpected trailing '" + peek().text + "'");
    return FeedbackRule(std::move(id), std::move(clause), std::move(dist));
  }

 private:
  const Token& peek() const { return toks_[pos_]; }
  const Token& next() {
    const Token& t = toks_[pos_];
    if (pos_ + 1 < toks_.size()) ++pos_;
    return t;
  }
  [[noreturn]] void fail(const Token& t, const std::string& msg) const { throw ParseError(line_, t.column, msg); }

  bool peek_keyword(std::string_view kw) const { return peek().kind == TokenKind::ident && iequals(peek().text, kw); }
  void keyword(std::string_view kw) {
    if (!peek_keyword(kw)) fail(peek(), "expected '" + std::string(kw) + "'");
    next();
  }

  Predicate predicate() {
    const Token& name = next();
    if (name.kind != TokenKind::ident && name.kind != TokenKind::string) fail(name, "expected attribute name");
    auto attr_idx = schema_.find(name.text);
    if (!attr_idx) fail(name, "unknown attribute '" + name.text + "'");
    const auto& attr = schema_.attribute(*attr_idx);
    const Token& op_tok = next();
    if (op_tok.kind != TokenKind::op) fail(op_tok, "expected comparison operator");
    const Op op = *parse_op(op_tok.text);
    if (!op_allowed(attr.kind, op))
      fail(op_tok, "operator '" + op_tok.text + "' not allowed on " +
                       (attr.is_numeric() ? "numeric" : "categorical") + " attribute '" + attr.name + "'");
    const Token& lit = next();
    Predicate p{*attr_idx, op, 0.0};
    if (attr.is_numeric()) {
      if (lit.kind != TokenKind::number) fail(lit, "numeric attribute '" + attr.name + "' needs a number");
      p.value = *parse_number(lit.text);
    } else {
      if (lit.kind != TokenKind::string && lit.kind != TokenKind::number && lit.kind != TokenKind::ident)
        fail(lit, "categorical attribute '" + attr.name + "' needs a category");
      auto c = attr.category_index(lit.text);
      if (!c) {
        if (lit.kind == TokenKind::number) fail(lit, "categorical attribute '" + attr.name + "' needs a category");
        fail(lit, "unknown category '" + lit.text + "' for attribute '" + attr.name + "'");
      }
      p.value = static_cast<double>(*c);
    }
    return p;
  }

  LabelId label() {
    const Token& t = next();
    if (t.kind != TokenKind::ident && t.kind != TokenKind::string && t.kind != TokenKind::number)
      fail(t, "expected class label");
    auto l = schema_.label_index(t.text);
    if (!l) fail(t, "unknown class label '" + t.text + "'");
    return *l;
  }

  LabelDistribution outcome() {
    const Token& t = next();
    if (t.kind == TokenKind::op && t.text == "=") return LabelDistribution::delta(label(), schema_.num_labels());
    if (t.kind != TokenKind::tilde) fail(t, "expected '=' or '~' after 'class'");
    if (next().kind != TokenKind::lbrace) fail(toks_[pos_ - 1], "expected '{'");
    std::vector<double> p(schema_.num_labels(), 0.0);
    std::vector<bool> seen(schema_.num_labels(), false);
    while (true) {
      const Token& at = peek();
      const LabelId l = label();
      if (seen[l]) fail(at, "label listed twice");
      seen[l] = true;
      if (next().kind != TokenKind::colon) fail(toks_[pos_ - 1], "expected ':'");
      const Token& num = next();
      if (num.kind != TokenKind::number) fail(num, "expected probability");
      p[l] = *parse_number(num.text);
      const Token& sep = next();
      if (sep.kind == TokenKind::rbrace) break;
      if (sep.kind != TokenKind::comma) fail(sep, "expected ',' or '}'");
    }
    try {
      return LabelDistribution(std::move(p));
    } catch (const ValidationError& e) {
      fail(t, e.what());
    }
  }

  std::vector<Token> toks_;
  std::size_t pos_ = 0;
  std::size_t line_;
  const Schema& schema_;
};

inline std::string quote(std::string_view s) {
  std::string out = "\"";
  for (char c : s) {
    if (c == '"' || c == '\\') out.push_back('\\');
    out.push_back(c);
  }
  out.push_back('"');
  return out;
}

}  // namespace dsl

/// Parses rule DSL text. Rule ids are assigned in file order: r1, r2, ...
inline FeedbackRuleSet parse_rule_set(std::string_view text, SchemaPtr schema) {
  FeedbackRuleSet frs(schema);
  std::size_t line_no = 0;
  std::size_t start = 0;
  while (start <= text.size()) {
    auto end = text.find('\n', start);
    if (end == std::string_view::npos) end = text.size();
    auto line = text.substr(start, end - start);
    if (!line.empty() && line.back() == '\r') line.remove_suffix(1);
    ++line_no;
    auto tokens = dsl::tokenize(line, line_no);
    if (tokens.size() > 1) {
      dsl::LineParser p(std::move(tokens), line_no, *schema);
      frs.add(p.parse("r" + std::to_string(frs.size() + 1)));
    }
    start = end + 1;
  }
  return frs;
}

inline std::string render_predicate(const Predicate& p, const Schema& s) {
  const auto& attr = s.attribute(p.attribute);
  std::string out = attr.name + " " + std::string(to_string(p.op)) + " ";
  if (attr.is_numeric())
    out += format_number(p.value);
  else
    out += dsl::quote(attr.categories.at(static_cast<std::size_t>(p.value)));
  return out;
}

inline std::string render_clause(const Clause& c, const Schema& s) {
  std::string out;
  for (std::size_t i = 0; i < c.predicates.size(); ++i) {
    if (i) out += " AND ";
    out += render_predicate(c.predicates[i], s);
  }
  return out;
}

inline std::string render_distribution(const LabelDistribution& d, const Schema& s) {
  if (auto l = d.deterministic_label()) return "class = " + dsl::quote(s.labels()[*l]);
  std::string out = "class ~ {";
  bool first = true;
  for (std::size_t l = 0; l < d.size(); ++l) {
    if (d.probability(l) <= 0) continue;
    if (!first) out += ", ";
    first = false;
    out += dsl::quote(s.labels()[l]) + ": " + format_number(d.probability(l));
  }
  return out + "}";
}

/// DSL text for a single-term rule without exclusions.
inline std::string render_rule(const FeedbackRule& r, const Schema& s) {
  if (!r.is_plain() || r.clause().empty())
    throw Error("rule '" + r.id + "' has exclusions or several terms and cannot be written in the rule DSL");
  return "IF " + render_clause(r.clause(), s) + " THEN " + render_distribution(r.distribution, s);
}

/// Human-readable description, valid for every rule shape (not parseable).
inline std::string describe_rule(const FeedbackRule& r, const Schema& s) {
  std::string out;
  for (std::size_t t = 0; t < r.terms.size(); ++t) {
    if (t) out += " OR ";
    const auto& term = r.terms[t];
    std::string body = term.clause.empty() ? "TRUE" : render_clause(term.clause, s);
    for (const auto& e : term.exclusions) body += " AND NOT (" + render_clause(e, s) + ")";
    out += r.terms.size() > 1 ? "(" + body + ")" : body;
  }
  return "IF " + out + " THEN " + render_distribution(r.distribution, s);
}

inline std::string render_rule_set(const FeedbackRuleSet& frs) {
  std::string out;
  for (const auto& r : frs) out += render_rule(r, frs.schema()) + "\n";
  return out;
}

namespace detail {

inline nlohmann::json clause_to_json(const Clause& c, const Schema& s) {
  nlohmann::json arr = nlohmann::json::array();
  for (const auto& p : c.predicates) {
    const auto& attr = s.attribute(p.attribute);
    nlohmann::json jp{{"attribute", attr.name}, {"op", std::string(to_string(p.op))}};
    if (attr.is_numeric())
      jp["value"] = p.value;
    else
      jp["value"] = attr.categories.at(static_cast<std::size_t>(p.value));
    arr.push_back(std::move(jp));
  }
  return arr;
}

inline Clause clause_from_json(const nlohmann::json& j, const Schema& s) {
  Clause c;
  for (const auto& jp : j) {
    const auto name = jp.at("attribute").get<std::string>();
    auto a = s.find(name);
    if (!a) throw ValidationError("rules: unknown attribute '" + name + "'");
    const auto& attr = s.attribute(*a);
    auto op = parse_op(jp.at("op").get<std::string>());
    if (!op || !op_allowed(attr.kind, *op))
      throw ValidationError("rules: operator '" + jp.at("op").get<std::string>() + "' not allowed on '" + name + "'");
    Predicate p{*a, *op, 0.0};
    if (attr.is_numeric()) {
      if (!jp.at("value").is_number()) throw ValidationError("rules: '" + name + "' needs a numeric value");
      p.value = jp.at("value").get<double>();
    } else {
      if (!jp.at("value").is_string()) throw ValidationError("rules: '" + name + "' needs a category");
      auto cidx = attr.category_index(jp.at("value").get<std::string>());
      if (!cidx) throw ValidationError("rules: unknown category for '" + name + "'");
      p.value = static_cast<double>(*cidx);
    }
    c.predicates.push_back(p);
  }
  return c;
}

}  // namespace detail

inline nlohmann::json rule_set_to_json(const FeedbackRuleSet& frs) {
  const auto& s = frs.schema();
  nlohmann::json rules = nlohmann::json::array();
  for (const auto& r : frs) {
    nlohmann::json terms = nlohmann::json::array();
    for (const auto& t : r.terms) {
      nlohmann::json ex = nlohmann::json::array();
      for (const auto& e : t.exclusions) ex.push_back(detail::clause_to_json(e, s));
      terms.push_back({{"clause", detail::clause_to_json(t.clause, s)}, {"exclusions", ex}});
    }
    nlohmann::json dist = nlohmann::json::object();
    for (std::size_t l = 0; l < r.distribution.size(); ++l)
      if (r.distribution.probability(l) > 0) dist[s.labels()[l]] = r.distribution.probability(l);
    rules.push_back({{"id", r.id}, {"terms", terms}, {"distribution", dist}});
  }
  return {{"rules", rules}};
}

inline FeedbackRuleSet rule_set_from_json(const nlohmann::json& j, SchemaPtr schema) {
  const auto& s = *schema;
  FeedbackRuleSet frs(schema);
  try {
    for (const auto& jr : j.at("rules")) {
      FeedbackRule r;
      r.id = jr.at("id").get<std::string>();
      for (const auto& jt : jr.at("terms")) {
        Term t;
        t.clause = detail::clause_from_json(jt.at("clause"), s);
        if (jt.contains("exclusions"))
          for (const auto& je : jt.at("exclusions")) t.exclusions.push_back(detail::clause_from_json(je, s));
        r.terms.push_back(std::move(t));
      }
      if (r.terms.empty()) throw ValidationError("rules: rule '" + r.id + "' has no terms");
      std::vector<double> p(s.num_labels(), 0.0);
      for (const auto& [label, prob] : jr.at("distribution").items()) {
        auto l = s.label_index(label);
        if (!l) throw ValidationError("rules: unknown class label '" + label + "'");
        p[*l] = prob.get<double>();
      }
      r.distribution = LabelDistribution(std::move(p));
      if (frs.find(r.id)) throw ValidationError("rules: duplicate rule id '" + r.id + "'");
      frs.add(std::move(r));
    }
  } catch (const nlohmann::json::exception& e) {
    throw ValidationError(std::string("rules: ") + e.what());
  }
  return frs;
}

/// Reads a rule set from either DSL text or the JSON rule-set format.
inline FeedbackRuleSet load_rule_set(const std::string& path, SchemaPtr schema) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw ValidationError("cannot open rules file '" + path + "'");
  std::stringstream ss;
  ss << in.rdbuf();
  const std::string text = ss.str();
  const auto first = text.find_first_not_of(" \t\r\n");
  if (first != std::string::npos && text[first] == '{') {
    try {
      return rule_set_from_json(nlohmann::json::parse(text), std::move(schema));
    } catch (const nlohmann::json::exception& e) {
      throw ValidationError(path + ": " + e.what());
    }
  }
  return parse_rule_set(text, std::move(schema));
}

}  // namespace frote
