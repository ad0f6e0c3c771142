#include <algorithm>
#include <cctype>
#include <functional>
#include <optional>

#include "hpsec/syntax.hpp"
#include "hpsec/vars.hpp"

namespace hpsec {

namespace {

constexpr int kMaxDepth = 256;

// ---------------------------------------------------------------- lexer

enum class Tok { Ident, Primed, Number, Sym, Low, End };

struct Token {
  Tok kind;
  std::string text;
  Span span;
};

struct ParseFail {
  Span span;
  std::string message;
};

struct Alias {
  const char* utf8;
  const char* ascii;
};

constexpr Alias kAliases[] = {
    {"\xE2\x88\xAA", "++"},  // ∪
    {"\xE2\x89\xA4", "<="},  // ≤
    {"\xE2\x89\xA5", ">="},  // ≥
    {"\xE2\x89\xA0", "!="},  // ≠
    {"\xE2\x88\xA7", "&"},   // ∧
    {"\xE2\x88\xA8", "|"},   // ∨
    {"\xC2\xAC", "!"},       // ¬
    {"\xE2\x86\x92", "->"},  // →
    {"\xE2\x80\xB2", "'"},   // ′
    {"\xC3\x97", "*"},       // ×
    {"\xC2\xB7", "*"},       // ·
    {"\xE2\x88\x80", "\\forall"},
    {"\xE2\x88\x83", "\\exists"},
};

constexpr const char* kSymbols[] = {"::=", "->", ":=", "++", "<=", ">=", "!=", "(", ")", "{", "}", "[",
                                    "]",   ",",  ";",  ".",  "=",  "<",  ">",  "+", "-", "*", "/", "^",
                                    "!",   "&",  "|",  "?",  "'"};

std::vector<Token> lex(const std::string& src) {
  std::vector<Token> out;
  int line = 1, col = 1;
  size_t i = 0;
  auto advance = [&](size_t n) {
    for (size_t k = 0; k < n && i < src.size(); ++k, ++i) {
      if (src[i] == '\n') {
        ++line;
        col = 1;
      } else if ((static_cast<unsigned char>(src[i]) & 0xC0) != 0x80) {
        ++col;
      }
    }
  };
  while (i < src.size()) {
    char c = src[i];
    if (std::isspace(static_cast<unsigned char>(c))) {
      advance(1);
      continue;
    }
    Span sp{line, col, 0};
    if (src.compare(i, 8, "/*@low*/") == 0) {
      out.push_back({Tok::Low, "/*@low*/", {line, col, 8}});
      advance(8);
      continue;
    }
    if (src.compare(i, 2, "/*") == 0) {
      size_t end = src.find("*/", i + 2);
      if (end == std::string::npos) throw ParseFail{sp, "unterminated comment"};
      advance(end + 2 - i);
      continue;
    }
    if (src.compare(i, 2, "//") == 0) {
      while (i < src.size() && src[i] != '\n') advance(1);
      continue;
    }
    if (std::isalpha(static_cast<unsigned char>(c)) || c == '_' || c == '\\') {
      size_t j = i + 1;
      while (j < src.size() && (std::isalnum(static_cast<unsigned char>(src[j])) || src[j] == '_')) ++j;
      std::string word = src.substr(i, j - i);
      if (c == '\\' && word != "\\forall" && word != "\\exists") throw ParseFail{sp, "unknown escape " + word};
      sp.len = static_cast<int>(word.size());
      if (c != '\\' && j < src.size() && src[j] == '\'') {
        out.push_back({Tok::Primed, word, {sp.line, sp.col, sp.len + 1}});
        advance(j + 1 - i);
      } else {
        out.push_back({Tok::Ident, word, sp});
        advance(j - i);
      }
      continue;
    }
    if (std::isdigit(static_cast<unsigned char>(c))) {
      size_t j = i;
      while (j < src.size() && std::isdigit(static_cast<unsigned char>(src[j]))) ++j;
      if (j + 1 < src.size() && src[j] == '.' && std::isdigit(static_cast<unsigned char>(src[j + 1]))) {
        ++j;
        while (j < src.size() && std::isdigit(static_cast<unsigned char>(src[j]))) ++j;
      }
      if (j < src.size() && (src[j] == 'e' || src[j] == 'E')) {
        size_t k = j + 1;
        if (k < src.size() && (src[k] == '+' || src[k] == '-')) ++k;
        if (k < src.size() && std::isdigit(static_cast<unsigned char>(src[k]))) {
          j = k;
          while (j < src.size() && std::isdigit(static_cast<unsigned char>(src[j]))) ++j;
        }
      }
      sp.len = static_cast<int>(j - i);
      out.push_back({Tok::Number, src.substr(i, j - i), sp});
      advance(j - i);
      continue;
    }
    bool matched = false;
    for (const auto& a : kAliases) {
      size_t n = std::char_traits<char>::length(a.utf8);
      if (src.compare(i, n, a.utf8) == 0) {
        std::string t = a.ascii;
        sp.len = 1;
        out.push_back({t[0] == '\\' ? Tok::Ident : Tok::Sym, t, sp});
        advance(n);
        matched = true;
        break;
      }
    }
    if (matched) continue;
    for (const char* s : kSymbols) {
      size_t n = std::char_traits<char>::length(s);
      if (src.compare(i, n, s) == 0) {
        sp.len = static_cast<int>(n);
        out.push_back({Tok::Sym, s, sp});
        advance(n);
        matched = true;
        break;
      }
    }
    if (matched) continue;
    sp.len = 1;
    throw ParseFail{sp, std::string("unexpected character '") + (std::isprint(static_cast<unsigned char>(c)) ? std::string(1, c) : "?") + "'"};
  }
  out.push_back({Tok::End, "", {line, col, 0}});
  // A trailing prime written with a separate token (x ') is folded here.
  std::vector<Token> merged;
  for (size_t k = 0; k < out.size(); ++k) {
    if (out[k].kind == Tok::Ident && k + 1 < out.size() && out[k + 1].kind == Tok::Sym && out[k + 1].text == "'" &&
        out[k + 1].span.line == out[k].span.line && out[k + 1].span.col == out[k].span.col + out[k].span.len) {
      merged.push_back({Tok::Primed, out[k].text, {out[k].span.line, out[k].span.col, out[k].span.len + 1}});
      ++k;
    } else {
      merged.push_back(out[k]);
    }
  }
  return merged;
}

bool is_reserved(const std::string& w) {
  static const NameSet kReserved = {"true", "false", "if", "then", "else",
                                    "Definitions", "ProgramVariables", "Problem", "End"};
  return kReserved.count(w) > 0;
}

bool is_cmp(const std::string& s) {
  return s == "<" || s == "<=" || s == "=" || s == ">" || s == ">=" || s == "!=";
}

CmpOp cmp_op(const std::string& s) {
  if (s == "<") return CmpOp::Lt;
  if (s == "<=") return CmpOp::Le;
  if (s == "=") return CmpOp::Eq;
  if (s == ">") return CmpOp::Gt;
  if (s == ">=") return CmpOp::Ge;
  return CmpOp::Ne;
}

// ---------------------------------------------------------------- parser

class Parser {
 public:
  explicit Parser(std::vector<Token> toks) : toks_(std::move(toks)) {}

  const Token& peek(size_t k = 0) const { return toks_[std::min(pos_ + k, toks_.size() - 1)]; }
  bool at_sym(const char* s, size_t k = 0) const { return peek(k).kind == Tok::Sym && peek(k).text == s; }
  bool at_word(const char* s, size_t k = 0) const { return peek(k).kind == Tok::Ident && peek(k).text == s; }
  bool at_end() const { return peek().kind == Tok::End; }

  [[noreturn]] void fail(const std::string& msg) const {
    const Token& t = peek();
    std::string found = t.kind == Tok::End ? "end of input" : "'" + t.text + "'";
    throw ParseFail{t.span, msg + ", found " + found};
  }

  Token expect_sym(const char* s) {
    if (!at_sym(s)) fail(std::string("expected '") + s + "'");
    return toks_[pos_++];
  }

  Token expect_ident(const char* what) {
    if (peek().kind != Tok::Ident || peek().text[0] == '\\') fail(std::string("expected ") + what);
    if (is_reserved(peek().text)) fail(std::string("expected ") + what + " (reserved word)");
    return toks_[pos_++];
  }

  void expect_block(const char* word) {
    if (!at_word(word) || !at_sym(".", 1)) fail(std::string("expected '") + word + ".'");
    pos_ += 2;
  }

  struct DepthGuard {
    Parser& p;
    explicit DepthGuard(Parser& parser) : p(parser) {
      if (++p.depth_ > kMaxDepth) p.fail("nesting too deep");
    }
    ~DepthGuard() { --p.depth_; }
  };

  // ------------------------------------------------------------ terms

  Term term() { return additive(); }

  Term additive() {
    DepthGuard g(*this);
    Term t = multiplicative();
    while (at_sym("+") || at_sym("-")) {
      bool plus = peek().text == "+";
      ++pos_;
      Term r = multiplicative();
      t = plus ? mk::plus(t, r) : mk::minus(t, r);
    }
    return t;
  }

  Term multiplicative() {
    DepthGuard g(*this);
    Term t = unary_term();
    while (at_sym("*") || at_sym("/")) {
      bool mul = peek().text == "*";
      Token op = toks_[pos_++];
      Term r = unary_term();
      if (mul) {
        t = mk::times(t, r);
      } else {
        if (r->kind == TermKind::Const && r->value == 0) throw ParseFail{op.span, "division by literal zero"};
        t = mk::divide(t, r);
      }
    }
    return t;
  }

  Term unary_term() {
    DepthGuard g(*this);
    if (at_sym("-")) {
      ++pos_;
      if (peek().kind == Tok::Number && !at_sym("^", 1)) return number(true);
      return mk::neg(unary_term());
    }
    return power_term();
  }

  Term power_term() {
    Term t = primary_term();
    while (at_sym("^")) {
      ++pos_;
      if (peek().kind != Tok::Number) fail("expected nonnegative integer exponent");
      auto v = parse_decimal(peek().text);
      if (!v || boost::multiprecision::denominator(*v) != 1 || *v > 1000) fail("expected nonnegative integer exponent");
      ++pos_;
      t = mk::power(t, boost::multiprecision::numerator(*v).convert_to<unsigned>());
    }
    return t;
  }

  Term number(bool negate) {
    auto v = parse_decimal(peek().text);
    if (!v) fail("malformed number");
    ++pos_;
    return mk::num(negate ? Rational(-*v) : *v);
  }

  Term primary_term() {
    DepthGuard g(*this);
    if (peek().kind == Tok::Number) return number(false);
    if (at_sym("(")) {
      ++pos_;
      Term t = term();
      expect_sym(")");
      return t;
    }
    if (peek().kind == Tok::Ident && peek().text[0] != '\\' && !is_reserved(peek().text)) {
      Token id = toks_[pos_++];
      if (at_sym("(")) {
        ++pos_;
        std::vector<Term> args;
        if (!at_sym(")")) {
          args.push_back(term());
          while (at_sym(",")) {
            ++pos_;
            args.push_back(term());
          }
        }
        expect_sym(")");
        return mk::apply(id.text, std::move(args));
      }
      return mk::var(id.text);
    }
    fail("expected term");
  }

  // --------------------------------------------------------- formulas

  Formula formula() {
    DepthGuard g(*this);
    Span s = peek().span;
    Formula l = disjunction();
    if (at_sym("->")) {
      ++pos_;
      return mk::implies(l, formula(), s);
    }
    return l;
  }

  Formula disjunction() {
    Span s = peek().span;
    Formula l = conjunction();
    if (at_sym("|")) {
      ++pos_;
      DepthGuard g(*this);
      return mk::lor(l, disjunction(), s);
    }
    return l;
  }

  Formula conjunction() {
    Span s = peek().span;
    Formula l = unary_formula();
    if (at_sym("&")) {
      ++pos_;
      DepthGuard g(*this);
      return mk::land(l, conjunction(), s);
    }
    return l;
  }

  Formula unary_formula() {
    DepthGuard g(*this);
    Span s = peek().span;
    if (at_sym("!")) {
      ++pos_;
      return mk::lnot(unary_formula(), s);
    }
    if (at_word("\\forall") || at_word("\\exists")) {
      bool all = peek().text == "\\forall";
      ++pos_;
      Token x = expect_ident("quantified variable");
      bound_.push_back(x.text);
      Formula body = unary_formula();
      bound_.pop_back();
      return all ? mk::forall(x.text, body, s) : mk::exists(x.text, body, s);
    }
    if (at_sym("[")) {
      ++pos_;
      Program p = program();
      expect_sym("]");
      return mk::box(p, unary_formula(), s);
    }
    return atomic_formula();
  }

  // Index of the token after the parenthesis group starting at pos_.
  size_t after_group() const {
    int depth = 0;
    for (size_t k = pos_; k < toks_.size(); ++k) {
      const Token& t = toks_[k];
      if (t.kind == Tok::Sym && (t.text == "(" || t.text == "[" || t.text == "{")) ++depth;
      if (t.kind == Tok::Sym && (t.text == ")" || t.text == "]" || t.text == "}")) {
        if (--depth == 0) return k + 1;
      }
      if (t.kind == Tok::End) return k;
    }
    return toks_.size() - 1;
  }

  static bool continues_term(const Token& t) {
    if (t.kind != Tok::Sym) return false;
    return is_cmp(t.text) || t.text == "+" || t.text == "-" || t.text == "*" || t.text == "/" || t.text == "^";
  }

  Formula atomic_formula() {
    Span s = peek().span;
    if (at_word("true")) {
      ++pos_;
      return with_span(mk::tt(), s);
    }
    if (at_word("false")) {
      ++pos_;
      return with_span(mk::ff(), s);
    }
    if (at_sym("(")) {
      size_t after = after_group();
      if (!continues_term(toks_[after])) {
        ++pos_;
        Formula f = formula();
        expect_sym(")");
        return f;
      }
    }
    if (peek().kind == Tok::Ident && peek().text[0] != '\\' && !is_reserved(peek().text) && !at_sym("(", 1) &&
        !continues_term(peek(1))) {
      Token id = toks_[pos_++];
      return mk::pred(id.text, s);
    }
    Term l = term();
    if (peek().kind != Tok::Sym || !is_cmp(peek().text)) fail("expected comparison operator");
    CmpOp op = cmp_op(toks_[pos_++].text);
    Term r = term();
    return mk::cmp(op, l, r, s);
  }

  // --------------------------------------------------------- programs

  static bool ends_seq(const Token& t) {
    if (t.kind == Tok::End) return true;
    if (t.kind == Tok::Ident) return t.text == "else";
    return t.text == "}" || t.text == ")" || t.text == "]" || t.text == "++" || t.text == ".";
  }

  // Choice binds looser than sequence.
  Program program() {
    DepthGuard g(*this);
    Span s = peek().span;
    std::vector<Program> branches{sequence()};
    while (at_sym("++")) {
      ++pos_;
      branches.push_back(sequence());
    }
    Program body = branches.back();
    for (size_t i = branches.size() - 1; i-- > 0;) body = mk::choice(branches[i], body, false, s);
    return body;
  }

  Program sequence() {
    DepthGuard g(*this);
    std::vector<Program> items{atom()};
    while (at_sym(";")) {
      ++pos_;
      if (ends_seq(peek())) break;
      items.push_back(atom());
    }
    Program r = items.back();
    for (size_t i = items.size() - 1; i-- > 0;) r = mk::seq(items[i], r, items[i]->span);
    return r;
  }

  Program atom() {
    DepthGuard g(*this);
    Span s = peek().span;
    bool low = false;
    if (peek().kind == Tok::Low) {
      low = true;
      ++pos_;
    }
    if (at_sym("{") || at_sym("(")) return braced(low, s);
    if (at_word("if")) {
      ++pos_;
      expect_sym("(");
      Formula guard = formula();
      expect_sym(")");
      if (!at_word("then")) fail("expected 'then'");
      ++pos_;
      Program a = atom();
      if (!at_word("else")) fail("expected 'else'");
      ++pos_;
      Program b = atom();
      return mk::if_then_else(guard, a, b, low, s);
    }
    if (low) {
      if (peek().kind == Tok::Ident && at_sym(":=", 1) && at_sym("*", 2)) {
        Token x = expect_ident("variable");
        pos_ += 2;
        return mk::assign_any(x.text, true, s);
      }
      fail("'/*@low*/' must precede a choice or a nondeterministic assignment");
    }
    if (at_sym("?")) {
      ++pos_;
      return mk::test(formula(), s);
    }
    if (peek().kind == Tok::Ident) {
      Token x = expect_ident("program statement");
      if (at_sym(":=")) {
        ++pos_;
        if (at_sym("*")) {
          ++pos_;
          return mk::assign_any(x.text, false, s);
        }
        return mk::assign(x.text, term(), s);
      }
      return mk::call(x.text, s);
    }
    if (peek().kind == Tok::Primed) fail("differential equation outside braces");
    fail("expected program");
  }

  Program braced(bool low, Span s) {
    bool paren = at_sym("(");
    const char* close = paren ? ")" : "}";
    ++pos_;
    if (peek().kind == Tok::Primed && at_sym("=", 1)) {
      if (low) fail("'/*@low*/' cannot annotate an ODE");
      Program o = ode_body(s);
      expect_sym(close);
      return o;
    }
    std::vector<Program> branches{sequence()};
    while (at_sym("++")) {
      ++pos_;
      branches.push_back(sequence());
    }
    expect_sym(close);
    Program body = branches.back();
    for (size_t i = branches.size() - 1; i-- > 0;) body = mk::choice(branches[i], body, low, s);
    if (low && branches.size() == 1) fail("'/*@low*/' braces must contain a choice");
    if (at_sym("*")) {
      ++pos_;
      return mk::loop(body, s);
    }
    return body;
  }

  Program ode_body(Span s) {
    std::vector<OdeEq> eqs;
    NameSet seen;
    do {
      if (!eqs.empty()) ++pos_;
      if (peek().kind != Tok::Primed) fail("expected differential equation x'=term");
      Token x = toks_[pos_++];
      if (!seen.insert(x.text).second) throw ParseFail{x.span, "duplicate differential equation for " + x.text};
      expect_sym("=");
      eqs.push_back({x.text, term()});
    } while (at_sym(","));
    Formula dom = mk::tt();
    if (at_sym("&")) {
      ++pos_;
      dom = formula();
    }
    return mk::ode(std::move(eqs), dom, s);
  }

  // ------------------------------------------------------------ model

  Model model() {
    Model m;
    // Definitions and ProgramVariables may be omitted.
    if (at_word("Definitions") && at_sym(".", 1)) {
      expect_block("Definitions");
      while (!(at_word("ProgramVariables") && at_sym(".", 1)) && !(at_word("Problem") && at_sym(".", 1)) &&
             !at_end())
        definition(m);
    }
    bool has_vars = at_word("ProgramVariables") && at_sym(".", 1);
    if (has_vars) expect_block("ProgramVariables");
    while (has_vars && !(at_word("Problem") && at_sym(".", 1)) && !at_end()) {
      if (!at_word("R")) fail("expected 'R name.' program variable declaration");
      ++pos_;
      do {
        if (at_sym(",")) ++pos_;
        Token x = expect_ident("variable name");
        m.variables.push_back(x.text);
        decl_spans_.push_back({x.text, x.span});
      } while (at_sym(","));
      expect_sym(".");
    }
    expect_block("Problem");
    m.problem = formula();
    expect_block("End");
    if (!at_end()) fail("expected end of input after 'End.'");
    return m;
  }

  void definition(Model& m) {
    if (!(at_word("R") || at_word("B") || at_word("HP"))) fail("expected 'R', 'B' or 'HP' definition");
    std::string kw = toks_[pos_++].text;
    Token x = expect_ident("definition name");
    Definition d;
    d.name = x.text;
    d.span = x.span;
    decl_spans_.push_back({x.text, x.span});
    if (kw == "R") {
      d.sort = Sort::Real;
      if (at_sym("=")) {
        ++pos_;
        d.value = term();
      }
    } else if (kw == "B") {
      d.sort = Sort::Bool;
      expect_sym("::=");
      d.formula = formula();
    } else {
      d.sort = Sort::Program;
      expect_sym("::=");
      d.program = program();
    }
    expect_sym(".");
    m.definitions.push_back(d);
  }

  std::vector<Token> toks_;
  size_t pos_ = 0;
  int depth_ = 0;
  std::vector<std::string> bound_;
  std::vector<std::pair<std::string, Span>> decl_spans_;
};

// ------------------------------------------------------------ resolution

class Resolver {
 public:
  Resolver(const Model& m, std::vector<Diagnostic>& diags, std::string file)
      : model_(m), diags_(diags), file_(std::move(file)) {}

  void error(Span s, const std::string& msg) { diags_.push_back({Severity::Error, msg, file_, s}); }

  std::optional<Sort> sort_of(const std::string& name) const {
    if (const Definition* d = model_.find(name)) return d->sort;
    if (model_.is_variable(name)) return Sort::Real;
    return std::nullopt;
  }

  Term term(const Term& t, const std::vector<std::string>& bound, Span at) {
    if (t->kind == TermKind::Var) {
      bool is_bound = std::find(bound.begin(), bound.end(), t->name) != bound.end();
      auto s = sort_of(t->name);
      if (!is_bound && !s) error(at, "undeclared identifier '" + t->name + "'");
      if (!is_bound && s && *s != Sort::Real) error(at, "'" + t->name + "' is not a real-valued term");
    }
    if (t->kind == TermKind::Apply) {
      if (t->name != "exp" || t->args.size() != 1) error(at, "unknown function '" + t->name + "'");
    }
    for (const auto& a : t->args) term(a, bound, at);
    return t;
  }

  Formula formula(const Formula& f, std::vector<std::string>& bound) {
    switch (f->kind) {
      case FormulaKind::Pred: {
        auto s = sort_of(f->name);
        bool is_bound = std::find(bound.begin(), bound.end(), f->name) != bound.end();
        if (is_bound || (s && *s == Sort::Real)) {
          // Boolean-style guard on a real choice variable.
          return mk::cmp(CmpOp::Ne, mk::var(f->name), mk::num(0), f->span);
        }
        if (!s) error(f->span, "undeclared identifier '" + f->name + "'");
        else if (*s != Sort::Bool) error(f->span, "'" + f->name + "' is not a formula");
        return f;
      }
      case FormulaKind::Compare:
        term(f->lhs, bound, f->span);
        term(f->rhs, bound, f->span);
        return f;
      case FormulaKind::Forall:
      case FormulaKind::Exists: {
        bound.push_back(f->name);
        auto n = std::make_shared<FormulaNode>(*f);
        n->subs[0] = formula(f->subs[0], bound);
        bound.pop_back();
        return n;
      }
      default: {
        auto n = std::make_shared<FormulaNode>(*f);
        for (auto& s : n->subs) s = formula(s, bound);
        if (f->program) n->program = program(f->program, bound);
        return n;
      }
    }
  }

  void assigned(const std::string& x, Span s, const std::vector<std::string>& bound) {
    bool is_bound = std::find(bound.begin(), bound.end(), x) != bound.end();
    if (is_bound) return;
    if (model_.is_variable(x)) return;
    auto so = sort_of(x);
    if (!so) error(s, "undeclared variable '" + x + "'");
    else error(s, "cannot assign to '" + x + "' (not a program variable)");
  }

  Program program(const Program& p, std::vector<std::string>& bound) {
    auto n = std::make_shared<ProgramNode>(*p);
    switch (p->kind) {
      case ProgramKind::Assign:
        assigned(p->var, p->span, bound);
        term(p->term, bound, p->span);
        break;
      case ProgramKind::AssignAny:
        assigned(p->var, p->span, bound);
        break;
      case ProgramKind::Test:
        n->formula = formula(p->formula, bound);
        break;
      case ProgramKind::Ode:
        for (const auto& e : p->eqs) {
          assigned(e.var, p->span, bound);
          term(e.rhs, bound, p->span);
        }
        n->formula = formula(p->formula, bound);
        break;
      case ProgramKind::Call: {
        auto s = sort_of(p->var);
        if (!s) error(p->span, "undeclared program '" + p->var + "'");
        else if (*s != Sort::Program) error(p->span, "'" + p->var + "' is not a program");
        break;
      }
      default:
        for (auto& s : n->subs) s = program(s, bound);
    }
    return n;
  }

 private:
  const Model& model_;
  std::vector<Diagnostic>& diags_;
  std::string file_;
};

Diagnostic from_fail(const ParseFail& f, const std::string& file) {
  return {Severity::Error, f.message, file, f.span};
}

void check_cycles(const Model& m, std::vector<Diagnostic>& diags, const std::string& file) {
  for (const auto& d : m.definitions) {
    try {
      if (d.sort == Sort::Bool) (void)expand(mk::pred(d.name), m);
      if (d.sort == Sort::Program) (void)expand(mk::call(d.name), m);
    } catch (const Error& e) {
      if (e.kind() == "CycleError") diags.push_back({Severity::Error, e.what(), file, d.span});
      return;
    }
  }
}

template <class T, class F>
std::variant<T, std::vector<Diagnostic>> parse_snippet(const std::string& src, const Model* ctx, F&& body) {
  try {
    Parser p(lex(src));
    T out = body(p);
    if (!p.at_end()) p.fail("unexpected trailing input");
    if (ctx) {
      std::vector<Diagnostic> diags;
      Resolver r(*ctx, diags, "<snippet>");
      std::vector<std::string> bound;
      if constexpr (std::is_same_v<T, Program>) out = r.program(out, bound);
      if constexpr (std::is_same_v<T, Formula>) out = r.formula(out, bound);
      if constexpr (std::is_same_v<T, Term>) out = r.term(out, bound, {});
      if (!diags.empty()) return diags;
    }
    return out;
  } catch (const ParseFail& f) {
    return std::vector<Diagnostic>{from_fail(f, "<snippet>")};
  } catch (const Error& e) {
    return std::vector<Diagnostic>{{Severity::Error, e.what(), "<snippet>", {}}};
  }
}

}  // namespace

ParseResult parse_model(const std::string& source, const std::string& file) {
  Model m;
  std::vector<std::pair<std::string, Span>> decls;
  try {
    Parser p(lex(source));
    m = p.model();
    decls = p.decl_spans_;
  } catch (const ParseFail& f) {
    return std::vector<Diagnostic>{from_fail(f, file)};
  } catch (const Error& e) {
    return std::vector<Diagnostic>{{Severity::Error, e.what(), file, {}}};
  }
  std::vector<Diagnostic> diags;
  NameSet seen;
  for (const auto& [name, span] : decls) {
    if (!is_valid_identifier(name) || is_primed(name))
      diags.push_back({Severity::Error, "invalid identifier '" + name + "'", file, span});
    if (!seen.insert(name).second)
      diags.push_back({Severity::Error, "duplicate declaration of '" + name + "'", file, span});
  }
  Resolver r(m, diags, file);
  std::vector<std::string> bound;
  for (auto& d : m.definitions) {
    if (d.value) r.term(d.value, bound, d.span);
    if (d.formula) d.formula = r.formula(d.formula, bound);
    if (d.program) d.program = r.program(d.program, bound);
  }
  m.problem = r.formula(m.problem, bound);
  if (diags.empty()) check_cycles(m, diags, file);
  if (!diags.empty()) return diags;
  return m;
}

std::variant<Program, std::vector<Diagnostic>> parse_program(const std::string& source, const Model* context) {
  return parse_snippet<Program>(source, context, [](Parser& p) { return p.program(); });
}

std::variant<Formula, std::vector<Diagnostic>> parse_formula(const std::string& source, const Model* context) {
  return parse_snippet<Formula>(source, context, [](Parser& p) { return p.formula(); });
}

std::variant<Term, std::vector<Diagnostic>> parse_term(const std::string& source, const Model* context) {
  return parse_snippet<Term>(source, context, [](Parser& p) { return p.term(); });
}

Model parse_model_or_throw(const std::string& source, const std::string& file) {
  auto r = parse_model(source, file);
  if (auto* d = std::get_if<std::vector<Diagnostic>>(&r)) throw Error("ParseError", render(*d));
  return std::get<Model>(r);
}

Program parse_program_or_throw(const std::string& source, const Model* context) {
  auto r = parse_program(source, context);
  if (auto* d = std::get_if<std::vector<Diagnostic>>(&r)) throw Error("ParseError", render(*d));
  return std::get<Program>(r);
}

Formula parse_formula_or_throw(const std::string& source, const Model* context) {
  auto r = parse_formula(source, context);
  if (auto* d = std::get_if<std::vector<Diagnostic>>(&r)) throw Error("ParseError", render(*d));
  return std::get<Formula>(r);
}

std::string render(const Diagnostic& d) {
  return d.file + ":" + std::to_string(d.span.line) + ":" + std::to_string(d.span.col) + ": " +
         (d.severity == Severity::Error ? "error" : "warning") + ": " + d.message;
}

std::string render(const std::vector<Diagnostic>& ds) {
  std::string out;
  for (const auto& d : ds) out += render(d) + "\n";
  return out;
}

}  // namespace hpsec
