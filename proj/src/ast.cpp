#include "hpsec/ast.hpp"

#include <cctype>
#include <functional>

#include "hpsec/vars.hpp"

namespace hpsec {

namespace {

Term make_term(TermKind k, std::vector<Term> args) {
  auto n = std::make_shared<TermNode>();
  n->kind = k;
  n->args = std::move(args);
  return n;
}

Formula make_formula(FormulaKind k, std::vector<Formula> subs, Span s) {
  auto n = std::make_shared<FormulaNode>();
  n->kind = k;
  n->subs = std::move(subs);
  n->span = s;
  return n;
}

std::shared_ptr<ProgramNode> make_program(ProgramKind k, Span s) {
  auto n = std::make_shared<ProgramNode>();
  n->kind = k;
  n->span = s;
  return n;
}

}  // namespace

namespace mk {

Term var(const std::string& name) {
  auto n = std::make_shared<TermNode>();
  n->kind = TermKind::Var;
  n->name = name;
  return n;
}

Term num(const Rational& v) {
  auto n = std::make_shared<TermNode>();
  n->kind = TermKind::Const;
  n->value = v;
  return n;
}

Term num(long v) { return num(Rational(v)); }
Term plus(Term a, Term b) { return make_term(TermKind::Plus, {std::move(a), std::move(b)}); }
Term times(Term a, Term b) { return make_term(TermKind::Times, {std::move(a), std::move(b)}); }
Term minus(Term a, Term b) { return make_term(TermKind::Minus, {std::move(a), std::move(b)}); }
Term neg(Term a) { return make_term(TermKind::Neg, {std::move(a)}); }

Term divide(Term a, Term b) {
  if (b->kind == TermKind::Const && b->value == 0) throw Error("DivideByZero", "literal zero denominator");
  return make_term(TermKind::Divide, {std::move(a), std::move(b)});
}

Term power(Term base, unsigned exponent) {
  auto n = std::make_shared<TermNode>();
  n->kind = TermKind::Power;
  n->exponent = exponent;
  n->args = {std::move(base)};
  return n;
}

Term apply(const std::string& fn, std::vector<Term> args) {
  auto n = std::make_shared<TermNode>();
  n->kind = TermKind::Apply;
  n->name = fn;
  n->args = std::move(args);
  return n;
}

Formula cmp(CmpOp op, Term l, Term r, Span s) {
  auto n = std::make_shared<FormulaNode>();
  n->kind = FormulaKind::Compare;
  n->op = op;
  n->lhs = std::move(l);
  n->rhs = std::move(r);
  n->span = s;
  return n;
}

Formula tt() { return make_formula(FormulaKind::True, {}, {}); }
Formula ff() { return make_formula(FormulaKind::False, {}, {}); }
Formula lnot(Formula f, Span s) { return make_formula(FormulaKind::Not, {std::move(f)}, s); }
Formula land(Formula a, Formula b, Span s) { return make_formula(FormulaKind::And, {std::move(a), std::move(b)}, s); }
Formula lor(Formula a, Formula b, Span s) { return make_formula(FormulaKind::Or, {std::move(a), std::move(b)}, s); }
Formula implies(Formula a, Formula b, Span s) {
  return make_formula(FormulaKind::Implies, {std::move(a), std::move(b)}, s);
}

Formula forall(const std::string& x, Formula f, Span s) {
  auto n = std::const_pointer_cast<FormulaNode>(make_formula(FormulaKind::Forall, {std::move(f)}, s));
  n->name = x;
  return n;
}

Formula exists(const std::string& x, Formula f, Span s) {
  auto n = std::const_pointer_cast<FormulaNode>(make_formula(FormulaKind::Exists, {std::move(f)}, s));
  n->name = x;
  return n;
}

Formula box(Program p, Formula f, Span s) {
  auto n = std::const_pointer_cast<FormulaNode>(make_formula(FormulaKind::Box, {std::move(f)}, s));
  n->program = std::move(p);
  return n;
}

Formula pred(const std::string& name, Span s) {
  auto n = std::const_pointer_cast<FormulaNode>(make_formula(FormulaKind::Pred, {}, s));
  n->name = name;
  return n;
}

Formula conj(const std::vector<Formula>& fs) {
  if (fs.empty()) return tt();
  Formula r = fs.back();
  for (size_t i = fs.size() - 1; i-- > 0;) r = land(fs[i], r);
  return r;
}

Program assign(const std::string& x, Term t, Span s) {
  auto n = make_program(ProgramKind::Assign, s);
  n->var = x;
  n->term = std::move(t);
  return n;
}

Program assign_any(const std::string& x, bool low, Span s) {
  auto n = make_program(ProgramKind::AssignAny, s);
  n->var = x;
  n->low = low;
  return n;
}

Program test(Formula f, Span s) {
  auto n = make_program(ProgramKind::Test, s);
  n->formula = std::move(f);
  return n;
}

Program ode(std::vector<OdeEq> eqs, Formula domain, Span s) {
  if (eqs.empty()) throw Error("InvalidOde", "empty equation list");
  NameSet seen;
  for (const auto& e : eqs) {
    if (is_primed(e.var)) throw Error("InvalidOde", "primed left-hand side " + e.var);
    if (!seen.insert(e.var).second) throw Error("InvalidOde", "duplicate left-hand side " + e.var);
  }
  auto n = make_program(ProgramKind::Ode, s);
  n->eqs = std::move(eqs);
  n->formula = domain ? std::move(domain) : tt();
  return n;
}

Program seq(Program a, Program b, Span s) {
  auto n = make_program(ProgramKind::Seq, s);
  n->subs = {std::move(a), std::move(b)};
  return n;
}

Program choice(Program a, Program b, bool low, Span s) {
  auto n = make_program(ProgramKind::Choice, s);
  n->subs = {std::move(a), std::move(b)};
  n->low = low;
  return n;
}

Program loop(Program a, Span s) {
  auto n = make_program(ProgramKind::Loop, s);
  n->subs = {std::move(a)};
  return n;
}

Program call(const std::string& name, Span s) {
  auto n = make_program(ProgramKind::Call, s);
  n->var = name;
  return n;
}

Program seq_all(const std::vector<Program>& ps) {
  if (ps.empty()) throw Error("InvalidProgram", "empty sequence");
  Program r = ps.back();
  for (size_t i = ps.size() - 1; i-- > 0;) r = seq(ps[i], r);
  return r;
}

Program if_then_else(Formula g, Program a, Program b, bool low, Span s) {
  return choice(seq(test(g), std::move(a)), seq(test(lnot(g)), std::move(b)), low, s);
}

}  // namespace mk

Formula with_span(const Formula& f, Span s) {
  auto n = std::make_shared<FormulaNode>(*f);
  n->span = s;
  return n;
}

Program with_span(const Program& p, Span s) {
  auto n = std::make_shared<ProgramNode>(*p);
  n->span = s;
  return n;
}

// ------------------------------------------------------------- equality

bool equal(const Term& a, const Term& b) {
  if (a == b) return true;
  if (!a || !b) return false;
  if (a->kind != b->kind || a->name != b->name || a->exponent != b->exponent) return false;
  if (a->kind == TermKind::Const && a->value != b->value) return false;
  if (a->args.size() != b->args.size()) return false;
  for (size_t i = 0; i < a->args.size(); ++i)
    if (!equal(a->args[i], b->args[i])) return false;
  return true;
}

bool equal(const Formula& a, const Formula& b) {
  if (a == b) return true;
  if (!a || !b) return false;
  if (a->kind != b->kind || a->name != b->name) return false;
  if (a->kind == FormulaKind::Compare)
    return a->op == b->op && equal(a->lhs, b->lhs) && equal(a->rhs, b->rhs);
  if (a->kind == FormulaKind::Box && !equal(a->program, b->program)) return false;
  if (a->subs.size() != b->subs.size()) return false;
  for (size_t i = 0; i < a->subs.size(); ++i)
    if (!equal(a->subs[i], b->subs[i])) return false;
  return true;
}

bool equal(const Program& a, const Program& b) {
  if (a == b) return true;
  if (!a || !b) return false;
  if (a->kind != b->kind || a->var != b->var || a->low != b->low) return false;
  switch (a->kind) {
    case ProgramKind::Assign:
      return equal(a->term, b->term);
    case ProgramKind::Test:
      return equal(a->formula, b->formula);
    case ProgramKind::Ode:
      if (a->eqs.size() != b->eqs.size()) return false;
      for (size_t i = 0; i < a->eqs.size(); ++i)
        if (a->eqs[i].var != b->eqs[i].var || !equal(a->eqs[i].rhs, b->eqs[i].rhs)) return false;
      return equal(a->formula, b->formula);
    default:
      break;
  }
  if (a->subs.size() != b->subs.size()) return false;
  for (size_t i = 0; i < a->subs.size(); ++i)
    if (!equal(a->subs[i], b->subs[i])) return false;
  return true;
}

std::vector<Program> flatten_seq(const Program& p) {
  std::vector<Program> out;
  std::function<void(const Program&)> go = [&](const Program& q) {
    if (q->kind == ProgramKind::Seq) {
      go(q->subs[0]);
      go(q->subs[1]);
    } else {
      out.push_back(q);
    }
  };
  go(p);
  return out;
}

std::vector<Program> flatten_choice(const Program& p) {
  std::vector<Program> out;
  std::function<void(const Program&)> go = [&](const Program& q) {
    if (q->kind == ProgramKind::Choice) {
      go(q->subs[0]);
      go(q->subs[1]);
    } else {
      out.push_back(q);
    }
  };
  go(p);
  return out;
}

std::vector<Formula> flatten_and(const Formula& f) {
  std::vector<Formula> out;
  std::function<void(const Formula&)> go = [&](const Formula& g) {
    if (g->kind == FormulaKind::And) {
      go(g->subs[0]);
      go(g->subs[1]);
    } else {
      out.push_back(g);
    }
  };
  go(f);
  return out;
}

bool equal_modulo_seq(const Program& a, const Program& b) {
  if (a->kind == ProgramKind::Seq || b->kind == ProgramKind::Seq) {
    auto xs = flatten_seq(a);
    auto ys = flatten_seq(b);
    if (xs.size() != ys.size()) return false;
    for (size_t i = 0; i < xs.size(); ++i)
      if (!equal_modulo_seq(xs[i], ys[i])) return false;
    return true;
  }
  if (a->kind != b->kind || a->low != b->low) return false;
  if (a->kind == ProgramKind::Choice || a->kind == ProgramKind::Loop) {
    for (size_t i = 0; i < a->subs.size(); ++i)
      if (!equal_modulo_seq(a->subs[i], b->subs[i])) return false;
    return true;
  }
  return equal(a, b);
}

// ---------------------------------------------------------- identifiers

bool is_valid_identifier(const std::string& name) {
  if (name.empty()) return false;
  size_t end = name.size();
  if (name.back() == '\'') --end;
  if (end == 0) return false;
  if (!(std::isalpha(static_cast<unsigned char>(name[0])) || name[0] == '_')) return false;
  for (size_t i = 1; i < end; ++i)
    if (!(std::isalnum(static_cast<unsigned char>(name[i])) || name[i] == '_')) return false;
  static const NameSet reserved{"true", "false", "if", "then", "else", "Definitions", "ProgramVariables", "Problem",
                                "End"};
  return !reserved.count(name.substr(0, end));
}

std::string prime(const std::string& name) { return name + "'"; }
bool is_primed(const std::string& name) { return !name.empty() && name.back() == '\''; }
std::string unprime(const std::string& name) { return is_primed(name) ? name.substr(0, name.size() - 1) : name; }

// ---------------------------------------------------------------- model

const Definition* Model::find(const std::string& name) const {
  for (const auto& d : definitions)
    if (d.name == name) return &d;
  return nullptr;
}

bool Model::is_constant(const std::string& name) const {
  const Definition* d = find(name);
  return d && d->sort == Sort::Real;
}

bool Model::is_variable(const std::string& name) const {
  for (const auto& v : variables)
    if (v == name) return true;
  return false;
}

bool equal(const Model& a, const Model& b) {
  if (a.variables != b.variables || a.definitions.size() != b.definitions.size()) return false;
  for (size_t i = 0; i < a.definitions.size(); ++i) {
    const auto& x = a.definitions[i];
    const auto& y = b.definitions[i];
    if (x.name != y.name || x.sort != y.sort) return false;
    if (!equal(x.value, y.value) || !equal(x.formula, y.formula) || !equal(x.program, y.program)) return false;
  }
  return equal(a.problem, b.problem);
}

// --------------------------------------------------------- substitution

namespace {

bool touches(const NameSet& bound, const std::map<std::string, Term>& b) {
  for (const auto& [k, t] : b) {
    if (bound.count(k)) return true;
    for (const auto& v : fv_term(t))
      if (bound.count(v)) return true;
  }
  return false;
}

}  // namespace

Term substitute(const Term& t, const std::map<std::string, Term>& b) {
  if (b.empty()) return t;
  if (t->kind == TermKind::Var) {
    auto it = b.find(t->name);
    return it == b.end() ? t : it->second;
  }
  if (t->args.empty()) return t;
  auto n = std::make_shared<TermNode>(*t);
  for (auto& a : n->args) a = substitute(a, b);
  return n;
}

Formula substitute(const Formula& f, const std::map<std::string, Term>& b) {
  if (b.empty()) return f;
  auto n = std::make_shared<FormulaNode>(*f);
  switch (f->kind) {
    case FormulaKind::Compare:
      n->lhs = substitute(f->lhs, b);
      n->rhs = substitute(f->rhs, b);
      return n;
    case FormulaKind::Forall:
    case FormulaKind::Exists: {
      auto inner = b;
      inner.erase(f->name);
      NameSet body_fv = fv_formula(f->subs[0]);
      for (const auto& [k, t] : inner)
        if (body_fv.count(k) && fv_term(t).count(f->name))
          throw Error("CaptureError", "substituting " + k + " would capture " + f->name);
      n->subs[0] = substitute(f->subs[0], inner);
      return n;
    }
    case FormulaKind::Box: {
      NameSet fv = set_union(fv_program(f->program), fv_formula(f->subs[0]));
      std::map<std::string, Term> live;
      for (const auto& kv : b)
        if (fv.count(kv.first)) live.insert(kv);
      if (touches(bv_program(f->program), live))
        throw Error("CaptureError", "substitution meets a variable bound by a program");
      n->program = substitute(f->program, live);
      n->subs[0] = substitute(f->subs[0], live);
      return n;
    }
    default:
      for (auto& s : n->subs) s = substitute(s, b);
      return n;
  }
}

Program substitute(const Program& p, const std::map<std::string, Term>& b) {
  if (b.empty()) return p;
  if (p->kind == ProgramKind::Seq || p->kind == ProgramKind::Choice || p->kind == ProgramKind::Loop) {
    if (touches(bv_program(p), b)) throw Error("CaptureError", "substitution meets a variable bound by a program");
  }
  auto n = std::make_shared<ProgramNode>(*p);
  switch (p->kind) {
    case ProgramKind::Assign:
      if (touches({p->var}, b)) throw Error("CaptureError", "substitution meets assigned variable " + p->var);
      n->term = substitute(p->term, b);
      break;
    case ProgramKind::AssignAny:
      if (touches({p->var}, b)) throw Error("CaptureError", "substitution meets assigned variable " + p->var);
      break;
    case ProgramKind::Test:
      n->formula = substitute(p->formula, b);
      break;
    case ProgramKind::Ode:
      if (touches(bv_program(p), b)) throw Error("CaptureError", "substitution meets an ODE variable");
      for (auto& e : n->eqs) e.rhs = substitute(e.rhs, b);
      n->formula = substitute(p->formula, b);
      break;
    case ProgramKind::Call:
      break;
    default:
      for (auto& s : n->subs) s = substitute(s, b);
  }
  return n;
}

// -------------------------------------------------------------- renaming

namespace {

std::string rename_name(const std::string& x, const NameMap& m) {
  bool pr = is_primed(x);
  auto it = m.find(pr ? unprime(x) : x);
  if (it == m.end()) return x;
  return pr ? prime(it->second) : it->second;
}

}  // namespace

Term rename(const Term& t, const NameMap& m) {
  auto n = std::make_shared<TermNode>(*t);
  if (t->kind == TermKind::Var) n->name = rename_name(t->name, m);
  for (auto& a : n->args) a = rename(a, m);
  return n;
}

Formula rename(const Formula& f, const NameMap& m) {
  auto n = std::make_shared<FormulaNode>(*f);
  if (f->kind == FormulaKind::Compare) {
    n->lhs = rename(f->lhs, m);
    n->rhs = rename(f->rhs, m);
  }
  if (f->kind == FormulaKind::Forall || f->kind == FormulaKind::Exists) n->name = rename_name(f->name, m);
  if (f->kind == FormulaKind::Box) n->program = rename(f->program, m);
  for (auto& s : n->subs) s = rename(s, m);
  return n;
}

Program rename(const Program& p, const NameMap& m) {
  auto n = std::make_shared<ProgramNode>(*p);
  if (p->kind != ProgramKind::Call) n->var = rename_name(p->var, m);
  if (p->term) n->term = rename(p->term, m);
  if (p->formula) n->formula = rename(p->formula, m);
  for (auto& e : n->eqs) {
    e.var = rename_name(e.var, m);
    e.rhs = rename(e.rhs, m);
  }
  for (auto& s : n->subs) s = rename(s, m);
  return n;
}

// ------------------------------------------------------------- expansion

namespace {

struct Expander {
  const Model& model;
  std::vector<std::string> stack;

  void enter(const std::string& name) {
    for (const auto& s : stack)
      if (s == name) throw Error("CycleError", "recursive abbreviation " + name);
    stack.push_back(name);
  }

  Formula formula(const Formula& f) {
    if (f->kind == FormulaKind::Pred) {
      const Definition* d = model.find(f->name);
      if (!d || d->sort != Sort::Bool || !d->formula) throw Error("UndeclaredError", "unknown predicate " + f->name);
      enter(f->name);
      Formula r = formula(d->formula);
      stack.pop_back();
      return r;
    }
    if (f->subs.empty() && !f->program) return f;
    auto n = std::make_shared<FormulaNode>(*f);
    for (auto& s : n->subs) s = formula(s);
    if (f->program) n->program = program(f->program);
    return n;
  }

  Program program(const Program& p) {
    if (p->kind == ProgramKind::Call) {
      const Definition* d = model.find(p->var);
      if (!d || d->sort != Sort::Program || !d->program) throw Error("UndeclaredError", "unknown program " + p->var);
      enter(p->var);
      Program r = program(d->program);
      stack.pop_back();
      return r;
    }
    auto n = std::make_shared<ProgramNode>(*p);
    if (p->formula) n->formula = formula(p->formula);
    for (auto& s : n->subs) s = program(s);
    return n;
  }
};

}  // namespace

Formula expand(const Formula& f, const Model& m) { return Expander{m, {}}.formula(f); }
Program expand(const Program& p, const Model& m) { return Expander{m, {}}.program(p); }

Model expand_abbreviations(const Model& m) {
  Model out;
  out.variables = m.variables;
  for (const auto& d : m.definitions) {
    if (d.sort == Sort::Real) out.definitions.push_back(d);
    // Expanding each definition also detects cycles among unused ones.
    if (d.sort == Sort::Bool) (void)Expander{m, {d.name}}.formula(d.formula);
    if (d.sort == Sort::Program) (void)Expander{m, {d.name}}.program(d.program);
  }
  out.problem = expand(m.problem, m);
  return out;
}

NameMap fresh_names(const NameSet& base, const NameSet& taken, const std::string& suffix) {
  NameMap out;
  NameSet used = taken;
  used.insert(base.begin(), base.end());
  for (const auto& b : base) {
    std::string cand = b + suffix;
    for (int k = 1; used.count(cand); ++k) cand = b + suffix + "_" + std::to_string(k);
    used.insert(cand);
    out[b] = cand;
  }
  return out;
}

// ------------------------------------------------------------ name sets

NameSet all_names(const Term& t) {
  NameSet r;
  if (t->kind == TermKind::Var) r.insert(t->name);
  for (const auto& a : t->args) r.merge(all_names(a));
  return r;
}

NameSet all_names(const Formula& f) {
  NameSet r;
  if (f->lhs) r.merge(all_names(f->lhs));
  if (f->rhs) r.merge(all_names(f->rhs));
  if (f->kind == FormulaKind::Forall || f->kind == FormulaKind::Exists) r.insert(f->name);
  if (f->program) r.merge(all_names(f->program));
  for (const auto& s : f->subs) r.merge(all_names(s));
  return r;
}

NameSet all_names(const Program& p) {
  NameSet r;
  if (p->kind == ProgramKind::Assign || p->kind == ProgramKind::AssignAny) r.insert(p->var);
  if (p->term) r.merge(all_names(p->term));
  if (p->formula) r.merge(all_names(p->formula));
  for (const auto& e : p->eqs) {
    r.insert(e.var);
    r.insert(prime(e.var));
    r.merge(all_names(e.rhs));
  }
  for (const auto& s : p->subs) r.merge(all_names(s));
  return r;
}

bool is_strict_core(const Term& t) {
  if (t->kind != TermKind::Var && t->kind != TermKind::Const && t->kind != TermKind::Plus &&
      t->kind != TermKind::Times)
    return false;
  for (const auto& a : t->args)
    if (!is_strict_core(a)) return false;
  return true;
}

bool is_strict_core(const Formula& f) {
  if (f->lhs && !is_strict_core(f->lhs)) return false;
  if (f->rhs && !is_strict_core(f->rhs)) return false;
  if (f->program && !is_strict_core(f->program)) return false;
  for (const auto& s : f->subs)
    if (!is_strict_core(s)) return false;
  return true;
}

bool is_strict_core(const Program& p) {
  if (p->term && !is_strict_core(p->term)) return false;
  if (p->formula && !is_strict_core(p->formula)) return false;
  for (const auto& e : p->eqs)
    if (!is_strict_core(e.rhs)) return false;
  for (const auto& s : p->subs)
    if (!is_strict_core(s)) return false;
  return true;
}

}  // namespace hpsec
