#include <sstream>

#include "hpsec/syntax.hpp"

namespace hpsec {

const char* to_string(CmpOp op) {
  switch (op) {
    case CmpOp::Lt: return "<";
    case CmpOp::Le: return "<=";
    case CmpOp::Eq: return "=";
    case CmpOp::Gt: return ">";
    case CmpOp::Ge: return ">=";
    case CmpOp::Ne: return "!=";
  }
  return "?";
}

namespace {

// Term precedence: 1 additive, 2 multiplicative, 3 unary, 4 power, 5 primary.
int term_level(const Term& t) {
  switch (t->kind) {
    case TermKind::Plus:
    case TermKind::Minus:
      return 1;
    case TermKind::Times:
    case TermKind::Divide:
      return 2;
    case TermKind::Neg:
      return 3;
    case TermKind::Const:
      return t->value < 0 ? 3 : 5;
    case TermKind::Power:
      return 4;
    default:
      return 5;
  }
}

std::string term_at(const Term& t, int level);

std::string term_str(const Term& t) {
  switch (t->kind) {
    case TermKind::Var:
      return t->name;
    case TermKind::Const:
      return rational_to_string(t->value);
    case TermKind::Plus:
      return term_at(t->args[0], 1) + "+" + term_at(t->args[1], 2);
    case TermKind::Minus:
      return term_at(t->args[0], 1) + "-" + term_at(t->args[1], 2);
    case TermKind::Times:
      return term_at(t->args[0], 2) + "*" + term_at(t->args[1], 3);
    case TermKind::Divide:
      return term_at(t->args[0], 2) + "/" + term_at(t->args[1], 3);
    case TermKind::Neg:
      // -(1) keeps Neg(Const) distinct from the negative literal -1.
      if (t->args[0]->kind == TermKind::Const) return "-(" + term_str(t->args[0]) + ")";
      return "-" + term_at(t->args[0], 3);
    case TermKind::Power:
      return term_at(t->args[0], 5) + "^" + std::to_string(t->exponent);
    case TermKind::Apply: {
      std::string s = t->name + "(";
      for (size_t i = 0; i < t->args.size(); ++i) s += (i ? ", " : "") + term_str(t->args[i]);
      return s + ")";
    }
  }
  return "?";
}

std::string term_at(const Term& t, int level) {
  std::string s = term_str(t);
  // Non-decimal rationals print as n/d and need grouping like a quotient.
  bool quotient = t->kind == TermKind::Const && !is_decimal(t->value);
  if (term_level(t) < level || (quotient && level > 1)) return "(" + s + ")";
  return s;
}

// Formula precedence: 1 implication, 2 disjunction, 3 conjunction, 4 unary, 5 atom.
int formula_level(const Formula& f) {
  switch (f->kind) {
    case FormulaKind::Implies: return 1;
    case FormulaKind::Or: return 2;
    case FormulaKind::And: return 3;
    case FormulaKind::Not:
    case FormulaKind::Forall:
    case FormulaKind::Exists:
    case FormulaKind::Box:
      return 4;
    default:
      return 5;
  }
}

struct Printer {
  bool kyx = false;

  std::string formula_at(const Formula& f, int level) {
    std::string s = formula(f);
    return formula_level(f) < level ? "(" + s + ")" : s;
  }

  std::string formula(const Formula& f) {
    switch (f->kind) {
      case FormulaKind::Compare:
        return term_str(f->lhs) + to_string(f->op) + term_str(f->rhs);
      case FormulaKind::True:
        return "true";
      case FormulaKind::False:
        return "false";
      case FormulaKind::Pred:
        return f->name;
      case FormulaKind::Not: {
        const Formula& g = f->subs[0];
        bool bare = g->kind == FormulaKind::True || g->kind == FormulaKind::False ||
                    g->kind == FormulaKind::Pred || g->kind == FormulaKind::Not;
        return bare ? "!" + formula(g) : "!(" + formula(g) + ")";
      }
      case FormulaKind::And:
        return formula_at(f->subs[0], 4) + " & " + formula_at(f->subs[1], 3);
      case FormulaKind::Or:
        return formula_at(f->subs[0], 3) + " | " + formula_at(f->subs[1], 2);
      case FormulaKind::Implies:
        return formula_at(f->subs[0], 2) + " -> " + formula_at(f->subs[1], 1);
      case FormulaKind::Forall:
        return "\\forall " + f->name + " " + formula_at(f->subs[0], 4);
      case FormulaKind::Exists:
        return "\\exists " + f->name + " " + formula_at(f->subs[0], 4);
      case FormulaKind::Box:
        return "[" + program(f->program) + "]" + formula_at(f->subs[0], 4);
    }
    return "?";
  }

  static bool is_if(const Program& p) {
    if (p->kind != ProgramKind::Choice) return false;
    const Program& a = p->subs[0];
    const Program& b = p->subs[1];
    if (a->kind != ProgramKind::Seq || b->kind != ProgramKind::Seq) return false;
    const Program& ta = a->subs[0];
    const Program& tb = b->subs[0];
    if (ta->kind != ProgramKind::Test || tb->kind != ProgramKind::Test) return false;
    return tb->formula->kind == FormulaKind::Not && equal(tb->formula->subs[0], ta->formula);
  }

  std::string low(const Program& p) { return p->low && !kyx ? "/*@low*/ " : ""; }

  // A statement usable as a sequence element or if-branch.
  std::string atom(const Program& p) {
    if (p->kind == ProgramKind::Seq) return "{" + program(p) + "}";
    return program(p);
  }

  std::string terminate(const Program& p, std::string s) {
    if (!kyx) return s;
    switch (p->kind) {
      case ProgramKind::Assign:
      case ProgramKind::AssignAny:
      case ProgramKind::Test:
      case ProgramKind::Call:
        return s + ";";
      default:
        return s;
    }
  }

  std::string program(const Program& p) {
    switch (p->kind) {
      case ProgramKind::Assign:
        return terminate(p, p->var + " := " + term_str(p->term));
      case ProgramKind::AssignAny:
        return terminate(p, low(p) + p->var + " := *");
      case ProgramKind::Test:
        return terminate(p, "?" + formula(p->formula));
      case ProgramKind::Call:
        return terminate(p, p->var);
      case ProgramKind::Ode: {
        std::string s = "{";
        for (size_t i = 0; i < p->eqs.size(); ++i)
          s += (i ? ", " : "") + p->eqs[i].var + "'=" + term_str(p->eqs[i].rhs);
        if (p->formula->kind != FormulaKind::True) s += " & " + formula(p->formula);
        return s + "}";
      }
      case ProgramKind::Seq: {
        std::string l = p->subs[0]->kind == ProgramKind::Seq ? "{" + program(p->subs[0]) + "}"
                                                             : program(p->subs[0]);
        return l + (kyx ? " " : "; ") + program(p->subs[1]);
      }
      case ProgramKind::Choice: {
        if (!kyx && is_if(p)) {
          return low(p) + "if (" + formula(p->subs[0]->subs[0]->formula) + ") then " +
                 atom(p->subs[0]->subs[1]) + " else " + atom(p->subs[1]->subs[1]);
        }
        std::vector<Program> branches{p->subs[0]};
        Program rest = p->subs[1];
        while (rest->kind == ProgramKind::Choice && rest->low == p->low && (kyx || !is_if(rest))) {
          branches.push_back(rest->subs[0]);
          rest = rest->subs[1];
        }
        branches.push_back(rest);
        std::string s = low(p) + "{";
        for (size_t i = 0; i < branches.size(); ++i) {
          std::string b = program(branches[i]);
          if (branches[i]->kind == ProgramKind::Choice && branches[i]->low == p->low && i == 0)
            b = "{" + b + "}";
          s += (i ? " ++ " : "") + b;
        }
        return s + "}";
      }
      case ProgramKind::Loop:
        return "{" + program(p->subs[0]) + "}*";
    }
    return "?";
  }
};

}  // namespace

std::string print(const Term& t) { return term_str(t); }
std::string print(const Formula& f) { return Printer{}.formula(f); }
std::string print(const Program& p) { return Printer{}.program(p); }

std::string print_model(const Model& m) {
  Printer pr;
  std::ostringstream out;
  out << "Definitions.\n";
  for (const auto& d : m.definitions) {
    switch (d.sort) {
      case Sort::Real:
        out << "  R " << d.name;
        if (d.value) out << " = " << term_str(d.value);
        out << ".\n";
        break;
      case Sort::Bool:
        out << "  B " << d.name << " ::= " << pr.formula(d.formula) << ".\n";
        break;
      case Sort::Program:
        out << "  HP " << d.name << " ::= " << pr.program(d.program) << ".\n";
        break;
    }
  }
  out << "ProgramVariables.\n";
  for (const auto& v : m.variables) out << "  R " << v << ".\n";
  out << "Problem.\n  " << pr.formula(m.problem) << "\nEnd.\n";
  return out.str();
}

namespace {

void check_kyx(const Term& t, const KyxOptions& o) {
  if (t->kind == TermKind::Apply && (t->name != "exp" || !o.allow_exp))
    throw Error("UnsupportedConstruct", "function " + t->name + " has no prover image");
  for (const auto& a : t->args) check_kyx(a, o);
}

void check_kyx(const Formula& f, const KyxOptions& o);

void check_kyx(const Program& p, const KyxOptions& o) {
  if (p->term) check_kyx(p->term, o);
  if (p->formula) check_kyx(p->formula, o);
  for (const auto& e : p->eqs) check_kyx(e.rhs, o);
  for (const auto& s : p->subs) check_kyx(s, o);
}

void check_kyx(const Formula& f, const KyxOptions& o) {
  if (f->lhs) check_kyx(f->lhs, o);
  if (f->rhs) check_kyx(f->rhs, o);
  if (f->program) check_kyx(f->program, o);
  for (const auto& s : f->subs) check_kyx(s, o);
}

}  // namespace

std::string emit_kyx(const Model& m, const KyxOptions& opts) {
  Printer pr{true};
  for (const auto& d : m.definitions) {
    if (d.value) check_kyx(d.value, opts);
    if (d.formula) check_kyx(d.formula, opts);
    if (d.program) check_kyx(d.program, opts);
  }
  check_kyx(m.problem, opts);
  std::ostringstream out;
  out << "ArchiveEntry \"" << opts.entry_name << "\"\n\nDefinitions\n";
  for (const auto& d : m.definitions) {
    switch (d.sort) {
      case Sort::Real:
        out << "  Real " << d.name;
        if (d.value) out << " = " << term_str(d.value);
        out << ";\n";
        break;
      case Sort::Bool:
        out << "  Bool " << d.name << " <-> (" << pr.formula(d.formula) << ");\n";
        break;
      case Sort::Program:
        out << "  HP " << d.name << " ::= { " << pr.program(d.program) << " };\n";
        break;
    }
  }
  out << "End.\n\nProgramVariables\n";
  for (const auto& v : m.variables) out << "  Real " << v << ";\n";
  out << "End.\n\nProblem\n  " << pr.formula(m.problem) << "\nEnd.\n\nEnd.\n";
  return out.str();
}

}  // namespace hpsec
