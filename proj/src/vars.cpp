#include "hpsec/vars.hpp"

#include <algorithm>
#include <iterator>

namespace hpsec {

NameSet set_union(const NameSet& a, const NameSet& b) {
  NameSet r = a;
  r.insert(b.begin(), b.end());
  return r;
}

NameSet set_intersect(const NameSet& a, const NameSet& b) {
  NameSet r;
  std::set_intersection(a.begin(), a.end(), b.begin(), b.end(), std::inserter(r, r.end()));
  return r;
}

NameSet set_minus(const NameSet& a, const NameSet& b) {
  NameSet r;
  std::set_difference(a.begin(), a.end(), b.begin(), b.end(), std::inserter(r, r.end()));
  return r;
}

bool is_subset(const NameSet& a, const NameSet& b) {
  return std::includes(b.begin(), b.end(), a.begin(), a.end());
}

NameSet fv_term(const Term& t) {
  if (t->kind == TermKind::Var) return {t->name};
  NameSet r;
  for (const auto& a : t->args) r.merge(fv_term(a));
  return r;
}

NameSet fv_formula(const Formula& f) {
  switch (f->kind) {
    case FormulaKind::Compare:
      return set_union(fv_term(f->lhs), fv_term(f->rhs));
    case FormulaKind::True:
    case FormulaKind::False:
    case FormulaKind::Pred:
      return {};
    case FormulaKind::Not:
    case FormulaKind::And:
    case FormulaKind::Or:
    case FormulaKind::Implies: {
      NameSet r;
      for (const auto& s : f->subs) r.merge(fv_formula(s));
      return r;
    }
    case FormulaKind::Forall:
    case FormulaKind::Exists: {
      NameSet r = fv_formula(f->subs[0]);
      r.erase(f->name);
      return r;
    }
    case FormulaKind::Box:
      return set_union(fv_program(f->program),
                       set_minus(fv_formula(f->subs[0]), mbv_program(f->program)));
  }
  return {};
}

NameSet bv_formula(const Formula& f) {
  switch (f->kind) {
    case FormulaKind::Forall:
    case FormulaKind::Exists: {
      NameSet r = bv_formula(f->subs[0]);
      r.insert(f->name);
      return r;
    }
    case FormulaKind::Box:
      return set_union(bv_program(f->program), bv_formula(f->subs[0]));
    default: {
      NameSet r;
      for (const auto& s : f->subs) r.merge(bv_formula(s));
      return r;
    }
  }
}

NameSet bv_program(const Program& p) {
  switch (p->kind) {
    case ProgramKind::Assign:
    case ProgramKind::AssignAny:
      return {p->var};
    case ProgramKind::Test:
    case ProgramKind::Call:
      return {};
    case ProgramKind::Ode: {
      NameSet r;
      for (const auto& e : p->eqs) {
        r.insert(e.var);
        r.insert(prime(e.var));
      }
      return r;
    }
    case ProgramKind::Seq:
    case ProgramKind::Choice:
      return set_union(bv_program(p->subs[0]), bv_program(p->subs[1]));
    case ProgramKind::Loop:
      return bv_program(p->subs[0]);
  }
  return {};
}

NameSet mbv_program(const Program& p) {
  switch (p->kind) {
    case ProgramKind::Assign:
    case ProgramKind::AssignAny:
    case ProgramKind::Test:
    case ProgramKind::Ode:
      return bv_program(p);
    case ProgramKind::Seq:
      return set_union(mbv_program(p->subs[0]), mbv_program(p->subs[1]));
    case ProgramKind::Choice:
      return set_intersect(mbv_program(p->subs[0]), mbv_program(p->subs[1]));
    case ProgramKind::Loop:
    case ProgramKind::Call:
      return {};
  }
  return {};
}

NameSet fv_program(const Program& p) {
  switch (p->kind) {
    case ProgramKind::Assign:
      return fv_term(p->term);
    case ProgramKind::AssignAny:
    case ProgramKind::Call:
      return {};
    case ProgramKind::Test:
      return fv_formula(p->formula);
    case ProgramKind::Ode: {
      NameSet r = fv_formula(p->formula);
      for (const auto& e : p->eqs) {
        r.insert(e.var);
        r.merge(fv_term(e.rhs));
      }
      return r;
    }
    case ProgramKind::Seq:
      return set_union(fv_program(p->subs[0]),
                       set_minus(fv_program(p->subs[1]), mbv_program(p->subs[0])));
    case ProgramKind::Choice:
      return set_union(fv_program(p->subs[0]), fv_program(p->subs[1]));
    case ProgramKind::Loop:
      return fv_program(p->subs[0]);
  }
  return {};
}

NameSet all_vars(const Program& p) { return set_union(bv_program(p), fv_program(p)); }

VarSets analyze(const Program& p) {
  VarSets v{fv_program(p), bv_program(p), mbv_program(p), {}};
  v.all = set_union(v.fv, v.bv);
  return v;
}

VarSets analyze(const Formula& f) {
  VarSets v{fv_formula(f), bv_formula(f), {}, {}};
  v.all = set_union(v.fv, v.bv);
  return v;
}

std::pair<NameSet, NameSet> partition_constants(const NameSet& s, const Model& m) {
  std::pair<NameSet, NameSet> r;
  for (const auto& n : s) (m.is_constant(n) ? r.first : r.second).insert(n);
  return r;
}

}  // namespace hpsec
