#include "hpsec/total.hpp"

#include <algorithm>
#include <map>
#include <optional>

#include "hpsec/vars.hpp"

namespace hpsec {

namespace {

bool meets(const NameSet& a, const NameSet& b) {
  for (const auto& x : a)
    if (b.count(x)) return true;
  return false;
}

// Leading test of a choice branch, or null.
Program leading_test(const Program& branch) {
  Program head = flatten_seq(branch).front();
  return head->kind == ProgramKind::Test ? head : nullptr;
}

std::vector<Program> after_leading(const Program& branch) {
  auto items = flatten_seq(branch);
  if (items.front()->kind == ProgramKind::Test) items.erase(items.begin());
  return items;
}

struct Tainter {
  TaintResult r;
  bool changed = false;

  void mark(const std::string& from, const std::string& to, Span site) {
    bool seen = std::any_of(r.flow_edges.begin(), r.flow_edges.end(),
                            [&](const FlowEdge& e) { return e.from == from && e.to == to; });
    if (!seen) r.flow_edges.push_back({from, to, site});
    if (r.tainted.insert(to).second) changed = true;
  }

  void flow(const NameSet& reads, const std::string& to, Span site) {
    for (const auto& y : reads)
      if (r.tainted.count(y)) mark(y, to, site);
  }

  void walk(const Program& p) {
    switch (p->kind) {
      case ProgramKind::Assign:
        flow(fv_term(p->term), p->var, p->span);
        break;
      case ProgramKind::Ode:
        for (const auto& e : p->eqs) flow(fv_term(e.rhs), e.var, p->span);
        break;
      case ProgramKind::Choice:
        for (const auto& b : flatten_choice(p)) {
          if (Program t = leading_test(b)) {
            NameSet reads = fv_formula(t->formula);
            for (const auto& x : bv_program(b))
              if (!is_primed(x)) flow(reads, x, t->span);
          }
          walk(b);
        }
        break;
      default:
        for (const auto& s : p->subs) walk(s);
    }
  }
};

// Sign regions as bits: 1 for <, 2 for =, 4 for >.
int region(CmpOp op) {
  switch (op) {
    case CmpOp::Lt: return 1;
    case CmpOp::Le: return 3;
    case CmpOp::Eq: return 2;
    case CmpOp::Gt: return 4;
    case CmpOp::Ge: return 6;
    case CmpOp::Ne: return 5;
  }
  return 0;
}

int flip(int r) { return ((r & 1) << 2) | (r & 2) | ((r & 4) >> 2); }

// A guard read as (lhs, rhs, region), looking through one negation.
struct Atom {
  Term lhs, rhs;
  int region;
};

std::optional<Atom> atom_of(const Formula& f) {
  if (f->kind == FormulaKind::Compare) return Atom{f->lhs, f->rhs, region(f->op)};
  if (f->kind == FormulaKind::Not && f->subs[0]->kind == FormulaKind::Compare) {
    const Formula& g = f->subs[0];
    return Atom{g->lhs, g->rhs, 7 & ~region(g->op)};
  }
  return std::nullopt;
}

bool covers(int region, int sign) { return (region >> sign) & 1; }

// Exact check for guards of the form x op k. Distinct variables are
// independent, so the disjunction is valid iff it is valid for one variable.
std::optional<bool> interval_cover(const std::vector<Atom>& atoms) {
  std::map<std::string, std::vector<std::pair<Rational, int>>> by_var;  // (k, region of x relative to k)
  for (const auto& a : atoms) {
    if (a.lhs->kind == TermKind::Var && a.rhs->kind == TermKind::Const)
      by_var[a.lhs->name].emplace_back(a.rhs->value, a.region);
    else if (a.rhs->kind == TermKind::Var && a.lhs->kind == TermKind::Const)
      by_var[a.rhs->name].emplace_back(a.lhs->value, flip(a.region));
    else
      return std::nullopt;
  }
  for (const auto& [x, gs] : by_var) {
    std::vector<Rational> ks;
    for (const auto& g : gs) ks.push_back(g.first);
    std::sort(ks.begin(), ks.end());
    ks.erase(std::unique(ks.begin(), ks.end()), ks.end());
    // Guards are constant between breakpoints, so probing each breakpoint and one
    // point per open interval decides the union.
    std::vector<Rational> probes{ks.front() - 1, ks.back() + 1};
    for (size_t i = 0; i < ks.size(); ++i) {
      probes.push_back(ks[i]);
      if (i + 1 < ks.size()) probes.push_back((ks[i] + ks[i + 1]) / 2);
    }
    bool all = true;
    for (const auto& v : probes) {
      bool hit = false;
      for (const auto& [k, reg] : gs) {
        int sign = v < k ? 0 : (v == k ? 1 : 2);
        hit = hit || covers(reg, sign);
      }
      all = all && hit;
    }
    if (all) return true;
  }
  return false;
}

}  // namespace

TaintResult taint(const Program& p, const NameSet& sensors) {
  Tainter t;
  t.r.tainted = sensors;
  do {
    t.changed = false;
    t.walk(p);
  } while (t.changed);
  return t.r;
}

Exhaustiveness decide_exhaustive(const std::vector<Formula>& guards) {
  for (const auto& g : guards)
    if (g->kind == FormulaKind::True) return Exhaustiveness::Exhaustive;
  for (const auto& a : guards)
    for (const auto& b : guards)
      if (b->kind == FormulaKind::Not && equal(b->subs[0], a)) return Exhaustiveness::Exhaustive;

  std::vector<Atom> atoms;
  for (const auto& g : guards) {
    auto a = atom_of(g);
    if (!a) return Exhaustiveness::Unknown;
    atoms.push_back(*a);
  }
  // Regions over one syntactic term pair, in either orientation.
  for (const auto& a : atoms) {
    int total = 0;
    for (const auto& b : atoms) {
      if (equal(a.lhs, b.lhs) && equal(a.rhs, b.rhs)) total |= b.region;
      else if (equal(a.lhs, b.rhs) && equal(a.rhs, b.lhs)) total |= flip(b.region);
    }
    if (total == 7) return Exhaustiveness::Exhaustive;
  }
  if (auto exact = interval_cover(atoms))
    return *exact ? Exhaustiveness::Exhaustive : Exhaustiveness::NotExhaustive;
  return Exhaustiveness::Unknown;
}

namespace {

struct Checker {
  const NameSet& tainted;
  std::vector<Violation> out;

  void guards(const std::vector<Formula>& gs, Span site) {
    switch (decide_exhaustive(gs)) {
      case Exhaustiveness::Exhaustive:
        return;
      case Exhaustiveness::NotExhaustive: {
        std::string d = "guards reading low-integrity variables are not exhaustive:";
        for (const auto& g : gs) d += " " + print(g) + ";";
        d.pop_back();
        out.push_back({ViolationKind::NonExhaustiveTest, site, d});
        return;
      }
      case Exhaustiveness::Unknown: {
        std::string d = "cannot decide exhaustiveness of guards:";
        for (const auto& g : gs) d += " " + print(g) + ";";
        d.pop_back();
        out.push_back({ViolationKind::UnknownExhaustiveness, site, d});
        return;
      }
    }
  }

  void walk(const Program& p) {
    switch (p->kind) {
      case ProgramKind::Test:
        if (meets(fv_formula(p->formula), tainted)) guards({p->formula}, p->span);
        break;
      case ProgramKind::Ode:
        if (meets(fv_formula(p->formula), tainted)) {
          Span s = p->formula->span.valid() ? p->formula->span : p->span;
          NameSet reads = set_intersect(fv_formula(p->formula), tainted);
          std::string d = "evolution domain " + print(p->formula) + " reads low-integrity";
          for (const auto& x : reads) d += " " + x;
          out.push_back({ViolationKind::TaintedOdeDomain, s, d});
        }
        break;
      case ProgramKind::Choice: {
        auto branches = flatten_choice(p);
        std::vector<Formula> gs;
        bool any_tainted = false;
        bool unguarded = false;
        Span site = p->span;
        for (const auto& b : branches) {
          Program t = leading_test(b);
          if (!t) {
            unguarded = true;
            continue;
          }
          gs.push_back(t->formula);
          if (meets(fv_formula(t->formula), tainted)) {
            if (!any_tainted && !site.valid()) site = t->span;
            any_tainted = true;
          }
        }
        if (any_tainted && !unguarded) guards(gs, site.valid() ? site : p->span);
        for (const auto& b : branches)
          for (const auto& s : after_leading(b)) walk(s);
        break;
      }
      default:
        for (const auto& s : p->subs) walk(s);
    }
  }
};

}  // namespace

TotalityReport check_totality(const Program& p, const NameSet& sensors) {
  TotalityReport rep;
  rep.tainted = taint(p, sensors).tainted;
  Checker c{rep.tainted, {}};
  c.walk(p);
  rep.violations = std::move(c.out);
  bool definite = std::any_of(rep.violations.begin(), rep.violations.end(),
                              [](const Violation& v) { return v.kind != ViolationKind::UnknownExhaustiveness; });
  if (rep.violations.empty()) rep.status = TotalityStatus::Total;
  else rep.status = definite ? TotalityStatus::Partial : TotalityStatus::Unknown;
  return rep;
}

const char* to_string(TotalityStatus s) {
  switch (s) {
    case TotalityStatus::Total: return "Total";
    case TotalityStatus::Partial: return "Partial";
    case TotalityStatus::Unknown: return "Unknown";
  }
  return "?";
}

const char* to_string(ViolationKind k) {
  switch (k) {
    case ViolationKind::TaintedOdeDomain: return "TaintedOdeDomain";
    case ViolationKind::NonExhaustiveTest: return "NonExhaustiveTest";
    case ViolationKind::UnknownExhaustiveness: return "UnknownExhaustiveness";
  }
  return "?";
}

std::vector<Diagnostic> to_diagnostics(const TotalityReport& r, const std::string& file) {
  std::vector<Diagnostic> ds;
  for (const auto& v : r.violations) {
    Severity sev = v.kind == ViolationKind::UnknownExhaustiveness ? Severity::Warning : Severity::Error;
    ds.push_back({sev, std::string(to_string(v.kind)) + ": " + v.detail, file, v.site});
  }
  return ds;
}

}  // namespace hpsec
