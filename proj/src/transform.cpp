#include "hpsec/transform.hpp"

#include <algorithm>

#include "hpsec/attack.hpp"
#include "hpsec/total.hpp"
#include "hpsec/vars.hpp"

namespace hpsec {

LoopProblem split_problem(const Model& expanded) {
  LoopProblem lp;
  Formula f = expanded.problem;
  lp.pre = mk::tt();
  if (f->kind == FormulaKind::Implies) {
    lp.pre = f->subs[0];
    f = f->subs[1];
  }
  if (f->kind != FormulaKind::Box || f->program->kind != ProgramKind::Loop)
    throw Error("ShapeError", "problem is not of the form pre -> [{ctrl; plant}*]post");
  lp.post = f->subs[0];
  lp.body = f->program->subs[0];
  if (lp.body->kind != ProgramKind::Seq) throw Error("ShapeError", "loop body is not ctrl; plant");
  if (lp.body->subs[1]->kind == ProgramKind::Ode) {
    lp.ctrl = lp.body->subs[0];
    lp.plant = lp.body->subs[1];
  } else {
    auto items = flatten_seq(lp.body);
    if (items.back()->kind != ProgramKind::Ode) throw Error("ShapeError", "loop body does not end in an ODE");
    lp.plant = items.back();
    items.pop_back();
    lp.ctrl = mk::seq_all(items);
  }
  return lp;
}

namespace {

// Sign regions covered by a comparison: bit 0 for <, bit 1 for =, bit 2 for >.
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

bool disjoint(const Formula& a, const Formula& b) {
  if (b->kind == FormulaKind::Not && equal(b->subs[0], a)) return true;
  if (a->kind == FormulaKind::Not && equal(a->subs[0], b)) return true;
  if (a->kind != FormulaKind::Compare || b->kind != FormulaKind::Compare) return false;
  int ra = region(a->op);
  if (equal(a->lhs, b->lhs) && equal(a->rhs, b->rhs)) return (ra & region(b->op)) == 0;
  if (equal(a->lhs, b->rhs) && equal(a->rhs, b->lhs)) return (ra & flip(region(b->op))) == 0;
  // x = k1 versus x = k2 with distinct literals.
  if (a->op == CmpOp::Eq && b->op == CmpOp::Eq && equal(a->lhs, b->lhs) && a->rhs->kind == TermKind::Const &&
      b->rhs->kind == TermKind::Const)
    return a->rhs->value != b->rhs->value;
  return false;
}

struct Canonicalizer {
  const NameSet& low_names;
  NameSet taken;
  std::vector<std::pair<std::string, Span>> sites;  // filled in the counting pass
  size_t next = 0;
  bool counting = true;
  std::vector<std::string> names;

  std::string fresh() {
    if (counting) {
      sites.emplace_back("", Span{});
      return "";
    }
    return names[next++];
  }

  bool high_any(const Program& p) const { return !p->low && !low_names.count(p->var); }

  Program rewrite(const Program& p) {
    switch (p->kind) {
      case ProgramKind::Ode:
        throw Error("OdeInCtrl", "differential equation inside ctrl");
      case ProgramKind::AssignAny: {
        if (!high_any(p)) return p;
        size_t idx = counting ? sites.size() : next;
        std::string c = fresh();
        if (counting) {
          sites[idx].second = p->span;
          return p;
        }
        return mk::assign(p->var, mk::var(c), p->span);
      }
      case ProgramKind::Choice: {
        if (p->low || is_guard_determined(p)) {
          auto n = std::make_shared<ProgramNode>(*p);
          for (auto& s : n->subs) s = rewrite(s);
          return n;
        }
        size_t idx = counting ? sites.size() : next;
        std::string c = fresh();
        if (counting) sites[idx].second = p->span;
        Program a = rewrite(p->subs[0]);
        Program b = rewrite(p->subs[1]);
        if (counting) return p;
        return mk::if_then_else(mk::cmp(CmpOp::Ne, mk::var(c), mk::num(0)), a, b, false, p->span);
      }
      case ProgramKind::Seq: {
        auto n = std::make_shared<ProgramNode>(*p);
        for (auto& s : n->subs) s = rewrite(s);
        return n;
      }
      case ProgramKind::Loop: {
        size_t before = counting ? sites.size() : next;
        Program body = rewrite(p->subs[0]);
        size_t after = counting ? sites.size() : next;
        if (after != before) throw Error("ShapeError", "high-integrity nondeterminism inside a nested loop");
        return mk::loop(body, p->span);
      }
      default:
        return p;
    }
  }
};

std::string fresh_name(const std::string& base, NameSet& taken) {
  std::string cand = base;
  for (int k = 1; taken.count(cand); ++k) cand = base + "_" + std::to_string(k);
  taken.insert(cand);
  return cand;
}

NameSet declared_names(const Model& m) {
  NameSet s(m.variables.begin(), m.variables.end());
  for (const auto& d : m.definitions) s.insert(d.name);
  return s;
}

}  // namespace

bool is_guard_determined(const Program& choice) {
  std::vector<Formula> guards;
  for (const auto& b : flatten_choice(choice)) {
    Program head = flatten_seq(b).front();
    if (head->kind != ProgramKind::Test) return false;
    guards.push_back(head->formula);
  }
  for (size_t i = 0; i < guards.size(); ++i)
    for (size_t j = i + 1; j < guards.size(); ++j)
      if (!disjoint(guards[i], guards[j])) return false;
  return true;
}

Program CanonicalModel::body() const {
  Program cp = mk::seq(ctrl, plant);
  return choices ? mk::seq(choices, cp) : cp;
}

Program CanonicalModel::program() const { return mk::loop(body()); }

Model CanonicalModel::to_model() const {
  Model m;
  for (const auto& d : base.definitions)
    if (d.sort == Sort::Real) m.definitions.push_back(d);
  m.variables = base.variables;
  for (const auto& c : choice_vars) m.variables.push_back(c);
  std::vector<Program> parts;
  if (choices) {
    m.definitions.push_back({"choices", Sort::Program, nullptr, nullptr, choices, {}});
    parts.push_back(mk::call("choices"));
  }
  m.definitions.push_back({"ctrl", Sort::Program, nullptr, nullptr, ctrl, {}});
  m.definitions.push_back({"plant", Sort::Program, nullptr, nullptr, plant, {}});
  parts.push_back(mk::call("ctrl"));
  parts.push_back(mk::call("plant"));
  Formula box = mk::box(mk::loop(mk::seq_all(parts)), post);
  m.problem = pre->kind == FormulaKind::True ? box : mk::implies(pre, box);
  return m;
}

CanonicalModel canonicalize(const Model& model, const NameSet& low_integrity_nondet) {
  Model ex = expand_abbreviations(model);
  LoopProblem lp = split_problem(ex);
  Canonicalizer cz{low_integrity_nondet, {}, {}, 0, true, {}};
  cz.rewrite(lp.ctrl);

  NameSet taken = declared_names(model);
  taken.merge(all_names(ex.problem));
  CanonicalModel out;
  if (cz.sites.size() == 1) {
    cz.names.push_back(fresh_name("c", taken));
  } else {
    for (size_t i = 0; i < cz.sites.size(); ++i) cz.names.push_back(fresh_name("c" + std::to_string(i + 1), taken));
  }
  cz.counting = false;
  out.ctrl = cz.rewrite(lp.ctrl);
  out.plant = lp.plant;
  out.choice_vars = cz.names;
  std::vector<Program> assigns;
  for (size_t i = 0; i < cz.names.size(); ++i) {
    out.origin_map[cz.names[i]] = cz.sites[i].second;
    assigns.push_back(mk::assign_any(cz.names[i]));
  }
  if (!assigns.empty()) out.choices = mk::seq_all(assigns);
  out.base = ex;
  out.pre = lp.pre;
  out.post = lp.post;
  return out;
}

std::string Renaming::operator()(const std::string& x) const {
  auto it = map.find(x);
  return it == map.end() ? x : it->second;
}

NameMap Renaming::base_map() const {
  NameMap m;
  for (const auto& [k, v] : map)
    if (!is_primed(k) && k != v) m[k] = v;
  return m;
}

Renaming make_renaming(const CanonicalModel& canon, const std::string& suffix) {
  Program p = canon.program();
  NameSet bound = bv_program(p);
  NameSet base;
  for (const auto& b : bound) base.insert(unprime(b));
  NameSet taken = all_names(p);
  taken.merge(declared_names(canon.base));
  taken.merge(all_names(canon.pre));
  taken.merge(all_names(canon.post));
  NameMap fresh = fresh_names(base, taken, suffix);
  Renaming r;
  r.domain = all_vars(p);
  for (const auto& x : r.domain) {
    std::string u = unprime(x);
    r.map[x] = bound.count(x) ? (is_primed(x) ? prime(fresh.at(u)) : fresh.at(u)) : x;
  }
  return r;
}

bool is_renaming_for(const Renaming& r, const Program& p) {
  NameSet v = all_vars(p);
  NameSet bound = bv_program(p);
  NameSet images;
  for (const auto& x : v) {
    auto it = r.map.find(x);
    if (it == r.map.end()) return false;
    if (!images.insert(it->second).second) return false;
    if (bound.count(x) ? v.count(it->second) > 0 : it->second != x) return false;
  }
  return true;
}

CompositionResult compose(const CanonicalModel& canon, const NameSet& sensors, const std::vector<std::string>& eq_set,
                          const Renaming& renaming) {
  Program p = canon.program();
  NameSet bound = bv_program(p);
  std::vector<std::string> eq;
  for (const auto& x : eq_set) {
    if (std::find(eq.begin(), eq.end(), x) != eq.end()) continue;
    if (sensors.count(x)) throw Error("EqSetOverlapsSensors", x + " is both a sensor and in the equivalence set");
    if (!bound.count(x)) throw Error("EqSetNotBound", x + " is not bound by the canonical program");
    eq.push_back(x);
  }
  for (const auto& s : sensors)
    if (ode_bound(canon.plant).count(s)) throw Error("SensorInPlant", s + " is bound by a differential equation");
  auto [attacked_ctrl, spec] = attack(canon.ctrl, sensors);
  NameMap xi = renaming.base_map();

  CompositionResult r;
  r.renaming = renaming;
  r.sensors = sensors;
  r.choice_vars = canon.choice_vars;
  r.eq_set = eq;
  r.renamed_ctrl = rename(attacked_ctrl, xi);
  std::vector<Program> subst;
  for (const auto& c : canon.choice_vars) subst.push_back(mk::assign(renaming(c), mk::var(c)));
  if (!subst.empty()) r.choices_subst = mk::seq_all(subst);

  Program renamed_plant = rename(canon.plant, xi);
  std::vector<OdeEq> eqs = canon.plant->eqs;
  eqs.insert(eqs.end(), renamed_plant->eqs.begin(), renamed_plant->eqs.end());
  // Conjuncts interleaved pairwise: q1 & q1' & q2 & q2' ...
  std::vector<Formula> dom;
  for (const auto& q : flatten_and(canon.plant->formula)) {
    if (q->kind == FormulaKind::True) continue;
    dom.push_back(q);
    dom.push_back(rename(q, xi));
  }
  r.merged_plant = mk::ode(eqs, mk::conj(dom));

  std::vector<Formula> eqf;
  for (const auto& x : eq) eqf.push_back(mk::cmp(CmpOp::Eq, mk::var(x), mk::var(renaming(x))));
  r.eq_formula = mk::conj(eqf);

  Program tail = r.choices_subst ? mk::seq(r.choices_subst, r.renamed_ctrl) : r.renamed_ctrl;
  Program ctrl_c = mk::seq(canon.ctrl, tail);
  if (canon.choices) ctrl_c = mk::seq(canon.choices, ctrl_c);
  r.body = mk::seq(ctrl_c, r.merged_plant);
  r.obligation = mk::implies(r.eq_formula, mk::box(mk::loop(r.body), r.eq_formula));

  // Printable model with named parts.
  Model& m = r.composed;
  for (const auto& d : canon.base.definitions)
    if (d.sort == Sort::Real) m.definitions.push_back(d);
  auto def = [&](const std::string& name, const Program& body) {
    m.definitions.push_back({name, Sort::Program, nullptr, nullptr, body, {}});
    return mk::call(name);
  };
  m.definitions.push_back({"eq_E", Sort::Bool, nullptr, r.eq_formula, nullptr, {}});
  std::vector<Program> parts;
  if (canon.choices) parts.push_back(def("choices", canon.choices));
  parts.push_back(def("ctrl", canon.ctrl));
  if (r.choices_subst) parts.push_back(def("choices_1", r.choices_subst));
  parts.push_back(def("ctrl_1", r.renamed_ctrl));
  Program ctrl_ref = def("ctrlC", mk::seq_all(parts));
  Program plant_ref = def("plantC", r.merged_plant);
  m.variables = canon.base.variables;
  for (const auto& c : canon.choice_vars) m.variables.push_back(c);
  std::vector<std::string> originals = m.variables;
  for (const auto& v : originals)
    if (renaming(v) != v) m.variables.push_back(renaming(v));
  Formula eqp = mk::pred("eq_E");
  m.problem = mk::implies(eqp, mk::box(mk::loop(mk::seq(ctrl_ref, plant_ref)), eqp));
  return r;
}

std::vector<Diagnostic> totality_gate(const CanonicalModel& canon, const NameSet& sensors, const std::string& file) {
  TotalityReport rep = check_totality(canon.program(), sensors);
  return to_diagnostics(rep, file);
}

}  // namespace hpsec
