#include "hpsec/attack.hpp"

#include <functional>

#include "hpsec/vars.hpp"

namespace hpsec {

namespace {

Program rewrite(const Program& p, const NameSet& sensors, AttackSpec& spec) {
  switch (p->kind) {
    case ProgramKind::Assign:
      if (!sensors.count(p->var)) return p;
      spec.provenance[p->var].push_back(p->span);
      return mk::assign_any(p->var, false, p->span);
    case ProgramKind::AssignAny:
      if (sensors.count(p->var)) spec.provenance[p->var].push_back(p->span);
      return p;
    case ProgramKind::Seq:
    case ProgramKind::Choice:
    case ProgramKind::Loop: {
      auto n = std::make_shared<ProgramNode>(*p);
      bool changed = false;
      for (auto& s : n->subs) {
        Program r = rewrite(s, sensors, spec);
        changed = changed || r != s;
        s = r;
      }
      return changed ? Program(n) : p;
    }
    default:
      return p;
  }
}

Formula rewrite(const Formula& f, const NameSet& sensors, AttackSpec& spec) {
  if (f->kind == FormulaKind::Box) {
    auto n = std::make_shared<FormulaNode>(*f);
    n->program = rewrite(f->program, sensors, spec);
    n->subs[0] = rewrite(f->subs[0], sensors, spec);
    return n;
  }
  if (f->subs.empty()) return f;
  auto n = std::make_shared<FormulaNode>(*f);
  for (auto& s : n->subs) s = rewrite(s, sensors, spec);
  return n;
}

void check_sensors(const NameSet& bound, const NameSet& plant, const NameSet& sensors) {
  for (const auto& s : sensors) {
    if (plant.count(s)) throw Error("SensorInPlant", s + " is bound by a differential equation");
    if (!bound.count(s)) throw Error("NotASensor", s + " is not bound by the program");
  }
}

}  // namespace

NameSet ode_bound(const Program& p) {
  if (p->kind == ProgramKind::Ode) {
    NameSet r;
    for (const auto& e : p->eqs) r.insert(e.var);
    return r;
  }
  NameSet r;
  for (const auto& s : p->subs) r.merge(ode_bound(s));
  return r;
}

std::pair<Program, AttackSpec> attack(const Program& p, const NameSet& sensors) {
  check_sensors(bv_program(p), ode_bound(p), sensors);
  AttackSpec spec{sensors, {}};
  Program out = rewrite(p, sensors, spec);
  return {out, spec};
}

std::pair<Model, AttackSpec> attack_model(const Model& m, const NameSet& sensors) {
  Formula problem = expand(m.problem, m);
  NameSet bound = bv_formula(problem);
  NameSet plant;
  std::function<void(const Formula&)> collect = [&](const Formula& f) {
    if (f->program) plant.merge(ode_bound(f->program));
    for (const auto& s : f->subs) collect(s);
  };
  collect(problem);
  check_sensors(bound, plant, sensors);
  AttackSpec spec{sensors, {}};
  Model out = m;
  for (auto& d : out.definitions) {
    if (d.program) d.program = rewrite(d.program, sensors, spec);
    if (d.formula) d.formula = rewrite(d.formula, sensors, spec);
  }
  out.problem = rewrite(out.problem, sensors, spec);
  return {out, spec};
}

bool is_attack_invariant(const Program& p, const NameSet& sensors) {
  AttackSpec spec;
  return equal(rewrite(p, sensors, spec), p);
}

}  // namespace hpsec
