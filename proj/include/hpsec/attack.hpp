#pragma once

#include <map>
#include <utility>
#include <vector>

#include "hpsec/ast.hpp"

namespace hpsec {

struct AttackSpec {
  NameSet sensors;
  std::map<std::string, std::vector<Span>> provenance;
};

// Replaces every assignment to a sensor with `v := *`.
// Throws NotASensor (not bound by p) or SensorInPlant (bound by an ODE).
std::pair<Program, AttackSpec> attack(const Program& p, const NameSet& sensors);

// Same rewrite applied to every program inside a model, keeping abbreviations.
// Preconditions are checked against the expanded problem.
std::pair<Model, AttackSpec> attack_model(const Model& m, const NameSet& sensors);

bool is_attack_invariant(const Program& p, const NameSet& sensors);

// Variables bound by some ODE in p.
NameSet ode_bound(const Program& p);

}  // namespace hpsec
