#pragma once

#include <map>
#include <string>
#include <variant>
#include <vector>

#include "hpsec/ast.hpp"
#include "hpsec/syntax.hpp"

namespace hpsec {

// Problem of the form pre -> [{ctrl; plant}*]post (pre is True when absent).
struct LoopProblem {
  Formula pre;
  Formula post;
  Program body;
  Program ctrl;
  Program plant;
};

// Throws ShapeError when the expanded problem has another form.
LoopProblem split_problem(const Model& expanded);

struct CanonicalModel {
  Program choices;  // null when there is no high-integrity nondeterminism
  Program ctrl;
  Program plant;
  std::vector<std::string> choice_vars;
  std::map<std::string, Span> origin_map;
  Model base;  // expanded input model
  Formula pre;
  Formula post;

  Program body() const;     // choices; ctrl; plant
  Program program() const;  // {choices; ctrl; plant}*
  Model to_model() const;
};

// Choices whose branches all start with pairwise disjoint guards are
// deterministic and left in place, as are `/*@low*/` sites and any-assignments
// to names in low_integrity_nondet. Throws ShapeError or OdeInCtrl.
CanonicalModel canonicalize(const Model& model, const NameSet& low_integrity_nondet);

bool is_guard_determined(const Program& choice);

struct Renaming {
  NameMap map;     // over V(P), primed names included
  NameSet domain;  // V(P)

  std::string operator()(const std::string& x) const;
  NameMap base_map() const;  // unprimed bound names only
};

Renaming make_renaming(const CanonicalModel& canon, const std::string& suffix = "_1");

// Checks bijectivity, freshness of bound images and identity elsewhere.
bool is_renaming_for(const Renaming& r, const Program& p);

struct CompositionResult {
  Model composed;
  NameSet sensors;
  std::vector<std::string> choice_vars;
  std::vector<std::string> eq_set;
  Formula eq_formula;
  Renaming renaming;
  Formula obligation;
  Program choices_subst;  // null when there are no choice variables
  Program renamed_ctrl;
  Program merged_plant;
  Program body;  // loop body of the obligation
};

// Throws EqSetOverlapsSensors, EqSetNotBound, NotASensor, SensorInPlant.
CompositionResult compose(const CanonicalModel& canon, const NameSet& sensors,
                          const std::vector<std::string>& eq_set, const Renaming& renaming);

// Empty result means the canonical program passed the totality check.
std::vector<Diagnostic> totality_gate(const CanonicalModel& canon, const NameSet& sensors,
                                      const std::string& file = "<input>");

}  // namespace hpsec
