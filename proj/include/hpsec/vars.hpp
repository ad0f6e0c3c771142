#pragma once

#include "hpsec/ast.hpp"

namespace hpsec {

struct VarSets {
  NameSet fv;
  NameSet bv;
  NameSet mbv;
  NameSet all;
};

NameSet fv_term(const Term& t);
NameSet fv_formula(const Formula& f);
NameSet bv_formula(const Formula& f);

NameSet bv_program(const Program& p);
NameSet mbv_program(const Program& p);
NameSet fv_program(const Program& p);
// V(p) = BV(p) u FV(p)
NameSet all_vars(const Program& p);

VarSets analyze(const Program& p);
VarSets analyze(const Formula& f);

// Splits a set into (constants, everything else) with respect to a model.
std::pair<NameSet, NameSet> partition_constants(const NameSet& s, const Model& m);

NameSet set_union(const NameSet& a, const NameSet& b);
NameSet set_intersect(const NameSet& a, const NameSet& b);
NameSet set_minus(const NameSet& a, const NameSet& b);
bool is_subset(const NameSet& a, const NameSet& b);

}  // namespace hpsec
