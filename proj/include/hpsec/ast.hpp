#pragma once

#include <map>
#include <memory>
#include <set>
#include <stdexcept>
#include <string>
#include <vector>

#include "hpsec/rational.hpp"

namespace hpsec {

using NameSet = std::set<std::string>;
using NameMap = std::map<std::string, std::string>;

// 1-based position of a construct in its source file; line 0 means synthetic.
struct Span {
  int line = 0;
  int col = 0;
  int len = 0;
  bool valid() const { return line > 0; }
};

class Error : public std::runtime_error {
 public:
  Error(std::string kind, const std::string& msg)
      : std::runtime_error(kind + ": " + msg), kind_(std::move(kind)) {}
  const std::string& kind() const { return kind_; }

 private:
  std::string kind_;
};

struct TermNode;
struct FormulaNode;
struct ProgramNode;
using Term = std::shared_ptr<const TermNode>;
using Formula = std::shared_ptr<const FormulaNode>;
using Program = std::shared_ptr<const ProgramNode>;

// ---------------------------------------------------------------- terms

enum class TermKind { Var, Const, Plus, Times, Minus, Neg, Divide, Power, Apply };

struct TermNode {
  TermKind kind;
  std::string name;        // Var, Apply
  Rational value;          // Const
  unsigned exponent = 0;   // Power
  std::vector<Term> args;  // operands in order
};

// ------------------------------------------------------------- formulas

enum class CmpOp { Lt, Le, Eq, Gt, Ge, Ne };

// Pred is a reference to a `B name ::= ...` abbreviation.
enum class FormulaKind { Compare, True, False, Not, And, Or, Implies, Forall, Exists, Box, Pred };

struct FormulaNode {
  FormulaKind kind;
  CmpOp op = CmpOp::Eq;
  Term lhs, rhs;               // Compare
  std::string name;            // Forall/Exists binder, Pred name
  std::vector<Formula> subs;   // Not (1), And/Or/Implies (2), quantifiers and Box (1)
  Program program;             // Box
  Span span;
};

// ------------------------------------------------------------- programs

// Call is a reference to an `HP name ::= ...` abbreviation.
enum class ProgramKind { Assign, AssignAny, Test, Ode, Seq, Choice, Loop, Call };

struct OdeEq {
  std::string var;  // unprimed left-hand side
  Term rhs;
};

struct ProgramNode {
  ProgramKind kind;
  std::string var;             // Assign, AssignAny, Call
  Term term;                   // Assign
  Formula formula;             // Test, Ode domain
  std::vector<OdeEq> eqs;      // Ode
  std::vector<Program> subs;   // Seq/Choice (2), Loop (1)
  bool low = false;            // `/*@low*/` annotation on Choice or AssignAny
  Span span;
};

// --------------------------------------------------------- constructors

namespace mk {
Term var(const std::string& name);
Term num(const Rational& v);
Term num(long v);
Term plus(Term a, Term b);
Term times(Term a, Term b);
Term minus(Term a, Term b);
Term neg(Term a);
Term divide(Term a, Term b);
Term power(Term base, unsigned exponent);
Term apply(const std::string& fn, std::vector<Term> args);

Formula cmp(CmpOp op, Term l, Term r, Span s = {});
Formula tt();
Formula ff();
Formula lnot(Formula f, Span s = {});
Formula land(Formula a, Formula b, Span s = {});
Formula lor(Formula a, Formula b, Span s = {});
Formula implies(Formula a, Formula b, Span s = {});
Formula forall(const std::string& x, Formula f, Span s = {});
Formula exists(const std::string& x, Formula f, Span s = {});
Formula box(Program p, Formula f, Span s = {});
Formula pred(const std::string& name, Span s = {});
// Right-nested conjunction; True when empty.
Formula conj(const std::vector<Formula>& fs);

Program assign(const std::string& x, Term t, Span s = {});
Program assign_any(const std::string& x, bool low = false, Span s = {});
Program test(Formula f, Span s = {});
Program ode(std::vector<OdeEq> eqs, Formula domain, Span s = {});
Program seq(Program a, Program b, Span s = {});
Program choice(Program a, Program b, bool low = false, Span s = {});
Program loop(Program a, Span s = {});
Program call(const std::string& name, Span s = {});
// Right-nested sequence; requires at least one element.
Program seq_all(const std::vector<Program>& ps);
// {?g; a ++ ?!g; b}
Program if_then_else(Formula g, Program a, Program b, bool low = false, Span s = {});
}  // namespace mk

// Copies with the span replaced.
Formula with_span(const Formula& f, Span s);
Program with_span(const Program& p, Span s);

// ------------------------------------------------- structural equality

bool equal(const Term& a, const Term& b);
bool equal(const Formula& a, const Formula& b);
bool equal(const Program& a, const Program& b);
// Equality up to associativity of sequential composition.
bool equal_modulo_seq(const Program& a, const Program& b);

// Top-level statements of a sequence, flattened left to right.
std::vector<Program> flatten_seq(const Program& p);
// Branches of nested choices, flattened left to right.
std::vector<Program> flatten_choice(const Program& p);
// Conjuncts of nested conjunctions, flattened left to right.
std::vector<Formula> flatten_and(const Formula& f);

bool is_valid_identifier(const std::string& name);
std::string prime(const std::string& name);
bool is_primed(const std::string& name);
std::string unprime(const std::string& name);

// ---------------------------------------------------------------- model

enum class Sort { Real, Bool, Program };

struct Definition {
  std::string name;
  Sort sort = Sort::Real;
  Term value;        // optional for Real
  Formula formula;   // Bool
  Program program;   // Program
  Span span;
};

struct Model {
  std::vector<Definition> definitions;
  std::vector<std::string> variables;
  Formula problem;

  const Definition* find(const std::string& name) const;
  bool is_constant(const std::string& name) const;
  bool is_variable(const std::string& name) const;
};

bool equal(const Model& a, const Model& b);

// ------------------------------------------------------------ utilities

// Capture-avoiding substitution of free occurrences; throws CaptureError.
Term substitute(const Term& t, const std::map<std::string, Term>& b);
Formula substitute(const Formula& f, const std::map<std::string, Term>& b);
Program substitute(const Program& p, const std::map<std::string, Term>& b);

// Consistent renaming of every occurrence, bound or free, including x'.
Term rename(const Term& t, const NameMap& m);
Formula rename(const Formula& f, const NameMap& m);
Program rename(const Program& p, const NameMap& m);

// Inlines Pred and Call references; throws CycleError on recursion.
Model expand_abbreviations(const Model& m);
Formula expand(const Formula& f, const Model& m);
Program expand(const Program& p, const Model& m);

// Injective map base -> fresh name (suffix, then numeric bump on collision).
NameMap fresh_names(const NameSet& base, const NameSet& taken, const std::string& suffix);

// All identifiers occurring anywhere (variables, binders, ODE sides, primes).
NameSet all_names(const Term& t);
NameSet all_names(const Formula& f);
NameSet all_names(const Program& p);

// Core terms only: rejects Minus/Neg/Divide/Power/Apply.
bool is_strict_core(const Term& t);
bool is_strict_core(const Formula& f);
bool is_strict_core(const Program& p);

}  // namespace hpsec
