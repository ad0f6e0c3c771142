#pragma once

#include <string>
#include <vector>

#include "hpsec/ast.hpp"
#include "hpsec/syntax.hpp"

namespace hpsec {

struct FlowEdge {
  std::string from;
  std::string to;
  Span site;
};

struct TaintResult {
  NameSet tainted;
  std::vector<FlowEdge> flow_edges;
};

// Flow-insensitive fixpoint: data flow through assignments and ODE right-hand
// sides, plus control flow into branches guarded by a tainted leading test.
TaintResult taint(const Program& p, const NameSet& sensors);

enum class TotalityStatus { Total, Partial, Unknown };
enum class ViolationKind { TaintedOdeDomain, NonExhaustiveTest, UnknownExhaustiveness };

struct Violation {
  ViolationKind kind;
  Span site;
  std::string detail;
};

struct TotalityReport {
  TotalityStatus status = TotalityStatus::Total;
  std::vector<Violation> violations;
  NameSet tainted;
};

enum class Exhaustiveness { Exhaustive, NotExhaustive, Unknown };

// Is the disjunction of the guards valid? Decided by pattern, or exactly when
// every guard compares one variable against a literal.
Exhaustiveness decide_exhaustive(const std::vector<Formula>& guards);

TotalityReport check_totality(const Program& p, const NameSet& sensors);

const char* to_string(TotalityStatus s);
const char* to_string(ViolationKind k);

std::vector<Diagnostic> to_diagnostics(const TotalityReport& r, const std::string& file = "<input>");

}  // namespace hpsec
