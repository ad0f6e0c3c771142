#pragma once

#include <cstdint>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include <json.hpp>

#include "hpsec/ast.hpp"
#include "hpsec/sim.hpp"

namespace hpsec {

// left and right are H-equivalent.
struct EquivGoal {
  Program left;
  Program right;
  NameSet h;
};

enum class Rule { Self, Subset, Unmodified, SeqCompose, LoopLift, BaseOracle, Assumed };

const char* to_string(Rule r);
std::optional<Rule> rule_from_string(const std::string& s);

struct SideCondition {
  std::string description;
  std::vector<NameSet> sets;
};

struct OracleReport {
  bool pass = false;
  int states = 0;        // start states sampled
  int end_states = 0;    // end states enumerated over both sides
  int n_values = 0;      // samples per any-assignment site
  std::uint64_t seed = 0;
  std::string goal_digest;
  // On failure: start state, the unmatched end projection, and its side.
  std::optional<State> witness_start;
  std::optional<State> witness_end;
  std::string witness_side;
};

struct Certificate {
  EquivGoal goal;
  Rule rule = Rule::Self;
  std::vector<SideCondition> side_conditions;
  std::vector<Certificate> children;
  std::optional<OracleReport> oracle_report;

  // No BaseOracle or Assumed node anywhere.
  bool deductive() const;
};

struct CheckOptions {
  bool allow_assumed = false;
};

// Reason the certificate is rejected, or nullopt when every node verifies.
std::optional<std::string> certificate_error(const Certificate& c, const CheckOptions& opts = {});
bool check_certificate(const Certificate& c, const CheckOptions& opts = {});

// Side conditions of a node, recomputed from its goal and children.
std::vector<SideCondition> side_conditions_for(const Certificate& c);

std::string goal_digest(const EquivGoal& g);

struct OracleConfig {
  int n_states = 200;
  int n_values = 8;
  std::uint64_t seed = 0;
  Bounds default_bounds{-10, 10, false};
  std::map<std::string, Bounds> bounds;
  const Model* constants = nullptr;
};

// Bounded check of loop-free equivalence in both directions on H.
// Throws Unsupported when either side has a loop or an ODE.
OracleReport base_oracle(const EquivGoal& goal, const OracleConfig& cfg);

struct StrategyConfig {
  OracleConfig oracle;
};

struct ProofResult {
  std::optional<Certificate> certificate;  // empty means Unproven
  std::vector<std::string> notes;          // one line per split attempted
};

ProofResult prove_equiv(const EquivGoal& goal, const StrategyConfig& strategy);

enum class Verdict { RobustlySafeDeductive, RobustlySafeEmpirical, Unproven };
const char* to_string(Verdict v);

struct RobustSafetyVerdict {
  Verdict status = Verdict::Unproven;
  std::optional<Certificate> certificate;
  NameSet h_used;
  std::vector<std::string> notes;
};

// Throws ShapeError unless the problem is pre -> [loop]post.
RobustSafetyVerdict check_robust_safety(const Model& model, const NameSet& sensors, const StrategyConfig& strategy);

// Goal eq(P, attacked(P, sensors), h) for the loop of a pre -> [loop]post model.
EquivGoal state_goal(const Model& model, const NameSet& sensors, const NameSet& h);

nlohmann::json to_json(const Certificate& c);
// Programs are re-parsed from their printed form; throws ParseError.
Certificate certificate_from_json(const nlohmann::json& j);

}  // namespace hpsec
