#pragma once

#include <cstdint>
#include <functional>
#include <iosfwd>
#include <map>
#include <optional>
#include <string>
#include <utility>
#include <vector>

#include "hpsec/ast.hpp"
#include "hpsec/transform.hpp"

namespace hpsec {

struct State {
  std::map<std::string, double> values;
  bool failed = false;

  double at(const std::string& name) const;
};

struct Sample {
  double time;
  State state;
};

struct Segment {
  enum class Kind { Point, Flow } kind = Kind::Point;
  double start = 0;     // absolute time at which the segment begins
  double duration = 0;
  std::vector<Sample> samples;  // point: absolute time; flow: time since start
};

struct Trace {
  std::vector<Segment> segments;
  bool terminated = true;  // false when the run got stuck (a test or domain failed)
  bool truncated = false;  // loop stopped by the iteration cap
  int iterations = 0;
  std::vector<State> boundaries;  // outermost loop: initial state, then after each iteration
  State final_state;
};

struct Bounds {
  double lo = 0;
  double hi = 0;
  bool integer = false;
};

struct NondetPolicy {
  std::uint64_t seed = 0;
  enum class BranchRule { Uniform, First } branch_rule = BranchRule::Uniform;
  enum class DurationRule { Uniform, Max } duration_rule = DurationRule::Uniform;
  std::map<std::string, Bounds> assign_bounds;
  std::optional<Bounds> default_bounds;
  double t_max = 1.0;
  double dt = 1e-3;
  double loop_exit_prob = 0;
  int retries = 20;
  bool record = true;  // keep point and flow samples in the trace
  // Any-assignments to these names, and `/*@low*/` sites, draw from the low
  // stream so that high-integrity draws stay aligned across coupled runs.
  NameSet low_names;
  // When non-empty, high-stream any-assignments take these values in order.
  std::vector<double> script;
  // Called with each resolved choice and the index of the branch taken.
  std::function<void(const ProgramNode&, size_t)> on_choice;

  const Bounds& bounds_for(const std::string& name) const;  // throws UnboundedAssign
};

// Throws NumericOverflow, UnboundedAssign, UndefinedVariable.
Trace run(const Program& p, const State& init, const NondetPolicy& policy, int max_loop_iters);

// Samples every name from the policy bounds; definitions with a value are fixed.
State sample_state(const NameSet& names, const Model* constants, const NondetPolicy& policy, std::uint64_t seed);

bool holds(const Formula& f, const State& s);
double eval(const Term& t, const State& s);

struct EqViolation {
  int run = 0;
  int iteration = 0;
  std::uint64_t seed = 0;
  double residual = 0;
  State left;
  State right;
};

struct SimulationReport {
  int runs = 0;
  int failures = 0;   // runs that got stuck or overflowed
  int truncated = 0;  // runs stopped by the iteration cap
  int iterations = 0; // loop boundaries checked
  std::vector<EqViolation> eq_violations;
  double max_eq_residual = 0;
  double wall_time = 0;
};

struct CompositionCheck {
  int n_runs = 100;
  int max_loop_iters = 20;
  double tol = 1e-6;
  Formula assumption;  // optional extra constraint on initial states
  const Model* constants = nullptr;
};

// Empirical check of eq -> [C]eq at loop boundaries.
SimulationReport check_composition(const CompositionResult& comp, const NondetPolicy& policy,
                                   const CompositionCheck& cfg);

struct CandidateCounterexample {
  int run = 0;
  int iteration = 0;
  std::uint64_t seed = 0;
  State original;
  State attacked;
  std::vector<std::string> diverged;
  // True when the original is deterministic given coupled choices and
  // durations, which makes the candidate a genuine counterexample.
  bool original_deterministic = false;
};

struct FalsifyConfig {
  int budget = 1000;
  int max_loop_iters = 20;
  double tol = 1e-6;
  Formula assumption;
  const Model* constants = nullptr;
};

std::optional<CandidateCounterexample> falsify_equiv(const Program& original, const NameSet& sensors,
                                                     const NameSet& h, const NondetPolicy& policy,
                                                     const FalsifyConfig& cfg);

// Columns: time, then variables in sorted order.
void write_csv(const Trace& t, std::ostream& out);

}  // namespace hpsec
