#include <gtest/gtest.h>

#include <cmath>
#include <sstream>

#include "common.hpp"
#include "hpsec/sim.hpp"
#include "hpsec/transform.hpp"

using namespace hpsec;
using namespace hpsec::test;

namespace {

Program prog(const std::string& s) { return parse_program_or_throw(s); }

State state(std::initializer_list<std::pair<const std::string, double>> vs) {
  State s;
  s.values = vs;
  return s;
}

NondetPolicy max_flow(double t_max, double dt) {
  NondetPolicy p;
  p.duration_rule = NondetPolicy::DurationRule::Max;
  p.t_max = t_max;
  p.dt = dt;
  return p;
}

// Bounds used for every vehicle run: positive constants, nonnegative speed.
NondetPolicy vehicle_policy(std::uint64_t seed) {
  NondetPolicy p;
  p.seed = seed;
  p.default_bounds = Bounds{-10, 10, false};
  p.assign_bounds = {{"eps", {0.05, 0.5, false}}, {"A", {0.5, 5, false}}, {"B", {0.5, 5, false}},
                     {"v_p", {0, 10, false}}};
  p.dt = 5e-4;
  return p;
}

CompositionResult composed(const char* file, const std::vector<std::string>& eq) {
  CanonicalModel c = canonicalize(load(file), {});
  return compose(c, {"temp_s"}, eq, make_renaming(c));
}

}  // namespace

TEST(Sim, DiscreteSemantics) {
  Trace t = run(prog("x := 1; x := x + 1"), State{}, NondetPolicy{}, 1);
  ASSERT_TRUE(t.terminated);
  EXPECT_EQ(t.final_state.at("x"), 2);
  EXPECT_FALSE(run(prog("?false"), State{}, NondetPolicy{}, 1).terminated);
  EXPECT_TRUE(run(prog("?true"), State{}, NondetPolicy{}, 1).terminated);
}

TEST(Sim, UnboundedAssignRejected) {
  try {
    run(prog("x := *"), State{}, NondetPolicy{}, 1);
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.kind(), "UnboundedAssign");
  }
}

TEST(Sim, ScriptedAssignments) {
  NondetPolicy p;
  p.script = {3, 4};
  Trace t = run(prog("x := *; y := *"), State{}, p, 1);
  EXPECT_EQ(t.final_state.at("x"), 3);
  EXPECT_EQ(t.final_state.at("y"), 4);
}

TEST(Sim, Rk4IsFourthOrder) {
  Program p = prog("{x' = x, t' = 1 & t <= 1}");
  auto err = [&](double h) {
    Trace t = run(p, state({{"x", 1}, {"t", 0}}), max_flow(1, h), 1);
    return std::abs(t.final_state.at("x") - std::exp(1.0));
  };
  double slope = std::log(err(0.1) / err(0.05)) / std::log(2.0);
  EXPECT_GE(slope, 3.7);
  EXPECT_LT(err(0.01), 1e-9);
}

TEST(Sim, BrakingStopsAtDomainBoundary) {
  Program p = prog("{x' = v, v' = -B, t' = 1 & v >= 0}");
  Trace t = run(p, state({{"x", 0}, {"v", 10}, {"B", 2}, {"t", 0}}), max_flow(10, 1e-3), 1);
  ASSERT_TRUE(t.terminated);
  EXPECT_NEAR(t.final_state.at("t"), 5, 1e-6);
  EXPECT_NEAR(t.final_state.at("x"), 25, 1e-5);
  EXPECT_NEAR(t.final_state.at("v"), 0, 1e-5);
}

TEST(Sim, FlowRespectsDomain) {
  Program p = prog("{x' = 1, t' = 1 & x <= 2}");
  for (std::uint64_t seed = 0; seed < 20; ++seed) {
    NondetPolicy pol;
    pol.seed = seed;
    pol.t_max = 5;
    pol.dt = 1e-2;
    Trace t = run(p, state({{"x", 0}, {"t", 0}}), pol, 1);
    for (const auto& seg : t.segments)
      for (const auto& s : seg.samples) EXPECT_LE(s.state.at("x"), 2 + 1e-9);
  }
  EXPECT_FALSE(run(p, state({{"x", 3}, {"t", 0}}), max_flow(1, 1e-2), 1).terminated);
}

TEST(Sim, DeterministicForSeed) {
  Program p = split_problem(expand_abbreviations(load("vehicle.hp"))).body;
  Model m = load("vehicle.hp");
  NondetPolicy pol = vehicle_policy(9);
  State s0 = sample_state({"A", "B", "eps", "v", "d", "t", "a"}, &m, pol, 4);
  s0.values["v"] = 1;
  s0.values["d"] = 100;
  Trace a = run(mk::loop(p), s0, pol, 10), b = run(mk::loop(p), s0, pol, 10);
  std::ostringstream ca, cb;
  write_csv(a, ca);
  write_csv(b, cb);
  EXPECT_EQ(ca.str(), cb.str());
  EXPECT_EQ(a.iterations, 10);
  pol.seed = 10;
  std::ostringstream cc;
  write_csv(run(mk::loop(p), s0, pol, 10), cc);
  EXPECT_NE(ca.str(), cc.str());
}

TEST(Sim, CsvHeader) {
  Trace t = run(prog("x := 1; y := 2"), State{}, NondetPolicy{}, 1);
  std::ostringstream out;
  write_csv(t, out);
  EXPECT_EQ(out.str().substr(0, out.str().find('\n')), "time,x,y");
}

TEST(CheckComposition, TemperatureHoldsAtBoundaries) {
  Model m = load("temperature.hp");
  CompositionResult r = composed("temperature.hp", {"v_p", "d_p"});
  CompositionCheck cfg;
  cfg.constants = &m;
  cfg.n_runs = 50;
  cfg.assumption = split_problem(expand_abbreviations(m)).pre;
  SimulationReport rep = check_composition(r, vehicle_policy(1), cfg);
  EXPECT_EQ(rep.runs, 50);
  EXPECT_TRUE(rep.eq_violations.empty());
  EXPECT_LT(rep.failures, rep.runs / 2);
  EXPECT_GT(rep.iterations, 0);
  EXPECT_LE(rep.max_eq_residual, cfg.tol);
}

TEST(CheckComposition, BusHoldsAtBoundaries) {
  Model m = load("bus.hp");
  CompositionResult r = composed("bus.hp", {"v_p", "d_p", "a"});
  CompositionCheck cfg;
  cfg.constants = &m;
  cfg.n_runs = 50;
  cfg.assumption = split_problem(expand_abbreviations(m)).pre;
  NondetPolicy pol = vehicle_policy(2);
  pol.low_names = {"busH"};
  SimulationReport rep = check_composition(r, pol, cfg);
  EXPECT_TRUE(rep.eq_violations.empty());
  EXPECT_GT(rep.iterations, 0);
}

TEST(CheckComposition, DetectsBrokenCoupling) {
  // Coupling is lost once the temperature reading feeds the acceleration.
  std::string src = read_file(corpus("temperature.hp"));
  src.replace(src.find("a := A"), 6, "a := A + temp_s - temp_p");
  Model m = parse_model_or_throw(src);
  CanonicalModel c = canonicalize(m, {});
  CompositionResult r = compose(c, {"temp_s"}, {"v_p", "d_p"}, make_renaming(c));
  CompositionCheck cfg;
  cfg.constants = &m;
  cfg.n_runs = 50;
  SimulationReport rep = check_composition(r, vehicle_policy(3), cfg);
  EXPECT_FALSE(rep.eq_violations.empty());
}

TEST(Falsify, SensedVehicleDiverges) {
  Model m = load("vehicle_sensed.hp");
  LoopProblem lp = split_problem(expand_abbreviations(m));
  FalsifyConfig cfg;
  cfg.constants = &m;
  cfg.assumption = lp.pre;
  cfg.budget = 200;
  auto cand = falsify_equiv(mk::loop(lp.body), {"v_s"}, {"d_p"}, vehicle_policy(5), cfg);
  ASSERT_TRUE(cand.has_value());
  EXPECT_FALSE(cand->diverged.empty());
}

TEST(Falsify, TemperatureDoesNotReachVelocity) {
  Model m = load("temperature.hp");
  LoopProblem lp = split_problem(expand_abbreviations(m));
  FalsifyConfig cfg;
  cfg.constants = &m;
  cfg.assumption = lp.pre;
  cfg.budget = 100;
  EXPECT_FALSE(falsify_equiv(mk::loop(lp.body), {"temp_s"}, {"v_p", "d_p"}, vehicle_policy(6), cfg));
  EXPECT_FALSE(falsify_equiv(mk::loop(lp.body), {}, {"v_p", "d_p"}, vehicle_policy(6), cfg));
}
