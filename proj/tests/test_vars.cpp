#include <gtest/gtest.h>

#include <random>

#include "common.hpp"
#include "hpsec/sim.hpp"
#include "hpsec/transform.hpp"
#include "hpsec/vars.hpp"

using namespace hpsec;
using namespace hpsec::test;

namespace {

Program prog(const std::string& s) { return parse_program_or_throw(s); }
Formula form(const std::string& s) { return parse_formula_or_throw(s); }

Program loop_program(const Model& m) { return split_problem(expand_abbreviations(m)).body; }

// Loop-free, ODE-free programs over four variables.
class DiscreteGen {
 public:
  explicit DiscreteGen(std::uint64_t seed) : g_(seed) {}
  int pick(int n) { return std::uniform_int_distribution<int>(0, n - 1)(g_); }
  std::string name() { return std::string(1, "wxyz"[pick(4)]); }
  Term term(int d) {
    if (d == 0 || pick(3) == 0) return pick(2) ? mk::var(name()) : mk::num(pick(5));
    return pick(2) ? mk::plus(term(d - 1), term(d - 1)) : mk::times(term(d - 1), term(d - 1));
  }
  Program program(int d) {
    if (d == 0 || pick(4) == 0) {
      switch (pick(4)) {
        case 0: return mk::assign_any(name());
        case 1: return mk::test(mk::cmp(static_cast<CmpOp>(pick(6)), term(1), term(1)));
        default: return mk::assign(name(), term(2));
      }
    }
    switch (pick(3)) {
      case 0: return mk::seq(program(d - 1), program(d - 1));
      case 1: return mk::choice(program(d - 1), program(d - 1));
      default:
        return mk::if_then_else(mk::cmp(CmpOp::Gt, term(1), term(1)), program(d - 1), program(d - 1));
    }
  }

 private:
  std::mt19937_64 g_;
};

}  // namespace

TEST(Vars, VehicleLoopProgram) {
  VarSets v = analyze(loop_program(load("vehicle.hp")));
  EXPECT_EQ(v.fv, (NameSet{"A", "B", "eps", "v", "d"}));
  EXPECT_EQ(v.bv, (NameSet{"t", "v", "d", "a", "t'", "v'", "d'"}));
  EXPECT_EQ(v.all, set_union(v.fv, v.bv));
}

TEST(Vars, BaseCases) {
  EXPECT_TRUE(bv_program(prog("?x > 0")).empty());
  EXPECT_EQ(bv_program(prog("x := 5 ++ y := *")), (NameSet{"x", "y"}));
  EXPECT_TRUE(fv_program(prog("x := *")).empty());
  EXPECT_TRUE(fv_program(prog("x := 1; y := x")).empty());
  EXPECT_EQ(bv_program(prog("{x' = y & x > z}")), (NameSet{"x", "x'"}));
  EXPECT_EQ(fv_program(prog("{x' = y & x > z}")), (NameSet{"x", "y", "z"}));
}

TEST(Vars, MustBound) {
  EXPECT_EQ(mbv_program(prog("{?psi; a := A} ++ a := -B")), NameSet{"a"});
  EXPECT_TRUE(mbv_program(prog("x := 1 ++ ?true")).empty());
  EXPECT_TRUE(mbv_program(prog("{x := 1}*")).empty());
  EXPECT_EQ(mbv_program(prog("x := 1; y := *")), (NameSet{"x", "y"}));
}

TEST(Vars, Formulas) {
  EXPECT_EQ(fv_formula(form("\\forall x x > y")), NameSet{"y"});
  EXPECT_EQ(fv_formula(form("[x := 1] x > y")), NameSet{"y"});
  EXPECT_EQ(fv_formula(form("[x := *] x > y")), NameSet{"y"});
  EXPECT_EQ(fv_formula(form("[x := 1 ++ ?true] x > y")), (NameSet{"x", "y"}));
}

// eps does not occur in pre or post, so it is not free there; the voting
// program's FV still contains it.
TEST(Vars, PreAndPostOfVotingModels) {
  for (const char* name : {"vehicle_voting.hp", "temperature_canonical.hp"}) {
    LoopProblem lp = split_problem(expand_abbreviations(load(name)));
    NameSet h = fv_formula(mk::land(lp.pre, lp.post));
    EXPECT_EQ(h, (NameSet{"v_p", "d_p", "A", "B"})) << name;
    EXPECT_TRUE(is_subset(set_union(h, {"eps"}), fv_program(lp.body))) << name;
  }
}

TEST(Vars, PartitionConstants) {
  Model m = load("vehicle.hp");
  auto [consts, vars] = partition_constants({"A", "B", "eps", "v", "d"}, m);
  EXPECT_EQ(consts, (NameSet{"A", "B", "eps"}));
  EXPECT_EQ(vars, (NameSet{"v", "d"}));
}

TEST(VarsProperty, MonotoneAndMustBoundSubset) {
  DiscreteGen gen(3);
  for (int i = 0; i < 500; ++i) {
    Program a = gen.program(3), b = gen.program(3);
    Program s = mk::seq(a, b);
    EXPECT_EQ(bv_program(s), set_union(bv_program(a), bv_program(b)));
    EXPECT_TRUE(is_subset(mbv_program(s), bv_program(s)));
    EXPECT_TRUE(is_subset(mbv_program(a), bv_program(a)));
    VarSets v = analyze(s);
    EXPECT_EQ(v.all, set_union(v.fv, v.bv));
  }
}

// Two starts that agree on FV(p) end in states that agree on FV(p) u MBV(p),
// and variables outside BV(p) keep their start values.
TEST(VarsProperty, CoincidenceUnderSimulation) {
  DiscreteGen gen(11);
  std::mt19937_64 g(5);
  std::uniform_real_distribution<double> u(-5, 5);
  int compared = 0;
  for (int i = 0; i < 400; ++i) {
    Program p = gen.program(4);
    NameSet fv = fv_program(p), mbv = mbv_program(p), bv = bv_program(p);
    State s1, s2;
    for (const char* x : {"w", "x", "y", "z"}) {
      double v = u(g);
      s1.values[x] = v;
      s2.values[x] = fv.count(x) ? v : u(g);
    }
    NondetPolicy pol;
    pol.seed = 1000 + i;
    pol.default_bounds = Bounds{-5, 5, false};
    Trace a = run(p, s1, pol, 5);
    Trace b = run(p, s2, pol, 5);
    ASSERT_EQ(a.terminated, b.terminated) << print(p);
    if (!a.terminated) continue;
    ++compared;
    for (const auto& x : set_union(fv, mbv))
      EXPECT_DOUBLE_EQ(a.final_state.at(x), b.final_state.at(x)) << x << " in " << print(p);
    for (const char* x : {"w", "x", "y", "z"})
      if (!bv.count(x)) EXPECT_EQ(a.final_state.at(x), s1.at(x)) << x << " in " << print(p);
  }
  EXPECT_GT(compared, 100);
}

TEST(VarsProperty, CoincidenceOnCorpusControllers) {
  for (const char* name : {"vehicle_voting.hp", "abs_voting.hp", "mcas_fixed.hp"}) {
    Model m = load(name);
    LoopProblem lp = split_problem(expand_abbreviations(m));
    NameSet fv = fv_program(lp.ctrl), keep = set_union(fv, mbv_program(lp.ctrl));
    NameSet names = set_minus(all_vars(lp.ctrl), {});
    for (auto it = names.begin(); it != names.end();) it = is_primed(*it) ? names.erase(it) : std::next(it);
    NondetPolicy pol;
    pol.default_bounds = Bounds{1, 10, false};
    for (int i = 0; i < 50; ++i) {
      State s1 = sample_state(names, &m, pol, 2 * i);
      State s2 = sample_state(names, &m, pol, 2 * i + 1);
      for (const auto& x : fv) s2.values[x] = s1.values[x];
      pol.seed = i;
      Trace a = run(lp.ctrl, s1, pol, 1), b = run(lp.ctrl, s2, pol, 1);
      ASSERT_EQ(a.terminated, b.terminated);
      for (const auto& x : keep) EXPECT_DOUBLE_EQ(a.final_state.at(x), b.final_state.at(x)) << name << " " << x;
    }
  }
}
