#include <gtest/gtest.h>

#include <random>

#include "common.hpp"
#include "hpsec/sim.hpp"
#include "hpsec/total.hpp"
#include "hpsec/transform.hpp"

using namespace hpsec;
using namespace hpsec::test;

namespace {

Program body_of(const char* file) { return split_problem(expand_abbreviations(load(file))).body; }

Formula form(const std::string& s) { return parse_formula_or_throw(s); }

// Exact for guards of the form `var op literal`: checking the literals, the
// midpoints between them and one point beyond each end covers every sign region.
bool covered_everywhere(const std::vector<Formula>& guards, const std::vector<std::string>& vars,
                        const std::vector<double>& literals) {
  std::vector<double> pts(literals.begin(), literals.end());
  std::sort(pts.begin(), pts.end());
  std::vector<double> cand = pts;
  for (size_t i = 0; i + 1 < pts.size(); ++i) cand.push_back((pts[i] + pts[i + 1]) / 2);
  cand.push_back(pts.front() - 1);
  cand.push_back(pts.back() + 1);
  std::vector<size_t> idx(vars.size(), 0);
  while (true) {
    State s;
    for (size_t i = 0; i < vars.size(); ++i) s.values[vars[i]] = cand[idx[i]];
    bool any = false;
    for (const auto& g : guards) any = any || holds(g, s);
    if (!any) return false;
    size_t i = 0;
    while (i < vars.size() && ++idx[i] == cand.size()) idx[i++] = 0;
    if (i == vars.size()) return true;
  }
}

}  // namespace

TEST(Taint, TemperatureFlows) {
  TaintResult t = taint(body_of("temperature.hp"), {"temp_s"});
  EXPECT_EQ(t.tainted, (NameSet{"temp_s", "thermo", "temp_p"}));
  bool seen = false;
  for (const auto& e : t.flow_edges) seen = seen || (e.from == "temp_s" && e.to == "thermo");
  EXPECT_TRUE(seen);
}

TEST(Taint, BusCarriesToVelocity) {
  TaintResult t = taint(body_of("bus.hp"), {"temp_s"});
  for (const char* x : {"busV", "a", "v_p", "d_p"}) EXPECT_TRUE(t.tainted.count(x)) << x;
}

TEST(Totality, TemperatureIsTotal) {
  TotalityReport r = check_totality(body_of("temperature.hp"), {"temp_s"});
  EXPECT_EQ(r.status, TotalityStatus::Total);
  EXPECT_TRUE(r.violations.empty());
}

TEST(Totality, BlockingTestIsPartial) {
  TotalityReport r = check_totality(body_of("partial_test.hp"), {"a"});
  EXPECT_EQ(r.status, TotalityStatus::Partial);
  ASSERT_EQ(r.violations.size(), 1u);
  EXPECT_EQ(r.violations[0].kind, ViolationKind::NonExhaustiveTest);
  EXPECT_EQ(r.violations[0].site.line, 9);
  EXPECT_EQ(r.violations[0].site.col, 23);
  auto ds = to_diagnostics(r, "p.hp");
  ASSERT_EQ(ds.size(), 1u);
  EXPECT_EQ(render(ds[0]).rfind("p.hp:9:23:", 0), 0u);
}

TEST(Totality, TaintedDomainIsPartial) {
  TotalityReport r = check_totality(body_of("partial_ode.hp"), {"a"});
  EXPECT_EQ(r.status, TotalityStatus::Partial);
  ASSERT_EQ(r.violations.size(), 1u);
  EXPECT_EQ(r.violations[0].kind, ViolationKind::TaintedOdeDomain);
  EXPECT_EQ(r.violations[0].site.line, 9);
}

TEST(Totality, UntaintedTestsAreIgnored) {
  EXPECT_EQ(check_totality(body_of("partial_test.hp"), {}).status, TotalityStatus::Total);
}

TEST(Exhaustive, Patterns) {
  EXPECT_EQ(decide_exhaustive({form("x > T"), form("x < T"), form("x = T")}), Exhaustiveness::Exhaustive);
  EXPECT_EQ(decide_exhaustive({form("x >= y"), form("x < y")}), Exhaustiveness::Exhaustive);
  EXPECT_EQ(decide_exhaustive({form("x > 0")}), Exhaustiveness::NotExhaustive);
  EXPECT_EQ(decide_exhaustive({form("m = 0"), form("m = 1")}), Exhaustiveness::NotExhaustive);
  EXPECT_EQ(decide_exhaustive({form("true")}), Exhaustiveness::Exhaustive);
  EXPECT_EQ(decide_exhaustive({form("x*y > 0"), form("x + y < 3")}), Exhaustiveness::Unknown);
}

TEST(ExhaustiveProperty, AgreesWithRegionOracle) {
  std::mt19937_64 g(17);
  auto pick = [&](int n) { return std::uniform_int_distribution<int>(0, n - 1)(g); };
  int decided = 0;
  for (int i = 0; i < 2000; ++i) {
    std::vector<std::string> vars = pick(2) ? std::vector<std::string>{"x"} : std::vector<std::string>{"x", "y"};
    std::vector<Formula> guards;
    std::vector<double> lits;
    for (int k = 0, n = 1 + pick(4); k < n; ++k) {
      int lit = pick(4) - 1;
      lits.push_back(lit);
      Term v = mk::var(vars[pick(static_cast<int>(vars.size()))]);
      Term c = mk::num(lit);
      auto op = static_cast<CmpOp>(pick(6));
      guards.push_back(pick(2) ? mk::cmp(op, v, c) : mk::cmp(op, c, v));
    }
    Exhaustiveness e = decide_exhaustive(guards);
    ASSERT_NE(e, Exhaustiveness::Unknown);
    bool expect = covered_everywhere(guards, vars, lits);
    EXPECT_EQ(e == Exhaustiveness::Exhaustive, expect);
    ++decided;
  }
  EXPECT_EQ(decided, 2000);
}
