#include <gtest/gtest.h>

#include "common.hpp"
#include "hpsec/ast.hpp"
#include "hpsec/vars.hpp"

using namespace hpsec;
using namespace hpsec::test;

namespace {

Program prog(const std::string& s) { return parse_program_or_throw(s); }
Formula form(const std::string& s) { return parse_formula_or_throw(s); }

}  // namespace

TEST(Equality, IgnoresSpans) {
  Program a = mk::assign("x", mk::num(1), Span{1, 1, 1});
  Program b = mk::assign("x", mk::num(1), Span{7, 3, 1});
  EXPECT_TRUE(equal(a, b));
}

TEST(Equality, DistinguishesStructure) {
  EXPECT_FALSE(equal(prog("x := 1; y := 2"), prog("y := 2; x := 1")));
  EXPECT_FALSE(equal(prog("x := *"), prog("/*@low*/ x := *")));
  EXPECT_FALSE(equal(form("x > 1"), form("1 < x")));
}

TEST(Equality, ModuloSeqReassociates) {
  Program a = prog("{x := 1; y := 2}; z := 3");
  Program b = prog("x := 1; {y := 2; z := 3}");
  EXPECT_FALSE(equal(a, b));
  EXPECT_TRUE(equal_modulo_seq(a, b));
  EXPECT_FALSE(equal_modulo_seq(a, prog("x := 1; z := 3; y := 2")));
}

TEST(Substitute, ReplacesFreeOccurrences) {
  Formula f = form("x > y & \\forall x x = y");
  Formula g = substitute(f, {{"y", mk::var("z")}});
  EXPECT_TRUE(equal(g, form("x > z & \\forall x x = z")));
  Formula h = substitute(f, {{"x", mk::num(3)}});
  EXPECT_TRUE(equal(h, form("3 > y & \\forall x x = y")));
}

TEST(Substitute, RefusesCapture) {
  Formula f = form("\\forall x x > y");
  EXPECT_THROW(substitute(f, {{"y", mk::var("x")}}), Error);
}

TEST(Rename, RenamesPrimesAndBinders) {
  Program p = prog("{x' = y & x >= 0}");
  Program q = rename(p, NameMap{{"x", "x_1"}});
  EXPECT_TRUE(equal(q, prog("{x_1' = y & x_1 >= 0}")));
}

TEST(FreshNames, AvoidsTakenNames) {
  NameMap m = fresh_names({"a", "b"}, {"a", "b", "a_1"}, "_1");
  EXPECT_EQ(m.at("b"), "b_1");
  EXPECT_NE(m.at("a"), "a_1");
  EXPECT_NE(m.at("a"), m.at("b"));
  for (const auto& [k, v] : m) EXPECT_TRUE(is_valid_identifier(v)) << v;
}

TEST(FreshNames, InjectiveOnLargeSets) {
  NameSet base, taken;
  for (int i = 0; i < 50; ++i) {
    base.insert("v" + std::to_string(i));
    taken.insert("v" + std::to_string(i) + "_1");
  }
  taken.insert(base.begin(), base.end());
  NameMap m = fresh_names(base, taken, "_1");
  NameSet images;
  for (const auto& [k, v] : m) {
    EXPECT_FALSE(taken.count(v)) << v;
    images.insert(v);
  }
  EXPECT_EQ(images.size(), base.size());
}

TEST(Expand, InlinesDefinitions) {
  Model m = load("vehicle.hp");
  Model e = expand_abbreviations(m);
  EXPECT_TRUE(is_subset({"A", "B", "eps", "v", "d"}, fv_formula(e.problem)));
  // Nothing left to inline.
  std::function<bool(const Program&)> has_call = [&](const Program& p) {
    if (p->kind == ProgramKind::Call) return true;
    for (const auto& s : p->subs)
      if (has_call(s)) return true;
    return false;
  };
  EXPECT_FALSE(has_call(e.problem->subs[1]->program));
}

TEST(Expand, RejectsCycles) {
  std::string src =
      "Definitions.\n HP a ::= b.\n HP b ::= a.\nProgramVariables.\n R x.\nProblem.\n [a]x>0\nEnd.";
  EXPECT_FALSE(std::holds_alternative<Model>(parse_model(src)));
}

TEST(Identifiers, PrimesAndValidity) {
  EXPECT_TRUE(is_primed("x'"));
  EXPECT_EQ(unprime("x'"), "x");
  EXPECT_EQ(prime("v_p"), "v_p'");
  EXPECT_TRUE(is_valid_identifier("temp_s_1"));
  EXPECT_FALSE(is_valid_identifier("1x"));
  EXPECT_FALSE(is_valid_identifier("if"));
}

TEST(StrictCore, FlagsSugar) {
  EXPECT_TRUE(is_strict_core(prog("x := x + 2*y")));
  EXPECT_FALSE(is_strict_core(prog("x := x - y")));
  EXPECT_FALSE(is_strict_core(prog("x := exp(y)")));
}
