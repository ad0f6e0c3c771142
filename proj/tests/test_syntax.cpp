#include <gtest/gtest.h>

#include "common.hpp"
#include "gen.hpp"
#include "hpsec/ast.hpp"

using namespace hpsec;
using namespace hpsec::test;

TEST(RoundTrip, RandomProgramsSurvivePrintParse) {
  Gen gen(20261016);
  for (int i = 0; i < 1000; ++i) {
    Program p = gen.program(4);
    std::string text = print(p);
    auto r = parse_program(text);
    ASSERT_TRUE(std::holds_alternative<Program>(r)) << text << "\n" << render(std::get<1>(r));
    EXPECT_TRUE(equal(std::get<Program>(r), p)) << text << "\n" << print(std::get<Program>(r));
  }
}

TEST(RoundTrip, RandomFormulasSurvivePrintParse) {
  Gen gen(7);
  for (int i = 0; i < 1000; ++i) {
    Formula f = gen.formula(4);
    std::string text = print(f);
    auto r = parse_formula(text);
    ASSERT_TRUE(std::holds_alternative<Formula>(r)) << text << "\n" << render(std::get<1>(r));
    EXPECT_TRUE(equal(std::get<Formula>(r), f)) << text << "\n" << print(std::get<Formula>(r));
  }
}

TEST(RoundTrip, CorpusModels) {
  for (const char* name : {"vehicle.hp", "vehicle_sensed.hp", "vehicle_voting.hp", "temperature.hp",
                           "temperature_canonical.hp", "temperature_composed.hp", "bus.hp", "bus_composed.hp", "abs.hp",
                           "abs_voting.hp", "mcas_fixed.hp", "mcas_unfixed.hp", "partial_test.hp", "partial_ode.hp",
                           "converse.hp"}) {
    Model m = load(name);
    std::string text = print_model(m);
    Model again = parse_model_or_throw(text, name);
    EXPECT_TRUE(equal(m, again)) << name;
    EXPECT_EQ(print_model(again), text) << name;
  }
}

TEST(Parse, ExactDecimalConstants) {
  auto r = parse_term("0.1 + 1.5e-3");
  ASSERT_TRUE(std::holds_alternative<Term>(r));
  const Term& t = std::get<Term>(r);
  ASSERT_EQ(t->kind, TermKind::Plus);
  EXPECT_EQ(t->args[0]->value, Rational(1, 10));
  EXPECT_EQ(t->args[1]->value, Rational(3, 2000));
}

TEST(Parse, UnicodeAndAsciiAgree) {
  Formula a = parse_formula_or_throw("x ≥ 0 ∧ ¬y ≤ 1 → z ≠ 2");
  Formula b = parse_formula_or_throw("x >= 0 & !y <= 1 -> z != 2");
  EXPECT_TRUE(equal(a, b));
}

TEST(Parse, LowAnnotation) {
  Program p = parse_program_or_throw("/*@low*/ {x := 1 ++ x := 2}; /*@low*/ y := *");
  auto items = flatten_seq(p);
  ASSERT_EQ(items.size(), 2u);
  EXPECT_TRUE(items[0]->low);
  EXPECT_TRUE(items[1]->low);
  EXPECT_FALSE(parse_program_or_throw("/* plain */ y := *")->low);
}

TEST(Parse, ChoiceGuardSugarOnRealVariable) {
  Model m = load("temperature_canonical.hp");
  const Definition* ctrl = m.find("ctrl");
  ASSERT_NE(ctrl, nullptr);
  std::string text = print(ctrl->program);
  EXPECT_NE(text.find("if (c!=0) then accel else brake"), std::string::npos) << text;
}

TEST(Diagnostics, UndeclaredVariableHasSpan) {
  std::string src = "ProgramVariables.\n  R x.\nProblem.\n  [x := y]x > 0\nEnd.";
  auto r = parse_model(src, "m.hp");
  ASSERT_TRUE(std::holds_alternative<std::vector<Diagnostic>>(r));
  const auto& ds = std::get<std::vector<Diagnostic>>(r);
  ASSERT_FALSE(ds.empty());
  EXPECT_EQ(ds[0].span.line, 4);
  EXPECT_NE(ds[0].message.find("'y'"), std::string::npos);
  EXPECT_EQ(render(ds[0]).rfind("m.hp:4:", 0), 0u);
}

TEST(Diagnostics, SyntaxErrorPosition) {
  auto r = parse_model("Problem.\n  x > \nEnd.", "m.hp");
  ASSERT_TRUE(std::holds_alternative<std::vector<Diagnostic>>(r));
  EXPECT_GE(std::get<1>(r)[0].span.line, 2);
}

TEST(Diagnostics, AssignToConstantRejected) {
  std::string src = "Definitions.\n R A = 1.\nProgramVariables.\n R x.\nProblem.\n [A := 2]x > 0\nEnd.";
  EXPECT_TRUE(std::holds_alternative<std::vector<Diagnostic>>(parse_model(src)));
}

TEST(Fuzz, ParserNeverThrowsOnMutatedInput) {
  FuzzResult r = fuzz_parser(100000, 99);
  EXPECT_TRUE(r.failure.empty()) << r.failure;
  EXPECT_EQ(r.inputs, 100000);
  EXPECT_GT(r.models, 0);
}

TEST(Fuzz, DeepNestingIsAnError) {
  std::string s(100000, '{');
  auto r = parse_program(s);
  EXPECT_TRUE(std::holds_alternative<std::vector<Diagnostic>>(r));
  std::string t(100000, '(');
  EXPECT_TRUE(std::holds_alternative<std::vector<Diagnostic>>(parse_term(t)));
}

TEST(Kyx, EmitsArchiveStructure) {
  Model m = load("temperature_composed.hp");
  std::string k = emit_kyx(m);
  EXPECT_EQ(k.rfind("ArchiveEntry \"model\"", 0), 0u);
  for (const char* part : {"Definitions", "ProgramVariables", "Problem", "HP ctrlC ::=", "Real d_p_1;", "c_1 := c;"})
    EXPECT_NE(k.find(part), std::string::npos) << part;
  EXPECT_EQ(k.find("/*@low*/"), std::string::npos);
}

TEST(Kyx, RejectsUnknownFunctionImage) {
  Model m = load("abs.hp");
  KyxOptions opts;
  opts.allow_exp = false;
  EXPECT_THROW(emit_kyx(m, opts), Error);
  EXPECT_NO_THROW(emit_kyx(m));
}
