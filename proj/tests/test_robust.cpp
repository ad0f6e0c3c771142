#include <gtest/gtest.h>

#include <random>

#include "common.hpp"
#include "hpsec/attack.hpp"
#include "hpsec/robust.hpp"
#include "hpsec/transform.hpp"
#include "hpsec/vars.hpp"

using namespace hpsec;
using namespace hpsec::test;
using nlohmann::json;

namespace {

Program prog(const std::string& s) { return parse_program_or_throw(s); }

const char* kVoting =
    "v_s1 := v_p; v_s2 := v_p; v_s3 := v_p; if (v_s1 = v_s2 | v_s1 = v_s3) then v_s := v_s1 else v_s := v_s2";

Certificate node(Program l, Program r, NameSet h, Rule rule, std::vector<Certificate> kids = {}) {
  Certificate c;
  c.goal = {std::move(l), std::move(r), std::move(h)};
  c.rule = rule;
  c.children = std::move(kids);
  return c;
}

Certificate& with_sides(Certificate& c) {
  for (auto& k : c.children) with_sides(k);
  c.side_conditions = side_conditions_for(c);
  return c;
}

// Hand-written voting derivation: oracle on the voting prefix,
// widened by Unmodified, composed with the untouched rest, lifted to the loop
// and narrowed to the free variables of pre and post.
Certificate voting_derivation() {
  Program a = prog(kVoting);
  Program b = attack(a, {"v_s1"}).first;
  Program c = prog(
      "d_s := d_p; {?2*B*d_s > v_s^2 + (A+B)*(A*eps^2 + 2*v_s*eps); a := A ++ a := -B}; t := 0;"
      "{d_p' = -v_p, v_p' = a, t' = 1 & v_p >= 0 & t <= eps}");
  NameSet h_star{"A", "B", "d_p", "eps", "v_p", "v_s"};
  Certificate base = node(a, b, {"v_p", "v_s"}, Rule::BaseOracle);
  OracleConfig cfg;
  base.oracle_report = base_oracle(base.goal, cfg);
  Certificate unmod = node(a, b, h_star, Rule::Unmodified, {base});
  Certificate self = node(c, c, h_star, Rule::Self);
  Certificate seq = node(mk::seq(a, c), mk::seq(b, c), h_star, Rule::SeqCompose, {unmod, self});
  Certificate lift = node(mk::loop(mk::seq(a, c)), mk::loop(mk::seq(b, c)), h_star, Rule::LoopLift, {seq});
  Certificate root = node(lift.goal.left, lift.goal.right, {"A", "B", "d_p", "v_p"}, Rule::Subset, {lift});
  return with_sides(root);
}

StrategyConfig strategy() { return StrategyConfig{}; }

std::vector<json*> json_nodes(json& j) {
  std::vector<json*> out{&j};
  for (auto& k : j["children"])
    for (json* n : json_nodes(k)) out.push_back(n);
  return out;
}

}  // namespace

TEST(BaseOracle, VotingMasksOneSensor) {
  Program a = prog(kVoting);
  OracleReport r = base_oracle({a, attack(a, {"v_s1"}).first, {"v_s", "v_p"}}, OracleConfig{});
  EXPECT_TRUE(r.pass);
  EXPECT_EQ(r.states, 200);
  EXPECT_FALSE(r.witness_start.has_value());
}

TEST(BaseOracle, UnvotedSensorFails) {
  OracleReport r = base_oracle({prog("v_s := v_p"), prog("v_s := *"), {"v_s"}}, OracleConfig{});
  EXPECT_FALSE(r.pass);
  ASSERT_TRUE(r.witness_start && r.witness_end);
  // The honest end state v_s = v_p has no match among the sampled values.
  EXPECT_EQ(r.witness_side, "left");
  EXPECT_EQ(r.witness_end->at("v_s"), r.witness_start->at("v_p"));
}

TEST(BaseOracle, IdenticalProgramsPass) {
  Program p = prog("{x := 1 ++ x := y}; z := *");
  OracleReport r = base_oracle({p, p, {"x", "z"}}, OracleConfig{});
  EXPECT_TRUE(r.pass);
}

TEST(BaseOracle, ChecksBothDirections) {
  // Every end state of the left has a match on the right, not conversely.
  OracleReport r = base_oracle({prog("x := 1"), prog("{x := 1 ++ x := 2}"), {"x"}}, OracleConfig{});
  EXPECT_FALSE(r.pass);
  EXPECT_EQ(r.witness_side, "right");
}

TEST(BaseOracle, RejectsLoopsAndOdes) {
  EXPECT_THROW(base_oracle({prog("{x := 1}*"), prog("x := 1"), {"x"}}, OracleConfig{}), Error);
  EXPECT_THROW(base_oracle({prog("{x' = 1}"), prog("x := 1"), {"x"}}, OracleConfig{}), Error);
}

TEST(Certificate, HandWrittenVotingDerivationChecks) {
  Certificate c = voting_derivation();
  EXPECT_EQ(certificate_error(c), std::nullopt) << *certificate_error(c);
  EXPECT_FALSE(c.deductive());
}

TEST(Certificate, SelfNeedsEqualPrograms) {
  Certificate c = node(prog("x := 1"), prog("x := 2"), {"x"}, Rule::Self);
  EXPECT_FALSE(check_certificate(with_sides(c)));
  Certificate ok = node(prog("{x := 1; y := 2}; z := 3"), prog("x := 1; {y := 2; z := 3}"), {"x"}, Rule::Self);
  EXPECT_TRUE(check_certificate(with_sides(ok)));
}

TEST(Certificate, SeqComposeNeedsFvSideCondition) {
  Certificate c = voting_derivation();
  Certificate& seq = c.children[0].children[0];
  ASSERT_EQ(seq.rule, Rule::SeqCompose);
  seq.side_conditions.clear();
  EXPECT_FALSE(check_certificate(c));
  // H too small for the continuation.
  Certificate d = voting_derivation();
  Certificate& lift = d.children[0];
  for (Certificate* n : {&lift, &lift.children[0], &lift.children[0].children[0], &lift.children[0].children[1]})
    n->goal.h.erase("eps");
  d.goal.h = {"d_p"};
  with_sides(d);
  EXPECT_FALSE(check_certificate(d));
}

TEST(Certificate, AssumedOnlyWhenAllowed) {
  Certificate c = node(prog("x := 1"), prog("x := *"), {"x"}, Rule::Assumed);
  with_sides(c);
  EXPECT_FALSE(check_certificate(c));
  EXPECT_TRUE(check_certificate(c, CheckOptions{true}));
  EXPECT_FALSE(c.deductive());
}

TEST(Certificate, JsonRoundTrip) {
  Certificate c = voting_derivation();
  json j = to_json(c);
  Certificate back = certificate_from_json(j);
  EXPECT_EQ(to_json(back), j);
  EXPECT_TRUE(check_certificate(back));
  EXPECT_TRUE(j.contains("side_conditions"));
  EXPECT_EQ(j["rule"], "Subset");
}

TEST(CertificateProperty, MutationsAreRejected) {
  RobustSafetyVerdict v = check_robust_safety(load("abs_voting.hp"), {"w_s1"}, strategy());
  ASSERT_TRUE(v.certificate);
  const json base = to_json(*v.certificate);
  ASSERT_TRUE(check_certificate(certificate_from_json(base)));
  std::mt19937_64 g(2026);
  auto pick = [&](size_t n) { return std::uniform_int_distribution<size_t>(0, n - 1)(g); };
  static const char* rules[] = {"Self", "Subset", "Unmodified", "SeqCompose", "LoopLift", "BaseOracle", "Assumed"};
  int tried = 0;
  for (int i = 0; i < 100; ++i) {
    json j = base;
    auto nodes = json_nodes(j);
    json& n = *nodes[pick(nodes.size())];
    std::string what;
    switch (pick(6)) {
      case 0: {
        std::string r = rules[pick(7)];
        if (r == n["rule"]) r = n["rule"] == "Self" ? "Subset" : "Self";
        n["rule"] = r;
        what = "rule";
        break;
      }
      case 1:
        n["goal"]["h"].push_back("zz");
        what = "h";
        break;
      case 2:
        n["goal"][pick(2) ? "left" : "right"] = n["goal"]["left"].get<std::string>() + "; zz := 1";
        what = "program";
        break;
      case 3:
        if (n["children"].empty()) n["children"].push_back(base);
        else n["children"].erase(n["children"].begin());
        what = "children";
        break;
      case 4:
        if (n["side_conditions"].empty()) n["side_conditions"].push_back({{"description", "x"}, {"sets", json::array()}});
        else n["side_conditions"][0]["sets"].push_back(json::array({"zz"}));
        what = "side";
        break;
      default: {
        json* o = nullptr;
        for (json* k : nodes)
          if (!(*k)["oracle_report"].is_null()) o = k;
        ASSERT_NE(o, nullptr);
        if (pick(2)) (*o)["oracle_report"]["goal_digest"] = "0000";
        else (*o)["oracle_report"]["pass"] = false;
        what = "oracle";
      }
    }
    ++tried;
    EXPECT_FALSE(check_certificate(certificate_from_json(j))) << what << "\n" << j.dump(1);
  }
  EXPECT_EQ(tried, 100);
}

TEST(Prove, AttackInvariantGivesSelfRoot) {
  Program p = prog("{x := *; y := x + 1; {y' = 1}}*");
  ASSERT_TRUE(is_attack_invariant(p, {"x"}));
  ProofResult r = prove_equiv({p, attack(p, {"x"}).first, {"y"}}, strategy());
  ASSERT_TRUE(r.certificate);
  EXPECT_EQ(r.certificate->rule, Rule::Self);
  EXPECT_TRUE(r.certificate->deductive());
  ProofResult none = prove_equiv(state_goal(load("vehicle_voting.hp"), {}, {"d_p", "v_p"}), strategy());
  ASSERT_TRUE(none.certificate);
  EXPECT_EQ(none.certificate->rule, Rule::Self);
  EXPECT_TRUE(none.certificate->children.empty());
}

TEST(Prove, AbsVotingChain) {
  Model m = load("abs_voting.hp");
  ProofResult r = prove_equiv(state_goal(m, {"w_s1"}, {"w_p", "v_p"}), strategy());
  ASSERT_TRUE(r.certificate);
  const Certificate& c = *r.certificate;
  EXPECT_TRUE(check_certificate(c));
  ASSERT_EQ(c.rule, Rule::Subset);
  const Certificate& lift = c.children.at(0);
  ASSERT_EQ(lift.rule, Rule::LoopLift);
  const Certificate& seq = lift.children.at(0);
  ASSERT_EQ(seq.rule, Rule::SeqCompose);
  EXPECT_EQ(seq.children.at(0).rule, Rule::Unmodified);
  EXPECT_EQ(seq.children.at(0).children.at(0).rule, Rule::BaseOracle);
  EXPECT_EQ(seq.children.at(1).rule, Rule::Self);
}

TEST(Prove, SensedVehicleUnproven) {
  ProofResult r = prove_equiv(state_goal(load("vehicle_sensed.hp"), {"v_s"}, {"v_p", "d_p", "A", "B", "eps"}), strategy());
  EXPECT_FALSE(r.certificate);
  EXPECT_FALSE(r.notes.empty());
}

TEST(RobustSafety, Verdicts) {
  struct Case {
    const char* file;
    const char* sensor;
    Verdict expect;
  } cases[] = {
      {"abs_voting.hp", "w_s1", Verdict::RobustlySafeEmpirical},
      {"abs_voting.hp", "w_s2", Verdict::RobustlySafeEmpirical},
      {"abs_voting.hp", "w_s3", Verdict::RobustlySafeEmpirical},
      {"mcas_fixed.hp", "s_L", Verdict::RobustlySafeEmpirical},
      {"mcas_fixed.hp", "s_R", Verdict::RobustlySafeEmpirical},
      {"mcas_unfixed.hp", "s_L", Verdict::Unproven},
      {"vehicle_sensed.hp", "v_s", Verdict::Unproven},
      {"vehicle_voting.hp", "v_s1", Verdict::RobustlySafeEmpirical},
  };
  for (const auto& k : cases) {
    Model m = load(k.file);
    RobustSafetyVerdict v = check_robust_safety(m, {k.sensor}, strategy());
    EXPECT_EQ(v.status, k.expect) << k.file << " " << k.sensor;
    LoopProblem lp = split_problem(expand_abbreviations(m));
    EXPECT_EQ(v.h_used, fv_formula(mk::land(lp.pre, lp.post)));
    if (v.certificate) {
      EXPECT_TRUE(check_certificate(*v.certificate));
      EXPECT_EQ(v.certificate->goal.h, v.h_used);
    } else {
      bool noted = false;
      for (const auto& n : v.notes) noted = noted || n.find("Unproven does not mean unsafe") != std::string::npos;
      EXPECT_TRUE(noted);
    }
  }
}

TEST(RobustSafety, NoSensorsIsDeductive) {
  RobustSafetyVerdict v = check_robust_safety(load("vehicle_sensed.hp"), {}, strategy());
  EXPECT_EQ(v.status, Verdict::RobustlySafeDeductive);
}

TEST(RobustSafety, ShapeErrors) {
  Model m = parse_model_or_throw("ProgramVariables.\n R x.\nProblem.\n [x := 1]x > 0\nEnd.");
  EXPECT_THROW(check_robust_safety(m, {}, strategy()), Error);
}
