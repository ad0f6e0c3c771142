#include "hpsec/robust.hpp"

#include <cmath>
#include <cstdio>
#include <random>

#include "hpsec/attack.hpp"
#include "hpsec/syntax.hpp"
#include "hpsec/transform.hpp"
#include "hpsec/vars.hpp"

namespace hpsec {

using nlohmann::json;

const char* to_string(Rule r) {
  switch (r) {
    case Rule::Self: return "Self";
    case Rule::Subset: return "Subset";
    case Rule::Unmodified: return "Unmodified";
    case Rule::SeqCompose: return "SeqCompose";
    case Rule::LoopLift: return "LoopLift";
    case Rule::BaseOracle: return "BaseOracle";
    case Rule::Assumed: return "Assumed";
  }
  return "?";
}

std::optional<Rule> rule_from_string(const std::string& s) {
  for (Rule r : {Rule::Self, Rule::Subset, Rule::Unmodified, Rule::SeqCompose, Rule::LoopLift, Rule::BaseOracle,
                 Rule::Assumed})
    if (s == to_string(r)) return r;
  return std::nullopt;
}

const char* to_string(Verdict v) {
  switch (v) {
    case Verdict::RobustlySafeDeductive: return "RobustlySafe_Deductive";
    case Verdict::RobustlySafeEmpirical: return "RobustlySafe_Empirical";
    case Verdict::Unproven: return "Unproven";
  }
  return "?";
}

bool Certificate::deductive() const {
  if (rule == Rule::BaseOracle || rule == Rule::Assumed) return false;
  for (const auto& c : children)
    if (!c.deductive()) return false;
  return true;
}

namespace {

std::uint64_t fnv1a(const std::string& s) {
  std::uint64_t h = 0xcbf29ce484222325ULL;
  for (unsigned char c : s) {
    h ^= c;
    h *= 0x100000001b3ULL;
  }
  return h;
}

std::string hex(std::uint64_t v) {
  char buf[17];
  std::snprintf(buf, sizeof buf, "%016llx", static_cast<unsigned long long>(v));
  return buf;
}

std::uint64_t mix(std::uint64_t a, std::uint64_t b) {
  std::uint64_t z = a * 0x9E3779B97F4A7C15ULL + b + 0x632BE59BD9B4E019ULL;
  z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ULL;
  z = (z ^ (z >> 27)) * 0x94D049BB133111EBULL;
  return z ^ (z >> 31);
}

bool loop_or_ode_free(const Program& p) {
  if (p->kind == ProgramKind::Loop || p->kind == ProgramKind::Ode || p->kind == ProgramKind::Call) return false;
  for (const auto& s : p->subs)
    if (!loop_or_ode_free(s)) return false;
  return true;
}

NameSet unprimed(NameSet s) {
  for (auto it = s.begin(); it != s.end();) it = is_primed(*it) ? s.erase(it) : std::next(it);
  return s;
}

NameSet vars_of(const Program& a, const Program& b) { return unprimed(set_union(all_vars(a), all_vars(b))); }

}  // namespace

std::string goal_digest(const EquivGoal& g) {
  std::string s = print(g.left) + "\n" + print(g.right) + "\n";
  for (const auto& x : g.h) s += x + ",";
  return hex(fnv1a(s));
}

// ------------------------------------------------------------ checking

std::vector<SideCondition> side_conditions_for(const Certificate& c) {
  const EquivGoal& g = c.goal;
  switch (c.rule) {
    case Rule::Self:
    case Rule::Assumed:
      return {};
    case Rule::Subset:
      if (c.children.size() != 1) return {};
      return {{"H subset of H'", {g.h, c.children[0].goal.h}}};
    case Rule::Unmodified: {
      if (c.children.size() != 1) return {};
      NameSet extra = set_minus(g.h, c.children[0].goal.h);
      return {{"(V(A) u V(B)) disjoint from H''", {vars_of(g.left, g.right), extra}}};
    }
    case Rule::SeqCompose: {
      if (c.children.size() != 2) return {};
      const EquivGoal& second = c.children[1].goal;
      return {{"FV(C) u FV(D) subset of H", {set_union(fv_program(second.left), fv_program(second.right)), g.h}}};
    }
    case Rule::LoopLift: {
      if (c.children.size() != 1) return {};
      const EquivGoal& body = c.children[0].goal;
      return {{"FV(A) u FV(B) subset of H", {set_union(fv_program(body.left), fv_program(body.right)), g.h}}};
    }
    case Rule::BaseOracle:
      return {{"loop-free and ODE-free", {}}};
  }
  return {};
}

namespace {

std::optional<std::string> node_error(const Certificate& c, const CheckOptions& opts) {
  const EquivGoal& g = c.goal;
  if (!g.left || !g.right) return "goal without programs";
  auto arity = [&](size_t n) -> std::optional<std::string> {
    if (c.children.size() != n)
      return std::string(to_string(c.rule)) + " expects " + std::to_string(n) + " children";
    return std::nullopt;
  };
  auto same_programs = [&](const EquivGoal& child) {
    return equal_modulo_seq(child.left, g.left) && equal_modulo_seq(child.right, g.right);
  };
  switch (c.rule) {
    case Rule::Self:
      if (auto e = arity(0)) return e;
      if (!equal_modulo_seq(g.left, g.right)) return "Self: programs differ";
      break;
    case Rule::Subset: {
      if (auto e = arity(1)) return e;
      const EquivGoal& ch = c.children[0].goal;
      if (!same_programs(ch)) return "Subset: child proves different programs";
      if (!is_subset(g.h, ch.h)) return "Subset: H is not contained in the child's H";
      break;
    }
    case Rule::Unmodified: {
      if (auto e = arity(1)) return e;
      const EquivGoal& ch = c.children[0].goal;
      if (!same_programs(ch)) return "Unmodified: child proves different programs";
      if (!is_subset(ch.h, g.h)) return "Unmodified: child's H is not contained in H";
      NameSet extra = set_minus(g.h, ch.h);
      if (!set_intersect(vars_of(g.left, g.right), extra).empty())
        return "Unmodified: added variables occur in the programs";
      break;
    }
    case Rule::SeqCompose: {
      if (auto e = arity(2)) return e;
      const EquivGoal& ab = c.children[0].goal;
      const EquivGoal& cd = c.children[1].goal;
      if (ab.h != g.h || cd.h != g.h) return "SeqCompose: children must prove the same H";
      if (!equal_modulo_seq(mk::seq(ab.left, cd.left), g.left) || !equal_modulo_seq(mk::seq(ab.right, cd.right), g.right))
        return "SeqCompose: goal is not the composition of the children";
      if (!is_subset(set_union(fv_program(cd.left), fv_program(cd.right)), g.h))
        return "SeqCompose: FV(C) u FV(D) not contained in H";
      break;
    }
    case Rule::LoopLift: {
      if (auto e = arity(1)) return e;
      const EquivGoal& ch = c.children[0].goal;
      if (g.left->kind != ProgramKind::Loop || g.right->kind != ProgramKind::Loop) return "LoopLift: goal is not a loop";
      if (ch.h != g.h) return "LoopLift: child must prove the same H";
      if (!equal_modulo_seq(ch.left, g.left->subs[0]) || !equal_modulo_seq(ch.right, g.right->subs[0]))
        return "LoopLift: child does not prove the loop bodies";
      if (!is_subset(set_union(fv_program(ch.left), fv_program(ch.right)), g.h))
        return "LoopLift: FV(A) u FV(B) not contained in H";
      break;
    }
    case Rule::BaseOracle:
      if (auto e = arity(0)) return e;
      if (!loop_or_ode_free(g.left) || !loop_or_ode_free(g.right)) return "BaseOracle: goal has a loop or ODE";
      if (!c.oracle_report) return "BaseOracle: no oracle report";
      if (!c.oracle_report->pass) return "BaseOracle: oracle report did not pass";
      if (c.oracle_report->goal_digest != goal_digest(g)) return "BaseOracle: report is for a different goal";
      break;
    case Rule::Assumed:
      if (!opts.allow_assumed) return "Assumed: assumption nodes are not accepted";
      break;
  }
  if (c.rule != Rule::BaseOracle && c.oracle_report) return "oracle report on a non-oracle node";
  auto expected = side_conditions_for(c);
  if (expected.size() != c.side_conditions.size()) return std::string(to_string(c.rule)) + ": side conditions differ";
  for (size_t i = 0; i < expected.size(); ++i)
    if (expected[i].description != c.side_conditions[i].description || expected[i].sets != c.side_conditions[i].sets)
      return std::string(to_string(c.rule)) + ": recorded side condition does not match";
  return std::nullopt;
}

}  // namespace

std::optional<std::string> certificate_error(const Certificate& c, const CheckOptions& opts) {
  if (auto e = node_error(c, opts)) return e;
  for (const auto& ch : c.children)
    if (auto e = certificate_error(ch, opts)) return e;
  return std::nullopt;
}

bool check_certificate(const Certificate& c, const CheckOptions& opts) { return !certificate_error(c, opts); }

// ------------------------------------------------------------ base oracle

namespace {

// Any-assignment sites present at the same position on both sides share samples.
void shared_sites(const Program& a, const Program& b, const std::string& path, NameSet& out) {
  if (a->kind != b->kind) return;
  if (a->kind == ProgramKind::AssignAny) {
    if (a->var == b->var) out.insert(path);
    return;
  }
  if (a->subs.size() != b->subs.size()) return;
  for (size_t i = 0; i < a->subs.size(); ++i) shared_sites(a->subs[i], b->subs[i], path + char('0' + i), out);
}

struct Enumerator {
  const OracleConfig& cfg;
  const NameSet& shared;
  std::string side;
  std::uint64_t state_seed;

  const Bounds& bounds(const std::string& x) const {
    auto it = cfg.bounds.find(x);
    return it == cfg.bounds.end() ? cfg.default_bounds : it->second;
  }

  std::vector<double> values(const std::string& path, const std::string& x) const {
    std::string key = shared.count(path) ? path : side + path;
    std::mt19937_64 g(mix(state_seed, std::hash<std::string>{}(key) ^ fnv1a(key)));
    std::vector<double> vs;
    const Bounds& b = bounds(x);
    for (int i = 0; i < cfg.n_values; ++i) {
      double u = static_cast<double>(g() >> 11) * 0x1.0p-53;
      vs.push_back(b.integer ? std::floor(b.lo + u * (b.hi - b.lo + 1)) : b.lo + u * (b.hi - b.lo));
    }
    return vs;
  }

  void run(const Program& p, const std::string& path, const State& s, std::vector<State>& out) const {
    switch (p->kind) {
      case ProgramKind::Assign: {
        State t = s;
        t.values[p->var] = eval(p->term, s);
        out.push_back(std::move(t));
        return;
      }
      case ProgramKind::AssignAny:
        for (double v : values(path, p->var)) {
          State t = s;
          t.values[p->var] = v;
          out.push_back(std::move(t));
        }
        return;
      case ProgramKind::Test:
        if (holds(p->formula, s)) out.push_back(s);
        return;
      case ProgramKind::Seq: {
        std::vector<State> mid;
        run(p->subs[0], path + '0', s, mid);
        for (const auto& m : mid) run(p->subs[1], path + '1', m, out);
        return;
      }
      case ProgramKind::Choice:
        run(p->subs[0], path + '0', s, out);
        run(p->subs[1], path + '1', s, out);
        return;
      default:
        throw Error("Unsupported", "oracle programs must be loop-free and ODE-free");
    }
  }
};

bool agrees(const State& a, const State& b, const NameSet& h) {
  for (const auto& x : h) {
    double u = a.at(x), v = b.at(x);
    if (!(std::fabs(u - v) <= 1e-9 * (1 + std::fabs(u)))) return false;
  }
  return true;
}

State project(const State& s, const NameSet& h) {
  State p;
  for (const auto& x : h) p.values[x] = s.at(x);
  return p;
}

}  // namespace

OracleReport base_oracle(const EquivGoal& goal, const OracleConfig& cfg) {
  if (!loop_or_ode_free(goal.left) || !loop_or_ode_free(goal.right))
    throw Error("Unsupported", "oracle programs must be loop-free and ODE-free");
  OracleReport rep;
  rep.seed = cfg.seed;
  rep.n_values = cfg.n_values;
  rep.goal_digest = goal_digest(goal);
  rep.pass = true;

  NameSet names = set_union(vars_of(goal.left, goal.right), goal.h);
  NameSet shared;
  shared_sites(goal.left, goal.right, "", shared);
  NondetPolicy pol;
  pol.assign_bounds = cfg.bounds;
  pol.default_bounds = cfg.default_bounds;

  for (int i = 0; i < cfg.n_states; ++i) {
    std::uint64_t state_seed = mix(cfg.seed, static_cast<std::uint64_t>(i));
    State start = sample_state(names, cfg.constants, pol, state_seed);
    std::vector<State> left, right;
    try {
      Enumerator{cfg, shared, "L", state_seed}.run(goal.left, "", start, left);
      Enumerator{cfg, shared, "R", state_seed}.run(goal.right, "", start, right);
    } catch (const Error& e) {
      if (e.kind() == "Unsupported") throw;
      continue;  // start state outside the evaluable domain
    }
    ++rep.states;
    rep.end_states += static_cast<int>(left.size() + right.size());
    auto unmatched = [&](const std::vector<State>& xs, const std::vector<State>& ys) -> const State* {
      for (const auto& x : xs) {
        bool found = false;
        for (const auto& y : ys) found = found || agrees(x, y, goal.h);
        if (!found) return &x;
      }
      return nullptr;
    };
    const State* miss = unmatched(left, right);
    std::string side = "left";
    if (!miss) {
      miss = unmatched(right, left);
      side = "right";
    }
    if (miss) {
      rep.pass = false;
      rep.witness_start = start;
      rep.witness_end = project(*miss, goal.h);
      rep.witness_side = side;
      return rep;
    }
  }
  return rep;
}

// ------------------------------------------------------------ search

namespace {

Certificate node(EquivGoal g, Rule r, std::vector<Certificate> children = {}) {
  Certificate c;
  c.goal = std::move(g);
  c.rule = r;
  c.children = std::move(children);
  c.side_conditions = side_conditions_for(c);
  return c;
}

// Top-level statements along the right spine of a sequence. Nested groups such
// as an expanded abbreviation stay whole. A body ctrl; plant contributes the
// statements of both halves.
std::vector<Program> spine(Program p) {
  std::vector<Program> out;
  while (p->kind == ProgramKind::Seq) {
    out.push_back(p->subs[0]);
    p = p->subs[1];
  }
  out.push_back(p);
  return out;
}

std::vector<Program> statements(const Program& body) {
  if (body->kind != ProgramKind::Seq) return {body};
  auto xs = spine(body->subs[0]);
  auto ys = spine(body->subs[1]);
  xs.insert(xs.end(), ys.begin(), ys.end());
  return xs;
}

std::string names_str(const NameSet& s) {
  std::string out = "{";
  for (const auto& x : s) out += (out.size() > 1 ? ", " : "") + x;
  return out + "}";
}

}  // namespace

ProofResult prove_equiv(const EquivGoal& goal, const StrategyConfig& strategy) {
  ProofResult res;
  if (equal_modulo_seq(goal.left, goal.right)) {
    res.certificate = node(goal, Rule::Self);
    return res;
  }
  if (goal.left->kind != ProgramKind::Loop || goal.right->kind != ProgramKind::Loop) {
    if (loop_or_ode_free(goal.left) && loop_or_ode_free(goal.right)) {
      OracleReport rep = base_oracle(goal, strategy.oracle);
      if (rep.pass) {
        Certificate c = node(goal, Rule::BaseOracle);
        c.oracle_report = rep;
        res.certificate = c;
      } else {
        res.notes.push_back("base oracle found a witness");
      }
    } else {
      res.notes.push_back("goal is neither a loop nor loop-free");
    }
    return res;
  }

  auto xs = statements(goal.left->subs[0]);
  auto ys = statements(goal.right->subs[0]);
  if (xs.size() != ys.size()) {
    res.notes.push_back("loop bodies differ in shape");
    return res;
  }
  size_t n = xs.size();
  size_t k = 0;
  for (size_t i = 0; i < n; ++i)
    if (!equal(xs[i], ys[i])) k = i + 1;

  // A is the shortest run of top-level statements holding every attacked site.
  Program a = mk::seq_all({xs.begin(), xs.begin() + k});
  Program b = mk::seq_all({ys.begin(), ys.begin() + k});
  std::string at = "split after statement " + std::to_string(k) + ": ";
  if (!loop_or_ode_free(a) || !loop_or_ode_free(b)) {
    res.notes.push_back(at + "prefix has a loop or ODE");
    return res;
  }
  Program c = k < n ? mk::seq_all({xs.begin() + k, xs.end()}) : nullptr;
  NameSet hs = goal.h;
  if (c) {
    hs.merge(fv_program(c));
    hs.merge(fv_program(mk::seq(a, c)));
    hs.merge(fv_program(mk::seq(b, c)));
  } else {
    hs.merge(fv_program(a));
    hs.merge(fv_program(b));
  }
  NameSet h0 = set_intersect(hs, vars_of(a, b));
  EquivGoal base_goal{a, b, h0};
  Certificate base;
  if (equal_modulo_seq(a, b)) {
    base = node(base_goal, Rule::Self);
  } else {
    OracleReport rep = base_oracle(base_goal, strategy.oracle);
    if (!rep.pass) {
      res.notes.push_back(at + "base oracle rejects A =_H0 B with H0 = " + names_str(h0));
      return res;
    }
    base = node(base_goal, Rule::BaseOracle);
    base.oracle_report = rep;
  }
  Certificate unmod = node({a, b, hs}, Rule::Unmodified, {base});
  Certificate body = unmod;
  Program left_body = a, right_body = b;
  if (c) {
    left_body = mk::seq(a, c);
    right_body = mk::seq(b, c);
    body = node({left_body, right_body, hs}, Rule::SeqCompose, {unmod, node({c, c, hs}, Rule::Self)});
  }
  Certificate lifted = node({mk::loop(left_body), mk::loop(right_body), hs}, Rule::LoopLift, {body});
  Certificate root = node(goal, Rule::Subset, {lifted});
  if (auto err = certificate_error(root)) {
    res.notes.push_back(at + "derivation rejected: " + *err);
    return res;
  }
  res.notes.push_back(at + "proved with H* = " + names_str(hs));
  res.certificate = root;
  return res;
}

namespace {

std::pair<Formula, Program> loop_problem(const Model& model) {
  Model ex = expand_abbreviations(model);
  Formula f = ex.problem;
  Formula pre = mk::tt();
  if (f->kind == FormulaKind::Implies) {
    pre = f->subs[0];
    f = f->subs[1];
  }
  if (f->kind != FormulaKind::Box || f->program->kind != ProgramKind::Loop)
    throw Error("ShapeError", "problem is not of the form pre -> [{ctrl; plant}*]post");
  return {mk::land(pre, f->subs[0]), f->program};
}

}  // namespace

EquivGoal state_goal(const Model& model, const NameSet& sensors, const NameSet& h) {
  Program p = loop_problem(model).second;
  return {p, attack(p, sensors).first, h};
}

RobustSafetyVerdict check_robust_safety(const Model& model, const NameSet& sensors, const StrategyConfig& strategy) {
  auto [prepost, p] = loop_problem(model);
  RobustSafetyVerdict v;
  v.h_used = fv_formula(prepost);
  EquivGoal goal{p, attack(p, sensors).first, v.h_used};
  ProofResult r = prove_equiv(goal, strategy);
  v.notes = r.notes;
  if (!r.certificate) {
    v.status = Verdict::Unproven;
    v.notes.push_back("Unproven does not mean unsafe: robust safety does not imply equivalence");
    return v;
  }
  v.status = r.certificate->deductive() ? Verdict::RobustlySafeDeductive : Verdict::RobustlySafeEmpirical;
  v.certificate = r.certificate;
  return v;
}

// ------------------------------------------------------------ json

namespace {

json names_json(const NameSet& s) { return json(std::vector<std::string>(s.begin(), s.end())); }

NameSet names_from(const json& j) {
  NameSet s;
  for (const auto& x : j) s.insert(x.get<std::string>());
  return s;
}

json state_json(const State& s) { return json(s.values); }

State state_from(const json& j) {
  State s;
  s.values = j.get<std::map<std::string, double>>();
  return s;
}

Program program_from(const std::string& text) {
  auto r = parse_program(text);
  if (auto* d = std::get_if<std::vector<Diagnostic>>(&r)) throw Error("ParseError", render(*d));
  return std::get<Program>(r);
}

}  // namespace

json to_json(const Certificate& c) {
  json j;
  j["goal"] = {{"left", print(c.goal.left)}, {"right", print(c.goal.right)}, {"h", names_json(c.goal.h)}};
  j["rule"] = to_string(c.rule);
  j["empirical"] = !c.deductive();
  json sc = json::array();
  for (const auto& s : c.side_conditions) {
    json sets = json::array();
    for (const auto& set : s.sets) sets.push_back(names_json(set));
    sc.push_back({{"description", s.description}, {"sets", sets}});
  }
  j["side_conditions"] = sc;
  json ch = json::array();
  for (const auto& k : c.children) ch.push_back(to_json(k));
  j["children"] = ch;
  if (c.oracle_report) {
    const OracleReport& r = *c.oracle_report;
    json o = {{"pass", r.pass},          {"states", r.states}, {"end_states", r.end_states},
              {"n_values", r.n_values},  {"seed", r.seed},     {"goal_digest", r.goal_digest},
              {"witness_side", r.witness_side}};
    if (r.witness_start) o["witness_start"] = state_json(*r.witness_start);
    if (r.witness_end) o["witness_end"] = state_json(*r.witness_end);
    j["oracle_report"] = o;
  } else {
    j["oracle_report"] = nullptr;
  }
  return j;
}

Certificate certificate_from_json(const json& j) {
  Certificate c;
  const json& g = j.at("goal");
  c.goal.left = program_from(g.at("left").get<std::string>());
  c.goal.right = program_from(g.at("right").get<std::string>());
  c.goal.h = names_from(g.at("h"));
  auto rule = rule_from_string(j.at("rule").get<std::string>());
  if (!rule) throw Error("ParseError", "unknown rule " + j.at("rule").dump());
  c.rule = *rule;
  for (const auto& s : j.at("side_conditions")) {
    SideCondition sc;
    sc.description = s.at("description").get<std::string>();
    for (const auto& set : s.at("sets")) sc.sets.push_back(names_from(set));
    c.side_conditions.push_back(sc);
  }
  for (const auto& k : j.at("children")) c.children.push_back(certificate_from_json(k));
  if (j.contains("oracle_report") && !j.at("oracle_report").is_null()) {
    const json& o = j.at("oracle_report");
    OracleReport r;
    r.pass = o.at("pass").get<bool>();
    r.states = o.at("states").get<int>();
    r.end_states = o.at("end_states").get<int>();
    r.n_values = o.at("n_values").get<int>();
    r.seed = o.at("seed").get<std::uint64_t>();
    r.goal_digest = o.at("goal_digest").get<std::string>();
    r.witness_side = o.value("witness_side", "");
    if (o.contains("witness_start")) r.witness_start = state_from(o.at("witness_start"));
    if (o.contains("witness_end")) r.witness_end = state_from(o.at("witness_end"));
    c.oracle_report = r;
  }
  return c;
}

}  // namespace hpsec
