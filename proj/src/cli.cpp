#include "hpsec/cli.hpp"

#include <CLI11.hpp>
#include <json.hpp>

#include <cstdlib>
#include <fstream>
#include <iomanip>
#include <iostream>
#include <sstream>

#include "hpsec/attack.hpp"
#include "hpsec/robust.hpp"
#include "hpsec/sim.hpp"
#include "hpsec/syntax.hpp"
#include "hpsec/total.hpp"
#include "hpsec/transform.hpp"
#include "hpsec/vars.hpp"

namespace hpsec {

namespace {

using nlohmann::json;

constexpr const char* kVersion = "0.1.0";

// Input problems: bad files, parse errors, malformed flags.
struct UsageError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

std::string fnv_hex(const std::string& s) {
  std::uint64_t h = 0xcbf29ce484222325ULL;
  for (unsigned char c : s) {
    h ^= c;
    h *= 0x100000001b3ULL;
  }
  std::ostringstream o;
  o << std::hex << std::setw(16) << std::setfill('0') << h;
  return o.str();
}

std::string slurp(const std::string& path) {
  std::ifstream f(path, std::ios::binary);
  if (!f) throw UsageError("cannot read " + path);
  std::stringstream s;
  s << f.rdbuf();
  return s.str();
}

void spit(const std::string& path, const std::string& text) {
  std::ofstream f(path, std::ios::binary);
  if (!f) throw UsageError("cannot write " + path);
  f << text;
}

json names_json(const NameSet& s) { return json(std::vector<std::string>(s.begin(), s.end())); }

json span_json(const Span& s) { return {{"line", s.line}, {"col", s.col}, {"len", s.len}}; }

json diag_json(const std::vector<Diagnostic>& ds) {
  json a = json::array();
  for (const auto& d : ds)
    a.push_back({{"severity", d.severity == Severity::Error ? "error" : "warning"},
                 {"message", d.message},
                 {"span", span_json(d.span)}});
  return a;
}

json state_json(const State& s) { return json(s.values); }

std::uint64_t env_seed() {
  const char* v = std::getenv("HPSEC_SEED");
  if (!v || !*v) return 0;
  try {
    return std::stoull(v);
  } catch (const std::exception&) {
    throw UsageError(std::string("HPSEC_SEED is not an unsigned integer: ") + v);
  }
}

// Flags shared by every subcommand.
struct Common {
  std::string file;
  std::string format = "text";
  std::uint64_t seed = 0;
  std::string manifest;
  std::vector<std::string> inputs;  // paths digested into the manifest
};

// Simulation and oracle knobs.
struct Knobs {
  int runs = 100;
  int iters = 20;
  int budget = 1000;
  int states = 200;
  int values = 8;
  double dt = 0;  // 0: 1e-3 times eps
  double tmax = 1;
  double tol = 1e-6;
  std::vector<std::string> bounds;
  std::string assume;
  bool no_assume = false;
};

void add_knobs(CLI::App* sub, Knobs& k, bool sim, bool oracle) {
  sub->add_option("--bounds", k.bounds, "Sampling bounds name=lo:hi (default -10:10); append :int for integers")
      ->delimiter(',');
  if (sim) {
    sub->add_option("--runs", k.runs, "Number of seeded runs")->check(CLI::PositiveNumber);
    sub->add_option("--iters", k.iters, "Loop iterations per run")->check(CLI::PositiveNumber);
    sub->add_option("--dt", k.dt, "RK4 step (default 1e-3 * eps)")->check(CLI::PositiveNumber);
    sub->add_option("--tmax", k.tmax, "Upper bound for sampled ODE durations")->check(CLI::PositiveNumber);
    sub->add_option("--tol", k.tol, "Relative tolerance for state comparisons")->check(CLI::PositiveNumber);
    sub->add_option("--assume", k.assume, "Constraint on initial states (default: the model's precondition)");
    sub->add_flag("--no-assume", k.no_assume, "Sample initial states without any constraint");
  }
  if (oracle) {
    sub->add_option("--states", k.states, "Oracle start states")->check(CLI::PositiveNumber);
    sub->add_option("--values", k.values, "Oracle samples per any-assignment")->check(CLI::PositiveNumber);
  }
}

std::map<std::string, Bounds> parse_bounds(const std::vector<std::string>& specs) {
  std::map<std::string, Bounds> out;
  for (const auto& s : specs) {
    auto eq = s.find('=');
    if (eq == std::string::npos) throw UsageError("--bounds expects name=lo:hi, got " + s);
    std::string name = s.substr(0, eq);
    std::string rest = s.substr(eq + 1);
    Bounds b;
    if (rest.size() > 4 && rest.substr(rest.size() - 4) == ":int") {
      b.integer = true;
      rest.resize(rest.size() - 4);
    }
    auto colon = rest.find(':', 1);
    if (colon == std::string::npos) throw UsageError("--bounds expects name=lo:hi, got " + s);
    try {
      size_t used = 0;
      b.lo = std::stod(rest.substr(0, colon), &used);
      if (used != colon) throw std::invalid_argument(s);
      std::string hi = rest.substr(colon + 1);
      b.hi = std::stod(hi, &used);
      if (used != hi.size()) throw std::invalid_argument(s);
    } catch (const std::exception&) {
      throw UsageError("--bounds has a malformed number: " + s);
    }
    if (!is_valid_identifier(name) || b.lo > b.hi) throw UsageError("--bounds is invalid: " + s);
    out[name] = b;
  }
  return out;
}

NameSet name_set(const std::vector<std::string>& v) { return NameSet(v.begin(), v.end()); }

Model load_model(Common& c) {
  c.inputs.push_back(c.file);
  std::string src = slurp(c.file);
  auto r = parse_model(src, c.file);
  if (auto* ds = std::get_if<std::vector<Diagnostic>>(&r)) throw UsageError(render(*ds));
  return std::get<Model>(r);
}

// Value of the time-limit constant eps when fixed by the model or bounds.
double eps_of(const Model& m, const std::map<std::string, Bounds>& bounds) {
  if (const Definition* d = m.find("eps"); d && d->value) return eval(d->value, State{});
  if (auto it = bounds.find("eps"); it != bounds.end()) return it->second.hi;
  return 1;
}

NondetPolicy policy_for(const Model& m, const Common& c, const Knobs& k) {
  NondetPolicy p;
  p.seed = c.seed;
  p.assign_bounds = parse_bounds(k.bounds);
  p.default_bounds = Bounds{-10, 10, false};
  p.t_max = k.tmax;
  p.dt = k.dt > 0 ? k.dt : 1e-3 * eps_of(m, p.assign_bounds);
  if (!(p.dt > 0)) throw UsageError("--dt must be positive (eps is not positive)");
  return p;
}

Formula assumption_for(const Model& m, const Knobs& k, const Formula& pre) {
  if (k.no_assume) return nullptr;
  if (k.assume.empty()) return pre && pre->kind != FormulaKind::True ? pre : nullptr;
  auto r = parse_formula(k.assume, &m);
  if (auto* ds = std::get_if<std::vector<Diagnostic>>(&r)) throw UsageError("--assume: " + render(*ds));
  return expand(std::get<Formula>(r), m);
}

// pre and loop program of an expanded pre -> [loop]post problem.
std::pair<Formula, Program> loop_of(const Model& m) {
  Formula f = expand_abbreviations(m).problem;
  Formula pre = mk::tt();
  if (f->kind == FormulaKind::Implies) {
    pre = f->subs[0];
    f = f->subs[1];
  }
  if (f->kind != FormulaKind::Box) throw Error("ShapeError", "problem is not of the form pre -> [program]post");
  return {pre, f->program};
}

void check_sensors_disjoint(const NameSet& sensors, const NameSet& h, const char* flag) {
  NameSet both = set_intersect(sensors, h);
  if (!both.empty()) {
    std::string names;
    for (const auto& x : both) names += " " + x;
    throw UsageError(std::string(flag) + " must not contain sensors:" + names);
  }
}

std::string join(const NameSet& s) {
  std::string out;
  for (const auto& x : s) out += (out.empty() ? "" : ", ") + x;
  return "{" + out + "}";
}

// ------------------------------------------------------------ commands

int cmd_parse(Common& c, std::ostream& out) {
  Model m = load_model(c);
  if (c.format == "json") {
    json defs = json::array();
    for (const auto& d : m.definitions)
      defs.push_back({{"name", d.name},
                      {"sort", d.sort == Sort::Real ? "R" : d.sort == Sort::Bool ? "B" : "HP"}});
    json j = {{"definitions", defs}, {"model", print_model(m)}, {"variables", m.variables}};
    out << j.dump(2) << "\n";
  } else {
    out << print_model(m);
  }
  return kExitOk;
}

int cmd_analyze(Common& c, const std::string& hp, std::ostream& out) {
  Model m = load_model(c);
  VarSets v;
  if (hp.empty()) {
    v = analyze(loop_of(m).second);
  } else {
    const Definition* d = m.find(hp);
    if (!d || d->sort == Sort::Real) throw UsageError(hp + " is not an HP or B definition");
    v = d->sort == Sort::Program ? analyze(expand(d->program, m)) : analyze(expand(d->formula, m));
  }
  json j = {{"fv", names_json(v.fv)}, {"bv", names_json(v.bv)}, {"mbv", names_json(v.mbv)}, {"all", names_json(v.all)}};
  out << j.dump(2) << "\n";
  return kExitOk;
}

json provenance_json(const AttackSpec& spec) {
  json p = json::object();
  for (const auto& [name, spans] : spec.provenance) {
    json a = json::array();
    for (const auto& s : spans) a.push_back(span_json(s));
    p[name] = a;
  }
  return p;
}

int cmd_attack(Common& c, const std::vector<std::string>& sensors, const std::string& out_path,
               const std::string& report_path, std::ostream& out) {
  Model m = load_model(c);
  auto [attacked, spec] = attack_model(m, name_set(sensors));
  std::string text = print_model(attacked);
  json report = {{"sensors", names_json(spec.sensors)}, {"provenance", provenance_json(spec)}, {"input", c.file}};
  if (!out_path.empty()) spit(out_path, text);
  if (!report_path.empty()) spit(report_path, report.dump(2) + "\n");
  if (c.format == "json") {
    report["model"] = text;
    out << report.dump(2) << "\n";
  } else if (out_path.empty()) {
    out << text;
  }
  return kExitOk;
}

json origin_json(const CanonicalModel& cm) {
  json o = json::object();
  for (const auto& [name, span] : cm.origin_map) o[name] = span_json(span);
  return o;
}

int cmd_canonicalize(Common& c, const std::vector<std::string>& low, const std::string& out_path, std::ostream& out) {
  Model m = load_model(c);
  CanonicalModel cm = canonicalize(m, name_set(low));
  std::string text = print_model(cm.to_model());
  if (!out_path.empty()) spit(out_path, text);
  if (c.format == "json") {
    json j = {{"choice_vars", cm.choice_vars}, {"origin_map", origin_json(cm)}, {"model", text}};
    out << j.dump(2) << "\n";
  } else if (out_path.empty()) {
    out << text;
  }
  return kExitOk;
}

struct Composed {
  CanonicalModel canon;
  CompositionResult comp;
  std::vector<Diagnostic> gate;
};

Composed compose_model(const Model& m, const Common& c, const std::vector<std::string>& sensors,
                       const std::vector<std::string>& eqset, const std::vector<std::string>& low,
                       const std::string& suffix) {
  CanonicalModel cm = canonicalize(m, name_set(low));
  NameSet s = name_set(sensors);
  auto gate = totality_gate(cm, s, c.file);
  Renaming r = make_renaming(cm, suffix);
  CompositionResult comp = compose(cm, s, eqset, r);
  return {cm, comp, gate};
}

bool gate_passes(const std::vector<Diagnostic>& gate) { return gate.empty(); }

json composition_json(const Composed& k) {
  json ren = json::object();
  for (const auto& [from, to] : k.comp.renaming.map)
    if (from != to) ren[from] = to;
  return {{"renaming", ren},
          {"eq_set", k.comp.eq_set},
          {"eq_formula", print(k.comp.eq_formula)},
          {"obligation", print(k.comp.obligation)},
          {"choice_vars", k.comp.choice_vars},
          {"origin_map", origin_json(k.canon)},
          {"sensors", names_json(k.comp.sensors)},
          {"totality_gate", {{"pass", gate_passes(k.gate)}, {"diagnostics", diag_json(k.gate)}}}};
}

int cmd_compose(Common& c, const std::vector<std::string>& sensors, const std::vector<std::string>& eqset,
                const std::vector<std::string>& low, const std::string& suffix, const std::string& out_path,
                const std::string& kyx_path, const std::string& report_path, std::ostream& out, std::ostream& err) {
  Model m = load_model(c);
  Composed k = compose_model(m, c, sensors, eqset, low, suffix);
  if (!k.gate.empty()) err << render(k.gate) << "\n";
  std::string text = print_model(k.comp.composed);
  if (!out_path.empty()) spit(out_path, text);
  if (!kyx_path.empty()) spit(kyx_path, emit_kyx(k.comp.composed));
  json report = composition_json(k);
  if (!report_path.empty()) spit(report_path, report.dump(2) + "\n");
  if (c.format == "json") {
    report["model"] = text;
    out << report.dump(2) << "\n";
  } else if (out_path.empty()) {
    out << text;
  }
  return kExitOk;
}

int cmd_emit(Common& c, const std::string& entry, const std::string& out_path, std::ostream& out) {
  Model m = load_model(c);
  KyxOptions opts;
  if (!entry.empty()) opts.entry_name = entry;
  std::string text = emit_kyx(m, opts);
  if (out_path.empty()) out << text;
  else spit(out_path, text);
  return kExitOk;
}

int cmd_totality(Common& c, const std::vector<std::string>& sensors, std::ostream& out, std::ostream& err) {
  Model m = load_model(c);
  Program p = loop_of(m).second;
  NameSet s = name_set(sensors);
  attack(p, s);  // rejects names that are not sensors
  TotalityReport r = check_totality(p, s);
  TaintResult t = taint(p, s);
  auto ds = to_diagnostics(r, c.file);
  if (!ds.empty()) err << render(ds) << "\n";
  json vs = json::array();
  for (const auto& v : r.violations)
    vs.push_back({{"kind", to_string(v.kind)}, {"span", span_json(v.site)}, {"detail", v.detail}});
  json edges = json::array();
  for (const auto& e : t.flow_edges) edges.push_back({{"from", e.from}, {"to", e.to}, {"span", span_json(e.site)}});
  json j = {{"status", to_string(r.status)}, {"tainted", names_json(r.tainted)}, {"violations", vs},
            {"flow_edges", edges}};
  out << j.dump(2) << "\n";
  return r.status == TotalityStatus::Total ? kExitOk : kExitNegative;
}

StrategyConfig strategy_for(const Model& m, const Common& c, const Knobs& k) {
  StrategyConfig s;
  s.oracle.n_states = k.states;
  s.oracle.n_values = k.values;
  s.oracle.seed = c.seed;
  s.oracle.bounds = parse_bounds(k.bounds);
  s.oracle.constants = &m;
  return s;
}

int cmd_robust_safety(Common& c, const std::vector<std::string>& sensors, const Knobs& k, const std::string& cert_path,
                      std::ostream& out) {
  Model m = load_model(c);
  RobustSafetyVerdict v = check_robust_safety(m, name_set(sensors), strategy_for(m, c, k));
  json cert = v.certificate ? to_json(*v.certificate) : json(nullptr);
  if (!cert_path.empty() && v.certificate) spit(cert_path, cert.dump(2) + "\n");
  if (c.format == "json") {
    json j = {{"status", to_string(v.status)}, {"h", names_json(v.h_used)}, {"notes", v.notes},
              {"sensors", sensors}, {"certificate", cert}};
    out << j.dump(2) << "\n";
  } else {
    out << to_string(v.status) << " for sensors " << join(name_set(sensors)) << "\n";
    out << "H = " << join(v.h_used) << "\n";
    for (const auto& n : v.notes) out << "  " << n << "\n";
    if (v.certificate) {
      if (!v.certificate->deductive()) out << "  certificate relies on the bounded oracle (empirical)\n";
      if (cert_path.empty()) out << cert.dump(2) << "\n";
      else out << "  certificate written to " << cert_path << "\n";
    }
  }
  return v.status == Verdict::Unproven ? kExitNegative : kExitOk;
}

// Sensors whose assignments in `left` became any-assignments in `right`.
void attacked_names(const Program& l, const Program& r, NameSet& out) {
  if (l->kind == ProgramKind::Assign && r->kind == ProgramKind::AssignAny && l->var == r->var) {
    out.insert(l->var);
    return;
  }
  if (l->kind != r->kind || l->subs.size() != r->subs.size()) return;
  for (size_t i = 0; i < l->subs.size(); ++i) attacked_names(l->subs[i], r->subs[i], out);
}

int cmd_check_cert(Common& c, const std::string& cert_path, bool allow_assumed, std::ostream& out) {
  Model m = load_model(c);
  c.inputs.push_back(cert_path);
  json j;
  try {
    j = json::parse(slurp(cert_path));
  } catch (const json::exception& e) {
    throw UsageError(cert_path + ": " + e.what());
  }
  Certificate cert;
  try {
    cert = certificate_from_json(j);
  } catch (const json::exception& e) {
    throw UsageError(cert_path + ": " + e.what());
  }
  std::vector<std::string> problems;
  if (auto e = certificate_error(cert, {allow_assumed})) problems.push_back(*e);

  // The root must be eq(P, attacked(P, S), H) for this model with H covering pre and post.
  Formula f = expand_abbreviations(m).problem;
  Formula prepost = mk::tt();
  if (f->kind == FormulaKind::Implies) {
    prepost = f->subs[0];
    f = f->subs[1];
  }
  NameSet sensors;
  if (f->kind != FormulaKind::Box) {
    problems.push_back("model problem is not of the form pre -> [program]post");
  } else {
    prepost = mk::land(prepost, f->subs[0]);
    if (!equal_modulo_seq(cert.goal.left, f->program)) problems.push_back("certificate is for a different program");
    attacked_names(cert.goal.left, cert.goal.right, sensors);
    try {
      if (!equal_modulo_seq(attack(cert.goal.left, sensors).first, cert.goal.right))
        problems.push_back("right-hand program is not an attack of the left-hand program");
    } catch (const Error& e) {
      problems.push_back(e.what());
    }
    if (!is_subset(fv_formula(prepost), cert.goal.h)) problems.push_back("H does not cover the pre- and postcondition");
  }
  bool ok = problems.empty();
  if (c.format == "json") {
    json r = {{"accepted", ok}, {"problems", problems}, {"sensors", names_json(sensors)},
              {"empirical", !cert.deductive()}};
    out << r.dump(2) << "\n";
  } else if (ok) {
    out << "accepted: robust safety for sensors " << join(sensors)
        << (cert.deductive() ? " (deductive)" : " (empirical: relies on the bounded oracle)") << "\n";
  } else {
    out << "rejected\n";
    for (const auto& p : problems) out << "  " << p << "\n";
  }
  return ok ? kExitOk : kExitNegative;
}

json sim_report_json(const SimulationReport& r) {
  json vs = json::array();
  for (const auto& v : r.eq_violations)
    vs.push_back({{"run", v.run}, {"iteration", v.iteration}, {"seed", v.seed}, {"residual", v.residual},
                  {"left", state_json(v.left)}, {"right", state_json(v.right)}});
  // wall_time is left out so reports stay byte-identical across replays.
  return {{"runs", r.runs}, {"failures", r.failures}, {"truncated", r.truncated}, {"iterations", r.iterations},
          {"eq_violations", vs}, {"max_eq_residual", r.max_eq_residual}};
}

json candidate_json(const std::optional<CandidateCounterexample>& c) {
  if (!c) return nullptr;
  return {{"run", c->run}, {"iteration", c->iteration}, {"seed", c->seed}, {"original", state_json(c->original)},
          {"attacked", state_json(c->attacked)}, {"diverged", c->diverged},
          {"original_deterministic", c->original_deterministic}};
}

std::optional<CandidateCounterexample> falsify_model(const Model& m, const NameSet& sensors, const NameSet& h,
                                                     const Common& c, const Knobs& k) {
  auto [pre, p] = loop_of(m);
  FalsifyConfig cfg;
  cfg.budget = k.budget;
  cfg.max_loop_iters = k.iters;
  cfg.tol = k.tol;
  cfg.assumption = assumption_for(m, k, pre);
  cfg.constants = &m;
  return falsify_equiv(p, sensors, h, policy_for(m, c, k), cfg);
}

SimulationReport check_comp(const Model& m, const Composed& k, const Common& c, const Knobs& kn) {
  CompositionCheck cfg;
  cfg.n_runs = kn.runs;
  cfg.max_loop_iters = kn.iters;
  cfg.tol = kn.tol;
  cfg.assumption = assumption_for(m, kn, k.canon.pre);
  cfg.constants = &m;
  return check_composition(k.comp, policy_for(m, c, kn), cfg);
}

int cmd_check_comp(Common& c, const std::vector<std::string>& sensors, const std::vector<std::string>& eqset,
                   const std::vector<std::string>& low, const Knobs& kn, std::ostream& out, std::ostream& err) {
  Model m = load_model(c);
  Composed k = compose_model(m, c, sensors, eqset, low, "_1");
  if (!k.gate.empty()) err << render(k.gate) << "\n";
  SimulationReport r = check_comp(m, k, c, kn);
  json j = sim_report_json(r);
  j["totality_gate"] = gate_passes(k.gate);
  j["seed"] = c.seed;
  out << j.dump(2) << "\n";
  return r.eq_violations.empty() ? kExitOk : kExitNegative;
}

int cmd_falsify(Common& c, const std::vector<std::string>& sensors, const std::vector<std::string>& h,
                const Knobs& kn, std::ostream& out) {
  Model m = load_model(c);
  check_sensors_disjoint(name_set(sensors), name_set(h), "--high");
  auto cand = falsify_model(m, name_set(sensors), name_set(h), c, kn);
  json j = {{"candidate", candidate_json(cand)}, {"budget", kn.budget}, {"seed", c.seed}};
  out << j.dump(2) << "\n";
  return cand ? kExitNegative : kExitOk;
}

int cmd_simulate(Common& c, const Knobs& kn, const std::string& csv_path, std::ostream& out) {
  Model m = load_model(c);
  auto [pre, p] = loop_of(m);
  NondetPolicy pol = policy_for(m, c, kn);
  Formula assume = assumption_for(m, kn, pre);
  NameSet names = all_vars(p);
  for (auto it = names.begin(); it != names.end();) it = is_primed(*it) ? names.erase(it) : std::next(it);
  if (assume) names.merge(fv_formula(assume));
  std::optional<State> init;
  for (std::uint64_t i = 0; i < 1000 && !init; ++i) {
    State s = sample_state(names, &m, pol, c.seed * 1000003 + i);
    try {
      if (!assume || holds(assume, s)) init = s;
    } catch (const Error&) {
    }
  }
  if (!init) throw UsageError("no initial state satisfying the assumption within 1000 samples");
  Trace t = run(p, *init, pol, kn.iters);
  if (!csv_path.empty()) {
    std::ofstream f(csv_path);
    if (!f) throw UsageError("cannot write " + csv_path);
    write_csv(t, f);
  }
  if (c.format == "csv") {
    write_csv(t, out);
    return kExitOk;
  }
  json bs = json::array();
  for (const auto& b : t.boundaries) bs.push_back(state_json(b));
  json j = {{"initial", state_json(*init)}, {"final", state_json(t.final_state)}, {"iterations", t.iterations},
            {"terminated", t.terminated}, {"truncated", t.truncated}, {"boundaries", bs}, {"seed", c.seed}};
  out << j.dump(2) << "\n";
  return kExitOk;
}

int cmd_robust_state(Common& c, const std::vector<std::string>& sensors, const std::vector<std::string>& h,
                     const std::string& mode, const std::vector<std::string>& low, const std::string& kyx_path,
                     const Knobs& kn, std::ostream& out, std::ostream& err) {
  Model m = load_model(c);
  NameSet s = name_set(sensors), hs = name_set(h);
  check_sensors_disjoint(s, hs, "--high");
  json report = {{"mode", mode}, {"sensors", names_json(s)}, {"h", names_json(hs)}, {"seed", c.seed}};
  bool ok = false;

  if (mode == "decompose" || mode == "both") {
    EquivGoal goal = state_goal(m, s, hs);
    ProofResult r = prove_equiv(goal, strategy_for(m, c, kn));
    std::string status = !r.certificate                 ? "Unproven"
                         : r.certificate->deductive() ? "RobustlySafe_Deductive"
                                                      : "RobustlySafe_Empirical";
    report["decompose"] = {{"status", status}, {"notes", r.notes},
                           {"certificate", r.certificate ? to_json(*r.certificate) : json(nullptr)}};
    ok = ok || r.certificate.has_value();
  }
  if (mode == "compose" || mode == "both") {
    Composed k = compose_model(m, c, sensors, h, low, "_1");
    json cj = {{"totality_gate", {{"pass", gate_passes(k.gate)}, {"diagnostics", diag_json(k.gate)}}},
               {"obligation", print(k.comp.obligation)}};
    if (!k.gate.empty()) err << render(k.gate) << "\n";
    if (!kyx_path.empty()) {
      spit(kyx_path, emit_kyx(k.comp.composed));
      cj["kyx"] = kyx_path;
    }
    SimulationReport r = check_comp(m, k, c, kn);
    cj["simulation"] = sim_report_json(r);
    std::string status;
    if (!r.eq_violations.empty()) {
      auto cand = falsify_model(m, s, hs, c, kn);
      cj["candidate"] = candidate_json(cand);
      status = cand ? "CandidateCounterexample" : "Inconsistent";
    } else {
      status = gate_passes(k.gate) ? "Consistent" : "TotalityUnproven";
    }
    cj["status"] = status;
    report["compose"] = cj;
    ok = ok || status == "Consistent";
  }
  report["status"] = ok ? "Robust" : "NotShown";
  out << report.dump(2) << "\n";
  return ok ? kExitOk : kExitNegative;
}

// ------------------------------------------------------------ dispatch

struct Outcome {
  int code = kExitOk;
  std::string subcommand;
  Common common;
};

Outcome dispatch(const std::vector<std::string>& args, std::ostream& out, std::ostream& err) {
  CLI::App app{"Sensor-attack analysis for hybrid programs", "hpsec"};
  app.set_version_flag("--version", kVersion);
  app.require_subcommand(1);
  Outcome o;
  Common& c = o.common;
  Knobs k;
  std::vector<std::string> sensors, eqset, h, low;
  std::string out_path, kyx_path, report_path, cert_path, csv_path, hp, entry, mode = "both", suffix = "_1";
  bool allow_assumed = false;
  bool seed_given = false;

  auto common = [&](CLI::App* sub, bool file = true) {
    if (file) sub->add_option("file", c.file, "Model file (.hp)")->required()->check(CLI::ExistingFile);
    sub->add_option("--format", c.format, "Output format")->check(CLI::IsMember({"text", "json", "csv"}));
    sub->add_option_function<std::uint64_t>(
        "--seed", [&](const std::uint64_t& v) { c.seed = v, seed_given = true; }, "Seed (default: HPSEC_SEED or 0)");
    sub->add_option("--manifest", c.manifest, "Write a reproducibility manifest to this path");
  };
  auto sensors_opt = [&](CLI::App* sub, bool required) {
    auto* o = sub->add_option("--sensors", sensors, "Compromised sensor variables, comma separated")->delimiter(',');
    if (required) o->required();
  };

  auto* parse = app.add_subcommand("parse", "Parse and pretty-print a model");
  common(parse);
  auto* analyze = app.add_subcommand("analyze", "Free, bound and must-bound variables");
  common(analyze);
  analyze->add_option("--hp", hp, "Analyze this definition instead of the problem's program");
  auto* attack = app.add_subcommand("attack", "Replace sensor assignments with nondeterministic ones");
  common(attack);
  sensors_opt(attack, true);
  attack->add_option("-o,--out", out_path, "Write the attacked model here");
  attack->add_option("--report", report_path, "Write the provenance report here");
  auto* canon = app.add_subcommand("canonicalize", "Hoist high-integrity nondeterminism into choice variables");
  common(canon);
  canon->add_option("--low", low, "Names whose any-assignments stay in place")->delimiter(',');
  canon->add_option("-o,--out", out_path, "Write the canonical model here");
  auto* compose = app.add_subcommand("compose", "Build the self-composition and its proof obligation");
  common(compose);
  sensors_opt(compose, true);
  compose->add_option("--eqset", eqset, "Coupled variables E")->delimiter(',')->required();
  compose->add_option("--low", low, "Names whose any-assignments stay in place")->delimiter(',');
  compose->add_option("--suffix", suffix, "Renaming suffix");
  compose->add_option("-o,--out", out_path, "Write the composed model here");
  compose->add_option("--kyx", kyx_path, "Write the KeYmaera X archive here");
  compose->add_option("--report", report_path, "Write the composition report here");
  auto* emit = app.add_subcommand("emit", "Emit a KeYmaera X archive");
  common(emit);
  emit->add_option("--entry", entry, "Archive entry name");
  emit->add_option("-o,--out", out_path, "Write the archive here");
  auto* totality = app.add_subcommand("totality", "Check totality on low-integrity inputs");
  common(totality);
  sensors_opt(totality, true);
  auto* rsafe = app.add_subcommand("robust-safety", "Prove robust safety by decomposition");
  common(rsafe);
  sensors_opt(rsafe, true);
  add_knobs(rsafe, k, false, true);
  rsafe->add_option("--cert", cert_path, "Write the certificate here");
  auto* rstate = app.add_subcommand("robust-state", "Robustness of high-integrity state");
  common(rstate);
  sensors_opt(rstate, true);
  rstate->add_option("-H,--high", h, "High-integrity variables H")->delimiter(',')->required();
  rstate->add_option("--mode", mode, "decompose, compose or both")
      ->check(CLI::IsMember({"decompose", "compose", "both"}));
  rstate->add_option("--low", low, "Names whose any-assignments stay in place")->delimiter(',');
  rstate->add_option("--kyx", kyx_path, "Write the composed KeYmaera X archive here");
  add_knobs(rstate, k, true, true);
  rstate->add_option("--budget", k.budget, "Falsification runs")->check(CLI::PositiveNumber);
  auto* cert = app.add_subcommand("check-cert", "Replay a certificate against a model");
  cert->add_option("cert", cert_path, "Certificate (.json)")->required()->check(CLI::ExistingFile);
  common(cert);
  cert->add_flag("--allow-assumed", allow_assumed, "Accept Assumed nodes");
  auto* sim = app.add_subcommand("simulate", "Simulate the problem's program once");
  common(sim);
  add_knobs(sim, k, true, false);
  sim->add_option("--csv", csv_path, "Write the trace as CSV here");
  auto* ccomp = app.add_subcommand("check-comp", "Simulate the composition and check eq at loop boundaries");
  common(ccomp);
  sensors_opt(ccomp, true);
  ccomp->add_option("--eqset", eqset, "Coupled variables E")->delimiter(',')->required();
  ccomp->add_option("--low", low, "Names whose any-assignments stay in place")->delimiter(',');
  add_knobs(ccomp, k, true, false);
  auto* fals = app.add_subcommand("falsify", "Search for runs where H diverges under attack");
  common(fals);
  sensors_opt(fals, true);
  fals->add_option("-H,--high", h, "Variables compared at loop boundaries")->delimiter(',')->required();
  add_knobs(fals, k, true, false);
  fals->add_option("--budget", k.budget, "Number of runs")->check(CLI::PositiveNumber);

  std::vector<const char*> argv{"hpsec"};
  for (const auto& a : args) argv.push_back(a.c_str());
  try {
    app.parse(static_cast<int>(argv.size()), argv.data());
  } catch (const CLI::ParseError& e) {
    int code = app.exit(e, out, err);
    o.code = code == 0 ? kExitOk : kExitUsage;
    return o;
  }
  if (!seed_given) c.seed = env_seed();
  CLI::App* sub = app.get_subcommands().front();
  o.subcommand = sub->get_name();
  const std::string& n = o.subcommand;
  if (n == "parse") o.code = cmd_parse(c, out);
  else if (n == "analyze") o.code = cmd_analyze(c, hp, out);
  else if (n == "attack") o.code = cmd_attack(c, sensors, out_path, report_path, out);
  else if (n == "canonicalize") o.code = cmd_canonicalize(c, low, out_path, out);
  else if (n == "compose") o.code = cmd_compose(c, sensors, eqset, low, suffix, out_path, kyx_path, report_path, out, err);
  else if (n == "emit") o.code = cmd_emit(c, entry, out_path, out);
  else if (n == "totality") o.code = cmd_totality(c, sensors, out, err);
  else if (n == "robust-safety") o.code = cmd_robust_safety(c, sensors, k, cert_path, out);
  else if (n == "robust-state") o.code = cmd_robust_state(c, sensors, h, mode, low, kyx_path, k, out, err);
  else if (n == "check-cert") o.code = cmd_check_cert(c, cert_path, allow_assumed, out);
  else if (n == "simulate") o.code = cmd_simulate(c, k, csv_path, out);
  else if (n == "check-comp") o.code = cmd_check_comp(c, sensors, eqset, low, k, out, err);
  else if (n == "falsify") o.code = cmd_falsify(c, sensors, h, k, out);
  return o;
}

int replay(const std::string& path, std::ostream& out, std::ostream& err) {
  json m;
  try {
    m = json::parse(slurp(path));
  } catch (const json::exception& e) {
    throw UsageError(path + ": " + e.what());
  }
  std::vector<std::string> args = m.at("args").get<std::vector<std::string>>();
  // The recorded arguments already carry --seed; drop --manifest so replay writes nothing.
  for (size_t i = 0; i < args.size(); ++i)
    if (args[i] == "--manifest" && i + 1 < args.size()) {
      args.erase(args.begin() + i, args.begin() + i + 2);
      break;
    }
  for (const auto& in : m.at("inputs")) {
    std::string p = in.at("path").get<std::string>();
    if (fnv_hex(slurp(p)) != in.at("digest").get<std::string>()) {
      err << "input changed since the manifest was written: " << p << "\n";
      return kExitNegative;
    }
  }
  std::ostringstream report, diag;
  Outcome o = dispatch(args, report, diag);
  std::string digest = fnv_hex(report.str());
  bool same = digest == m.at("report_digest").get<std::string>() && o.code == m.at("exit_code").get<int>();
  json j = {{"report_digest", digest}, {"exit_code", o.code}, {"identical", same}};
  out << j.dump(2) << "\n";
  return same ? kExitOk : kExitNegative;
}

}  // namespace

int run_cli(const std::vector<std::string>& args, std::ostream& out, std::ostream& err) {
  try {
    if (!args.empty() && args[0] == "replay") {
      if (args.size() != 2) {
        err << "usage: hpsec replay manifest.json\n";
        return kExitUsage;
      }
      return replay(args[1], out, err);
    }
    std::ostringstream report;
    Outcome o = dispatch(args, report, err);
    out << report.str();
    if (!o.common.manifest.empty()) {
      // Pin the seed in the recorded arguments so the run replays without the environment.
      std::vector<std::string> recorded = args;
      if (std::find(recorded.begin(), recorded.end(), "--seed") == recorded.end()) {
        recorded.push_back("--seed");
        recorded.push_back(std::to_string(o.common.seed));
      }
      json inputs = json::array();
      for (const auto& p : o.common.inputs) inputs.push_back({{"path", p}, {"digest", fnv_hex(slurp(p))}});
      json m = {{"tool", "hpsec"}, {"version", kVersion}, {"subcommand", o.subcommand},
                {"args", recorded},  {"seed", o.common.seed}, {"inputs", inputs},
                {"report_digest", fnv_hex(report.str())}, {"exit_code", o.code}};
      spit(o.common.manifest, m.dump(2) + "\n");
    }
    return o.code;
  } catch (const UsageError& e) {
    err << e.what() << "\n";
    return kExitUsage;
  } catch (const Error& e) {
    err << e.what() << "\n";
    return kExitUsage;
  } catch (const nlohmann::json::exception& e) {
    err << "json: " << e.what() << "\n";
    return kExitUsage;
  }
}

}  // namespace hpsec
