#include "hpsec/sim.hpp"

#include <chrono>
#include <cmath>
#include <ostream>
#include <random>
#include <unordered_map>

#include "hpsec/attack.hpp"
#include "hpsec/vars.hpp"

namespace hpsec {

double State::at(const std::string& name) const {
  auto it = values.find(name);
  if (it == values.end()) throw Error("UndefinedVariable", "no value for " + name);
  return it->second;
}

const Bounds& NondetPolicy::bounds_for(const std::string& name) const {
  auto it = assign_bounds.find(name);
  if (it != assign_bounds.end()) return it->second;
  if (default_bounds) return *default_bounds;
  throw Error("UnboundedAssign", "no sampling bounds for " + name);
}

namespace {

std::uint64_t mix(std::uint64_t a, std::uint64_t b) {
  // splitmix64 finalizer over a combined word
  std::uint64_t z = a * 0x9E3779B97F4A7C15ULL + b + 0x632BE59BD9B4E019ULL;
  z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ULL;
  z = (z ^ (z >> 27)) * 0x94D049BB133111EBULL;
  return z ^ (z >> 31);
}

double unit(std::mt19937_64& g) { return static_cast<double>(g() >> 11) * 0x1.0p-53; }

double draw(std::mt19937_64& g, const Bounds& b) {
  double u = unit(g);
  if (b.integer) {
    double lo = std::ceil(b.lo), hi = std::floor(b.hi);
    return std::min(hi, lo + std::floor(u * (hi - lo + 1)));
  }
  return b.lo + u * (b.hi - b.lo);
}

void check_finite(double v, const std::string& what) {
  if (!std::isfinite(v)) throw Error("NumericOverflow", "non-finite value for " + what);
}

// Terms resolved to slot indices once, then evaluated without name lookups.
struct CTerm {
  TermKind kind;
  int slot = -1;
  double value = 0;
  unsigned exponent = 0;
  std::vector<CTerm> args;
};

double ceval(const CTerm& t, const std::vector<double>& x) {
  switch (t.kind) {
    case TermKind::Var: return x[t.slot];
    case TermKind::Const: return t.value;
    case TermKind::Plus: return ceval(t.args[0], x) + ceval(t.args[1], x);
    case TermKind::Minus: return ceval(t.args[0], x) - ceval(t.args[1], x);
    case TermKind::Times: return ceval(t.args[0], x) * ceval(t.args[1], x);
    case TermKind::Divide: return ceval(t.args[0], x) / ceval(t.args[1], x);
    case TermKind::Neg: return -ceval(t.args[0], x);
    case TermKind::Power: {
      double b = ceval(t.args[0], x), r = 1;
      for (unsigned i = 0; i < t.exponent; ++i) r *= b;
      return r;
    }
    case TermKind::Apply: return std::exp(ceval(t.args[0], x));
  }
  return 0;
}

class Layout {
 public:
  int slot(const std::string& name) {
    auto it = index_.find(name);
    if (it != index_.end()) return it->second;
    index_[name] = static_cast<int>(names_.size());
    names_.push_back(name);
    return index_[name];
  }
  int find(const std::string& name) const {
    auto it = index_.find(name);
    return it == index_.end() ? -1 : it->second;
  }
  const std::vector<std::string>& names() const { return names_; }

 private:
  std::map<std::string, int> index_;
  std::vector<std::string> names_;
};

bool compare(CmpOp op, double a, double b) {
  switch (op) {
    case CmpOp::Lt: return a < b;
    case CmpOp::Le: return a <= b;
    case CmpOp::Eq: return a == b;
    case CmpOp::Gt: return a > b;
    case CmpOp::Ge: return a >= b;
    case CmpOp::Ne: return a != b;
  }
  return false;
}

class Interp {
 public:
  Interp(const NondetPolicy& pol, Layout& layout, Trace& trace)
      : pol_(pol), layout_(layout), trace_(trace), high_(pol.seed), low_(mix(pol.seed, 1)) {}

  bool exec(const Program& p, std::vector<double>& x, int depth) {
    switch (p->kind) {
      case ProgramKind::Assign: {
        double v = term(p->term, x);
        check_finite(v, p->var);
        x[layout_.find(p->var)] = v;
        point(x, false);
        return true;
      }
      case ProgramKind::AssignAny: {
        bool low = p->low || pol_.low_names.count(p->var);
        double v;
        if (!low && script_pos_ < pol_.script.size()) {
          v = pol_.script[script_pos_++];
        } else {
          v = draw(low ? low_ : high_, pol_.bounds_for(p->var));
        }
        x[layout_.find(p->var)] = v;
        point(x, false);
        return true;
      }
      case ProgramKind::Test:
        if (formula(p->formula, x)) {
          point(x, false);
          return true;
        }
        return false;
      case ProgramKind::Seq:
        return exec(p->subs[0], x, depth) && exec(p->subs[1], x, depth);
      case ProgramKind::Choice:
        return choice(p, x, depth);
      case ProgramKind::Loop:
        return loop(p, x, depth);
      case ProgramKind::Ode:
        return ode(p, x);
      case ProgramKind::Call:
        throw Error("Unsupported", "unexpanded abbreviation " + p->var);
    }
    return false;
  }

  State state(const std::vector<double>& x, bool failed = false) const {
    State s;
    for (size_t i = 0; i < x.size(); ++i) s.values[layout_.names()[i]] = x[i];
    s.failed = failed;
    return s;
  }

  double now = 0;

 private:
  const CTerm& compiled(const Term& t) {
    auto it = cache_.find(t.get());
    if (it != cache_.end()) return it->second;
    return cache_.emplace(t.get(), compile(t)).first->second;
  }

  CTerm compile(const Term& t) {
    CTerm c;
    c.kind = t->kind;
    if (t->kind == TermKind::Var) {
      c.slot = layout_.find(t->name);
      if (c.slot < 0) throw Error("UndefinedVariable", "no value for " + t->name);
    }
    if (t->kind == TermKind::Const) c.value = to_double(t->value);
    if (t->kind == TermKind::Apply && t->name != "exp")
      throw Error("Unsupported", "function " + t->name + " cannot be evaluated");
    c.exponent = t->exponent;
    for (const auto& a : t->args) c.args.push_back(compile(a));
    return c;
  }

  double term(const Term& t, const std::vector<double>& x) { return ceval(compiled(t), x); }

  bool formula(const Formula& f, const std::vector<double>& x) {
    switch (f->kind) {
      case FormulaKind::Compare: return compare(f->op, term(f->lhs, x), term(f->rhs, x));
      case FormulaKind::True: return true;
      case FormulaKind::False: return false;
      case FormulaKind::Not: return !formula(f->subs[0], x);
      case FormulaKind::And: return formula(f->subs[0], x) && formula(f->subs[1], x);
      case FormulaKind::Or: return formula(f->subs[0], x) || formula(f->subs[1], x);
      case FormulaKind::Implies: return !formula(f->subs[0], x) || formula(f->subs[1], x);
      default:
        throw Error("Unsupported", "cannot evaluate " + print(f));
    }
  }

  void point(const std::vector<double>& x, bool failed) {
    if (!pol_.record) return;
    Segment s;
    s.samples.push_back({now, state(x, failed)});
    trace_.segments.push_back(std::move(s));
  }

  bool choice(const Program& p, std::vector<double>& x, int depth) {
    auto branches = flatten_choice(p);
    std::vector<size_t> candidates;
    for (size_t i = 0; i < branches.size(); ++i) {
      Program head = flatten_seq(branches[i]).front();
      if (head->kind != ProgramKind::Test || formula(head->formula, x)) candidates.push_back(i);
    }
    double u = unit(p->low ? low_ : high_);  // one draw per choice keeps streams aligned
    if (candidates.empty()) return false;
    size_t pick = pol_.branch_rule == NondetPolicy::BranchRule::First
                      ? candidates.front()
                      : candidates[std::min(candidates.size() - 1, static_cast<size_t>(u * candidates.size()))];
    if (pol_.on_choice) pol_.on_choice(*p, pick);
    return exec(branches[pick], x, depth);
  }

  bool loop(const Program& p, std::vector<double>& x, int depth) {
    bool outer = depth == 0;
    if (outer) trace_.boundaries.push_back(state(x));
    for (int iter = 0;; ++iter) {
      if (iter >= max_iters) {
        if (outer) trace_.truncated = true;
        return true;
      }
      if (iter > 0 && pol_.loop_exit_prob > 0 && unit(high_) < pol_.loop_exit_prob) return true;
      std::vector<double> saved = x;
      size_t seg = trace_.segments.size();
      double t0 = now;
      bool ok = false;
      for (int attempt = 0; attempt <= pol_.retries && !ok; ++attempt) {
        x = saved;
        now = t0;
        trace_.segments.resize(seg);
        ok = exec(p->subs[0], x, depth + 1);
      }
      if (!ok) {
        x = saved;
        now = t0;
        trace_.segments.resize(seg);
        return false;
      }
      if (outer) {
        trace_.iterations = iter + 1;
        trace_.boundaries.push_back(state(x));
      }
    }
  }

  // One classic RK4 step of size h for the ODE variables in slots.
  void rk4(const std::vector<int>& slots, const std::vector<const CTerm*>& rhs, const std::vector<double>& x0,
           double h, std::vector<double>& out) {
    size_t n = slots.size();
    std::vector<double> k1(n), k2(n), k3(n), k4(n);
    std::vector<double> tmp = x0;
    for (size_t i = 0; i < n; ++i) k1[i] = ceval(*rhs[i], x0);
    for (size_t i = 0; i < n; ++i) tmp[slots[i]] = x0[slots[i]] + h / 2 * k1[i];
    for (size_t i = 0; i < n; ++i) k2[i] = ceval(*rhs[i], tmp);
    for (size_t i = 0; i < n; ++i) tmp[slots[i]] = x0[slots[i]] + h / 2 * k2[i];
    for (size_t i = 0; i < n; ++i) k3[i] = ceval(*rhs[i], tmp);
    for (size_t i = 0; i < n; ++i) tmp[slots[i]] = x0[slots[i]] + h * k3[i];
    for (size_t i = 0; i < n; ++i) k4[i] = ceval(*rhs[i], tmp);
    out = x0;
    for (size_t i = 0; i < n; ++i) {
      out[slots[i]] = x0[slots[i]] + h / 6 * (k1[i] + 2 * k2[i] + 2 * k3[i] + k4[i]);
      check_finite(out[slots[i]], layout_.names()[slots[i]]);
    }
  }

  bool ode(const Program& p, std::vector<double>& x) {
    double stop = pol_.duration_rule == NondetPolicy::DurationRule::Max ? pol_.t_max : unit(high_) * pol_.t_max;
    if (!formula(p->formula, x)) return false;
    std::vector<int> slots;
    std::vector<const CTerm*> rhs;
    for (const auto& e : p->eqs) {
      slots.push_back(layout_.find(e.var));
      rhs.push_back(&compiled(e.rhs));
    }
    Segment seg;
    seg.kind = Segment::Kind::Flow;
    double start = now;
    seg.start = start;
    if (pol_.record) seg.samples.push_back({0, state(x)});
    const double h = pol_.dt;
    double elapsed = 0;
    std::vector<double> next;
    while (elapsed < stop) {
      double step = std::min(h, stop - elapsed);
      rk4(slots, rhs, x, step, next);
      if (!formula(p->formula, next)) {
        // Bisect the step to localize the domain boundary.
        double lo = 0, hi = step;
        std::vector<double> best = x;
        while (hi - lo > h * 1e-3) {
          double mid = (lo + hi) / 2;
          rk4(slots, rhs, x, mid, next);
          if (formula(p->formula, next)) {
            lo = mid;
            best = next;
          } else {
            hi = mid;
          }
        }
        x = best;
        elapsed += lo;
        if (pol_.record && lo > 0) seg.samples.push_back({elapsed, state(x)});
        break;
      }
      x = next;
      elapsed += step;
      if (pol_.record) seg.samples.push_back({elapsed, state(x)});
    }
    now = start + elapsed;
    seg.duration = elapsed;
    if (pol_.record) trace_.segments.push_back(std::move(seg));
    return true;
  }

 public:
  int max_iters = 0;

 private:
  const NondetPolicy& pol_;
  Layout& layout_;
  Trace& trace_;
  std::mt19937_64 high_;
  std::mt19937_64 low_;
  size_t script_pos_ = 0;
  std::unordered_map<const TermNode*, CTerm> cache_;
};

}  // namespace

Trace run(const Program& p, const State& init, const NondetPolicy& policy, int max_loop_iters) {
  Layout layout;
  for (const auto& [k, v] : init.values) layout.slot(k);
  for (const auto& x : fv_program(p))
    if (!init.values.count(x)) throw Error("UndefinedVariable", "initial state has no value for " + x);
  for (const auto& x : bv_program(p))
    if (!is_primed(x)) layout.slot(x);
  std::vector<double> x(layout.names().size(), 0.0);
  for (const auto& [k, v] : init.values) x[layout.find(k)] = v;

  Trace trace;
  Interp in(policy, layout, trace);
  in.max_iters = max_loop_iters;
  bool ok = in.exec(p, x, 0);
  trace.terminated = ok;
  trace.final_state = in.state(x, !ok);
  if (!ok) {
    Segment s;
    s.samples.push_back({in.now, trace.final_state});
    trace.segments.push_back(std::move(s));
  }
  return trace;
}

double eval(const Term& t, const State& s) {
  switch (t->kind) {
    case TermKind::Var: return s.at(t->name);
    case TermKind::Const: return to_double(t->value);
    case TermKind::Plus: return eval(t->args[0], s) + eval(t->args[1], s);
    case TermKind::Minus: return eval(t->args[0], s) - eval(t->args[1], s);
    case TermKind::Times: return eval(t->args[0], s) * eval(t->args[1], s);
    case TermKind::Divide: return eval(t->args[0], s) / eval(t->args[1], s);
    case TermKind::Neg: return -eval(t->args[0], s);
    case TermKind::Power: return std::pow(eval(t->args[0], s), t->exponent);
    case TermKind::Apply:
      if (t->name != "exp") throw Error("Unsupported", "function " + t->name + " cannot be evaluated");
      return std::exp(eval(t->args[0], s));
  }
  return 0;
}

bool holds(const Formula& f, const State& s) {
  switch (f->kind) {
    case FormulaKind::Compare: return compare(f->op, eval(f->lhs, s), eval(f->rhs, s));
    case FormulaKind::True: return true;
    case FormulaKind::False: return false;
    case FormulaKind::Not: return !holds(f->subs[0], s);
    case FormulaKind::And: return holds(f->subs[0], s) && holds(f->subs[1], s);
    case FormulaKind::Or: return holds(f->subs[0], s) || holds(f->subs[1], s);
    case FormulaKind::Implies: return !holds(f->subs[0], s) || holds(f->subs[1], s);
    default:
      throw Error("Unsupported", "cannot evaluate " + print(f));
  }
}

State sample_state(const NameSet& names, const Model* constants, const NondetPolicy& policy, std::uint64_t seed) {
  std::mt19937_64 g(seed);
  State s;
  NameSet fixed;
  if (constants) {
    for (const auto& d : constants->definitions) {
      if (d.sort != Sort::Real || !d.value || !names.count(d.name)) continue;
      s.values[d.name] = eval(d.value, s);
      fixed.insert(d.name);
    }
  }
  for (const auto& n : names)
    if (!fixed.count(n)) s.values[n] = draw(g, policy.bounds_for(n));
  return s;
}

namespace {

std::optional<State> sample_satisfying(const NameSet& names, const Model* constants, const NondetPolicy& policy,
                                       std::uint64_t seed, const std::function<void(State&)>& adjust,
                                       const Formula& assumption) {
  for (std::uint64_t attempt = 0; attempt < 1000; ++attempt) {
    State s = sample_state(names, constants, policy, mix(seed, attempt));
    if (adjust) adjust(s);
    try {
      if (!assumption || holds(assumption, s)) return s;
    } catch (const Error&) {
      // assumption not evaluable here; resample
    }
  }
  return std::nullopt;
}

bool close(double a, double b, double tol) { return std::fabs(a - b) <= tol * (1 + std::fabs(a)); }

bool deterministic(const Program& p) {
  if (p->kind == ProgramKind::AssignAny) return false;
  if (p->kind == ProgramKind::Choice && !is_guard_determined(p)) return false;
  for (const auto& s : p->subs)
    if (!deterministic(s)) return false;
  return true;
}

}  // namespace

SimulationReport check_composition(const CompositionResult& comp, const NondetPolicy& policy,
                                   const CompositionCheck& cfg) {
  auto t0 = std::chrono::steady_clock::now();
  Program prog = mk::loop(comp.body);
  NondetPolicy pol = policy;
  pol.record = false;
  for (const auto& s : comp.sensors) {
    pol.low_names.insert(s);
    pol.low_names.insert(comp.renaming(s));
  }
  for (const auto& c : comp.choice_vars)
    if (!pol.assign_bounds.count(c)) pol.assign_bounds[c] = Bounds{0, 1, true};

  NameSet names = all_vars(prog);
  for (auto it = names.begin(); it != names.end();) it = is_primed(*it) ? names.erase(it) : std::next(it);
  if (cfg.assumption) names.merge(fv_formula(cfg.assumption));
  auto couple = [&](State& s) {
    for (const auto& x : comp.eq_set) s.values[comp.renaming(x)] = s.values[x];
  };

  SimulationReport rep;
  for (int i = 0; i < cfg.n_runs; ++i) {
    std::uint64_t seed = mix(policy.seed, static_cast<std::uint64_t>(i));
    ++rep.runs;
    auto init = sample_satisfying(names, cfg.constants, pol, seed, couple, cfg.assumption);
    if (!init) {
      ++rep.failures;
      continue;
    }
    pol.seed = seed;
    Trace tr;
    try {
      tr = run(prog, *init, pol, cfg.max_loop_iters);
    } catch (const Error& e) {
      if (e.kind() != "NumericOverflow") throw;
      ++rep.failures;
      continue;
    }
    if (!tr.terminated) ++rep.failures;
    if (tr.truncated) ++rep.truncated;
    bool reported = false;
    for (size_t k = 1; k < tr.boundaries.size(); ++k) {
      const State& s = tr.boundaries[k];
      ++rep.iterations;
      double worst = 0;
      bool bad = false;
      for (const auto& x : comp.eq_set) {
        double a = s.at(x), b = s.at(comp.renaming(x));
        worst = std::max(worst, std::fabs(a - b));
        bad = bad || !close(a, b, cfg.tol);
      }
      rep.max_eq_residual = std::max(rep.max_eq_residual, worst);
      if (bad && !reported) {
        EqViolation v;
        v.run = i;
        v.iteration = static_cast<int>(k);
        v.seed = seed;
        v.residual = worst;
        for (const auto& x : comp.eq_set) {
          v.left.values[x] = s.at(x);
          v.right.values[comp.renaming(x)] = s.at(comp.renaming(x));
        }
        rep.eq_violations.push_back(v);
        reported = true;
      }
    }
  }
  rep.wall_time = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
  return rep;
}

std::optional<CandidateCounterexample> falsify_equiv(const Program& original, const NameSet& sensors,
                                                     const NameSet& h, const NondetPolicy& policy,
                                                     const FalsifyConfig& cfg) {
  if (sensors.empty()) return std::nullopt;
  Program attacked = attack(original, sensors).first;
  NondetPolicy pol = policy;
  pol.record = false;
  pol.low_names.insert(sensors.begin(), sensors.end());
  NameSet names = fv_program(original);
  names.merge(bv_program(original));
  for (auto it = names.begin(); it != names.end();) it = is_primed(*it) ? names.erase(it) : std::next(it);
  if (cfg.assumption) names.merge(fv_formula(cfg.assumption));
  bool det = deterministic(original);

  for (int i = 0; i < cfg.budget; ++i) {
    std::uint64_t seed = mix(policy.seed, static_cast<std::uint64_t>(i));
    auto init = sample_satisfying(names, cfg.constants, pol, seed, nullptr, cfg.assumption);
    if (!init) continue;
    pol.seed = seed;
    Trace a, b;
    try {
      a = run(original, *init, pol, cfg.max_loop_iters);
      b = run(attacked, *init, pol, cfg.max_loop_iters);
    } catch (const Error& e) {
      if (e.kind() != "NumericOverflow") throw;
      continue;
    }
    size_t n = std::min(a.boundaries.size(), b.boundaries.size());
    for (size_t k = 1; k < n; ++k) {
      std::vector<std::string> diverged;
      for (const auto& x : h)
        if (!close(a.boundaries[k].at(x), b.boundaries[k].at(x), cfg.tol)) diverged.push_back(x);
      if (diverged.empty()) continue;
      CandidateCounterexample c;
      c.run = i;
      c.iteration = static_cast<int>(k);
      c.seed = seed;
      c.original = a.boundaries[k];
      c.attacked = b.boundaries[k];
      c.diverged = diverged;
      c.original_deterministic = det;
      return c;
    }
  }
  return std::nullopt;
}

void write_csv(const Trace& t, std::ostream& out) {
  std::vector<std::string> cols;
  if (!t.final_state.values.empty()) {
    for (const auto& [k, v] : t.final_state.values) cols.push_back(k);
  }
  out << "time";
  for (const auto& c : cols) out << "," << c;
  out << "\n";
  for (const auto& seg : t.segments) {
    for (const auto& s : seg.samples) {
      double time = seg.kind == Segment::Kind::Flow ? seg.start + s.time : s.time;
      out << time;
      for (const auto& c : cols) {
        auto it = s.state.values.find(c);
        out << ",";
        if (it != s.state.values.end()) out << it->second;
      }
      out << "\n";
    }
  }
}

}  // namespace hpsec
