#pragma once

#include <random>
#include <string>

#include <vector>

#include "common.hpp"
#include "hpsec/ast.hpp"
#include "hpsec/syntax.hpp"

namespace hpsec::test {

// Random ASTs over a small vocabulary; decimal constants only so that printing is exact.
class Gen {
 public:
  explicit Gen(std::uint64_t seed) : g_(seed) {}

  int pick(int n) { return std::uniform_int_distribution<int>(0, n - 1)(g_); }
  bool coin() { return pick(2) == 0; }

  std::string name() {
    static const char* names[] = {"x", "y", "z", "v_p", "d_s", "a1", "c", "temp"};
    return names[pick(8)];
  }

  Rational constant() {
    Rational r(pick(2000), 1);
    int scale = pick(4);
    for (int i = 0; i < scale; ++i) r /= 10;
    if (pick(4) == 0) r = -r;
    return r;
  }

  Term term(int depth) {
    if (depth <= 0 || pick(3) == 0) return coin() ? mk::var(name()) : mk::num(constant());
    switch (pick(7)) {
      case 0: return mk::plus(term(depth - 1), term(depth - 1));
      case 1: return mk::times(term(depth - 1), term(depth - 1));
      case 2: return mk::minus(term(depth - 1), term(depth - 1));
      case 3: return mk::neg(term(depth - 1));
      case 4: return mk::divide(term(depth - 1), term(depth - 1));
      case 5: return mk::power(term(depth - 1), 1 + pick(4));
      default: return mk::apply("exp", {term(depth - 1)});
    }
  }

  Formula formula(int depth, bool allow_box = true) {
    if (depth <= 0 || pick(4) == 0) {
      switch (pick(5)) {
        case 0: return mk::tt();
        case 1: return mk::ff();
        case 2: return mk::pred(name() + "_b");
        default: return mk::cmp(static_cast<CmpOp>(pick(6)), term(2), term(2));
      }
    }
    switch (pick(allow_box ? 8 : 7)) {
      case 0: return mk::lnot(formula(depth - 1, allow_box));
      case 1: return mk::land(formula(depth - 1, allow_box), formula(depth - 1, allow_box));
      case 2: return mk::lor(formula(depth - 1, allow_box), formula(depth - 1, allow_box));
      case 3: return mk::implies(formula(depth - 1, allow_box), formula(depth - 1, allow_box));
      case 4: return mk::forall(name(), formula(depth - 1, allow_box));
      case 5: return mk::exists(name(), formula(depth - 1, allow_box));
      case 6: return mk::cmp(static_cast<CmpOp>(pick(6)), term(depth), term(depth));
      default: return mk::box(program(depth - 1), formula(depth - 1));
    }
  }

  Program program(int depth) {
    if (depth <= 0 || pick(4) == 0) {
      switch (pick(6)) {
        case 0: return mk::assign(name(), term(2));
        case 1: return mk::assign_any(name(), coin());
        case 2: return mk::test(formula(1, false));
        case 3: return mk::call("hp_" + name());
        default: return ode();
      }
    }
    switch (pick(4)) {
      case 0: return mk::seq(program(depth - 1), program(depth - 1));
      case 1: return mk::choice(program(depth - 1), program(depth - 1), coin());
      case 2: return mk::loop(program(depth - 1));
      default: return mk::assign(name(), term(depth));
    }
  }

  Program ode() {
    std::vector<OdeEq> eqs;
    NameSet used;
    int n = 1 + pick(3);
    for (int i = 0; i < n; ++i) {
      std::string x = name();
      if (!used.insert(x).second) continue;
      eqs.push_back({x, term(2)});
    }
    return mk::ode(eqs, coin() ? mk::tt() : formula(1, false));
  }

 private:
  std::mt19937_64 g_;
};

struct FuzzResult {
  int inputs = 0;
  int models = 0;        // inputs that still parsed as models
  std::string failure;   // exception text and input, when the parser threw
};

// Mutated corpus models and token soup, fed to the model and program parsers.
inline FuzzResult fuzz_parser(int n, std::uint64_t seed) {
  std::vector<std::string> seeds;
  for (const char* f : {"vehicle.hp", "temperature.hp", "bus.hp", "abs_voting.hp", "mcas_fixed.hp"})
    seeds.push_back(read_file(corpus(f)));
  const std::string alphabet = "{}()[];:=*+-/^&|!<>?'.,_ \n\t0123456789abcxyzRBHP";
  static const char* tokens[] = {"++", ":=", "*", "{", "}", "?", "->", "<->", "[", "]", "'", "\\forall", "/*@low*/",
                                 "if", "then", "else", "Definitions.", "End.", "&", "|", "!", "(", ")", "=", "1e999"};
  std::mt19937_64 g(seed);
  auto pick = [&](size_t k) { return std::uniform_int_distribution<size_t>(0, k - 1)(g); };
  FuzzResult r;
  for (int i = 0; i < n; ++i) {
    std::string s;
    if (i % 5 == 4) {
      for (size_t k = 0, m = pick(40); k < m; ++k) s += std::string(tokens[pick(25)]) + " ";
    } else {
      s = seeds[pick(seeds.size())];
      for (size_t k = 0, m = 1 + pick(6); k < m; ++k) {
        size_t at = pick(s.size() + 1);
        switch (pick(4)) {
          case 0: s.insert(at, 1, alphabet[pick(alphabet.size())]); break;
          case 1: if (at < s.size()) s.erase(at, 1 + pick(8)); break;
          case 2: if (at < s.size()) s[at] = static_cast<char>(pick(256)); break;
          default: s.insert(at, tokens[pick(25)]); break;
        }
      }
    }
    ++r.inputs;
    try {
      if (i % 2) r.models += std::holds_alternative<Model>(parse_model(s));
      else (void)parse_program(s);
    } catch (const std::exception& e) {
      r.failure = std::string("parser threw ") + e.what() + " on input:\n" + s;
      return r;
    }
  }
  return r;
}

}  // namespace hpsec::test
