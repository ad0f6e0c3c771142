#pragma once

#include <string>
#include <variant>
#include <vector>

#include "hpsec/ast.hpp"

namespace hpsec {

enum class Severity { Error, Warning };

struct Diagnostic {
  Severity severity = Severity::Error;
  std::string message;
  std::string file;
  Span span;
};

// `file:line:col: severity: message`
std::string render(const Diagnostic& d);
std::string render(const std::vector<Diagnostic>& ds);

using ParseResult = std::variant<Model, std::vector<Diagnostic>>;

ParseResult parse_model(const std::string& source, const std::string& file = "<input>");

// Snippet parsers. With a model, identifiers are resolved against its declarations;
// without one, any identifier is accepted and bare `name` guards stay predicates.
std::variant<Program, std::vector<Diagnostic>> parse_program(const std::string& source,
                                                             const Model* context = nullptr);
std::variant<Formula, std::vector<Diagnostic>> parse_formula(const std::string& source,
                                                             const Model* context = nullptr);
std::variant<Term, std::vector<Diagnostic>> parse_term(const std::string& source,
                                                       const Model* context = nullptr);

// Throwing conveniences for trusted inputs (tests, bundled corpus).
Model parse_model_or_throw(const std::string& source, const std::string& file = "<input>");
Program parse_program_or_throw(const std::string& source, const Model* context = nullptr);
Formula parse_formula_or_throw(const std::string& source, const Model* context = nullptr);

std::string print(const Term& t);
std::string print(const Formula& f);
std::string print(const Program& p);
std::string print_model(const Model& m);

struct KyxOptions {
  std::string entry_name = "model";
  bool allow_exp = true;
};

// KeYmaera X archive text; throws UnsupportedConstruct.
std::string emit_kyx(const Model& m, const KyxOptions& opts = {});

const char* to_string(CmpOp op);

}  // namespace hpsec
