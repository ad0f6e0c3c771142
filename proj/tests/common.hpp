#pragma once

#include <cctype>
#include <fstream>
#include <sstream>
#include <string>

#include "hpsec/syntax.hpp"

namespace hpsec::test {

inline std::string corpus(const std::string& name) { return std::string(HPSEC_CORPUS_DIR) + "/" + name; }

inline std::string read_file(const std::string& path) {
  std::ifstream f(path);
  std::stringstream s;
  s << f.rdbuf();
  return s.str();
}

inline Model load(const std::string& name) { return parse_model_or_throw(read_file(corpus(name)), name); }

inline std::string squash(const std::string& s) {
  std::string out;
  for (char c : s)
    if (!std::isspace(static_cast<unsigned char>(c))) out += c;
  return out;
}

}  // namespace hpsec::test
