#include <iostream>
#include <string>
#include <vector>

#include "hpsec/cli.hpp"

int main(int argc, char** argv) {
  std::vector<std::string> args(argv + 1, argv + argc);
  return hpsec::run_cli(args, std::cout, std::cerr);
}
