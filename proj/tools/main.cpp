#include <iostream>
#include <string>
#include <vector>

#include "prosgpv/cli.hpp"

int main(int argc, char** argv) {
  std::vector<std::string> args(argv, argv + argc);
  return prosgpv::run_cli(args, std::cout, std::cerr);
}
