#include <iostream>
#include <string>
#include <vector>

#include "gloredi/cli.hpp"

int main(int argc, char** argv) {
  std::vector<std::string> args(argv + 1, argv + argc);
  return gloredi::run_cli(args, std::cout, std::cerr);
}
