#include <iostream>
#include <string>
#include <vector>

#include "amsreg/cli.hpp"

int main(int argc, char** argv) {
  std::vector<std::string> args(argv + 1, argv + argc);
  return amsreg::cli::run(args, std::cout, std::cerr);
}
