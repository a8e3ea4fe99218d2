#include <iostream>

#include "deontic/cli.hpp"

int main(int argc, char** argv) {
  std::vector<std::string> args(argv + 1, argv + argc);
  return deontic::cli::run(args, std::cout, std::cerr);
}
