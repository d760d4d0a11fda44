#include <iostream>
#include <string>
#include <vector>

#include "qbochner/cli.hpp"

int main(int argc, char** argv) {
  std::vector<std::string> args(argv, argv + argc);
  return qbochner::cli::run(args, std::cout, std::cerr);
}
