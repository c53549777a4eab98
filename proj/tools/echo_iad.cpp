#include <iostream>
#include <string>
#include <vector>

#include "echo/cli.hpp"

int main(int argc, char** argv) {
  std::vector<std::string> args(argv + 1, argv + argc);
  return echo::cli::run(args, std::cout, std::cerr);
}
