#include <cstdlib>
#include <iostream>

#include "bgz/cli.hpp"

int main(int argc, char** argv) {
  std::vector<std::string> args(argv + 1, argv + argc);
  return bgz::run_cli(args, std::cout, std::cerr, [](const char* name) { return std::getenv(name); });
}
