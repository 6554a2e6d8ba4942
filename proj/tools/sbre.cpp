#include <iostream>
#include <string>
#include <vector>

#include "sbre/commands.hpp"

int main(int argc, char** argv) {
  std::vector<std::string> args(argv + 1, argv + argc);
  return sbre::run_cli(args, std::cout, std::cerr);
}
