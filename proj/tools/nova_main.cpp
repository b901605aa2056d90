#include "nova/cli.hpp"

#include <iostream>

int main(int argc, char** argv) {
  std::vector<std::string> args(argv, argv + argc);
  return nova::run_command(args, std::cout, std::cerr);
}
