#include <iostream>
#include <string>
#include <vector>

#include "u1/cli.hpp"

int main(int argc, char** argv) {
  const std::vector<std::string> args(argv + 1, argv + argc);
  return u1::cli::run(args, std::cout, std::cerr);
}
