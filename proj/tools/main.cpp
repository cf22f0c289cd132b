#include <iostream>
#include <string>
#include <vector>

#include "l2l/cli.hpp"

int main(int argc, char** argv) {
  std::vector<std::string> args(argv + 1, argv + argc);
  return l2l::dispatch(args, std::cout, std::cerr);
}
