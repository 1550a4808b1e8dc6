#include <iostream>
#include <string>
#include <vector>

#include "sgdkf/cli.hpp"

int main(int argc, char** argv) {
  std::vector<std::string> args(argv + 1, argv + argc);
  return sgdkf::cli::run(args, std::cout, std::cerr);
}
