#include <iostream>
#include <string>
#include <vector>

#include "smoothsnn/cli.hpp"

int main(int argc, char** argv) {
  std::vector<std::string> args(argv + 1, argv + argc);
  return smoothsnn::run_cli(args, std::cout, std::cerr);
}
