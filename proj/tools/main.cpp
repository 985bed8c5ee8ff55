#include <iostream>
#include <string>
#include <vector>

#include "peerconf/cli.hpp"

int main(int argc, char** argv) {
  std::vector<std::string> args(argv + 1, argv + argc);
  return peerconf::run_cli(args, std::cout, std::cerr);
}
