#include <iostream>
#include <string>
#include <vector>

#include "b3d/cli.hpp"

int main(int argc, char** argv) {
  return b3d::run_cli(std::vector<std::string>(argv + 1, argv + argc), std::cout, std::cerr);
}
