#include <iostream>
#include <string>
#include <vector>

#include "intrinsic/cli.hpp"

int main(int argc, char** argv) {
  return intrinsic::cli::run(std::vector<std::string>(argv, argv + argc), std::cout, std::cerr);
}
