#include <iostream>
#include <string>
#include <vector>

#include "aligngan/cli.hpp"

int main(int argc, char** argv) {
  return aligngan::run_cli(std::vector<std::string>(argv, argv + argc), std::cout, std::cerr);
}
