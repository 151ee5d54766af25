#include "robustggm/cli.hpp"

#include <iostream>

int main(int argc, char** argv) {
  return robustggm::run_cli(std::vector<std::string>(argv, argv + argc), std::cout, std::cerr);
}
