#include <iostream>

#include "vlpins/cli.hpp"

int main(int argc, char** argv) {
  return vlpins::runCli(std::vector<std::string>(argv + 1, argv + argc), std::cout, std::cerr);
}
