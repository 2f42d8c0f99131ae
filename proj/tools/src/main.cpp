#include <iostream>

#include "driftgate/cli.hpp"

int main(int argc, char** argv) {
  return driftgate::run_cli({argv + 1, argv + argc}, std::cout, std::cerr);
}
