#include "pvq/cli.hpp"

#include <iostream>

int main(int argc, char **argv) {
  return pvq::run_cli(argc, argv, std::cout, std::cerr);
}
