#include "ldsort/cli.hpp"

#include <iostream>

int main(int argc, char** argv) {
  return ldsort::cli::run(argc, argv, std::cout, std::cerr);
}
