#include <iostream>

#include "scale/cli.hpp"
#include "scale/platform.hpp"

int main(int argc, char** argv) {
  scale::select_blas_kernels(argv);
  return scale::run_cli(argc, argv, std::cout, std::cerr);
}
