#include <iostream>
#include <string>
#include <vector>

#include "axcap/pipeline.hpp"

int main(int argc, char** argv) {
  std::vector<std::string> args(argv + 1, argv + argc);
  return axcap::pipe::cli_run(args, std::cout, std::cerr);
}
