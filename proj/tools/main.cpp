#include <iostream>
#include <string>
#include <vector>

#include "ensnet/alloc.hpp"
#include "ensnet/cli.hpp"

int main(int argc, char** argv) {
  ensnet::tune_allocator();
  std::vector<std::string> args(argv + 1, argv + argc);
  return ensnet::cli::run(args, std::cout, std::cerr);
}
