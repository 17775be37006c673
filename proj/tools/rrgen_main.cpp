#include <vector>
#include <string>

#include "rrg/cli.hpp"

int main(int argc, char** argv) {
  std::vector<std::string> args(argv + 1, argv + argc);
  return rrg::run_command(args);
}
