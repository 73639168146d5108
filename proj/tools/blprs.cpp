#include <string>
#include <vector>

#include "blprs/cli.hpp"

int main(int argc, char** argv) {
  std::vector<std::string> args(argv + 1, argv + argc);
  return blprs::run_cli(args);
}
