#include <string>
#include <vector>

#include "xfolio/cli.hpp"

int main(int argc, char** argv) {
  std::vector<std::string> args(argv + 1, argv + argc);
  return xfolio::cli::run(args);
}
