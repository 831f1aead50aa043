#include <string>
#include <vector>

#include "saw/cli.hpp"

int main(int argc, char** argv, char** envp) {
  std::vector<std::string> args(argv + 1, argv + argc);
  return saw::run_cli(args, envp);
}
