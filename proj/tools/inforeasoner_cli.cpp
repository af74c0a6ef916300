#include "inforeasoner/cli.hpp"

int main(int argc, char** argv) {
  std::vector<std::string> args(argv + 1, argv + argc);
  return inforeasoner::run_cli(args);
}
