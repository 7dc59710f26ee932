#include <string>
#include <vector>

#include "hhws/cli.hpp"

int main(int argc, char** argv) {
  return hhws::run_cli(std::vector<std::string>(argv + 1, argv + argc));
}
