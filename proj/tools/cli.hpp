#pragma once

#include <string>
#include <vector>

namespace csflow::cli {

enum ExitCode : int {
  ok = 0,
  usage = 1,
  config_error = 2,
  numeric_error = 3,
  window_exit = 4,
  stalled = 5,
  verify_failed = 6,
};

int run(int argc, char** argv);
int run(const std::vector<std::string>& args);  // args[0] is the program name

}  // namespace csflow::cli
