#pragma once

#include <cmath>
#include <numbers>

#include "csflow/background.hpp"

namespace testing {

inline constexpr double pi = std::numbers::pi;

// Cheap background for unit tests: few modes, coarse time grid.
inline csflow::BackgroundParams small_params(int modes = 4, int time_points = 256) {
  csflow::BackgroundParams p;
  p.modes = modes;
  p.time_points = time_points;
  p.amplitude = 0.25;
  return p;
}

inline const char* default_ini() {
  return R"(
[spacetime]
circumference = 6.283185307179586
mass = 1
modes = 4
[grid]
t_min = -1
t_max = 5
time_points = 256
m2_max = 0.5
[cutoff]
t1 = 0
t2 = 4
plateau = 0.5
[regulator]
epsilon = 1
[state]
amplitude = 0.25
decay = 4
)";
}

}  // namespace testing
