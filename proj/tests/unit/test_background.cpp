#include <doctest.h>

#include <cmath>

#include "common.hpp"
#include "csflow/background.hpp"

using namespace csflow;
using testing::pi;

TEST_CASE("background: closed-form frequencies and weights") {
  BackgroundParams p = testing::small_params(16);
  const Background bg(p);
  CHECK(bg.mode_count() == 33);
  CHECK(bg.mode(bg.slot_of(0)).omega == doctest::Approx(1.0).epsilon(1e-15));
  CHECK(bg.mode(bg.slot_of(1)).omega == doctest::Approx(std::sqrt(2.0)).epsilon(1e-15));
  CHECK(bg.mode(bg.slot_of(-1)).omega == bg.mode(bg.slot_of(1)).omega);
  for (const auto& m : bg.modes()) {
    CHECK(m.weight == doctest::Approx(0.25 * std::exp(-m.omega / 4.0) / (2.0 * m.omega)).epsilon(1e-14));
  }
  // nondecreasing in |n|
  for (int n = 1; n < 16; ++n) CHECK(bg.mode(bg.slot_of(n + 1)).omega > bg.mode(bg.slot_of(n)).omega);
}

TEST_CASE("background: configuration errors") {
  auto cfg = Config::from_string(testing::default_ini());
  CHECK_NOTHROW(build_background(cfg));

  auto no_eps = cfg;
  no_eps.erase("regulator.epsilon");
  CHECK_THROWS_WITH_AS(build_background(no_eps), "regulator slope required", ConfigError);

  BackgroundParams p = testing::small_params();
  p.t_min = -1.0;
  p.t_max = 1.0;
  p.t1 = -1.0;
  p.t2 = 1.0;
  CHECK_THROWS_AS(Background{p}, ConfigError);

  p = testing::small_params();
  p.mass = 0.0;
  CHECK_THROWS_AS(Background{p}, ConfigError);
  p.include_zero_mode = false;
  CHECK_NOTHROW(Background{p});

  p = testing::small_params();
  p.epsilon = 0.0;
  CHECK_THROWS_AS(Background{p}, ConfigError);
}

TEST_CASE("background: cutoff values") {
  const Background bg(testing::small_params());
  const double t1 = 0.0, t2 = 4.0;
  // plateau of relative width 0.5 centred in [0, 4] -> [1, 3]; bands [0,1], [3,4]
  CHECK(cutoff_eval(bg, 2.0) == 1.0);
  CHECK(cutoff_eval(bg, 1.0) == 1.0);
  CHECK(cutoff_eval(bg, t1 - 0.1) == 0.0);
  CHECK(cutoff_eval(bg, t2 + 0.1) == 0.0);
  CHECK(cutoff_eval(bg, t1) == 0.0);
  CHECK(cutoff_eval(bg, 0.5) == doctest::Approx(0.5).epsilon(1e-15));
  CHECK(cutoff_eval(bg, 3.5) == doctest::Approx(0.5).epsilon(1e-15));
  for (double t = -1.0; t <= 5.0; t += 0.01) {
    const double c = cutoff_eval(bg, t);
    CHECK(c >= 0.0);
    CHECK(c <= 1.0);
  }
  CHECK(smooth_step(0.0) == 0.0);
  CHECK(smooth_step(1.0) == 1.0);
  CHECK(smooth_step(0.3) + smooth_step(0.7) == doctest::Approx(1.0));
}

TEST_CASE("background: cutoff derivatives converge under refinement") {
  const Background bg(testing::small_params());
  // 4th-order central difference quotient at a band point; refinement error ratio ~4 (2nd order).
  auto d4 = [&](double t, double h) {
    return (cutoff_eval(bg, t + 2 * h) - 4 * cutoff_eval(bg, t + h) + 6 * cutoff_eval(bg, t) - 4 * cutoff_eval(bg, t - h) +
            cutoff_eval(bg, t - 2 * h)) /
           std::pow(h, 4);
  };
  const double t = 0.4;
  const double a = d4(t, 4e-3), b = d4(t, 2e-3), c = d4(t, 1e-3);
  CHECK(std::isfinite(a));
  CHECK(std::abs(a - b) / std::abs(b - c) > 3.0);
}

TEST_CASE("background: regulator derivative") {
  BackgroundParams p = testing::small_params();
  CHECK(regulator_k_derivative(Background(p), 2.0) == 1.0);
  p.epsilon = 0.5;
  const Background half(p);
  CHECK(regulator_k_derivative(half, 2.0) == 0.5);
  CHECK(regulator_k_derivative(half, -0.5) == 0.0);
  CHECK(regulator_k_derivative(half, 4.5) == 0.0);
}

TEST_CASE("background: f L1 norm") {
  BackgroundParams p = testing::small_params(4, 601);  // dt = 0.01, t1 and t2 on nodes
  p.cutoff_shape = CutoffShape::indicator;
  const Background ind(p);
  CHECK(f_l1_norm(ind) == doctest::Approx(2 * pi * 4.0).epsilon(1e-12));

  p.cutoff_shape = CutoffShape::smooth;
  p.circumference = 4 * pi;
  const Background twice(p);
  p.circumference = 2 * pi;
  const Background once(p);
  CHECK(f_l1_norm(twice) == doctest::Approx(2 * f_l1_norm(once)).epsilon(1e-15));

  // plateau -> 1 approaches the rectangle
  double prev = 0.0;
  for (double rho : {0.5, 0.8, 0.95, 0.99}) {
    p.plateau = rho;
    const double v = f_l1_norm(Background(p));
    CHECK(v > prev);
    CHECK(v < 2 * pi * 4.0 + 1e-12);
    prev = v;
  }
  CHECK(prev == doctest::Approx(2 * pi * 4.0).epsilon(0.01));
}

TEST_CASE("background: orthonormal harmonics and symmetric state kernel") {
  const Background bg(testing::small_params(3));
  const int n_x = 64;
  const double L = bg.circumference();
  for (const auto& a : bg.modes())
    for (const auto& b : bg.modes()) {
      double s = 0.0;
      for (int i = 0; i < n_x; ++i) s += bg.harmonic(a.index, L * i / n_x) * bg.harmonic(b.index, L * i / n_x);
      s *= L / n_x;
      CHECK(s == doctest::Approx(a.index == b.index ? 1.0 : 0.0).epsilon(1e-12).scale(1.0));
    }
  const auto t = bg.times();
  for (std::size_t s = 0; s < bg.mode_count(); ++s)
    for (std::size_t i = 0; i < t.size(); i += 17)
      for (std::size_t j = 0; j < t.size(); j += 13) CHECK(bg.state_kernel(s, t[i], t[j]) == bg.state_kernel(s, t[j], t[i]));
}

TEST_CASE("background: trapezoid weights") {
  const auto w = trapezoid_weights(5, 0.5);
  REQUIRE(w.size() == 5);
  CHECK(w[0] == 0.25);
  CHECK(w[2] == 0.5);
  CHECK(w[4] == 0.25);
}
