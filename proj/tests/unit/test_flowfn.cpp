#include <doctest.h>

#include <cmath>
#include <filesystem>
#include <fstream>

#include "common.hpp"
#include "csflow/flowfn.hpp"
#include "csflow/spline.hpp"

using namespace csflow;

TEST_CASE("flowfn: spline reproduces linear data, rejects extrapolation") {
  std::vector<double> x{0, 1, 2, 3, 4}, y;
  for (double v : x) y.push_back(3 * v - 1);
  const CubicSpline s(x, y);
  CHECK(s(2.5) == doctest::Approx(6.5));
  CHECK(s.derivative(0.3) == doctest::Approx(3.0));
  CHECK(s.second_derivative(3.7) == doctest::Approx(0.0).scale(1.0));
  CHECK_THROWS_AS(s(4.0001), RangeError);
  CHECK_THROWS_AS(s(-1e-9), RangeError);
  const std::vector<double> few{0, 1, 2};
  CHECK_THROWS_AS(CubicSpline(few, few), NumericError);
}

TEST_CASE("flowfn: closed forms at m2 = 0 and vanishing state") {
  const Background bg(testing::small_params());
  double csum = 0.0;
  for (const auto& m : bg.modes()) csum += m.weight;
  CHECK(flow_value(bg, 0.0) == doctest::Approx(-0.5 * bg.epsilon() * csum).epsilon(1e-12));

  BackgroundParams p = testing::small_params();
  p.amplitude = 0.0;
  const Background zero(p);
  for (double m2 : {-0.4, 0.0, 0.3}) {
    const auto fp = flow_point(zero, m2);
    CHECK(fp.g == 0.0);
    CHECK(fp.sigma == 0.0);
    CHECK(fp.a2 == 0.0);
  }

  p.amplitude = -0.25;
  CHECK(flow_value(Background(p), 0.0) > 0.0);
  CHECK_THROWS_AS(flow_value(bg, 0.6), RangeError);
}

TEST_CASE("flowfn: sigma and A2 are the m2 derivatives of G") {
  const Background bg(testing::small_params());
  for (double m2 : {-0.3, 0.0, 0.2}) {
    double err1[2], err2[2];
    int q = 0;
    for (double h : {2e-3, 1e-3}) {
      const double gp = flow_value(bg, m2 + h), g0 = flow_value(bg, m2), gm = flow_value(bg, m2 - h);
      err1[q] = std::abs(sigma_value(bg, m2) - (gp - gm) / (2 * h));
      err2[q] = std::abs(a2_value(bg, m2) - (gp - 2 * g0 + gm) / (h * h));
      ++q;
    }
    CHECK(err1[1] < 1e-6);
    CHECK(err1[0] / err1[1] == doctest::Approx(4.0).epsilon(0.1));
    CHECK(err2[1] < 1e-4);
  }
}

TEST_CASE("flowfn: linearity in the state amplitude") {
  BackgroundParams p = testing::small_params();
  const auto a = flow_point(Background(p), 0.17);
  p.amplitude *= 2;
  const auto b = flow_point(Background(p), 0.17);
  CHECK(b.g == doctest::Approx(2 * a.g).epsilon(1e-14));
  CHECK(b.sigma == doctest::Approx(2 * a.sigma).epsilon(1e-14));
  CHECK(b.a2 == doctest::Approx(2 * a.a2).epsilon(1e-14));
}

TEST_CASE("flowfn: tabulation") {
  const Background bg(testing::small_params());
  const auto t1 = tabulate(bg, {0.5, 41, 1});
  const auto t4 = tabulate(bg, {0.5, 41, 4});
  CHECK(t1.size() == 41);
  CHECK(t1.lower() == -0.5);
  CHECK(t1.upper() == 0.5);
  CHECK(t1.g() == t4.g());
  CHECK(t1.sigma() == t4.sigma());
  CHECK(t1.a2() == t4.a2());
  CHECK(t1.background_hash() == bg.hash());
  CHECK(t1.g_at(0.0) == doctest::Approx(flow_value(bg, 0.0)).epsilon(1e-12));
  CHECK_THROWS_AS(t1.g_at(0.51), RangeError);
  CHECK_THROWS_WITH_AS(tabulate(bg, {0.5, 1, 1}), "need >= 4 points for cubic spline", NumericError);

  const auto dc = derivative_consistency(t1);
  CHECK(dc.sigma_max_error < 1e-4);
  CHECK(dc.a2_max_error < 1e-3);

  const auto path = std::filesystem::temp_directory_path() / "csflow_table_test.csv";
  write_flow_table_csv(path, t1);
  std::ifstream is(path);
  std::string header, first;
  std::getline(is, header);
  std::getline(is, first);
  CHECK(header == "m2,G,sigma,A2");
  CHECK(first.rfind("-0.5,", 0) == 0);
  std::filesystem::remove(path);
}

TEST_CASE("flowfn: sigma window") {
  BackgroundParams p = testing::small_params();
  const auto table = tabulate(Background(p), {0.5, 41, 2});
  const double s0 = table.sigma_at(0.0);
  REQUIRE(s0 > 0.0);

  const auto pass = check_sigma_window(table, s0 / 2, 5.0, 0.3);
  CHECK(pass.passed);
  CHECK(pass.sigma_min >= s0 / 2);

  const auto degenerate = check_sigma_window(table, s0, 5.0, 0.0);
  CHECK(degenerate.passed);
  CHECK(degenerate.sigma_min == doctest::Approx(s0));

  const auto tight = check_sigma_window(table, s0 / 2, 1e-3, 0.3);
  CHECK_FALSE(tight.passed);
  CHECK_FALSE(tight.slope_ok);

  p.amplitude = -p.amplitude;
  const auto flipped = check_sigma_window(tabulate(Background(p), {0.5, 41, 2}), s0 / 2, 5.0, 0.3);
  CHECK_FALSE(flipped.passed);
  CHECK(flipped.remedy.find("sign") != std::string::npos);

  CHECK_THROWS_AS(check_sigma_window(table, s0 / 2, 5.0, 0.6), RangeError);
}
