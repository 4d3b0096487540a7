#include <doctest.h>

#include <cstdio>
#include <filesystem>
#include <fstream>

#include "csflow/config.hpp"

using namespace csflow;

TEST_CASE("config: sections flatten to dotted lowercase keys") {
  const auto c = Config::from_string("[Grid]\nPhi_Points = 65\n[solver]\ndt = 0.05\nname = x\n");
  CHECK(c.get_int("grid.phi_points") == 65);
  CHECK(c.get_double("solver.dt") == doctest::Approx(0.05));
  CHECK(c.get_string("solver.name", "") == "x");
  CHECK(c.get_double("solver.missing", 2.5) == 2.5);
}

TEST_CASE("config: missing and malformed values are config errors") {
  const auto c = Config::from_string("[a]\nx = nope\ny = 1.5\n");
  CHECK_THROWS_AS(c.get_double("a.x"), ConfigError);
  CHECK_THROWS_AS(c.get_double("a.z"), ConfigError);
  CHECK_THROWS_AS(c.get_int("a.y"), ConfigError);
  CHECK_THROWS_WITH_AS(Config::from_string("").get_double("regulator.epsilon"), "regulator slope required", ConfigError);
  CHECK_THROWS_AS(Config::from_file("/nonexistent/csflow.ini"), ConfigError);
}

TEST_CASE("config: hash ignores formatting, tracks values") {
  const auto a = Config::from_string("[s]\nx = 0.5\ny = 2\n");
  const auto b = Config::from_string("[s]\ny=2.0\n\nx = 5e-1\n");
  const auto c = Config::from_string("[s]\nx = 0.5\ny = 3\n");
  CHECK(a.hash() == b.hash());
  CHECK(a.hash() != c.hash());
  CHECK(a.hash().size() == 16);
}

TEST_CASE("config: fnv1a64 reference values") {
  CHECK(fnv1a64("") == 0xcbf29ce484222325ULL);
  CHECK(fnv1a64("a") == 0xaf63dc4c8601ec8cULL);
  CHECK(hex64(0xabcULL) == "0000000000000abc");
}

TEST_CASE("config: from_file round trip") {
  const auto path = std::filesystem::temp_directory_path() / "csflow_config_test.ini";
  {
    std::ofstream os(path);
    os << "[state]\namplitude = -0.25\n";
  }
  CHECK(Config::from_file(path).get_double("state.amplitude") == -0.25);
  std::filesystem::remove(path);
}
