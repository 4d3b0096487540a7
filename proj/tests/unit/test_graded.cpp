#include <doctest.h>

#include <cmath>
#include <filesystem>
#include <fstream>
#include <random>

#include "common.hpp"
#include "csflow/graded.hpp"

using namespace csflow;
using testing::pi;

namespace {

FlowGrid small_grid(int n = 33) {
  FlowGrid g;
  g.n_phi = g.n_k = n;
  return g;
}

GridField random_trig(const FlowGrid& g, std::mt19937_64& rng, FieldRole role = FieldRole::source) {
  std::uniform_real_distribution<double> u(-1, 1);
  double a[3][3];
  for (auto& r : a)
    for (double& x : r) x = u(rng);
  return GridField::from_function(g, role, [&](double phi, double k) {
    double s = 0.0;
    for (int p = 0; p < 3; ++p)
      for (int q = 0; q < 3; ++q) s += a[p][q] * std::cos(p * pi * phi / 2 + 0.3 * q) * std::cos(q * pi * k + p);
    return s;
  });
}

}  // namespace

TEST_CASE("graded: grid validation") {
  FlowGrid g;
  CHECK_NOTHROW(g.validate());
  g.n_phi = 8;
  CHECK_THROWS_AS(g.validate(), ConfigError);
  g = FlowGrid{};
  g.k_min = 0.0;
  CHECK_THROWS_AS(g.validate(), ConfigError);
}

TEST_CASE("graded: finite-difference weights") {
  const std::vector<double> x{-1, 0, 1};
  const auto w = fd_weights(0.0, x, 2);
  CHECK(w[0] == doctest::Approx(1.0));
  CHECK(w[1] == doctest::Approx(-2.0));
  CHECK(w[2] == doctest::Approx(1.0));
  // derivative matrices are exact on low-degree polynomials
  const int n = 17;
  const double h = 0.125;
  Eigen::VectorXd p(n), dp(n);
  for (int i = 0; i < n; ++i) {
    const double xi = i * h;
    p[i] = xi * xi;
    dp[i] = 2 * xi;
  }
  CHECK((derivative_matrix(n, h, 1) * p - dp).cwiseAbs().maxCoeff() < 1e-11);
  CHECK((derivative_matrix(n, h, 2) * p).array().abs().maxCoeff() == doctest::Approx(2.0));
}

TEST_CASE("graded: seminorm examples") {
  const FlowGrid g;
  const auto quad = GridField::from_function(g, FieldRole::source, [](double phi, double) { return phi * phi; });
  CHECK(seminorm(quad, 0) == doctest::Approx(1.0).epsilon(1e-10));
  CHECK(std::abs(seminorm(quad, 1) - 3.0) <= 1e-10);
  CHECK(std::abs(seminorm(quad, 2) - 5.0) <= 1e-10);

  const GridField zero(g, FieldRole::source);
  for (int n = 0; n <= 6; ++n) CHECK(seminorm(zero, n) == 0.0);
  CHECK_THROWS_AS(seminorm(zero, 7), NumericError);

  std::mt19937_64 rng(7);
  for (int s = 0; s < 5; ++s) {
    const auto f = random_trig(small_grid(), rng);
    const auto v = seminorms(f, 5);
    for (int n = 0; n < 5; ++n) CHECK(v[n] <= v[n + 1]);
    CHECK(v[3] == doctest::Approx(seminorm(f, 3)).epsilon(1e-14));
  }
}

TEST_CASE("graded: slice Sobolev norm") {
  const std::vector<double> k{0.0, 1.0, 2.0, 3.0};
  CHECK(slice_sobolev_norm(std::vector<double>{0, 0, 1, 0}, k) == doctest::Approx(1.0 + 4.0));
  CHECK(slice_sobolev_norm(std::vector<double>{0, 0, 0, 0}, k) == 0.0);
  std::mt19937_64 rng(3);
  std::normal_distribution<double> nd;
  for (int s = 0; s < 20; ++s) {
    std::vector<double> a(4), b(4), ab(4);
    for (int i = 0; i < 4; ++i) {
      a[i] = nd(rng);
      b[i] = nd(rng);
      ab[i] = a[i] + b[i];
    }
    CHECK(slice_sobolev_norm(ab, k) <= slice_sobolev_norm(a, k) + slice_sobolev_norm(b, k) + 1e-12);
  }
}

TEST_CASE("graded: smoothing schedule") {
  const SmoothingSchedule s;
  CHECK(s.profile(0.0) == 1.0);
  CHECK(s.profile(1.0) == 1.0);
  CHECK(s.profile(2.0) == 0.0);
  CHECK(s.profile(1.5) == doctest::Approx(0.5));
  CHECK(s.radius(0.0) == 4.0);
  CHECK(s.radius(1.0) > s.radius(0.5));
  SmoothingSchedule smooth{4.0, Rolloff::smooth};
  CHECK(smooth.profile(0.5) == 1.0);
  CHECK(smooth.profile(2.5) == 0.0);
}

TEST_CASE("graded: smoothing operator") {
  const FlowGrid g = small_grid();
  const SmoothingSchedule cosine{4.0, Rolloff::quintic, SmoothingBasis::cosine};
  const SmoothingSchedule sine{4.0, Rolloff::quintic, SmoothingBasis::sine_phi};

  const GridField c(g, Eigen::MatrixXd::Constant(g.n_phi, g.n_k, 2.5), FieldRole::source);
  for (double t : {0.0, 0.7, 3.0}) CHECK((smoothing_apply(c, t, cosine).values - c.values).cwiseAbs().maxCoeff() < 1e-13);

  // mode (p, q) = (8, 3): sqrt(73) > 2 r(0) = 8
  const auto mode = GridField::from_function(g, FieldRole::source, [&](double phi, double k) {
    return std::cos(8 * pi * (phi - g.phi_min) / g.width()) * std::cos(3 * pi * (k - g.k_min) / g.length());
  });
  CHECK(smoothing_apply(mode, 0.0, cosine).max_abs() < 1e-13);

  std::mt19937_64 rng(11);
  GridField f = random_trig(g, rng, FieldRole::solution);
  project_f0(f);
  for (const auto& sched : {cosine, sine}) {
    CHECK((smoothing_apply(f, 10.0, sched).values - f.values).cwiseAbs().maxCoeff() < 1e-12);
    for (double t : {0.0, 0.5, 2.0}) CHECK(satisfies_f0(smoothing_apply(f, t, sched)));
  }

  // a single basis mode (p, q) = (3, 4) is scaled by profile(5 / r(t))
  const auto cos_mode = GridField::from_function(g, FieldRole::source, [&](double phi, double k) {
    return std::cos(3 * pi * (phi - g.phi_min) / g.width()) * std::cos(4 * pi * (k - g.k_min) / g.length());
  });
  const auto sin_mode = GridField::from_function(g, FieldRole::source, [&](double phi, double k) {
    return std::sin(3 * pi * (phi - g.phi_min) / g.width()) * std::cos(4 * pi * (k - g.k_min) / g.length());
  });
  double prev = 0.0;
  for (double t : {0.0, 0.1, 0.2, 0.3, 0.5, 1.0}) {
    const double m = cosine.profile(5.0 / cosine.radius(t));
    CHECK(m >= prev);
    prev = m;
    CHECK((smoothing_apply(cos_mode, t, cosine).values - m * cos_mode.values).cwiseAbs().maxCoeff() < 1e-12);
    CHECK((smoothing_apply(sin_mode, t, sine).values - m * sin_mode.values).cwiseAbs().maxCoeff() < 1e-12);
  }
}

TEST_CASE("graded: boundary lift") {
  const FlowGrid g = small_grid();
  std::vector<double> psi(g.n_phi, 0.0), left(g.n_k, 0.0), right(g.n_k, 0.0);
  CHECK(boundary_lift(psi, left, right, g).lift.max_abs() == 0.0);

  for (int i = 0; i < g.n_phi; ++i) psi[i] = g.phi(i) * g.phi(i);
  std::fill(left.begin(), left.end(), 1.0);
  std::fill(right.begin(), right.end(), 1.0);
  const auto lift = boundary_lift(psi, left, right, g);
  for (int j = 0; j < g.n_k; ++j)
    for (int i = 0; i < g.n_phi; ++i) CHECK(lift.lift(i, j) == doctest::Approx(psi[i]).epsilon(1e-15));
  CHECK(lift.norm2 == doctest::Approx(5.0).epsilon(1e-9));
  CHECK(lift.norm3 >= lift.norm2);

  left[0] = 1.5;
  CHECK_THROWS_AS(boundary_lift(psi, left, right, g), ConfigError);
}

TEST_CASE("graded: tame fits of derivative-counting maps") {
  const FlowGrid g = small_grid();
  std::mt19937_64 rng(5);
  std::vector<GridField> samples;
  for (int s = 0; s < 12; ++s) samples.push_back(random_trig(g, rng));

  auto identity = [](const GridField& u) { return u; };
  const auto id = tame_fit(samples, identity, 1, 0);
  CHECK(id.passed);
  CHECK(id.constant <= 1.0);

  auto d2 = [](const GridField& u) { return GridField(u.grid, mixed_derivative(u, 2, 0), FieldRole::source); };
  for (int n = 0; n <= 1; ++n) {
    const auto fit = tame_fit(samples, d2, n, 2);
    CHECK(fit.passed);
    CHECK(fit.constant <= 1.0 + 1e-6);
  }
}

TEST_CASE("graded: F0 projection and CSV") {
  const FlowGrid g = small_grid(9);
  GridField f(g, Eigen::MatrixXd::Ones(g.n_phi, g.n_k), FieldRole::solution);
  CHECK_FALSE(satisfies_f0(f));
  project_f0(f);
  CHECK(satisfies_f0(f));
  CHECK(f(4, 4) == 1.0);

  const auto path = std::filesystem::temp_directory_path() / "csflow_field_test.csv";
  write_field_csv(path, f);
  std::ifstream is(path);
  std::string header;
  std::getline(is, header);
  CHECK(header == "phi,k,value");
  int rows = 0;
  for (std::string line; std::getline(is, line);) ++rows;
  CHECK(rows == 81);
  std::filesystem::remove(path);
}
