#include <doctest.h>

#include <cmath>
#include <random>

#include "common.hpp"
#include "csflow/linsolve.hpp"
#include "csflow/verify.hpp"

using namespace csflow;
using testing::pi;

namespace {

double interior_sup(const GridField& f) {
  return f.values.block(1, 1, f.grid.n_phi - 2, f.grid.n_k - 1).cwiseAbs().maxCoeff();
}

FlowGrid grid(int n_phi = 65, int n_k = 65) {
  FlowGrid g;
  g.n_phi = n_phi;
  g.n_k = n_k;
  return g;
}

}  // namespace

TEST_CASE("linsolve: forward operator") {
  const FlowGrid g = grid();
  const auto one = constant_conductivity(g, 1.0);
  CHECK(apply_linearized(one, GridField(g, FieldRole::solution)).max_abs() == 0.0);

  auto hat = [&](double phi) { return (phi - g.phi_min) / g.width(); };
  const auto v = GridField::from_function(g, FieldRole::solution,
                                          [&](double phi, double k) { return std::sin(pi * hat(phi)) * (k - g.k_min); });
  const auto lv = apply_linearized(one, v);
  double worst = 0.0;
  for (int j = 1; j < g.n_k; ++j)
    for (int i = 1; i + 1 < g.n_phi; ++i) {
      const double exact = std::sin(pi * hat(g.phi(i))) * (1 + pi * pi * (g.k(j) - g.k_min) / (g.width() * g.width()));
      worst = std::max(worst, std::abs(lv(i, j) - exact));
    }
  CHECK(worst < 2 * pi * pi * pi * pi / 12 * g.dphi() * g.dphi() / (g.width() * g.width()));

  std::mt19937_64 rng(2);
  const auto a = random_smooth_field(g, rng), b = random_smooth_field(g, rng);
  GridField ab(g, 2.0 * a.values - 3.0 * b.values, FieldRole::source);
  const Eigen::MatrixXd lhs = apply_linearized(one, ab).values;
  const Eigen::MatrixXd rhs = 2.0 * apply_linearized(one, a).values - 3.0 * apply_linearized(one, b).values;
  CHECK((lhs - rhs).cwiseAbs().maxCoeff() < 1e-9);
}

TEST_CASE("linsolve: inverse is exact, F0 and deterministic") {
  const FlowGrid g = grid(129, 129);
  CHECK(solve_linearized(constant_conductivity(g, 1.0), GridField(g, FieldRole::source)).max_abs() == 0.0);

  std::mt19937_64 rng(4);
  for (int s = 0; s < 4; ++s) {
    const auto f = random_smooth_field(g, rng);
    ConductivityField sigma{g, (1.5 + 0.5 * f.values.array() / f.max_abs()).matrix() * 0.05};
    const auto src = random_smooth_field(g, rng);
    const auto v = solve_linearized(sigma, src);
    CHECK(satisfies_f0(v));
    CHECK(v.role == FieldRole::solution);
    GridField r = apply_linearized(sigma, v);
    r.values -= src.values;
    CHECK(interior_sup(r) / interior_sup(src) <= 1e-8);
    CHECK(solve_linearized(sigma, src).values == v.values);
  }
}

TEST_CASE("linsolve: discrete heat closed form") {
  // sin(pi phihat) is an eigenvector of the 3-point Laplacian, so the
  // implicit scheme has the exact solution (1 - (1 + dk lam_h)^-j) / lam_h.
  const FlowGrid g{0.0, 1.0, 65, 1.0, 2.0, 33};
  const auto src = GridField::from_function(g, FieldRole::source, [](double phi, double) { return std::sin(pi * phi); });
  const auto v = solve_linearized(constant_conductivity(g, 1.0), src);
  const double h = g.dphi();
  const double lam = 4.0 / (h * h) * std::pow(std::sin(pi * h / 2), 2);
  for (int j = 0; j < g.n_k; ++j)
    for (int i = 0; i < g.n_phi; ++i) {
      const double exact = std::sin(pi * g.phi(i)) * (1 - std::pow(1 + g.dk() * lam, -j)) / lam;
      CHECK(v(i, j) == doctest::Approx(exact).epsilon(1e-12).scale(1.0));
    }
  // and it approaches the continuum profile |X|^2/pi^2 sin up to the stencil error
  const FlowGrid wide{-1.0, 1.0, 257, 1.0, 6.0, 2049};
  const auto s2 = GridField::from_function(wide, FieldRole::source,
                                           [](double phi, double) { return std::sin(pi * (phi + 1) / 2); });
  const auto v2 = solve_linearized(constant_conductivity(wide, 1.0), s2);
  double worst = 0.0;
  for (int i = 0; i < wide.n_phi; ++i) {
    worst = std::max(worst, std::abs(v2(i, wide.n_k - 1) - 4 / (pi * pi) * std::sin(pi * (wide.phi(i) + 1) / 2)));
  }
  CHECK(worst < 1e-5);
  CHECK(heat_oracle(wide, 1.0, 0.0, 1e9) == doctest::Approx(4 / (pi * pi)));
}

TEST_CASE("linsolve: refuses non-parabolic conductivity") {
  const FlowGrid g = grid(17, 17);
  auto sigma = constant_conductivity(g, 1.0);
  sigma.sigma(5, 5) = -0.1;
  const GridField src(g, Eigen::MatrixXd::Ones(17, 17), FieldRole::source);
  CHECK_THROWS_AS(solve_linearized(sigma, src), WindowError);
  CHECK_THROWS_AS(solve_linearized(constant_conductivity(g, 0.01), src, 0.02), WindowError);
}

TEST_CASE("linsolve: maximum principle certificate") {
  const FlowGrid g = grid(33, 33);
  const GridField one(g, Eigen::MatrixXd::Ones(33, 33), FieldRole::source);
  const auto unit = constant_conductivity(g, 1.0);
  const auto cert = max_principle_certificate({unit}, {one});
  CHECK(cert.passed);
  CHECK(cert.observed <= g.length());
  CHECK(cert.bound == doctest::Approx(g.length()));

  const GridField ten(g, 10.0 * one.values, FieldRole::source);
  CHECK(solve_linearized(unit, ten).max_abs() == doctest::Approx(10 * solve_linearized(unit, one).max_abs()));

  std::mt19937_64 rng(9);
  std::vector<ConductivityField> sig;
  std::vector<GridField> src;
  for (int s = 0; s < 4; ++s) {
    const auto f = random_smooth_field(g, rng);
    sig.push_back({g, (1.5 + 0.5 * f.values.array() / f.max_abs()).matrix() * 0.03});
    src.push_back(random_smooth_field(g, rng));
  }
  CHECK(max_principle_certificate(sig, src).passed);
}

TEST_CASE("linsolve: graded inverse bound with constant sigma") {
  const FlowGrid g = grid(33, 33);
  std::mt19937_64 rng(21);
  std::vector<ConductivityField> sig;
  std::vector<GridField> src;
  for (int s = 0; s < 8; ++s) {
    sig.push_back(constant_conductivity(g, 0.5));
    src.push_back(random_f0_field(g, rng, 1.0));
  }
  for (const auto& c : inverse_graded_check(sig, src)) {
    CHECK(std::isfinite(c.constant));
    CHECK(c.constant > 0.0);
  }
}
