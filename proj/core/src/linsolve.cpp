#include "csflow/linsolve.hpp"

#include <algorithm>
#include <array>
#include <cmath>
#include <cstdio>
#include <numbers>
#include <string>

#include "csflow/config.hpp"

namespace csflow {

namespace {

std::string node(const FlowGrid& g, int i, int j) {
  char buf[96];
  std::snprintf(buf, sizeof buf, "(phi=%.6g, k=%.6g)", g.phi(i), g.k(j));
  return buf;
}

}  // namespace

double ConductivityField::interior_min() const {
  return sigma.block(1, 1, grid.n_phi - 2, grid.n_k - 1).minCoeff();
}

ConductivityField conductivity_from(const FlowTable& table, const GridField& total) {
  const auto& g = total.grid;
  const double inv = 1.0 / (g.dphi() * g.dphi());
  ConductivityField out{g, Eigen::MatrixXd::Zero(g.n_phi, g.n_k)};
  for (int j = 0; j < g.n_k; ++j) {
    for (int i = 1; i + 1 < g.n_phi; ++i) {
      const double m2 = (total(i + 1, j) - 2.0 * total(i, j) + total(i - 1, j)) * inv;
      if (!table.contains(m2)) {
        char buf[128];
        std::snprintf(buf, sizeof buf, "d2u=%.6g outside flow table [%.6g, %.6g] at ", m2, table.lower(),
                      table.upper());
        throw RangeError(buf + node(g, i, j));
      }
      out.sigma(i, j) = table.sigma_at(m2);
    }
    out.sigma(0, j) = out.sigma(1, j);
    out.sigma(g.n_phi - 1, j) = out.sigma(g.n_phi - 2, j);
  }
  return out;
}

ConductivityField constant_conductivity(const FlowGrid& grid, double sigma) {
  return {grid, Eigen::MatrixXd::Constant(grid.n_phi, grid.n_k, sigma)};
}

GridField apply_linearized(const ConductivityField& sigma, const GridField& v) {
  const auto& g = v.grid;
  const double ik = 1.0 / g.dk();
  const double ip = 1.0 / (g.dphi() * g.dphi());
  GridField out(g, FieldRole::source);
  for (int j = 1; j < g.n_k; ++j)
    for (int i = 1; i + 1 < g.n_phi; ++i) {
      out(i, j) = (v(i, j) - v(i, j - 1)) * ik - sigma.sigma(i, j) * (v(i + 1, j) - 2.0 * v(i, j) + v(i - 1, j)) * ip;
    }
  return out;
}

GridField solve_linearized(const ConductivityField& sigma, const GridField& g, double floor) {
  const auto& grid = g.grid;
  const int n = grid.n_phi - 2;
  const double dk = grid.dk();
  const double r = dk / (grid.dphi() * grid.dphi());
  GridField v(grid, FieldRole::solution);
  std::vector<double> sub(n), diag(n), sup(n), rhs(n);
  for (int j = 1; j < grid.n_k; ++j) {
    // (1 + 2 r s_i) v_i - r s_i (v_{i-1} + v_{i+1}) = v_i^{old} + dk g_i
    for (int m = 0; m < n; ++m) {
      const int i = m + 1;
      const double s = sigma.sigma(i, j);
      if (!(s > floor) || !std::isfinite(s)) {
        char buf[96];
        std::snprintf(buf, sizeof buf, "sigma=%.6g not above floor %.6g at ", s, floor);
        throw WindowError(buf + node(grid, i, j));
      }
      sub[m] = -r * s;
      sup[m] = -r * s;
      diag[m] = 1.0 + 2.0 * r * s;
      rhs[m] = v(i, j - 1) + dk * g(i, j);
    }
    // Thomas sweep; diagonally dominant for s > 0.
    for (int m = 1; m < n; ++m) {
      const double w = sub[m] / diag[m - 1];
      diag[m] -= w * sup[m - 1];
      rhs[m] -= w * rhs[m - 1];
    }
    v(n, j) = rhs[n - 1] / diag[n - 1];
    for (int m = n - 2; m >= 0; --m) v(m + 1, j) = (rhs[m] - sup[m] * v(m + 2, j)) / diag[m];
  }
  return v;
}

MaxPrincipleCertificate max_principle_certificate(const std::vector<ConductivityField>& sigmas,
                                                  const std::vector<GridField>& sources, double slack) {
  MaxPrincipleCertificate c;
  if (sigmas.empty() || sources.empty()) throw NumericError("certificate needs conductivities and sources");
  c.bound = sigmas.front().grid.length() * (1.0 + slack);
  for (const auto& s : sigmas)
    for (const auto& g : sources) {
      const double gn = g.values.block(1, 1, g.grid.n_phi - 2, g.grid.n_k - 1).cwiseAbs().maxCoeff();
      if (gn == 0.0) continue;
      const double ratio = solve_linearized(s, g).max_abs() / gn;
      c.observed = std::max(c.observed, ratio);
      ++c.samples;
    }
  c.passed = c.samples > 0 && c.observed <= c.bound;
  return c;
}

std::vector<InverseGradedCheck> inverse_graded_check(const std::vector<ConductivityField>& sigmas,
                                                     const std::vector<GridField>& sources, double slack) {
  if (sigmas.size() != sources.size() || sources.size() < 2) {
    throw NumericError("graded check needs paired conductivities and sources, at least 2");
  }
  std::vector<std::array<double, 3>> ratio(sources.size());
  for (std::size_t s = 0; s < sources.size(); ++s) {
    const auto vn = seminorms(solve_linearized(sigmas[s], sources[s]), 2);
    const auto gn = seminorms(sources[s], 2);
    const auto sn = seminorms(GridField(sigmas[s].grid, sigmas[s].sigma, FieldRole::source), 3);
    for (int n = 0; n <= 2; ++n) ratio[s][n] = vn[n] / (gn[n] + gn[0] * sn[n + 1]);
  }
  const std::size_t half = sources.size() / 2;
  std::vector<InverseGradedCheck> out;
  for (int n = 0; n <= 2; ++n) {
    InverseGradedCheck c;
    c.n = n;
    for (std::size_t s = 0; s < half; ++s) c.constant = std::max(c.constant, ratio[s][n]);
    for (std::size_t s = half; s < sources.size(); ++s) {
      c.worst_held_out = std::max(c.worst_held_out, ratio[s][n]);
      if (!(ratio[s][n] <= (1.0 + slack) * c.constant)) ++c.violations;
    }
    c.passed = c.violations == 0;
    out.push_back(c);
  }
  return out;
}

double heat_oracle(const FlowGrid& grid, double sigma, double phi, double k) {
  const double w = grid.width();
  const double lambda = sigma * std::numbers::pi * std::numbers::pi / (w * w);
  const double hat = (phi - grid.phi_min) / w;
  return std::sin(std::numbers::pi * hat) / lambda * -std::expm1(-lambda * (k - grid.k_min));
}

}  // namespace csflow
