#include "csflow/graded.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <numbers>
#include <string>

#include "csflow/background.hpp"
#include "csflow/config.hpp"
#include "csflow/propagators.hpp"

namespace csflow {

void FlowGrid::validate() const {
  if (n_phi < 9 || n_k < 9) throw ConfigError("flow grid needs at least 9 nodes per axis");
  if (!(phi_max > phi_min)) throw ConfigError("grid.phi_max must exceed grid.phi_min");
  if (!(k_min > 0.0)) throw ConfigError("grid.k_min must be positive");
  if (!(k_max > k_min)) throw ConfigError("grid.k_max must exceed grid.k_min");
}

GridField::GridField(const FlowGrid& g, FieldRole r) : grid(g), values(Eigen::MatrixXd::Zero(g.n_phi, g.n_k)), role(r) {}

GridField::GridField(const FlowGrid& g, Eigen::MatrixXd v, FieldRole r) : grid(g), values(std::move(v)), role(r) {
  if (values.rows() != g.n_phi || values.cols() != g.n_k) throw NumericError("field shape does not match grid");
}

GridField GridField::from_function(const FlowGrid& g, FieldRole r, const std::function<double(double, double)>& f) {
  GridField out(g, r);
  for (int j = 0; j < g.n_k; ++j)
    for (int i = 0; i < g.n_phi; ++i) out(i, j) = f(g.phi(i), g.k(j));
  return out;
}

void project_f0(GridField& field) {
  field.values.col(0).setZero();
  field.values.row(0).setZero();
  field.values.row(field.values.rows() - 1).setZero();
}

bool satisfies_f0(const GridField& field) {
  const auto& v = field.values;
  return v.col(0).isZero(0.0) && v.row(0).isZero(0.0) && v.row(v.rows() - 1).isZero(0.0);
}

std::vector<double> fd_weights(double x0, std::span<const double> x, int m) {
  // Fornberg's recursion, keeping only the table needed for order m.
  const int n = static_cast<int>(x.size());
  if (m < 0 || n <= m) throw NumericError("stencil too small for derivative order");
  std::vector<std::vector<double>> c(static_cast<std::size_t>(n), std::vector<double>(static_cast<std::size_t>(m + 1), 0.0));
  double c1 = 1.0;
  double c4 = x[0] - x0;
  c[0][0] = 1.0;
  for (int i = 1; i < n; ++i) {
    const int mn = std::min(i, m);
    double c2 = 1.0;
    const double c5 = c4;
    c4 = x[i] - x0;
    for (int j = 0; j < i; ++j) {
      const double c3 = x[i] - x[j];
      c2 *= c3;
      if (j == i - 1) {
        for (int k = mn; k >= 1; --k) c[i][k] = c1 * (k * c[i - 1][k - 1] - c5 * c[i - 1][k]) / c2;
        c[i][0] = -c1 * c5 * c[i - 1][0] / c2;
      }
      for (int k = mn; k >= 1; --k) c[j][k] = (c4 * c[j][k] - k * c[j][k - 1]) / c3;
      c[j][0] = c4 * c[j][0] / c3;
    }
    c1 = c2;
  }
  std::vector<double> w(static_cast<std::size_t>(n));
  for (int i = 0; i < n; ++i) w[i] = c[i][m];
  return w;
}

Eigen::MatrixXd derivative_matrix(int n, double h, int m) {
  if (m == 0) return Eigen::MatrixXd::Identity(n, n);
  const int half = (m + 1) / 2;
  const int one_sided = m + 2;
  if (n < std::max(2 * half + 1, one_sided)) throw NumericError("grid too coarse for derivative order " + std::to_string(m));

  Eigen::MatrixXd d = Eigen::MatrixXd::Zero(n, n);
  auto fill = [&](int row, int first, int size) {
    std::vector<double> x(static_cast<std::size_t>(size));
    for (int k = 0; k < size; ++k) x[k] = static_cast<double>(first + k - row);
    const auto w = fd_weights(0.0, x, m);
    const double scale = std::pow(h, -m);
    for (int k = 0; k < size; ++k) d(row, first + k) = w[k] * scale;
  };
  for (int i = 0; i < n; ++i) {
    if (i < half) {
      fill(i, 0, one_sided);
    } else if (i >= n - half) {
      fill(i, n - one_sided, one_sided);
    } else {
      fill(i, i - half, 2 * half + 1);
    }
  }
  return d;
}

Eigen::MatrixXd mixed_derivative(const GridField& field, int p, int q) {
  const auto& g = field.grid;
  Eigen::MatrixXd out = field.values;
  if (p > 0) out = derivative_matrix(g.n_phi, g.dphi(), p) * out;
  if (q > 0) out = out * derivative_matrix(g.n_k, g.dk(), q).transpose();
  return out;
}

Eigen::MatrixXd second_phi_difference(const GridField& field) { return mixed_derivative(field, 2, 0); }

std::vector<double> seminorms(const GridField& field, int n, int n_max) {
  if (n < 0 || n > n_max) throw NumericError("seminorm order outside [0, " + std::to_string(n_max) + "]");
  const auto& g = field.grid;
  std::vector<Eigen::MatrixXd> dk;
  for (int q = 0; q <= n; ++q) dk.push_back(derivative_matrix(g.n_k, g.dk(), q).transpose());

  std::vector<double> by_order(static_cast<std::size_t>(n + 1), 0.0);
  for (int p = 0; p <= n; ++p) {
    const Eigen::MatrixXd dp = p == 0 ? field.values : Eigen::MatrixXd(derivative_matrix(g.n_phi, g.dphi(), p) * field.values);
    for (int q = 0; p + q <= n; ++q) {
      const double s = q == 0 ? dp.cwiseAbs().maxCoeff() : (dp * dk[q]).cwiseAbs().maxCoeff();
      by_order[p + q] += s;
    }
  }
  std::vector<double> out(by_order.size());
  double acc = 0.0;
  for (std::size_t j = 0; j < by_order.size(); ++j) out[j] = acc += by_order[j];
  return out;
}

double seminorm(const GridField& field, int n, int n_max) { return seminorms(field, n, n_max).back(); }

double slice_sobolev_norm(std::span<const double> coefficients, std::span<const double> wavenumbers) {
  if (coefficients.size() != wavenumbers.size()) throw NumericError("coefficient and wavenumber counts differ");
  double a = 0.0, b = 0.0;
  for (std::size_t i = 0; i < coefficients.size(); ++i) {
    const double h2 = coefficients[i] * coefficients[i];
    const double k2 = wavenumbers[i] * wavenumbers[i];
    a += h2;
    b += k2 * k2 * h2;
  }
  return std::sqrt(a) + std::sqrt(b);
}

double SmoothingSchedule::radius(double t) const { return r0 * std::exp(t); }

double SmoothingSchedule::profile(double x) const {
  if (x <= 1.0) return 1.0;
  if (x >= 2.0) return 0.0;
  const double s = x - 1.0;
  if (rolloff == Rolloff::smooth) return 1.0 - smooth_step(s);
  return 1.0 - s * s * s * (10.0 + s * (-15.0 + 6.0 * s));
}

namespace {

// Forward DCT-I: X_p = sum_n a_n x_n cos(pi p n / (N-1)), a_0 = a_{N-1} = 1/2.
Eigen::MatrixXd dct1(int n) {
  Eigen::MatrixXd c(n, n);
  for (int p = 0; p < n; ++p)
    for (int k = 0; k < n; ++k) {
      const double a = (k == 0 || k == n - 1) ? 0.5 : 1.0;
      c(p, k) = a * std::cos(std::numbers::pi * p * k / (n - 1));
    }
  return c;
}

// Forward DST-I on the n - 2 interior nodes of an n-point axis.
Eigen::MatrixXd dst1(int n) {
  Eigen::MatrixXd s(n - 2, n - 2);
  for (int p = 1; p <= n - 2; ++p)
    for (int k = 1; k <= n - 2; ++k) s(p - 1, k - 1) = std::sin(std::numbers::pi * p * k / (n - 1));
  return s;
}

}  // namespace

GridField smoothing_apply(const GridField& field, double t, const SmoothingSchedule& schedule) {
  const int np = field.grid.n_phi, nk = field.grid.n_k;
  const double r = schedule.radius(t);
  const Eigen::MatrixXd ck = dct1(nk);
  // Both transforms are involutions up to 2/(N-1).
  const double scale = 4.0 / ((np - 1.0) * (nk - 1.0));
  Eigen::MatrixXd back;
  if (schedule.basis == SmoothingBasis::cosine) {
    const Eigen::MatrixXd cp = dct1(np);
    Eigen::MatrixXd coeff = cp * field.values * ck.transpose();
    for (int q = 0; q < nk; ++q)
      for (int p = 0; p < np; ++p) coeff(p, q) *= schedule.profile(std::hypot(p, q) / r);
    back = (cp * coeff * ck.transpose()) * scale;
  } else {
    const Eigen::MatrixXd sp = dst1(np);
    Eigen::MatrixXd coeff = sp * field.values.middleRows(1, np - 2) * ck.transpose();
    for (int q = 0; q < nk; ++q)
      for (int p = 1; p <= np - 2; ++p) coeff(p - 1, q) *= schedule.profile(std::hypot(p, q) / r);
    back = Eigen::MatrixXd::Zero(np, nk);
    back.middleRows(1, np - 2) = (sp * coeff * ck.transpose()) * scale;
  }
  GridField out(field.grid, std::move(back), field.role);
  if (out.role == FieldRole::solution) project_f0(out);
  return out;
}

BoundaryLift boundary_lift(std::span<const double> psi, std::span<const double> beta_left,
                           std::span<const double> beta_right, const FlowGrid& grid, double tolerance) {
  grid.validate();
  if (psi.size() != static_cast<std::size_t>(grid.n_phi) || beta_left.size() != static_cast<std::size_t>(grid.n_k) ||
      beta_right.size() != static_cast<std::size_t>(grid.n_k)) {
    throw ConfigError("boundary data does not match the flow grid");
  }
  const double mismatch = std::max(std::abs(beta_left[0] - psi.front()), std::abs(beta_right[0] - psi.back()));
  if (mismatch > tolerance) {
    char buf[160];
    std::snprintf(buf, sizeof buf, "boundary data incompatible at k=a: corner mismatch %.3e > %.3e", mismatch,
                  tolerance);
    throw ConfigError(buf);
  }
  BoundaryLift out;
  out.lift = GridField(grid, FieldRole::lift);
  for (int j = 0; j < grid.n_k; ++j)
    for (int i = 0; i < grid.n_phi; ++i) {
      const double s = (grid.phi(i) - grid.phi_min) / grid.width();
      out.lift(i, j) = psi[i] + (1.0 - s) * (beta_left[j] - psi.front()) + s * (beta_right[j] - psi.back());
    }
  const auto norms = seminorms(out.lift, 3);
  out.norm2 = norms[2];
  out.norm3 = norms[3];
  return out;
}

TameFit tame_fit_values(std::span<const double> lhs, std::span<const double> rhs, int n, int r, double slack) {
  if (lhs.size() != rhs.size() || lhs.size() < 2) throw NumericError("tame fit needs matching samples, at least 2");
  TameFit fit;
  fit.n = n;
  fit.r = r;
  fit.slack = slack;
  const std::size_t half = lhs.size() / 2;
  fit.training = static_cast<int>(half);
  fit.held_out = static_cast<int>(lhs.size() - half);
  for (std::size_t i = 0; i < half; ++i) fit.constant = std::max(fit.constant, lhs[i] / (1.0 + rhs[i]));
  for (std::size_t i = half; i < lhs.size(); ++i) {
    const double ratio = lhs[i] / (1.0 + rhs[i]);
    fit.worst_held_out_ratio = std::max(fit.worst_held_out_ratio, ratio);
    if (!(ratio <= (1.0 + slack) * fit.constant)) ++fit.violations;
  }
  fit.passed = fit.violations == 0;
  return fit;
}

TameFit tame_fit(std::span<const GridField> samples, const std::function<GridField(const GridField&)>& map, int n,
                 int r, double slack) {
  std::vector<double> lhs, rhs;
  for (const auto& u : samples) {
    lhs.push_back(seminorm(map(u), n));
    rhs.push_back(seminorm(u, n + r));
  }
  return tame_fit_values(lhs, rhs, n, r, slack);
}

void write_field_csv(const std::filesystem::path& path, const GridField& field) {
  std::FILE* f = std::fopen(path.string().c_str(), "w");
  if (!f) throw NumericError("cannot write '" + path.string() + "'");
  std::fprintf(f, "phi,k,value\n");
  for (int j = 0; j < field.grid.n_k; ++j)
    for (int i = 0; i < field.grid.n_phi; ++i)
      std::fprintf(f, "%.17g,%.17g,%.17g\n", field.grid.phi(i), field.grid.k(j), field(i, j));
  std::fclose(f);
}

void write_field_binary(const std::filesystem::path& path, const GridField& field) {
  write_matrix_binary(path, field.values);
}

}  // namespace csflow
