#pragma once

#include <Eigen/Dense>

#include <filesystem>
#include <functional>
#include <span>
#include <string>
#include <vector>

namespace csflow {

/// Uniform grid on X x [a, b] with X = [phi_min, phi_max].
struct FlowGrid {
  double phi_min = -1.0;
  double phi_max = 1.0;
  int n_phi = 129;
  double k_min = 1.0;  // a
  double k_max = 2.0;  // b
  int n_k = 129;

  void validate() const;
  double dphi() const { return (phi_max - phi_min) / (n_phi - 1); }
  double dk() const { return (k_max - k_min) / (n_k - 1); }
  double phi(int i) const { return i == n_phi - 1 ? phi_max : phi_min + dphi() * i; }
  double k(int j) const { return j == n_k - 1 ? k_max : k_min + dk() * j; }
  double width() const { return phi_max - phi_min; }
  double length() const { return k_max - k_min; }
  bool operator==(const FlowGrid&) const = default;
};

enum class FieldRole { solution, lift, source, residual };

/// Real field on the flow grid, values(i, j) = u(phi_i, k_j).
struct GridField {
  FlowGrid grid;
  Eigen::MatrixXd values;
  FieldRole role = FieldRole::source;

  GridField() = default;
  GridField(const FlowGrid& g, FieldRole r);
  GridField(const FlowGrid& g, Eigen::MatrixXd v, FieldRole r);

  static GridField from_function(const FlowGrid& g, FieldRole r, const std::function<double(double, double)>& f);

  double operator()(int i, int j) const { return values(i, j); }
  double& operator()(int i, int j) { return values(i, j); }
  double max_abs() const { return values.cwiseAbs().maxCoeff(); }
  bool all_finite() const { return values.allFinite(); }
};

/// Zeroes the initial row k = a and the phi-boundary columns (the F0 constraint).
void project_f0(GridField& field);
/// True when the field vanishes exactly on k = a and on the phi boundary.
bool satisfies_f0(const GridField& field);

/// Finite-difference weights for the m-th derivative at x0 from nodes x (Fornberg).
std::vector<double> fd_weights(double x0, std::span<const double> x, int m);

/// Dense n x n matrix of the order-m derivative on a uniform grid with
/// spacing h: odd-size centred stencils in the interior, one-sided stencils of
/// size m + 2 near the ends; second-order accurate everywhere.
Eigen::MatrixXd derivative_matrix(int n, double h, int m);

/// Mixed difference D_phi^p D_k^q of a field.
Eigen::MatrixXd mixed_derivative(const GridField& field, int p, int q);

/// Second phi-derivative with the 3-point centred stencil in the interior.
Eigen::MatrixXd second_phi_difference(const GridField& field);

inline constexpr int kDefaultMaxOrder = 6;

/// sum_{j<=n} sum_{|alpha|=j} sup |D^alpha u|.
double seminorm(const GridField& field, int n, int n_max = kDefaultMaxOrder);

/// All seminorms 0..n in one pass (entry n equals seminorm(field, n)).
std::vector<double> seminorms(const GridField& field, int n, int n_max = kDefaultMaxOrder);

/// ||h||_2 + ||D h||_2 with D the spatial Laplacian acting diagonally with
/// eigenvalue wavenumber^2 on mode coefficient h_n.
double slice_sobolev_norm(std::span<const double> coefficients, std::span<const double> wavenumbers);

enum class Rolloff { quintic, smooth };

/// cosine: DCT-I along both axes. sine_phi: DST-I along phi on the interior
/// nodes (odd reflection, values on the phi boundary are ignored and
/// returned as zero), DCT-I along k.
enum class SmoothingBasis { cosine, sine_phi };

/// Hamilton-style smoothing S_t: radius r(t) = r0 exp(t) in transform index
/// space, profile rho == 1 on [0,1] and 0 on [2, inf).
struct SmoothingSchedule {
  double r0 = 4.0;
  Rolloff rolloff = Rolloff::quintic;
  SmoothingBasis basis = SmoothingBasis::sine_phi;

  double radius(double t) const;
  double profile(double x) const;
};

/// Low-pass filter of the field. Solution-tagged fields are projected back
/// to F0 afterwards.
GridField smoothing_apply(const GridField& field, double t, const SmoothingSchedule& schedule = {});

struct BoundaryLift {
  GridField lift;
  double norm2 = 0.0;  // ||u_b||_2
  double norm3 = 0.0;  // ||u_b||_3
};

/// Transfinite interpolation of the initial row psi (over phi nodes) and the
/// side data beta_left/right (over k nodes). The blend is linear in phi, so
/// functions of phi alone are reproduced exactly.
BoundaryLift boundary_lift(std::span<const double> psi, std::span<const double> beta_left,
                           std::span<const double> beta_right, const FlowGrid& grid, double tolerance = 1e-12);

struct TameFit {
  int n = 0;
  int r = 0;
  double constant = 0.0;  // smallest C over the training half
  double slack = 0.1;
  int training = 0;
  int held_out = 0;
  int violations = 0;  // held-out samples with ratio > (1 + slack) C
  double worst_held_out_ratio = 0.0;
  bool passed = false;
};

/// Fits ||map(u)||_n <= C (1 + ||u||_{n+r}) on the first half of the samples
/// and counts held-out violations on the second half.
TameFit tame_fit(std::span<const GridField> samples, const std::function<GridField(const GridField&)>& map, int n,
                 int r, double slack = 0.1);

/// Same fit from precomputed (lhs, rhs) pairs: lhs = ||map(u)||_n, rhs = ||u||_{n+r}.
TameFit tame_fit_values(std::span<const double> lhs, std::span<const double> rhs, int n, int r, double slack = 0.1);

void write_field_csv(const std::filesystem::path& path, const GridField& field);
void write_field_binary(const std::filesystem::path& path, const GridField& field);

}  // namespace csflow
