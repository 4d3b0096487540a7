#pragma once

#include <Eigen/Dense>

#include <filesystem>
#include <span>
#include <string>
#include <vector>

#include "csflow/background.hpp"

namespace csflow {

using Series = std::vector<double>;

/// Retarded Green kernel of d_t^2 + omega_n^2 + m2 chi(t) sampled on the
/// time grid: g(i, j) ~ Delta_R(t_i, t_j). Strictly lower triangular.
/// The advanced kernel is the transpose.
struct PropagatorKernel {
  int mode = 0;
  double m2 = 0.0;
  Eigen::MatrixXd g;

  Eigen::MatrixXd advanced() const { return g.transpose(); }
};

/// M = 1 - m2 G diag(chi) W acting on time series.
struct MoellerMatrix {
  int mode = 0;
  double m2 = 0.0;
  Eigen::MatrixXd m;
};

struct NeumannResult {
  PropagatorKernel kernel;
  int terms = 0;                  // J: number of correction terms summed
  std::vector<double> term_norms; // max-norm of every term, J+1 entries
};

struct IntertwiningReport {
  int mode = 0;
  double m2 = 0.0;
  double dt = 0.0;
  double off_diagonal = 0.0;  // max |(P G)(i,j)| for i != j
  double diagonal = 0.0;      // max |dt (P G)(j,j) - 1|
  double residual = 0.0;      // max of the two
  double scaled = 0.0;        // residual / dt^2
  bool passed = false;
};

/// Direct sum h_i = sum_{j<i} w_j sin(omega (t_i - t_j)) / omega g_j.
Series free_retarded_apply(const Background& bg, std::size_t slot, std::span<const double> g);

/// Free kernel G0(i,j) = sin(omega (t_i - t_j)) / omega for j < i.
PropagatorKernel free_retarded_kernel(const Background& bg, std::size_t slot);

/// Solves G = G0 - m2 G0 diag(chi) W G column by column. The free kernel is
/// separable (sin(a-b) = sin a cos b - cos a sin b), so the history sums of
/// each column are carried as two running accumulators.
PropagatorKernel interacting_retarded_volterra(const Background& bg, std::size_t slot, double m2);

/// Partial sums of sum_j G0 (-m2 diag(chi) W G0)^j with dense products.
/// Throws NumericError("series not converged") past `max_terms` or when the
/// terms grow for several consecutive orders beyond the cap's reach.
NeumannResult interacting_retarded_neumann(const Background& bg, std::size_t slot, double m2, double tol,
                                           int max_terms = 200);

MoellerMatrix moeller_matrix(const Background& bg, const PropagatorKernel& kernel);

/// psi - m2 G (chi W psi) using an explicit kernel.
Series moeller_apply(const Background& bg, const PropagatorKernel& kernel, std::span<const double> psi);

/// Same operator without materialising G: solves y + m2 G0 (chi W y) = psi
/// by forward recursion, O(N_t).
Series moeller_apply(const Background& bg, std::size_t slot, double m2, std::span<const double> psi);

/// y = G x (no quadrature weight on x) by forward recursion, O(N_t).
Series interacting_retarded_apply(const Background& bg, std::size_t slot, double m2, std::span<const double> x);

/// Mode-summed coincidence value d(t_i) = sum_n [M_n w_n M_n^T](t_i, t_i).
Series normal_ordered_diagonal(const Background& bg, double m2);

/// Per-mode contribution [M_n w_n M_n^T](t_i, t_i).
Series normal_ordered_diagonal_mode(const Background& bg, std::size_t slot, double m2);

/// Applies the central-difference wave operator to every column of G.
IntertwiningReport verify_intertwining(const Background& bg, const PropagatorKernel& kernel,
                                       double order_constant = 50.0);

// Binary kernel cache: 4-byte magic "CSFK", uint32 version, uint64 rows,
// uint64 cols, then rows*cols little-endian doubles in row-major order.
void write_matrix_binary(const std::filesystem::path& path, const Eigen::MatrixXd& m);
Eigen::MatrixXd read_matrix_binary(const std::filesystem::path& path);
std::filesystem::path kernel_cache_path(const std::filesystem::path& dir, const std::string& config_hash,
                                        int mode, double m2);

}  // namespace csflow
