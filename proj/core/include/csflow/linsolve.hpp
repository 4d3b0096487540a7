#pragma once

#include <vector>

#include "csflow/flowfn.hpp"
#include "csflow/graded.hpp"

namespace csflow {

/// Pointwise conductivity sigma(phi, k) on the flow grid. Only interior
/// nodes on rows j >= 1 enter the linear problem.
struct ConductivityField {
  FlowGrid grid;
  Eigen::MatrixXd sigma;

  /// Minimum over the nodes that enter the solve.
  double interior_min() const;
};

/// sigma = table.sigma_at(centred d^2/dphi^2 of total) on interior nodes.
/// Boundary nodes copy their interior neighbour. Throws RangeError with the
/// offending node when the second derivative leaves the table.
ConductivityField conductivity_from(const FlowTable& table, const GridField& total);

ConductivityField constant_conductivity(const FlowGrid& grid, double sigma);

/// L v = D_k^- v - sigma D_phi^2 v on interior nodes with j >= 1; zero elsewhere.
GridField apply_linearized(const ConductivityField& sigma, const GridField& v);

/// Exact inverse of apply_linearized on F0: one tridiagonal solve per k row.
/// Refuses (WindowError) when sigma drops below `floor` on a used node.
GridField solve_linearized(const ConductivityField& sigma, const GridField& g, double floor = 0.0);

struct MaxPrincipleCertificate {
  double bound = 0.0;     // C_max = (b - a) (1 + slack)
  double observed = 0.0;  // max over samples of ||v||_0 / ||g||_0
  int samples = 0;
  bool passed = false;
};

/// ||E g||_0 <= (b - a) ||g||_0 for parabolic backward-Euler with Dirichlet
/// data; sweeps the supplied conductivities and sources.
MaxPrincipleCertificate max_principle_certificate(const std::vector<ConductivityField>& sigmas,
                                                  const std::vector<GridField>& sources, double slack = 1e-9);

struct InverseGradedCheck {
  int n = 0;
  double constant = 0.0;  // fitted C_n, training half
  double worst_held_out = 0.0;
  int violations = 0;
  bool passed = false;
};

/// Fits ||E g||_n <= C (||g||_n + ||g||_0 ||sigma||_{n+1}) for n in {0, 1, 2}
/// over paired samples (sigmas[s], sources[s]); the first half trains C,
/// the rest must stay within (1 + slack) C.
std::vector<InverseGradedCheck> inverse_graded_check(const std::vector<ConductivityField>& sigmas,
                                                     const std::vector<GridField>& sources, double slack = 0.1);

/// Heat-equation closed form for sigma == s, g = sin(pi phihat) with Dirichlet
/// data on a zero initial row: v = sin(pi phihat) |X|^2/(s pi^2) (1 - exp(-s pi^2 (k - a)/|X|^2)).
double heat_oracle(const FlowGrid& grid, double sigma, double phi, double k);

}  // namespace csflow
