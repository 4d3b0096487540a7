#pragma once

#include <string>
#include <utility>
#include <vector>

#include "csflow/config.hpp"
#include "csflow/flowfn.hpp"
#include "csflow/graded.hpp"
#include "csflow/linsolve.hpp"

namespace csflow {

/// Initial potential psi(phi) = kappa phi^2 / 2 + eta cos(q pi (phi - phi_c) / |X|).
struct InitialPotential {
  double curvature = 0.0;  // kappa
  double amplitude = 0.0;  // eta
  int frequency = 1;       // q; odd q keeps even derivatives of the bump zero on the boundary

  double value(double phi, const FlowGrid& g) const;
  /// n-th phi-derivative, n <= 4.
  double derivative(double phi, const FlowGrid& g, int n) const;
};

enum class SideData { linear, quadratic };

/// Boundary value problem on X x [a, b]: initial row psi and side data
/// beta_left/right, together with the transfinite lift u_b.
struct FlowProblem {
  FlowGrid grid;
  std::vector<double> psi;
  std::vector<double> beta_left;
  std::vector<double> beta_right;
  BoundaryLift lift;
};

/// Side data from the Taylor expansion of the flow at the corners: the
/// linear term alone, or with the k^2 term as well (compatibility to
/// second order).
FlowProblem make_problem(const FlowGrid& grid, const InitialPotential& psi, const FlowTable& table,
                         SideData side = SideData::quadratic);

FlowGrid flow_grid(const Config& cfg);
InitialPotential initial_potential(const Config& cfg);
SideData side_data(const Config& cfg);

/// RG(u) = D_k^- (u + u_b) - G(D_phi^2 (u + u_b)) on interior nodes, rows j >= 1.
/// Throws RangeError naming the node when D^2 leaves the table.
GridField rg_apply(const GridField& u, const GridField& lift, const FlowTable& table);

/// sup and order-2 seminorm of a residual over the nodes where it is defined.
double residual_sup(const GridField& residual);
double residual_norm2(const GridField& residual);

enum class SolveMethod { nash_moser, newton, march };
enum class SolveOutcome { converged, window_exit, stalled, not_converged };

const char* to_string(SolveMethod m);
const char* to_string(SolveOutcome o);
SolveMethod parse_method(const std::string& name);

struct SolverParams {
  double c_step = 1.0;    // pseudo-time rate
  double dt = 0.1;        // pseudo-time step
  double t_max = 40.0;
  double tol = 1e-10;     // on sup |RG(u)|
  SmoothingSchedule smoothing;
  double a_bound = 0.3;   // A: bound on ||u||_4 and ||u_b||_3
  double sigma_floor = 0.0;  // c
  double eps_log = 3.0;
  int patience = 20;
  int newton_max_iter = 50;
  double march_tol = 1e-13;
  int march_max_iter = 50;
  std::vector<double> snapshot_times;  // pseudo-times at which to keep u + u_b
};

SolverParams solver_params(const Config& cfg);

struct ResidualSample {
  double t = 0.0;
  double res0 = 0.0;
  double res2 = 0.0;
  double u4 = 0.0;
};

struct SolveReport {
  SolveMethod method = SolveMethod::nash_moser;
  SolveOutcome outcome = SolveOutcome::not_converged;
  std::string message;
  int iterations = 0;
  double t_final = 0.0;
  double res0_initial = 0.0;
  double res0_final = 0.0;
  double res2_final = 0.0;
  double u4_max = 0.0;
  double u4_exceeded_at = -1.0;  // first pseudo-time with ||u||_4 > A, -1 if never
  double window_half_width = 0.0;
  SigmaWindowReport window;
  std::vector<ResidualSample> history;
  GridField u;      // correction in F0
  GridField total;  // u + u_b
  std::vector<std::pair<double, GridField>> snapshots;  // (t, u + u_b) at the first iterate with t >= requested

  bool converged() const { return outcome == SolveOutcome::converged; }
};

/// u <- u - dt c E(sigma(S_t u + u_b)) [S_t RG(u)] from u = 0.
SolveReport nash_moser_solve(const FlowProblem& problem, const FlowTable& table, const SolverParams& params);

/// Undamped Newton (no smoothing, unit step); records seminorm growth.
SolveReport newton_solve(const FlowProblem& problem, const FlowTable& table, const SolverParams& params);

/// Implicit march in k with a damped Newton solve per row.
SolveReport march_solve(const FlowProblem& problem, const FlowTable& table, const SolverParams& params);

SolveReport solve(SolveMethod method, const FlowProblem& problem, const FlowTable& table, const SolverParams& params);

}  // namespace csflow
