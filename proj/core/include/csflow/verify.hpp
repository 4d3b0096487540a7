#pragma once

#include <cstdint>
#include <random>
#include <string>
#include <utility>
#include <vector>

#include "csflow/background.hpp"
#include "csflow/config.hpp"
#include "csflow/flowfn.hpp"
#include "csflow/graded.hpp"
#include "csflow/linsolve.hpp"
#include "csflow/nashmoser.hpp"

namespace csflow {

/// Everything a run needs, resolved from one configuration.
struct RunSetup {
  Config config;
  BackgroundParams background;
  TableSpec table;
  FlowGrid grid;
  InitialPotential psi;
  SideData side = SideData::quadratic;
  SolverParams solver;
  std::uint64_t seed = 12345;

  std::string hash() const { return config.hash(); }
};

/// threads and seed override the config when non-negative (environment hooks).
RunSetup resolve_setup(const Config& cfg, long threads = -1, long long seed = -1);

/// Single named check with a measured value against a threshold.
struct Check {
  std::string name;
  double value = 0.0;
  double threshold = 0.0;
  std::string relation;  // "<=", ">=", "in", "==" (informational)
  bool passed = false;
  std::vector<std::pair<std::string, double>> fitted;  // constants and auxiliary numbers
  std::string note;
};

struct SuiteResult {
  std::string name;
  std::vector<Check> checks;
  bool passed() const;
};

// ---- propagators

struct IntertwiningOrder {
  std::vector<int> time_points;
  std::vector<double> m2;
  std::vector<std::vector<double>> residual;  // [m2][refinement], max over modes
  std::vector<double> min_slope;              // per m2, over consecutive refinements
  double max_scaled = 0.0;                    // max residual / dt^2
  double order_constant = 50.0;
  bool passed = false;
};

IntertwiningOrder intertwining_order(BackgroundParams params, const std::vector<int>& time_points,
                                     const std::vector<double>& m2, int modes);

struct OracleAgreement {
  double max_difference = 0.0;
  int max_terms = 0;
  int kernels = 0;
  bool passed = false;
};

OracleAgreement volterra_vs_neumann(BackgroundParams params, const std::vector<double>& m2, int modes, double tol,
                                    double threshold, int threads = 1);

struct GronwallFit {
  std::vector<double> m2;
  std::vector<double> log_ratio;  // log sup_t [sup_{s<=t} ||h||^s / sup_{s<=t} ||phi||^s]
  double constant = 0.0;          // least-squares C through the origin of log R vs |m2|
  double envelope = 0.0;          // max log R / |m2|: smallest C with the bound exact everywhere
  double max_residual = 0.0;      // max |log R - C |m2||
  double tolerance = 0.05;
  bool passed = false;
};

GronwallFit gronwall_fit(BackgroundParams params, int samples, int modes, double tolerance = 0.05);

// ---- flow function

struct DerivativeSlopes {
  double spacing_coarse = 0.0, spacing_fine = 0.0;
  DerivativeConsistency coarse, fine;
  double sigma_slope = 0.0;
  double a2_slope = 0.0;
  bool passed = false;
};

/// Tables at `points` and (points + 1)/2 nodes; slopes of the consistency errors.
DerivativeSlopes derivative_slopes(const Background& bg, double m2_max, int points, int threads);

struct SignFlip {
  SigmaWindowReport original;
  SigmaWindowReport flipped;
  bool passed = false;  // original passes, flipped fails
};

SignFlip sigma_window_sign_flip(const RunSetup& setup, const FlowTable& table, double half_width);

/// Half-width of the conductivity window the solver needs: sup |D^2 u_b| + A.
double window_half_width(const FlowProblem& problem, double a_bound);

// ---- graded

/// u = sum_{p,q<=4} a_pq sin(p pi phihat) sin((q - 1/2) pi khat), scaled to ||u||_4 = target.
GridField random_f0_field(const FlowGrid& grid, std::mt19937_64& rng, double target_norm4);

/// Smooth field without boundary constraints (cosine products).
GridField random_smooth_field(const FlowGrid& grid, std::mt19937_64& rng);

/// Tame fit of u -> G(D^2_phi (u + u_b)) with r = 2 for n = 0, 1, 2.
std::vector<TameFit> flow_map_tame_fits(const FlowProblem& problem, const FlowTable& table, double a_bound,
                                        int samples, std::uint64_t seed);

// ---- linear inverse

struct RoundTrip {
  double worst_relative = 0.0;
  int samples = 0;
  bool passed = false;
  std::string error;
};

RoundTrip linear_round_trip(const ConductivityField& sigma, int samples, std::uint64_t seed, double threshold);

struct HeatOracle {
  int n_phi = 257;
  int n_k = 0;
  double error = 0.0;          // max |v - oracle| on the final row
  double relative = 0.0;       // error / max |oracle|
  double threshold = 1e-6;
  bool passed = false;
};

/// sigma == 1, g = sin(pi phihat) on phihat in [0, 1], k in [1, 3]; the final
/// row is compared after the transient has decayed (exp(-2 pi^2) ~ 3e-9).
HeatOracle heat_oracle_check(int n_phi = 257, int n_k = 8193, double threshold = 1e-6);

struct OrderStudy {
  double phi_slope = 0.0;  // expected 2
  double k_slope = 0.0;    // expected 1
  bool passed = false;
};

OrderStudy linear_order_study();

/// Conductivities for the certificate and graded sweeps: constant, table-based
/// at u_b, and random smooth fields in [c, 2c].
std::vector<ConductivityField> conductivity_sweep(const FlowProblem& problem, const FlowTable& table, double floor,
                                                  int random_fields, std::mt19937_64& rng);

// ---- suites (used by `csflow verify` and the acceptance runner)

SuiteResult propagators_suite(const RunSetup& setup);
SuiteResult flowfn_suite(const RunSetup& setup, const FlowTable& table);
SuiteResult graded_suite(const RunSetup& setup, const FlowTable& table, const FlowProblem& problem);
SuiteResult linsolve_suite(const RunSetup& setup, const FlowTable& table, const FlowProblem& problem,
                           bool inject_negative_sigma = false);

}  // namespace csflow
