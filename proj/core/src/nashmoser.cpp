#include "csflow/nashmoser.hpp"

#include <algorithm>
#include <sstream>
#include <cmath>
#include <cstdio>
#include <numbers>

namespace csflow {

double InitialPotential::value(double phi, const FlowGrid& g) const { return derivative(phi, g, 0); }

double InitialPotential::derivative(double phi, const FlowGrid& g, int n) const {
  const double centre = 0.5 * (g.phi_min + g.phi_max);
  const double w = frequency * std::numbers::pi / g.width();
  const double bump = amplitude * std::pow(w, n) * std::cos(w * (phi - centre) + n * std::numbers::pi / 2);
  switch (n) {
    case 0: return 0.5 * curvature * phi * phi + bump;
    case 1: return curvature * phi + bump;
    case 2: return curvature + bump;
    default: return bump;
  }
}

FlowProblem make_problem(const FlowGrid& grid, const InitialPotential& psi, const FlowTable& table, SideData side) {
  grid.validate();
  FlowProblem p;
  p.grid = grid;
  for (int i = 0; i < grid.n_phi; ++i) p.psi.push_back(psi.value(grid.phi(i), grid));
  // Corner expansion of u_k = G(u''):
  //   u_kk = sigma(u'') [sigma(u'') u'''' + A2(u'') (u''')^2]
  auto side_values = [&](double phi, double u0) {
    const double d2 = psi.derivative(phi, grid, 2);
    const double d3 = psi.derivative(phi, grid, 3);
    const double d4 = psi.derivative(phi, grid, 4);
    if (!table.contains(d2)) throw RangeError("initial curvature outside the flow table at the boundary");
    const double first = table.g_at(d2);
    const double s = table.sigma_at(d2);
    const double second = side == SideData::quadratic ? s * (s * d4 + table.a2_at(d2) * d3 * d3) : 0.0;
    std::vector<double> beta;
    for (int j = 0; j < grid.n_k; ++j) {
      const double dk = grid.k(j) - grid.k_min;
      beta.push_back(u0 + first * dk + 0.5 * second * dk * dk);
    }
    return beta;
  };
  p.beta_left = side_values(grid.phi_min, p.psi.front());
  p.beta_right = side_values(grid.phi_max, p.psi.back());
  p.lift = boundary_lift(p.psi, p.beta_left, p.beta_right, grid);
  return p;
}

FlowGrid flow_grid(const Config& cfg) {
  FlowGrid g;
  g.phi_min = cfg.get_double("grid.phi_min", g.phi_min);
  g.phi_max = cfg.get_double("grid.phi_max", g.phi_max);
  g.n_phi = static_cast<int>(cfg.get_int("grid.phi_points", g.n_phi));
  g.k_min = cfg.get_double("grid.k_min", g.k_min);
  g.k_max = cfg.get_double("grid.k_max", g.k_max);
  g.n_k = static_cast<int>(cfg.get_int("grid.k_points", g.n_k));
  g.validate();
  return g;
}

InitialPotential initial_potential(const Config& cfg) {
  InitialPotential p;
  p.curvature = cfg.get_double("solver.psi_curvature", 0.0);
  p.amplitude = cfg.get_double("solver.psi_amplitude", 0.0);
  p.frequency = static_cast<int>(cfg.get_int("solver.psi_frequency", 1));
  return p;
}

SideData side_data(const Config& cfg) {
  const std::string s = cfg.get_string("solver.side_data", "quadratic");
  if (s == "quadratic") return SideData::quadratic;
  if (s == "linear") return SideData::linear;
  throw ConfigError("solver.side_data must be 'linear' or 'quadratic'");
}

GridField rg_apply(const GridField& u, const GridField& lift, const FlowTable& table) {
  const auto& g = u.grid;
  const Eigen::MatrixXd total = u.values + lift.values;
  const double ik = 1.0 / g.dk();
  const double ip = 1.0 / (g.dphi() * g.dphi());
  GridField out(g, FieldRole::residual);
  for (int j = 1; j < g.n_k; ++j)
    for (int i = 1; i + 1 < g.n_phi; ++i) {
      const double m2 = (total(i + 1, j) - 2.0 * total(i, j) + total(i - 1, j)) * ip;
      if (!table.contains(m2)) {
        char buf[160];
        std::snprintf(buf, sizeof buf, "d2u=%.6g outside flow table [%.6g, %.6g] at (phi=%.6g, k=%.6g)", m2,
                      table.lower(), table.upper(), g.phi(i), g.k(j));
        throw RangeError(buf);
      }
      out(i, j) = (total(i, j) - total(i, j - 1)) * ik - table.g_at(m2);
    }
  return out;
}

namespace {

GridField defined_block(const GridField& r) {
  const auto& g = r.grid;
  FlowGrid sub = g;
  sub.phi_min = g.phi(1);
  sub.phi_max = g.phi(g.n_phi - 2);
  sub.n_phi = g.n_phi - 2;
  sub.k_min = g.k(1);
  sub.n_k = g.n_k - 1;
  return GridField(sub, r.values.block(1, 1, sub.n_phi, sub.n_k), r.role);
}

// Constant extension of the residual into row 0 and the phi boundary.
GridField extended(const GridField& r) {
  GridField out = r;
  auto& v = out.values;
  const int n = static_cast<int>(v.rows());
  v.row(0) = v.row(1);
  v.row(n - 1) = v.row(n - 2);
  v.col(0) = v.col(1);
  return out;
}

double u4_of(const GridField& u) { return seminorm(u, 4); }

struct Iterate {
  bool smoothing = true;
  double step = 0.1;
  bool bound_is_exit = true;
  int max_iter = 1 << 30;
};

SolveReport iterate(SolveMethod method, const FlowProblem& problem, const FlowTable& table, const SolverParams& p,
                    const Iterate& mode) {
  SolveReport rep;
  rep.method = method;
  const auto& grid = problem.grid;
  const GridField& lift = problem.lift.lift;
  rep.u = GridField(grid, FieldRole::solution);
  rep.window_half_width = lift.values.rows() > 2 ? second_phi_difference(lift).cwiseAbs().maxCoeff() + p.a_bound : 0.0;

  auto finish = [&](SolveOutcome o, std::string msg) {
    rep.outcome = o;
    rep.message = std::move(msg);
    rep.total = GridField(grid, rep.u.values + lift.values, FieldRole::solution);
    return rep;
  };

  // Nothing to do when u = 0 already solves the problem; the window
  // precondition only matters once E has to be applied.
  rep.res0_initial = rep.res0_final = residual_sup(rg_apply(rep.u, lift, table));
  const bool solved = rep.res0_initial <= p.tol;
  if (method == SolveMethod::nash_moser && !solved) {
    try {
      rep.window = check_sigma_window(table, p.sigma_floor, p.eps_log, rep.window_half_width);
    } catch (const RangeError& e) {
      return finish(SolveOutcome::window_exit, e.what());
    }
    if (!rep.window.passed) return finish(SolveOutcome::window_exit, "sigma window precondition failed: " + rep.window.remedy);
    if (problem.lift.norm3 > p.a_bound) {
      char buf[128];
      std::snprintf(buf, sizeof buf, "||u_b||_3 = %.6g exceeds A = %.6g", problem.lift.norm3, p.a_bound);
      return finish(SolveOutcome::window_exit, buf);
    }
  }

  double t = 0.0;
  double best = INFINITY;
  int since_best = 0;
  try {
    for (int it = 0;; ++it) {
      const GridField res = rg_apply(rep.u, lift, table);
      ResidualSample s{t, residual_sup(res), residual_norm2(res), u4_of(rep.u)};
      rep.history.push_back(s);
      if (it == 0) rep.res0_initial = s.res0;
      rep.res0_final = s.res0;
      rep.res2_final = s.res2;
      rep.iterations = it;
      rep.t_final = t;
      rep.u4_max = std::max(rep.u4_max, s.u4);
      while (rep.snapshots.size() < p.snapshot_times.size() && t >= p.snapshot_times[rep.snapshots.size()] - 1e-9) {
        rep.snapshots.emplace_back(t, GridField(grid, rep.u.values + lift.values, FieldRole::solution));
      }
      if (s.u4 > p.a_bound && rep.u4_exceeded_at < 0.0) {
        rep.u4_exceeded_at = t;
        if (mode.bound_is_exit) {
          char buf[128];
          std::snprintf(buf, sizeof buf, "||u||_4 = %.6g exceeds A = %.6g at t = %.4g", s.u4, p.a_bound, t);
          return finish(SolveOutcome::window_exit, buf);
        }
      }
      if (!std::isfinite(s.res0)) return finish(SolveOutcome::not_converged, "non-finite residual");
      if (s.res0 <= p.tol) return finish(SolveOutcome::converged, "residual below tolerance");
      if (s.res0 < best * (1.0 - 1e-3)) {
        best = s.res0;
        since_best = 0;
      } else if (++since_best > p.patience) {
        return finish(SolveOutcome::stalled, "no residual decrease within patience");
      }
      if (it >= mode.max_iter || t > p.t_max) return finish(SolveOutcome::not_converged, "iteration budget exhausted");

      GridField su = mode.smoothing ? smoothing_apply(rep.u, t, p.smoothing) : rep.u;
      const GridField sres = mode.smoothing ? smoothing_apply(extended(res), t, p.smoothing) : res;
      su.values += lift.values;
      const ConductivityField sigma = conductivity_from(table, su);
      const double smin = sigma.interior_min();
      if (!(smin >= p.sigma_floor) || !(smin > 0.0)) {
        char buf[128];
        std::snprintf(buf, sizeof buf, "sigma = %.6g below floor %.6g at t = %.4g", smin, p.sigma_floor, t);
        return finish(SolveOutcome::window_exit, buf);
      }
      const GridField v = solve_linearized(sigma, sres);
      rep.u.values -= mode.step * v.values;
      t += mode.step;
    }
  } catch (const RangeError& e) {
    return finish(SolveOutcome::window_exit, e.what());
  } catch (const WindowError& e) {
    return finish(SolveOutcome::window_exit, e.what());
  }
}

}  // namespace

double residual_sup(const GridField& residual) { return defined_block(residual).max_abs(); }
double residual_norm2(const GridField& residual) { return seminorm(defined_block(residual), 2); }

const char* to_string(SolveMethod m) {
  switch (m) {
    case SolveMethod::nash_moser: return "nash-moser";
    case SolveMethod::newton: return "newton";
    case SolveMethod::march: return "march";
  }
  return "?";
}

const char* to_string(SolveOutcome o) {
  switch (o) {
    case SolveOutcome::converged: return "converged";
    case SolveOutcome::window_exit: return "window_exit";
    case SolveOutcome::stalled: return "stalled";
    case SolveOutcome::not_converged: return "not_converged";
  }
  return "?";
}

SolveMethod parse_method(const std::string& name) {
  if (name == "nash-moser") return SolveMethod::nash_moser;
  if (name == "newton") return SolveMethod::newton;
  if (name == "march") return SolveMethod::march;
  throw ConfigError("unknown method '" + name + "' (nash-moser|newton|march)");
}

SolverParams solver_params(const Config& cfg) {
  SolverParams p;
  p.c_step = cfg.get_double("solver.c_step", p.c_step);
  p.dt = cfg.get_double("solver.dt", p.dt);
  p.t_max = cfg.get_double("solver.t_max", p.t_max);
  p.tol = cfg.get_double("solver.tol_nm", p.tol);
  p.smoothing.r0 = cfg.get_double("solver.r0", p.smoothing.r0);
  const std::string roll = cfg.get_string("solver.rolloff", "quintic");
  if (roll == "quintic") {
    p.smoothing.rolloff = Rolloff::quintic;
  } else if (roll == "smooth") {
    p.smoothing.rolloff = Rolloff::smooth;
  } else {
    throw ConfigError("solver.rolloff must be 'quintic' or 'smooth'");
  }
  const std::string basis = cfg.get_string("solver.smoothing_basis", "sine_phi");
  if (basis == "sine_phi") {
    p.smoothing.basis = SmoothingBasis::sine_phi;
  } else if (basis == "cosine") {
    p.smoothing.basis = SmoothingBasis::cosine;
  } else {
    throw ConfigError("solver.smoothing_basis must be 'sine_phi' or 'cosine'");
  }
  p.a_bound = cfg.get_double("solver.a_bound", p.a_bound);
  p.sigma_floor = cfg.get_double("solver.sigma_floor", p.sigma_floor);
  p.eps_log = cfg.get_double("solver.eps_log", p.eps_log);
  p.patience = static_cast<int>(cfg.get_int("solver.patience", p.patience));
  p.newton_max_iter = static_cast<int>(cfg.get_int("solver.newton_max_iter", p.newton_max_iter));
  p.march_tol = cfg.get_double("solver.tol_march", p.march_tol);
  p.march_max_iter = static_cast<int>(cfg.get_int("solver.march_max_iter", p.march_max_iter));
  if (auto list = cfg.find("solver.snapshots")) {
    std::stringstream ss(*list);
    std::string item;
    while (std::getline(ss, item, ',')) {
      if (item.find_first_not_of(" \t") == std::string::npos) continue;
      try {
        p.snapshot_times.push_back(std::stod(item));
      } catch (const std::exception&) {
        throw ConfigError("solver.snapshots: not a number: '" + item + "'");
      }
    }
    std::sort(p.snapshot_times.begin(), p.snapshot_times.end());
  }
  if (!(p.dt > 0.0) || !(p.c_step > 0.0) || p.dt * p.c_step > 1.0) {
    throw ConfigError("solver.dt and solver.c_step must be positive with dt*c_step <= 1");
  }
  if (!(p.tol > 0.0) || !(p.march_tol > 0.0)) throw ConfigError("solver tolerances must be positive");
  if (!(p.smoothing.r0 > 0.0)) throw ConfigError("solver.r0 must be positive");
  if (!(p.a_bound > 0.0)) throw ConfigError("solver.a_bound must be positive");
  if (p.patience < 1) throw ConfigError("solver.patience must be >= 1");
  return p;
}

SolveReport nash_moser_solve(const FlowProblem& problem, const FlowTable& table, const SolverParams& params) {
  return iterate(SolveMethod::nash_moser, problem, table, params,
                 {.smoothing = true, .step = params.dt * params.c_step, .bound_is_exit = true});
}

SolveReport newton_solve(const FlowProblem& problem, const FlowTable& table, const SolverParams& params) {
  return iterate(SolveMethod::newton, problem, table, params,
                 {.smoothing = false, .step = 1.0, .bound_is_exit = false, .max_iter = params.newton_max_iter});
}

SolveReport march_solve(const FlowProblem& problem, const FlowTable& table, const SolverParams& params) {
  const auto& g = problem.grid;
  const int n = g.n_phi - 2;
  const double ik = 1.0 / g.dk();
  const double ip = 1.0 / (g.dphi() * g.dphi());
  SolveReport rep;
  rep.method = SolveMethod::march;
  GridField total(g, FieldRole::solution);
  for (int i = 0; i < g.n_phi; ++i) total(i, 0) = problem.psi[i];

  std::vector<double> f(n), sub(n), diag(n), sup(n), x(g.n_phi), trial(g.n_phi);
  auto residual = [&](const std::vector<double>& col, int j, std::vector<double>& out, bool jac) {
    double worst = 0.0;
    for (int m = 0; m < n; ++m) {
      const int i = m + 1;
      const double m2 = (col[i + 1] - 2.0 * col[i] + col[i - 1]) * ip;
      if (!table.contains(m2)) {
        char buf[160];
        std::snprintf(buf, sizeof buf, "d2u=%.6g outside flow table at (phi=%.6g, k=%.6g)", m2, g.phi(i), g.k(j));
        throw RangeError(buf);
      }
      out[m] = (col[i] - total(i, j - 1)) * ik - table.g_at(m2);
      worst = std::max(worst, std::abs(out[m]));
      if (jac) {
        const double s = table.sigma_at(m2);
        sub[m] = sup[m] = -s * ip;
        diag[m] = ik + 2.0 * s * ip;
      }
    }
    return worst;
  };

  int newton_total = 0;
  try {
    for (int j = 1; j < g.n_k; ++j) {
      // Previous row shifted by the lift increment: matches the side data
      // without a kink next to the boundary.
      const auto& lift = problem.lift.lift;
      for (int i = 0; i < g.n_phi; ++i) x[i] = total(i, j - 1) + lift(i, j) - lift(i, j - 1);
      x.front() = problem.beta_left[j];
      x.back() = problem.beta_right[j];
      double norm = residual(x, j, f, true);
      int it = 0;
      while (norm > params.march_tol) {
        if (++it > params.march_max_iter) {
          rep.iterations = newton_total;
          rep.outcome = SolveOutcome::not_converged;
          rep.message = "row Newton did not converge at k=" + std::to_string(g.k(j));
          return rep;
        }
        // Thomas solve of J dx = f in place.
        for (int m = 1; m < n; ++m) {
          const double w = sub[m] / diag[m - 1];
          diag[m] -= w * sup[m - 1];
          f[m] -= w * f[m - 1];
        }
        f[n - 1] /= diag[n - 1];
        for (int m = n - 2; m >= 0; --m) f[m] = (f[m] - sup[m] * f[m + 1]) / diag[m];
        const std::vector<double> dx(f.begin(), f.end());
        double lambda = 1.0, next = INFINITY;
        for (int halving = 0; halving < 30; ++halving) {
          trial = x;
          for (int m = 0; m < n; ++m) trial[m + 1] -= lambda * dx[m];
          try {
            next = residual(trial, j, f, false);
          } catch (const RangeError&) {
            next = INFINITY;
          }
          if (next < norm) break;
          lambda *= 0.5;
        }
        if (!(next < norm)) {
          // No further decrease in double precision; accept the row.
          if (norm <= 1e3 * params.march_tol) break;
          rep.outcome = SolveOutcome::stalled;
          rep.message = "line search failed at k=" + std::to_string(g.k(j));
          return rep;
        }
        x = trial;
        norm = residual(x, j, f, true);
        ++newton_total;
      }
      for (int i = 0; i < g.n_phi; ++i) total(i, j) = x[i];
    }
  } catch (const RangeError& e) {
    rep.outcome = SolveOutcome::window_exit;
    rep.message = e.what();
    return rep;
  }

  rep.u = GridField(g, total.values - problem.lift.lift.values, FieldRole::solution);
  project_f0(rep.u);  // removes round-off on the boundary rows
  rep.total = GridField(g, rep.u.values + problem.lift.lift.values, FieldRole::solution);
  const GridField res = rg_apply(rep.u, problem.lift.lift, table);
  rep.res0_final = residual_sup(res);
  rep.res2_final = residual_norm2(res);
  rep.res0_initial = residual_sup(rg_apply(GridField(g, FieldRole::solution), problem.lift.lift, table));
  rep.u4_max = u4_of(rep.u);
  rep.history.push_back({0.0, rep.res0_final, rep.res2_final, rep.u4_max});
  rep.iterations = newton_total;
  rep.outcome = SolveOutcome::converged;
  rep.message = "all rows converged";
  return rep;
}

SolveReport solve(SolveMethod method, const FlowProblem& problem, const FlowTable& table, const SolverParams& params) {
  switch (method) {
    case SolveMethod::nash_moser: return nash_moser_solve(problem, table, params);
    case SolveMethod::newton: return newton_solve(problem, table, params);
    case SolveMethod::march: return march_solve(problem, table, params);
  }
  throw ConfigError("unknown solve method");
}

}  // namespace csflow
