#include "csflow/verify.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <numbers>

#include "csflow/propagators.hpp"
#include "parallel.hpp"

namespace csflow {

namespace {

constexpr double kPi = std::numbers::pi;

Check make_check(std::string name, double value, double threshold, std::string relation, bool passed,
                 std::string note = {}) {
  Check c;
  c.name = std::move(name);
  c.value = value;
  c.threshold = threshold;
  c.relation = std::move(relation);
  c.passed = passed;
  c.note = std::move(note);
  return c;
}

double slope(double coarse_err, double fine_err, double coarse_h, double fine_h) {
  return std::log(coarse_err / fine_err) / std::log(coarse_h / fine_h);
}

double interior_sup(const GridField& f) {
  return f.values.block(1, 1, f.grid.n_phi - 2, f.grid.n_k - 1).cwiseAbs().maxCoeff();
}

}  // namespace

bool SuiteResult::passed() const {
  return std::all_of(checks.begin(), checks.end(), [](const Check& c) { return c.passed; });
}

RunSetup resolve_setup(const Config& cfg, long threads, long long seed) {
  RunSetup s;
  s.config = cfg;
  s.background = background_params(cfg);
  s.table.m2_max = s.background.m2_max;
  s.table.points = static_cast<int>(cfg.get_int("grid.table_points", 101));
  s.table.threads = static_cast<int>(threads > 0 ? threads : cfg.get_int("run.threads", 1));
  if (s.table.threads < 1) throw ConfigError("run.threads must be >= 1");
  s.grid = flow_grid(cfg);
  s.psi = initial_potential(cfg);
  s.side = side_data(cfg);
  s.solver = solver_params(cfg);
  s.seed = static_cast<std::uint64_t>(seed >= 0 ? seed : cfg.get_int("run.seed", 12345));
  // Hash the effective seed; the worker count never changes numbers.
  s.config.set("run.seed", std::to_string(s.seed));
  s.config.erase("run.threads");
  return s;
}

// ---------------------------------------------------------------- propagators

IntertwiningOrder intertwining_order(BackgroundParams params, const std::vector<int>& time_points,
                                     const std::vector<double>& m2, int modes) {
  IntertwiningOrder out;
  out.time_points = time_points;
  out.m2 = m2;
  out.residual.assign(m2.size(), std::vector<double>(time_points.size(), 0.0));
  params.modes = modes;
  std::vector<double> dt;
  for (std::size_t r = 0; r < time_points.size(); ++r) {
    params.time_points = time_points[r];
    const Background bg(params);
    dt.push_back(bg.dt());
    for (std::size_t a = 0; a < m2.size(); ++a) {
      for (std::size_t s = 0; s < bg.mode_count(); ++s) {
        const auto rep = verify_intertwining(bg, interacting_retarded_volterra(bg, s, m2[a]), out.order_constant);
        out.residual[a][r] = std::max(out.residual[a][r], rep.residual);
        out.max_scaled = std::max(out.max_scaled, rep.scaled);
      }
    }
  }
  out.passed = out.max_scaled < out.order_constant;
  for (std::size_t a = 0; a < m2.size(); ++a) {
    double worst = INFINITY;
    for (std::size_t r = 0; r + 1 < time_points.size(); ++r) {
      worst = std::min(worst, slope(out.residual[a][r], out.residual[a][r + 1], dt[r], dt[r + 1]));
    }
    out.min_slope.push_back(worst);
    if (!(std::abs(worst - 2.0) <= 0.4)) out.passed = false;
  }
  return out;
}

OracleAgreement volterra_vs_neumann(BackgroundParams params, const std::vector<double>& m2, int modes, double tol,
                                    double threshold, int threads) {
  params.modes = modes;
  const Background bg(params);
  const std::size_t nm = bg.mode_count();
  std::vector<double> diff(m2.size() * nm);
  std::vector<int> terms(m2.size() * nm);
  detail::parallel_for(diff.size(), threads, [&](std::size_t i) {
    const double x = m2[i / nm];
    const auto v = interacting_retarded_volterra(bg, i % nm, x);
    const auto n = interacting_retarded_neumann(bg, i % nm, x, tol);
    diff[i] = (v.g - n.kernel.g).cwiseAbs().maxCoeff();
    terms[i] = n.terms;
  });
  OracleAgreement out;
  out.kernels = static_cast<int>(diff.size());
  out.max_difference = *std::max_element(diff.begin(), diff.end());
  out.max_terms = *std::max_element(terms.begin(), terms.end());
  out.passed = out.max_difference <= threshold;
  return out;
}

GronwallFit gronwall_fit(BackgroundParams params, int samples, int modes, double tolerance) {
  params.modes = modes;
  const Background bg(params);
  const auto t = bg.times();
  const auto w = bg.weights();
  const auto chi = bg.chi();
  const std::size_t nt = bg.time_points();

  // Test source: g_n(t) = chi(t) cos(omega_n t) / (1 + n^2) on every mode.
  auto slice_norms = [&](double m2) {
    std::vector<Series> h;
    for (std::size_t s = 0; s < bg.mode_count(); ++s) {
      const Mode& m = bg.mode(s);
      Series x(nt);
      for (std::size_t i = 0; i < nt; ++i) x[i] = w[i] * chi[i] * std::cos(m.omega * t[i]) / (1.0 + m.index * m.index);
      h.push_back(interacting_retarded_apply(bg, s, m2, x));
    }
    std::vector<double> norm(nt);
    std::vector<double> coeff(bg.mode_count()), k(bg.mode_count());
    for (std::size_t s = 0; s < bg.mode_count(); ++s) k[s] = bg.mode(s).wavenumber;
    for (std::size_t i = 0; i < nt; ++i) {
      for (std::size_t s = 0; s < bg.mode_count(); ++s) coeff[s] = h[s][i];
      norm[i] = slice_sobolev_norm(coeff, k);
    }
    return norm;
  };

  GronwallFit out;
  out.tolerance = tolerance;
  const auto free = slice_norms(0.0);
  double sxx = 0.0, sxy = 0.0;
  for (int q = 0; q < samples; ++q) {
    const double m2 = samples == 1 ? 0.0 : -params.m2_max + 2.0 * params.m2_max * q / (samples - 1);
    const auto inter = slice_norms(m2);
    // Running suprema in time: a single mode has zeros, so compare the
    // histories sup_{s<=t} rather than the instantaneous norms.
    double sup_h = 0.0, sup_f = 0.0, worst = 0.0;
    for (std::size_t i = 0; i < nt; ++i) {
      sup_h = std::max(sup_h, inter[i]);
      sup_f = std::max(sup_f, free[i]);
      if (sup_f > 0.0) worst = std::max(worst, sup_h / sup_f);
    }
    const double lr = std::log(worst);
    out.m2.push_back(m2);
    out.log_ratio.push_back(lr);
    sxx += m2 * m2;
    sxy += std::abs(m2) * lr;
    if (m2 != 0.0) out.envelope = std::max(out.envelope, lr / std::abs(m2));
  }
  out.constant = sxx > 0.0 ? sxy / sxx : 0.0;
  for (std::size_t q = 0; q < out.m2.size(); ++q) {
    out.max_residual = std::max(out.max_residual, std::abs(out.log_ratio[q] - out.constant * std::abs(out.m2[q])));
  }
  out.passed = out.max_residual <= tolerance && std::isfinite(out.constant);
  return out;
}

// ---------------------------------------------------------------- flow function

DerivativeSlopes derivative_slopes(const Background& bg, double m2_max, int points, int threads) {
  DerivativeSlopes out;
  const FlowTable fine = tabulate(bg, {m2_max, points, threads});
  const FlowTable coarse = tabulate(bg, {m2_max, (points + 1) / 2, threads});
  out.fine = derivative_consistency(fine);
  out.coarse = derivative_consistency(coarse);
  out.spacing_fine = fine.spacing();
  out.spacing_coarse = coarse.spacing();
  out.sigma_slope = slope(out.coarse.sigma_max_error, out.fine.sigma_max_error, out.spacing_coarse, out.spacing_fine);
  out.a2_slope = slope(out.coarse.a2_max_error, out.fine.a2_max_error, out.spacing_coarse, out.spacing_fine);
  out.passed = std::abs(out.sigma_slope - 2.0) <= 0.4 && std::abs(out.a2_slope - 2.0) <= 0.4;
  return out;
}

SignFlip sigma_window_sign_flip(const RunSetup& setup, const FlowTable& table, double half_width) {
  SignFlip out;
  const auto& p = setup.solver;
  out.original = check_sigma_window(table, p.sigma_floor, p.eps_log, half_width);
  BackgroundParams flipped = setup.background;
  flipped.amplitude = -flipped.amplitude;
  const FlowTable ft = tabulate(Background(flipped), setup.table);
  out.flipped = check_sigma_window(ft, p.sigma_floor, p.eps_log, half_width);
  out.passed = out.original.passed && !out.flipped.passed;
  return out;
}

double window_half_width(const FlowProblem& problem, double a_bound) {
  return second_phi_difference(problem.lift.lift).cwiseAbs().maxCoeff() + a_bound;
}

// ---------------------------------------------------------------- graded

GridField random_f0_field(const FlowGrid& grid, std::mt19937_64& rng, double target_norm4) {
  std::uniform_real_distribution<double> coef(-1.0, 1.0);
  double a[4][4];
  for (int p = 0; p < 4; ++p)
    for (int q = 0; q < 4; ++q) a[p][q] = coef(rng) / ((p + 1) * (p + 1) + (q + 1) * (q + 1));
  GridField u = GridField::from_function(grid, FieldRole::solution, [&](double phi, double k) {
    const double x = (phi - grid.phi_min) / grid.width();
    const double y = (k - grid.k_min) / grid.length();
    double s = 0.0;
    for (int p = 0; p < 4; ++p)
      for (int q = 0; q < 4; ++q) s += a[p][q] * std::sin((p + 1) * kPi * x) * std::sin((q + 0.5) * kPi * y);
    return s;
  });
  project_f0(u);  // exact zeros where sin vanishes only to round-off
  u.values *= target_norm4 / seminorm(u, 4);
  return u;
}

GridField random_smooth_field(const FlowGrid& grid, std::mt19937_64& rng) {
  std::uniform_real_distribution<double> coef(-1.0, 1.0), phase(0.0, 2.0 * kPi);
  double a[4][4], th[4][4], ph[4][4];
  for (int p = 0; p < 4; ++p)
    for (int q = 0; q < 4; ++q) {
      a[p][q] = coef(rng) / (1.0 + p * p + q * q);
      th[p][q] = phase(rng);
      ph[p][q] = phase(rng);
    }
  return GridField::from_function(grid, FieldRole::source, [&](double phi, double k) {
    const double x = (phi - grid.phi_min) / grid.width();
    const double y = (k - grid.k_min) / grid.length();
    double s = 0.0;
    for (int p = 0; p < 4; ++p)
      for (int q = 0; q < 4; ++q) s += a[p][q] * std::cos(p * kPi * x + th[p][q]) * std::cos(q * kPi * y + ph[p][q]);
    return s;
  });
}

std::vector<TameFit> flow_map_tame_fits(const FlowProblem& problem, const FlowTable& table, double a_bound,
                                        int samples, std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<double> scale(0.2, 1.0);
  std::vector<GridField> totals;
  for (int s = 0; s < samples; ++s) {
    GridField u = random_f0_field(problem.grid, rng, a_bound * scale(rng));
    u.values += problem.lift.lift.values;
    u.role = FieldRole::source;
    totals.push_back(std::move(u));
  }
  auto map = [&](const GridField& total) {
    const Eigen::MatrixXd d2 = second_phi_difference(total);
    GridField out(total.grid, FieldRole::source);
    for (int j = 0; j < d2.cols(); ++j)
      for (int i = 0; i < d2.rows(); ++i) out(i, j) = table.g_at(d2(i, j));
    return out;
  };
  std::vector<TameFit> fits;
  for (int n = 0; n <= 2; ++n) fits.push_back(tame_fit(totals, map, n, 2));
  return fits;
}

namespace {

struct SmoothingFit {
  double c_up = 0.0;    // max ||S_t u||_{n+r} e^{-rt} / ||u||_n
  double c_down = 0.0;  // max ||(1-S_t)u||_n e^{rt} / ||u||_{n+r}
};

SmoothingFit smoothing_constants(int n_points, int n, int r, const SmoothingSchedule& schedule, std::uint64_t seed) {
  FlowGrid g;
  g.n_phi = g.n_k = n_points;
  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<double> coef(-1.0, 1.0);
  SmoothingFit fit;
  for (int f = 0; f < 6; ++f) {
    double a[6][6];
    for (auto& row : a)
      for (double& x : row) x = coef(rng);
    const bool sine = schedule.basis == SmoothingBasis::sine_phi;
    GridField u = GridField::from_function(g, FieldRole::source, [&](double phi, double k) {
      const double x = (phi - g.phi_min) / g.width();
      const double y = (k - g.k_min) / g.length();
      double s = 0.0;
      for (int p = 0; p < 6; ++p)
        for (int q = 0; q < 6; ++q) {
          const double bx = sine ? std::sin((p + 1) * kPi * x) : std::cos(p * kPi * x);
          s += a[p][q] / (1.0 + p * p + q * q) * bx * std::cos(q * kPi * y);
        }
      return s;
    });
    if (sine) {
      u.values.row(0).setZero();
      u.values.row(g.n_phi - 1).setZero();
    }
    const auto un = seminorms(u, n + r);
    for (int ti = 0; ti <= 8; ++ti) {
      const double t = 0.25 * ti;
      const GridField su = smoothing_apply(u, t, schedule);
      fit.c_up = std::max(fit.c_up, seminorm(su, n + r) * std::exp(-r * t) / un[n]);
      GridField rest(g, u.values - su.values, FieldRole::source);
      fit.c_down = std::max(fit.c_down, seminorm(rest, n) * std::exp(r * t) / un[n + r]);
    }
  }
  return fit;
}

}  // namespace

// ---------------------------------------------------------------- linear inverse

RoundTrip linear_round_trip(const ConductivityField& sigma, int samples, std::uint64_t seed, double threshold) {
  RoundTrip out;
  std::mt19937_64 rng(seed);
  try {
    for (int s = 0; s < samples; ++s) {
      const GridField g = random_smooth_field(sigma.grid, rng);
      const GridField v = solve_linearized(sigma, g);
      GridField diff = apply_linearized(sigma, v);
      diff.values -= g.values;
      out.worst_relative = std::max(out.worst_relative, interior_sup(diff) / interior_sup(g));
      ++out.samples;
    }
    out.passed = out.worst_relative <= threshold;
  } catch (const std::exception& e) {
    out.error = e.what();
    out.passed = false;
  }
  return out;
}

HeatOracle heat_oracle_check(int n_phi, int n_k, double threshold) {
  HeatOracle out;
  out.n_phi = n_phi;
  out.n_k = n_k;
  out.threshold = threshold;
  const FlowGrid g{0.0, 1.0, n_phi, 1.0, 3.0, n_k};
  const auto sigma = constant_conductivity(g, 1.0);
  const auto src = GridField::from_function(g, FieldRole::source, [](double phi, double) { return std::sin(kPi * phi); });
  const GridField v = solve_linearized(sigma, src);
  double peak = 0.0;
  const int j = n_k - 1;
  for (int i = 0; i < n_phi; ++i) {
    const double exact = heat_oracle(g, 1.0, g.phi(i), g.k(j));
    out.error = std::max(out.error, std::abs(v(i, j) - exact));
    peak = std::max(peak, std::abs(exact));
  }
  out.relative = out.error / peak;
  out.passed = out.error <= threshold;
  return out;
}

OrderStudy linear_order_study() {
  auto error = [](int n_phi, int n_k, double k_max, bool final_row) {
    const FlowGrid g{0.0, 1.0, n_phi, 1.0, k_max, n_k};
    const auto sigma = constant_conductivity(g, 1.0);
    const auto src = GridField::from_function(g, FieldRole::source, [](double phi, double) { return std::sin(kPi * phi); });
    const GridField v = solve_linearized(sigma, src);
    double e = 0.0;
    for (int j = final_row ? n_k - 1 : 0; j < n_k; ++j)
      for (int i = 0; i < n_phi; ++i) e = std::max(e, std::abs(v(i, j) - heat_oracle(g, 1.0, g.phi(i), g.k(j))));
    return e;
  };
  OrderStudy out;
  // phi: final row after the transient, only the spatial error remains.
  out.phi_slope = std::log(error(33, 2049, 3.0, true) / error(65, 2049, 3.0, true)) / std::log(2.0);
  // k: fine phi grid, coarse k steps, whole history.
  out.k_slope = std::log(error(513, 33, 2.0, false) / error(513, 65, 2.0, false)) / std::log(2.0);
  out.passed = std::abs(out.phi_slope - 2.0) <= 0.4 && std::abs(out.k_slope - 1.0) <= 0.2;
  return out;
}

std::vector<ConductivityField> conductivity_sweep(const FlowProblem& problem, const FlowTable& table, double floor,
                                                  int random_fields, std::mt19937_64& rng) {
  const double c = floor > 0.0 ? floor : 0.01;
  std::vector<ConductivityField> out;
  out.push_back(constant_conductivity(problem.grid, c));
  out.push_back(constant_conductivity(problem.grid, 1.0));
  out.push_back(conductivity_from(table, problem.lift.lift));
  for (int s = 0; s < random_fields; ++s) {
    GridField f = random_smooth_field(problem.grid, rng);
    const double m = f.max_abs();
    ConductivityField cf{problem.grid, (1.5 + 0.5 * f.values.array() / m).matrix() * c};
    out.push_back(std::move(cf));
  }
  return out;
}

// ---------------------------------------------------------------- suites

SuiteResult propagators_suite(const RunSetup& setup) {
  SuiteResult r;
  r.name = "propagators";
  const double m2_hi = std::min(0.3, setup.background.m2_max);

  const auto order = intertwining_order(setup.background, {256, 512, 1024}, {-m2_hi, 0.0, m2_hi}, 8);
  double worst_slope = 2.0;
  for (double s : order.min_slope) worst_slope = std::abs(s - 2.0) > std::abs(worst_slope - 2.0) ? s : worst_slope;
  Check c = make_check("intertwining_order", worst_slope, 2.0, "in [1.6, 2.4]", order.passed);
  c.fitted = {{"max_residual_over_dt2", order.max_scaled}, {"order_constant", order.order_constant}};
  for (std::size_t a = 0; a < order.m2.size(); ++a) c.fitted.push_back({"residual_nt1024_m2_" + std::to_string(order.m2[a]), order.residual[a].back()});
  r.checks.push_back(c);

  BackgroundParams p512 = setup.background;
  p512.time_points = 512;
  const auto oracle = volterra_vs_neumann(p512, {-0.1, -0.05, 0.05, 0.1}, 8, 1e-13, 1e-8, setup.table.threads);
  c = make_check("volterra_vs_neumann", oracle.max_difference, 1e-8, "<=", oracle.passed);
  c.fitted = {{"max_terms", static_cast<double>(oracle.max_terms)}, {"kernels", static_cast<double>(oracle.kernels)}};
  r.checks.push_back(c);

  const auto gw = gronwall_fit(setup.background, 21, 8);
  c = make_check("gronwall_fit", gw.max_residual, gw.tolerance, "<=", gw.passed, "log-scale residual of the single-C fit");
  c.fitted = {{"C_fit", gw.constant}, {"C_envelope", gw.envelope}};
  r.checks.push_back(c);

  // Retarded support and transpose duality on the production kernels.
  const Background bg(setup.background);
  double upper = 0.0;
  for (std::size_t s = 0; s < std::min<std::size_t>(bg.mode_count(), 3); ++s) {
    const auto k = interacting_retarded_volterra(bg, s, m2_hi);
    upper = std::max(upper, k.g.triangularView<Eigen::Upper>().toDenseMatrix().cwiseAbs().maxCoeff());
    upper = std::max(upper, k.advanced().triangularView<Eigen::Lower>().toDenseMatrix().cwiseAbs().maxCoeff());
  }
  r.checks.push_back(make_check("retarded_support", upper, 0.0, "==", upper == 0.0));

  // Identity Moeller at m2 = 0: d(t) = sum_n c_n.
  const auto d = normal_ordered_diagonal(bg, 0.0);
  double csum = 0.0;
  for (const auto& m : bg.modes()) csum += m.weight;
  double dev = 0.0;
  for (double x : d) dev = std::max(dev, std::abs(x - csum));
  r.checks.push_back(make_check("coincidence_at_zero_mass", dev, 1e-12 * std::max(1.0, std::abs(csum)), "<=",
                                dev <= 1e-12 * std::max(1.0, std::abs(csum))));
  return r;
}

SuiteResult flowfn_suite(const RunSetup& setup, const FlowTable& table) {
  SuiteResult r;
  r.name = "flowfn";
  const Background bg(setup.background);

  const auto ds = derivative_slopes(bg, setup.table.m2_max, setup.table.points, setup.table.threads);
  Check c = make_check("derivative_slope_sigma", ds.sigma_slope, 2.0, "in [1.6, 2.4]", std::abs(ds.sigma_slope - 2.0) <= 0.4);
  c.fitted = {{"err_fine", ds.fine.sigma_max_error}, {"err_coarse", ds.coarse.sigma_max_error},
              {"K", ds.fine.sigma_max_error / (ds.spacing_fine * ds.spacing_fine)}};
  r.checks.push_back(c);
  c = make_check("derivative_slope_a2", ds.a2_slope, 2.0, "in [1.6, 2.4]", std::abs(ds.a2_slope - 2.0) <= 0.4);
  c.fitted = {{"err_fine", ds.fine.a2_max_error}, {"err_coarse", ds.coarse.a2_max_error},
              {"K", ds.fine.a2_max_error / (ds.spacing_fine * ds.spacing_fine)}};
  r.checks.push_back(c);

  double csum = 0.0;
  for (const auto& m : bg.modes()) csum += m.weight;
  const double g0 = flow_value(bg, 0.0);
  const double expect = -0.5 * bg.epsilon() * csum;
  const double rel = std::abs(g0 - expect) / std::max(1e-300, std::abs(expect));
  r.checks.push_back(make_check("flow_value_at_zero", rel, 1e-12, "<=", rel <= 1e-12, "relative to -(eps/2) sum c_n"));

  BackgroundParams twice = setup.background;
  twice.amplitude *= 2.0;
  const Background bg2(twice);
  double lin = 0.0;
  for (double m2 : {-0.3 * bg.m2_max(), 0.0, 0.4 * bg.m2_max()}) {
    const auto a = flow_point(bg, m2), b = flow_point(bg2, m2);
    lin = std::max({lin, std::abs(b.g - 2 * a.g) / std::abs(a.g), std::abs(b.sigma - 2 * a.sigma) / std::abs(a.sigma),
                    std::abs(b.a2 - 2 * a.a2) / std::abs(a.a2)});
  }
  r.checks.push_back(make_check("linearity_in_state", lin, 1e-12, "<=", lin <= 1e-12));

  // Order-0 tame bound |A2(m2)| <= C (1 + |m2|), interleaved train/held-out.
  std::vector<double> lhs, rhs;
  for (int parity = 0; parity < 2; ++parity)
    for (std::size_t i = parity; i < table.size(); i += 2) {
      lhs.push_back(std::abs(table.a2()[i]));
      rhs.push_back(std::abs(table.m2()[i]));
    }
  const auto a2fit = tame_fit_values(lhs, rhs, 0, 0);
  c = make_check("a2_order0_bound", a2fit.violations, 0, "==", a2fit.passed);
  c.fitted = {{"C", a2fit.constant}, {"worst_held_out_ratio", a2fit.worst_held_out_ratio}};
  r.checks.push_back(c);

  const FlowProblem problem = make_problem(setup.grid, setup.psi, table, setup.side);
  const double hw = window_half_width(problem, setup.solver.a_bound);
  const auto flip = sigma_window_sign_flip(setup, table, hw);
  c = make_check("sigma_window", flip.original.sigma_min, setup.solver.sigma_floor, ">=", flip.original.passed);
  c.fitted = {{"c", flip.original.c},
              {"eps_log", flip.original.eps_log},
              {"half_width", hw},
              {"A", setup.solver.a_bound},
              {"sigma_at_zero", flip.original.sigma_at_zero},
              {"log_slope_max", flip.original.log_slope_max}};
  c.note = flip.original.remedy;
  r.checks.push_back(c);
  c = make_check("sigma_window_sign_flip", flip.flipped.sigma_min, setup.solver.sigma_floor, "< (must fail)",
                 !flip.flipped.passed);
  c.note = flip.flipped.remedy;
  r.checks.push_back(c);
  return r;
}

SuiteResult graded_suite(const RunSetup& setup, const FlowTable& table, const FlowProblem& problem) {
  SuiteResult r;
  r.name = "graded";

  FlowGrid unit;
  const auto quad = GridField::from_function(unit, FieldRole::source, [](double phi, double) { return phi * phi; });
  const auto qn = seminorms(quad, 2);
  const double qerr = std::max({std::abs(qn[0] - 1.0), std::abs(qn[1] - 3.0), std::abs(qn[2] - 5.0)});
  r.checks.push_back(make_check("seminorm_quadratic", qerr, 1e-10, "<=", qerr <= 1e-10));

  std::vector<double> psi(unit.n_phi), beta(unit.n_k, 1.0);
  for (int i = 0; i < unit.n_phi; ++i) psi[i] = unit.phi(i) * unit.phi(i);
  const auto lift = boundary_lift(psi, beta, beta, unit);
  const double lerr = (lift.lift.values - quad.values).cwiseAbs().maxCoeff();
  r.checks.push_back(make_check("lift_reproduces_phi_only", lerr, 1e-14, "<=", lerr <= 1e-14));

  // S_t tame inequalities; constants must be stable under refinement.
  for (int n = 0; n <= 2; ++n)
    for (int rr = 1; rr <= 2; ++rr) {
      const auto coarse = smoothing_constants(65, n, rr, setup.solver.smoothing, setup.seed + 17);
      const auto fine = smoothing_constants(129, n, rr, setup.solver.smoothing, setup.seed + 17);
      const double drift = std::max(std::abs(fine.c_up / coarse.c_up - 1.0), std::abs(fine.c_down / coarse.c_down - 1.0));
      char name[64];
      std::snprintf(name, sizeof name, "smoothing_tame_n%d_r%d", n, rr);
      Check c = make_check(name, drift, 0.25, "<=", drift <= 0.25 && std::isfinite(fine.c_up) && std::isfinite(fine.c_down),
                           "relative drift of fitted constants between 65^2 and 129^2");
      c.fitted = {{"C_up", fine.c_up}, {"C_down", fine.c_down}};
      r.checks.push_back(c);
    }

  const auto fits = flow_map_tame_fits(problem, table, setup.solver.a_bound, 64, setup.seed);
  for (const auto& f : fits) {
    Check c = make_check("flow_map_tame_n" + std::to_string(f.n), f.violations, 0, "==", f.passed);
    c.fitted = {{"C", f.constant}, {"worst_held_out_ratio", f.worst_held_out_ratio}};
    r.checks.push_back(c);
  }
  return r;
}

SuiteResult linsolve_suite(const RunSetup& setup, const FlowTable& table, const FlowProblem& problem,
                           bool inject_negative_sigma) {
  SuiteResult r;
  r.name = "linsolve";
  ConductivityField sigma = conductivity_from(table, problem.lift.lift);
  if (inject_negative_sigma) sigma.sigma *= -1.0;

  const auto rt = linear_round_trip(sigma, 16, setup.seed, 1e-8);
  r.checks.push_back(make_check("round_trip", rt.worst_relative, 1e-8, "<=", rt.passed, rt.error));

  const auto heat = heat_oracle_check();
  Check c = make_check("heat_oracle_n257", heat.error, heat.threshold, "<=", heat.passed);
  c.fitted = {{"relative", heat.relative}, {"n_k", static_cast<double>(heat.n_k)}};
  r.checks.push_back(c);

  const auto order = linear_order_study();
  c = make_check("order_of_accuracy", order.phi_slope, 2.0, "phi in [1.6,2.4], k in [0.8,1.2]", order.passed);
  c.fitted = {{"phi_slope", order.phi_slope}, {"k_slope", order.k_slope}};
  r.checks.push_back(c);

  std::mt19937_64 rng(setup.seed + 1);
  try {
    auto sweep = conductivity_sweep(problem, table, setup.solver.sigma_floor, 6, rng);
    if (inject_negative_sigma) sweep.push_back(sigma);
    std::vector<GridField> sources;
    sources.push_back(GridField::from_function(problem.grid, FieldRole::source, [](double, double) { return 1.0; }));
    for (int s = 0; s < 6; ++s) sources.push_back(random_smooth_field(problem.grid, rng));
    const auto cert = max_principle_certificate(sweep, sources);
    c = make_check("max_principle", cert.observed, cert.bound, "<=", cert.passed);
    c.fitted = {{"C_max", cert.bound}, {"samples", static_cast<double>(cert.samples)}};
    r.checks.push_back(c);

    std::vector<ConductivityField> sig;
    std::vector<GridField> src;
    for (int s = 0; s < 32; ++s) {
      sig.push_back(sweep[s % sweep.size()]);
      src.push_back(random_f0_field(problem.grid, rng, 1.0));
    }
    for (const auto& g : inverse_graded_check(sig, src)) {
      c = make_check("inverse_graded_n" + std::to_string(g.n), g.violations, 0, "==", g.passed);
      c.fitted = {{"C", g.constant}, {"worst_held_out", g.worst_held_out}};
      r.checks.push_back(c);
    }
  } catch (const std::exception& e) {
    r.checks.push_back(make_check("max_principle", INFINITY, 0.0, "<=", false, e.what()));
  }
  return r;
}

}  // namespace csflow
