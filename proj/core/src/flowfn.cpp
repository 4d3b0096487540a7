#include "csflow/flowfn.hpp"

#include <algorithm>
#include <cstdio>
#include <cmath>
#include <string>

#include "csflow/propagators.hpp"
#include "parallel.hpp"

namespace csflow {

namespace {

double dot(std::span<const double> a, std::span<const double> b) {
  double s = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) s += a[i] * b[i];
  return s;
}

void check_range(const Background& bg, double m2) {
  if (!(std::abs(m2) <= bg.m2_max())) {
    throw RangeError("m2=" + std::to_string(m2) + " outside [-" + std::to_string(bg.m2_max()) + ", " +
                     std::to_string(bg.m2_max()) + "]");
  }
}

std::vector<double> uniform_grid(double half_width, int points) {
  std::vector<double> x(static_cast<std::size_t>(points));
  const double h = 2.0 * half_width / (points - 1);
  for (int i = 0; i < points; ++i) x[static_cast<std::size_t>(i)] = -half_width + h * i;
  // Symmetric grids hit 0 exactly at the centre.
  if (points % 2 == 1) x[static_cast<std::size_t>(points / 2)] = 0.0;
  x.back() = half_width;
  return x;
}

}  // namespace

FlowPoint flow_point(const Background& bg, double m2) {
  check_range(bg, m2);
  const std::size_t nt = bg.time_points();
  const auto chi = bg.chi();
  const auto w = bg.weights();
  const auto t = bg.times();

  // With X = diag(chi W) and D_n = c_n sum_v v v^T (v = M cos, M sin):
  //   G     = -eps/(2 I) sum_i X_i D_ii
  //   sigma =  eps/I     sum_n c_n sum_v (Xv).G(Xv)
  //   A2    = -eps/I     sum_n c_n sum_v [2 (Xv).G X G (Xv) + y.X y],  y = G(Xv)
  // where I = int chi dt. These are exact m2-derivatives of the discrete G.
  double g_sum = 0.0, sigma_sum = 0.0, a2_sum = 0.0;
  std::vector<double> leg(nt), xv(nt), xy(nt);
  for (std::size_t s = 0; s < bg.mode_count(); ++s) {
    const Mode& mode = bg.mode(s);
    if (mode.weight == 0.0) continue;
    for (int which = 0; which < 2; ++which) {
      for (std::size_t i = 0; i < nt; ++i) {
        const double ph = mode.omega * (t[i] - t.front());
        leg[i] = which == 0 ? std::cos(ph) : std::sin(ph);
      }
      const Series v = moeller_apply(bg, s, m2, leg);
      for (std::size_t i = 0; i < nt; ++i) {
        xv[i] = chi[i] * w[i] * v[i];
        g_sum += mode.weight * xv[i] * v[i];
      }
      const Series y = interacting_retarded_apply(bg, s, m2, xv);
      for (std::size_t i = 0; i < nt; ++i) xy[i] = chi[i] * w[i] * y[i];
      const Series z = interacting_retarded_apply(bg, s, m2, xy);
      sigma_sum += mode.weight * dot(xv, y);
      a2_sum += mode.weight * (2.0 * dot(xv, z) + dot(y, xy));
    }
  }
  const double scale = bg.epsilon() / bg.chi_integral();
  FlowPoint p;
  p.m2 = m2;
  p.g = -0.5 * scale * g_sum;
  p.sigma = scale * sigma_sum;
  p.a2 = -scale * a2_sum;
  if (!std::isfinite(p.g) || !std::isfinite(p.sigma) || !std::isfinite(p.a2)) {
    throw NumericError("non-finite flow function at m2=" + std::to_string(m2));
  }
  return p;
}

double flow_value(const Background& bg, double m2) { return flow_point(bg, m2).g; }
double sigma_value(const Background& bg, double m2) { return flow_point(bg, m2).sigma; }
double a2_value(const Background& bg, double m2) { return flow_point(bg, m2).a2; }

FlowTable::FlowTable(std::vector<double> m2, std::vector<double> g, std::vector<double> sigma,
                     std::vector<double> a2, std::string background_hash)
    : m2_(std::move(m2)), g_(std::move(g)), sigma_(std::move(sigma)), a2_(std::move(a2)),
      hash_(std::move(background_hash)) {
  if (m2_.size() < 4) throw NumericError("need >= 4 points for cubic spline");
  g_spline_ = CubicSpline(m2_, g_);
  sigma_spline_ = CubicSpline(m2_, sigma_);
  a2_spline_ = CubicSpline(m2_, a2_);
}

FlowTable tabulate(const Background& bg, const TableSpec& spec) {
  if (spec.points < 4) throw NumericError("need >= 4 points for cubic spline");
  if (!(spec.m2_max > 0.0) || spec.m2_max > bg.m2_max()) {
    throw ConfigError("table range must be positive and within grid.m2_max");
  }
  const std::vector<double> m2 = uniform_grid(spec.m2_max, spec.points);
  std::vector<FlowPoint> pts(m2.size());

  detail::parallel_for(m2.size(), spec.threads, [&](std::size_t i) { pts[i] = flow_point(bg, m2[i]); });

  std::vector<double> g(m2.size()), sigma(m2.size()), a2(m2.size());
  for (std::size_t i = 0; i < m2.size(); ++i) {
    g[i] = pts[i].g;
    sigma[i] = pts[i].sigma;
    a2[i] = pts[i].a2;
  }
  return FlowTable(m2, std::move(g), std::move(sigma), std::move(a2), bg.hash());
}

FlowTable tabulate_function(double m2_max, int points, const std::function<double(double)>& g,
                            const std::function<double(double)>& dg, const std::function<double(double)>& d2g) {
  if (points < 4) throw NumericError("need >= 4 points for cubic spline");
  std::vector<double> m2 = uniform_grid(m2_max, points);
  std::vector<double> gv(m2.size()), sv(m2.size()), av(m2.size());
  for (std::size_t i = 0; i < m2.size(); ++i) {
    gv[i] = g(m2[i]);
    sv[i] = dg(m2[i]);
    av[i] = d2g(m2[i]);
  }
  return FlowTable(std::move(m2), std::move(gv), std::move(sv), std::move(av), "analytic");
}

DerivativeConsistency derivative_consistency(const FlowTable& table) {
  DerivativeConsistency r;
  r.spacing = table.spacing();
  const double h = r.spacing;
  const auto& g = table.g();
  for (std::size_t i = 1; i + 1 < table.size(); ++i) {
    const double d1 = (g[i + 1] - g[i - 1]) / (2.0 * h);
    const double d2 = (g[i + 1] - 2.0 * g[i] + g[i - 1]) / (h * h);
    r.sigma_max_error = std::max(r.sigma_max_error, std::abs(table.sigma()[i] - d1));
    r.a2_max_error = std::max(r.a2_max_error, std::abs(table.a2()[i] - d2));
  }
  return r;
}

SigmaWindowReport check_sigma_window(const FlowTable& table, double c, double eps_log, double half_width) {
  SigmaWindowReport r;
  r.c = c;
  r.eps_log = eps_log;
  r.half_width = half_width;
  if (half_width < 0.0 || !table.contains(-half_width) || !table.contains(half_width)) {
    throw RangeError("sigma window exceeds the flow table range");
  }
  r.sigma_at_zero = table.sigma_at(0.0);

  // Dense sampling of the spline plus every knot inside the window.
  std::vector<double> probes;
  const int dense = 2001;
  for (int i = 0; i < dense; ++i) probes.push_back(-half_width + 2.0 * half_width * i / (dense - 1));
  for (double x : table.m2()) {
    if (std::abs(x) <= half_width) probes.push_back(x);
  }
  r.sigma_min = r.sigma_at_zero;
  r.log_slope_max = 0.0;
  for (double x : probes) {
    const double s = table.sigma_at(x);
    r.sigma_min = std::min(r.sigma_min, s);
    if (s > 0.0) {
      r.log_slope_max = std::max(r.log_slope_max, std::abs(table.sigma_slope_at(x) / s));
    } else {
      r.log_slope_max = INFINITY;
    }
  }
  r.positive = r.sigma_min >= c && c > 0.0;
  r.slope_ok = r.log_slope_max < eps_log;
  r.passed = r.positive && r.slope_ok;
  if (!r.positive) {
    if (r.sigma_at_zero < 0.0) {
      r.remedy = "sigma(0) < 0: flip the sign of state.amplitude (sigma is linear in the state kernel)";
    } else {
      r.remedy = "sigma below the floor c: increase |state.amplitude| or lower solver.sigma_floor";
    }
  } else if (!r.slope_ok) {
    r.remedy = "|sigma'/sigma| too large: shrink the window solver.a_bound or soften the state kernel";
  }
  return r;
}

void write_flow_table_csv(const std::filesystem::path& path, const FlowTable& table) {
  std::FILE* f = std::fopen(path.string().c_str(), "w");
  if (!f) throw NumericError("cannot write '" + path.string() + "'");
  std::fprintf(f, "m2,G,sigma,A2\n");
  for (std::size_t i = 0; i < table.size(); ++i)
    std::fprintf(f, "%.17g,%.17g,%.17g,%.17g\n", table.m2()[i], table.g()[i], table.sigma()[i], table.a2()[i]);
  std::fclose(f);
}

}  // namespace csflow
