#include "csflow/propagators.hpp"

#include <bit>
#include <cmath>
#include <cstdint>
#include <cstdio>
#include <cstring>
#include <fstream>

namespace csflow {

namespace {

// sin/cos of omega * (t - t_min) on the grid; the origin drops out of
// sin(omega (t_i - t_j)).
struct Phases {
  std::vector<double> s, c;
};

Phases phases(const Background& bg, double omega) {
  const auto t = bg.times();
  Phases p;
  p.s.resize(t.size());
  p.c.resize(t.size());
  const double t0 = t.front();
  for (std::size_t i = 0; i < t.size(); ++i) {
    p.s[i] = std::sin(omega * (t[i] - t0));
    p.c[i] = std::cos(omega * (t[i] - t0));
  }
  return p;
}

// Solves y = rhs - m2 * G0 (chi W y) where rhs is supplied by the caller.
// The G0 history enters through two accumulators over l < i.
template <class Rhs>
void resolvent_recursion(const Background& bg, const Phases& ph, double omega, double m2, Rhs rhs,
                         std::span<double> y, std::size_t first = 0) {
  const auto chi = bg.chi();
  const auto w = bg.weights();
  const std::size_t n = y.size();
  double acc_c = 0.0;  // sum_{l<i} cos_l chi_l w_l y_l
  double acc_s = 0.0;  // sum_{l<i} sin_l chi_l w_l y_l
  for (std::size_t i = first; i < n; ++i) {
    const double hist = (ph.s[i] * acc_c - ph.c[i] * acc_s) / omega;
    y[i] = rhs(i) - m2 * hist;
    const double z = chi[i] * w[i] * y[i];
    acc_c += ph.c[i] * z;
    acc_s += ph.s[i] * z;
  }
}

constexpr std::uint32_t kMagic = 0x4b465343u;  // "CSFK" little-endian
constexpr std::uint32_t kVersion = 1;

}  // namespace

Series free_retarded_apply(const Background& bg, std::size_t slot, std::span<const double> g) {
  const auto t = bg.times();
  const auto w = bg.weights();
  const double omega = bg.mode(slot).omega;
  Series h(t.size(), 0.0);
  for (std::size_t i = 0; i < t.size(); ++i) {
    double sum = 0.0;
    for (std::size_t j = 0; j < i; ++j) {
      if (g[j] == 0.0) continue;
      sum += w[j] * std::sin(omega * (t[i] - t[j])) / omega * g[j];
    }
    h[i] = sum;
  }
  return h;
}

PropagatorKernel free_retarded_kernel(const Background& bg, std::size_t slot) {
  const auto t = bg.times();
  const std::size_t n = t.size();
  const double omega = bg.mode(slot).omega;
  PropagatorKernel k{bg.mode(slot).index, 0.0, Eigen::MatrixXd::Zero(n, n)};
  for (std::size_t i = 0; i < n; ++i) {
    for (std::size_t j = 0; j < i; ++j) {
      k.g(i, j) = std::sin(omega * (t[i] - t[j])) / omega;
    }
  }
  return k;
}

PropagatorKernel interacting_retarded_volterra(const Background& bg, std::size_t slot, double m2) {
  PropagatorKernel k = free_retarded_kernel(bg, slot);
  k.m2 = m2;
  if (m2 == 0.0) return k;

  const std::size_t n = bg.time_points();
  const double omega = bg.mode(slot).omega;
  const Phases ph = phases(bg, omega);
  const Eigen::MatrixXd g0 = k.g;
  std::vector<double> col(n, 0.0);
  for (std::size_t j = 0; j < n; ++j) {
    // Entries above the diagonal vanish, and the history sum only starts
    // once t_l > t_j, so the recursion can start at row j.
    std::fill(col.begin(), col.end(), 0.0);
    resolvent_recursion(bg, ph, omega, m2, [&](std::size_t i) { return g0(i, j); }, col, j);
    for (std::size_t i = j + 1; i < n; ++i) {
      if (!std::isfinite(col[i])) {
        throw NumericError("Volterra forward substitution produced a non-finite value (mode " +
                           std::to_string(k.mode) + ", m2=" + std::to_string(m2) + ")");
      }
      k.g(i, j) = col[i];
    }
  }
  return k;
}

namespace {

// Product of two lower-triangular blocks, written into the lower triangle of
// out (the strict upper triangle of out is left untouched). Block recursion
// needs about a third of the flops of a triangular-times-dense product.
void lower_product(const Eigen::Ref<const Eigen::MatrixXd>& l, const Eigen::Ref<const Eigen::MatrixXd>& s,
                   Eigen::Ref<Eigen::MatrixXd> out) {
  const Eigen::Index n = l.rows();
  if (n <= 64) {
    const Eigen::MatrixXd sl = s.triangularView<Eigen::Lower>();
    out.triangularView<Eigen::Lower>() = l.triangularView<Eigen::Lower>() * sl;
    return;
  }
  const Eigen::Index h = n / 2, r = n - h;
  lower_product(l.topLeftCorner(h, h), s.topLeftCorner(h, h), out.topLeftCorner(h, h));
  lower_product(l.bottomRightCorner(r, r), s.bottomRightCorner(r, r), out.bottomRightCorner(r, r));
  auto off = out.bottomLeftCorner(r, h);
  off.noalias() = l.bottomLeftCorner(r, h) * s.topLeftCorner(h, h).triangularView<Eigen::Lower>();
  off.noalias() += l.bottomRightCorner(r, r).triangularView<Eigen::Lower>() * s.bottomLeftCorner(r, h);
}

}  // namespace

NeumannResult interacting_retarded_neumann(const Background& bg, std::size_t slot, double m2, double tol,
                                           int max_terms) {
  NeumannResult out;
  out.kernel = free_retarded_kernel(bg, slot);
  out.kernel.m2 = m2;
  const Eigen::MatrixXd g0 = out.kernel.g;
  const Eigen::MatrixXd g0lower = g0.triangularView<Eigen::StrictlyLower>();
  const std::size_t n = bg.time_points();
  Eigen::VectorXd xw(n);
  for (std::size_t i = 0; i < n; ++i) xw(i) = bg.chi()[i] * bg.weights()[i];

  Eigen::MatrixXd term = g0;
  out.term_norms.push_back(term.cwiseAbs().maxCoeff());
  int growing = 0;
  for (int j = 1;; ++j) {
    // term_j = (-m2 G0 X) term_{j-1}
    const Eigen::MatrixXd scaled = xw.asDiagonal() * term;
    lower_product(g0lower, scaled, term);
    term *= -m2;
    const double norm = term.cwiseAbs().maxCoeff();
    if (!std::isfinite(norm)) throw NumericError("series not converged");
    if (norm < tol) break;
    out.kernel.g += term;
    out.terms = j;
    out.term_norms.push_back(norm);
    if (norm >= out.term_norms[out.term_norms.size() - 2]) {
      ++growing;
    } else {
      growing = 0;
    }
    if (j >= max_terms) throw NumericError("series not converged");
    // Terms that keep growing cannot fall below tol within the remaining
    // budget at the contraction they will eventually reach.
    if (growing >= 8 && norm > 1e6) throw NumericError("series not converged");
  }
  return out;
}

MoellerMatrix moeller_matrix(const Background& bg, const PropagatorKernel& kernel) {
  const std::size_t n = bg.time_points();
  Eigen::VectorXd xw(n);
  for (std::size_t i = 0; i < n; ++i) xw(i) = bg.chi()[i] * bg.weights()[i];
  MoellerMatrix m{kernel.mode, kernel.m2, Eigen::MatrixXd::Identity(n, n)};
  if (kernel.m2 != 0.0) m.m -= kernel.m2 * (kernel.g * xw.asDiagonal());
  return m;
}

Series moeller_apply(const Background& bg, const PropagatorKernel& kernel, std::span<const double> psi) {
  const std::size_t n = bg.time_points();
  Series out(psi.begin(), psi.end());
  if (kernel.m2 == 0.0) return out;
  Eigen::VectorXd x(n);
  for (std::size_t i = 0; i < n; ++i) x(i) = bg.chi()[i] * bg.weights()[i] * psi[i];
  const Eigen::VectorXd gx = kernel.g * x;
  for (std::size_t i = 0; i < n; ++i) out[i] -= kernel.m2 * gx(i);
  return out;
}

Series moeller_apply(const Background& bg, std::size_t slot, double m2, std::span<const double> psi) {
  Series y(psi.size(), 0.0);
  if (m2 == 0.0) {
    std::copy(psi.begin(), psi.end(), y.begin());
    return y;
  }
  const double omega = bg.mode(slot).omega;
  const Phases ph = phases(bg, omega);
  resolvent_recursion(bg, ph, omega, m2, [&](std::size_t i) { return psi[i]; }, y);
  return y;
}

Series interacting_retarded_apply(const Background& bg, std::size_t slot, double m2, std::span<const double> x) {
  // y = G0 (x - m2 chi W y): carry the G0 x history alongside.
  const std::size_t n = bg.time_points();
  const double omega = bg.mode(slot).omega;
  const Phases ph = phases(bg, omega);
  const auto chi = bg.chi();
  const auto w = bg.weights();
  Series y(n, 0.0);
  double acc_c = 0.0, acc_s = 0.0;
  for (std::size_t i = 0; i < n; ++i) {
    y[i] = (ph.s[i] * acc_c - ph.c[i] * acc_s) / omega;
    const double z = x[i] - m2 * chi[i] * w[i] * y[i];
    acc_c += ph.c[i] * z;
    acc_s += ph.s[i] * z;
  }
  return y;
}

Series normal_ordered_diagonal_mode(const Background& bg, std::size_t slot, double m2) {
  // w_n = c_n (a a^T + b b^T) with a = cos(omega t), b = sin(omega t), so
  // M w M^T is rank two and its diagonal is c_n ((M a)^2 + (M b)^2).
  const Mode& mode = bg.mode(slot);
  const Phases ph = phases(bg, mode.omega);
  const Series ma = moeller_apply(bg, slot, m2, ph.c);
  const Series mb = moeller_apply(bg, slot, m2, ph.s);
  Series d(ma.size());
  for (std::size_t i = 0; i < d.size(); ++i) d[i] = mode.weight * (ma[i] * ma[i] + mb[i] * mb[i]);
  return d;
}

Series normal_ordered_diagonal(const Background& bg, double m2) {
  Series d(bg.time_points(), 0.0);
  for (std::size_t s = 0; s < bg.mode_count(); ++s) {
    const Series dn = normal_ordered_diagonal_mode(bg, s, m2);
    for (std::size_t i = 0; i < d.size(); ++i) d[i] += dn[i];
  }
  return d;
}

IntertwiningReport verify_intertwining(const Background& bg, const PropagatorKernel& kernel,
                                       double order_constant) {
  const std::size_t n = bg.time_points();
  const double dt = bg.dt();
  const double omega2 = [&] {
    for (const Mode& m : bg.modes()) {
      if (m.index == kernel.mode) return m.omega * m.omega;
    }
    throw ConfigError("kernel mode not in basis");
  }();
  const auto chi = bg.chi();
  IntertwiningReport r;
  r.mode = kernel.mode;
  r.m2 = kernel.m2;
  r.dt = dt;
  const Eigen::MatrixXd& g = kernel.g;
  for (std::size_t j = 0; j < n; ++j) {
    // Rows above j - 1 see only zeros.
    const std::size_t first = j == 0 ? 1 : j;
    for (std::size_t i = first; i + 1 < n; ++i) {
      const double pg = (g(i + 1, j) - 2.0 * g(i, j) + g(i - 1, j)) / (dt * dt) +
                        (omega2 + kernel.m2 * chi[i]) * g(i, j);
      if (i == j) {
        r.diagonal = std::max(r.diagonal, std::abs(dt * pg - 1.0));
      } else {
        r.off_diagonal = std::max(r.off_diagonal, std::abs(pg));
      }
    }
  }
  r.residual = std::max(r.diagonal, r.off_diagonal);
  r.scaled = r.residual / (dt * dt);
  r.passed = r.scaled < order_constant;
  return r;
}

void write_matrix_binary(const std::filesystem::path& path, const Eigen::MatrixXd& m) {
  static_assert(std::endian::native == std::endian::little, "binary cache assumes little-endian host");
  std::ofstream out(path, std::ios::binary);
  if (!out) throw NumericError("cannot write '" + path.string() + "'");
  const std::uint64_t rows = static_cast<std::uint64_t>(m.rows());
  const std::uint64_t cols = static_cast<std::uint64_t>(m.cols());
  out.write(reinterpret_cast<const char*>(&kMagic), sizeof kMagic);
  out.write(reinterpret_cast<const char*>(&kVersion), sizeof kVersion);
  out.write(reinterpret_cast<const char*>(&rows), sizeof rows);
  out.write(reinterpret_cast<const char*>(&cols), sizeof cols);
  const Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor> rm = m;
  out.write(reinterpret_cast<const char*>(rm.data()), static_cast<std::streamsize>(rows * cols * sizeof(double)));
}

Eigen::MatrixXd read_matrix_binary(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw NumericError("cannot read '" + path.string() + "'");
  std::uint32_t magic = 0, version = 0;
  std::uint64_t rows = 0, cols = 0;
  in.read(reinterpret_cast<char*>(&magic), sizeof magic);
  in.read(reinterpret_cast<char*>(&version), sizeof version);
  in.read(reinterpret_cast<char*>(&rows), sizeof rows);
  in.read(reinterpret_cast<char*>(&cols), sizeof cols);
  if (!in || magic != kMagic) throw NumericError("'" + path.string() + "' is not a csflow binary matrix");
  if (version != kVersion) throw NumericError("unsupported binary matrix version");
  Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor> rm(rows, cols);
  in.read(reinterpret_cast<char*>(rm.data()), static_cast<std::streamsize>(rows * cols * sizeof(double)));
  if (!in) throw NumericError("truncated binary matrix '" + path.string() + "'");
  return rm;
}

std::filesystem::path kernel_cache_path(const std::filesystem::path& dir, const std::string& config_hash,
                                        int mode, double m2) {
  char buf[128];
  std::snprintf(buf, sizeof buf, "kernel_%s_n%+d_m2%+.6e.bin", config_hash.c_str(), mode, m2);
  return dir / buf;
}

}  // namespace csflow
