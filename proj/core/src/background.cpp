#include "csflow/background.hpp"

#include <cmath>
#include <cstdio>
#include <numbers>
#include <string>

namespace csflow {

double smooth_step(double tau) {
  if (tau <= 0.0) return 0.0;
  if (tau >= 1.0) return 1.0;
  const double a = std::exp(-1.0 / tau);
  const double b = std::exp(-1.0 / (1.0 - tau));
  return a / (a + b);
}

Cutoff::Cutoff(double t1, double t2, double plateau, CutoffShape shape)
    : t1_(t1), t2_(t2), shape_(shape) {
  if (!(t2 > t1)) throw ConfigError("cutoff requires t1 < t2");
  if (!(plateau > 0.0 && plateau < 1.0)) throw ConfigError("cutoff plateau fraction must lie in (0,1)");
  const double centre = 0.5 * (t1 + t2);
  const double half = 0.5 * plateau * (t2 - t1);
  p1_ = centre - half;
  p2_ = centre + half;
}

double Cutoff::operator()(double t) const {
  if (shape_ == CutoffShape::indicator) {
    // Half value at the jumps: the trapezoid sum of a grid-aligned window is
    // then exactly t2 - t1.
    const double tol = 1e-9 * (t2_ - t1_);
    if (std::abs(t - t1_) <= tol || std::abs(t - t2_) <= tol) return 0.5;
    return (t > t1_ && t < t2_) ? 1.0 : 0.0;
  }
  if (t <= t1_ || t >= t2_) return 0.0;
  if (t < p1_) return smooth_step((t - t1_) / (p1_ - t1_));
  if (t > p2_) return smooth_step((t2_ - t) / (t2_ - p2_));
  return 1.0;
}

std::vector<double> trapezoid_weights(std::size_t n, double h) {
  std::vector<double> w(n, h);
  if (n > 0) {
    w.front() = 0.5 * h;
    w.back() = 0.5 * h;
  }
  return w;
}

Background::Background(const BackgroundParams& p) : params_(p) {
  if (!(p.circumference > 0.0)) throw ConfigError("circumference must be positive");
  if (p.mass < 0.0) throw ConfigError("free mass must be non-negative");
  if (p.modes < 0) throw ConfigError("mode count must be non-negative");
  if (p.mass == 0.0 && p.include_zero_mode) {
    throw ConfigError("zero mode has vanishing frequency when the free mass is 0");
  }
  if (!(p.epsilon > 0.0)) throw ConfigError("regulator slope must be positive");
  if (p.k0 < 0.0) throw ConfigError("regulator offset k0 must be non-negative");
  if (!(p.decay > 0.0)) throw ConfigError("state-kernel decay scale must be positive");
  if (p.time_points < 8) throw ConfigError("need at least 8 time points");
  if (!(p.t_max > p.t_min)) throw ConfigError("time grid requires t_min < t_max");

  cutoff_ = Cutoff(p.t1, p.t2, p.plateau, p.cutoff_shape);

  dt_ = (p.t_max - p.t_min) / static_cast<double>(p.time_points - 1);
  if (p.t1 - p.t_min < 2.0 * dt_ || p.t_max - p.t2 < 2.0 * dt_) {
    throw ConfigError("cutoff support [t1,t2] must lie inside the time grid with a margin of 2 cells");
  }

  const double two_pi_over_l = 2.0 * std::numbers::pi / p.circumference;
  auto push = [&](int n) {
    const double kn = two_pi_over_l * n;
    const double omega = std::sqrt(p.mass * p.mass + kn * kn);
    const double c = p.amplitude * std::exp(-omega / p.decay) / (2.0 * omega);
    modes_.push_back({n, kn, omega, c});
  };
  // Ordered by |n|, negative before positive, so frequencies are nondecreasing.
  if (p.include_zero_mode) push(0);
  for (int n = 1; n <= p.modes; ++n) {
    push(-n);
    push(n);
  }

  times_.resize(static_cast<std::size_t>(p.time_points));
  for (std::size_t i = 0; i < times_.size(); ++i) times_[i] = p.t_min + dt_ * static_cast<double>(i);
  times_.back() = p.t_max;
  weights_ = trapezoid_weights(times_.size(), dt_);
  chi_.resize(times_.size());
  for (std::size_t i = 0; i < times_.size(); ++i) {
    chi_[i] = cutoff_(times_[i]);
    chi_integral_ += weights_[i] * chi_[i];
  }
}

std::size_t Background::slot_of(int n) const {
  for (std::size_t s = 0; s < modes_.size(); ++s) {
    if (modes_[s].index == n) return s;
  }
  throw ConfigError("mode " + std::to_string(n) + " is not in the basis");
}

double Background::harmonic(int n, double x) const {
  const double l = params_.circumference;
  if (n == 0) return 1.0 / std::sqrt(l);
  const double arg = 2.0 * std::numbers::pi * std::abs(n) * x / l;
  const double norm = std::sqrt(2.0 / l);
  return n > 0 ? norm * std::cos(arg) : norm * std::sin(arg);
}

double Background::state_kernel(std::size_t slot, double t, double tp) const {
  const Mode& m = modes_[slot];
  return m.weight * std::cos(m.omega * (t - tp));
}

std::string Background::hash() const {
  const BackgroundParams& p = params_;
  char buf[512];
  std::snprintf(buf, sizeof buf,
                "L=%.17g m0=%.17g N=%d z=%d tmin=%.17g tmax=%.17g nt=%d t1=%.17g t2=%.17g rho=%.17g shape=%d "
                "k0=%.17g eps=%.17g alpha=%.17g decay=%.17g m2max=%.17g",
                p.circumference, p.mass, p.modes, p.include_zero_mode ? 1 : 0, p.t_min, p.t_max, p.time_points,
                p.t1, p.t2, p.plateau, static_cast<int>(p.cutoff_shape), p.k0, p.epsilon, p.amplitude, p.decay,
                p.m2_max);
  return hex64(fnv1a64(buf));
}

BackgroundParams background_params(const Config& cfg) {
  BackgroundParams p;
  p.circumference = cfg.get_double("spacetime.circumference");
  p.mass = cfg.get_double("spacetime.mass");
  p.modes = static_cast<int>(cfg.get_int("spacetime.modes"));
  p.include_zero_mode = cfg.get_int("spacetime.zero_mode", 1) != 0;

  p.t_min = cfg.get_double("grid.t_min");
  p.t_max = cfg.get_double("grid.t_max");
  p.time_points = static_cast<int>(cfg.get_int("grid.time_points"));

  p.t1 = cfg.get_double("cutoff.t1");
  p.t2 = cfg.get_double("cutoff.t2");
  p.plateau = cfg.get_double("cutoff.plateau");
  const std::string shape = cfg.get_string("cutoff.shape", "smooth");
  if (shape == "smooth") {
    p.cutoff_shape = CutoffShape::smooth;
  } else if (shape == "indicator") {
    p.cutoff_shape = CutoffShape::indicator;
  } else {
    throw ConfigError("cutoff.shape must be 'smooth' or 'indicator'");
  }

  p.k0 = cfg.get_double("regulator.k0", 0.0);
  p.epsilon = cfg.get_double("regulator.epsilon");

  p.amplitude = cfg.get_double("state.amplitude");
  p.decay = cfg.get_double("state.decay");
  p.m2_max = cfg.get_double("grid.m2_max", p.m2_max);
  if (!(p.m2_max > 0.0)) throw ConfigError("grid.m2_max must be positive");
  return p;
}

Background build_background(const Config& cfg) { return Background(background_params(cfg)); }

double cutoff_eval(const Background& bg, double t) { return bg.cutoff()(t); }

double regulator_k_derivative(const Background& bg, double t) { return bg.epsilon() * bg.cutoff()(t); }

double f_l1_norm(const Background& bg) { return bg.circumference() * bg.chi_integral(); }

}  // namespace csflow
