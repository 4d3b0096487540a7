#pragma once

#include <span>
#include <string>
#include <vector>

#include "csflow/config.hpp"

namespace csflow {

/// Shape of the temporal cutoff. `indicator` is a test hook that replaces the
/// smooth bump by the characteristic function of [t1, t2].
enum class CutoffShape { smooth, indicator };

/// Smooth temporal cutoff chi(t): zero outside [t1, t2], one on a centred
/// plateau of relative width `plateau`, with exp(-1/tau) transitions.
class Cutoff {
 public:
  Cutoff() = default;
  Cutoff(double t1, double t2, double plateau, CutoffShape shape = CutoffShape::smooth);

  double operator()(double t) const;

  double t1() const { return t1_; }
  double t2() const { return t2_; }
  double plateau_begin() const { return p1_; }
  double plateau_end() const { return p2_; }
  CutoffShape shape() const { return shape_; }

 private:
  double t1_ = 0.0, t2_ = 1.0, p1_ = 0.25, p2_ = 0.75;
  CutoffShape shape_ = CutoffShape::smooth;
};

/// C-infinity step s(tau) = e(tau) / (e(tau) + e(1 - tau)), e(tau) = exp(-1/tau).
double smooth_step(double tau);

struct Mode {
  int index;          // n, signed
  double wavenumber;  // 2 pi n / L
  double omega;       // sqrt(m0^2 + wavenumber^2)
  double weight;      // state-kernel weight c_n
};

struct BackgroundParams {
  double circumference = 6.283185307179586;
  double mass = 1.0;
  int modes = 16;
  bool include_zero_mode = true;

  double t_min = -1.0;
  double t_max = 5.0;
  int time_points = 512;

  double t1 = 0.0;
  double t2 = 4.0;
  double plateau = 0.5;
  CutoffShape cutoff_shape = CutoffShape::smooth;

  double k0 = 0.0;
  double epsilon = 1.0;

  double amplitude = 1.0;  // alpha
  double decay = 4.0;      // Lambda_w

  double m2_max = 0.5;  // admissible |m2| for kernels and tables
};

/// Resolved ultrastatic cylinder R x S^1: mode basis, time grid with
/// trapezoid weights, sampled cutoff and state-kernel weights. Immutable.
class Background {
 public:
  explicit Background(const BackgroundParams& params);

  const BackgroundParams& params() const { return params_; }
  /// Hash over every parameter that affects the numerics.
  std::string hash() const;
  double m2_max() const { return params_.m2_max; }
  double circumference() const { return params_.circumference; }
  double epsilon() const { return params_.epsilon; }

  const std::vector<Mode>& modes() const { return modes_; }
  std::size_t mode_count() const { return modes_.size(); }
  const Mode& mode(std::size_t slot) const { return modes_[slot]; }
  /// Slot of signed mode index n; throws if absent.
  std::size_t slot_of(int n) const;

  std::span<const double> times() const { return times_; }
  std::span<const double> weights() const { return weights_; }
  std::span<const double> chi() const { return chi_; }
  std::size_t time_points() const { return times_.size(); }
  double dt() const { return dt_; }

  const Cutoff& cutoff() const { return cutoff_; }

  /// Orthonormal real harmonic e_n(x) on the circle.
  double harmonic(int n, double x) const;

  /// w_n(t, t') = c_n cos(omega_n (t - t')).
  double state_kernel(std::size_t slot, double t, double tp) const;

  /// Trapezoid integral of chi over the time grid.
  double chi_integral() const { return chi_integral_; }

 private:
  BackgroundParams params_;
  Cutoff cutoff_;
  std::vector<Mode> modes_;
  std::vector<double> times_, weights_, chi_;
  double dt_ = 0.0;
  double chi_integral_ = 0.0;
};

BackgroundParams background_params(const Config& cfg);
Background build_background(const Config& cfg);

double cutoff_eval(const Background& bg, double t);
/// d q_k / dk = epsilon * chi(t).
double regulator_k_derivative(const Background& bg, double t);
/// ||f||_1 = L * int chi dt (trapezoid on the time grid).
double f_l1_norm(const Background& bg);

/// Trapezoid weights on a uniform grid of n points with spacing h.
std::vector<double> trapezoid_weights(std::size_t n, double h);

}  // namespace csflow
