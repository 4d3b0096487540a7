#pragma once

#include <memory>
#include <span>
#include <vector>

namespace csflow {

/// Natural cubic spline on strictly increasing knots. Queries outside
/// [front, back] throw RangeError rather than extrapolate. Evaluation is
/// const and safe to call concurrently.
class CubicSpline {
 public:
  CubicSpline();
  CubicSpline(std::span<const double> x, std::span<const double> y);
  ~CubicSpline();
  CubicSpline(const CubicSpline& other);
  CubicSpline& operator=(const CubicSpline& other);
  CubicSpline(CubicSpline&&) noexcept;
  CubicSpline& operator=(CubicSpline&&) noexcept;

  double operator()(double x) const;
  double derivative(double x) const;
  double second_derivative(double x) const;

  double lower() const { return x_.front(); }
  double upper() const { return x_.back(); }
  bool contains(double x) const { return !x_.empty() && x >= x_.front() && x <= x_.back(); }

 private:
  struct Impl;
  void check(double x) const;

  std::vector<double> x_, y_;
  std::unique_ptr<Impl> impl_;
};

}  // namespace csflow
