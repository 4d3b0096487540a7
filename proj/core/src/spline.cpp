#include "csflow/spline.hpp"

#include <gsl/gsl_errno.h>
#include <gsl/gsl_spline.h>

#include <string>

#include "csflow/config.hpp"

namespace csflow {

struct CubicSpline::Impl {
  gsl_spline* spline = nullptr;
  ~Impl() { gsl_spline_free(spline); }
};

namespace {

void disable_gsl_abort() {
  static const bool once = [] {
    gsl_set_error_handler_off();
    return true;
  }();
  (void)once;
}

}  // namespace

CubicSpline::CubicSpline(std::span<const double> x, std::span<const double> y)
    : x_(x.begin(), x.end()), y_(y.begin(), y.end()) {
  disable_gsl_abort();
  if (x_.size() != y_.size()) throw NumericError("spline knots and values differ in length");
  if (x_.size() < 4) throw NumericError("need >= 4 points for cubic spline");
  for (std::size_t i = 1; i < x_.size(); ++i) {
    if (!(x_[i] > x_[i - 1])) throw NumericError("spline knots must be strictly increasing");
  }
  impl_ = std::make_unique<Impl>();
  impl_->spline = gsl_spline_alloc(gsl_interp_cspline, x_.size());
  if (gsl_spline_init(impl_->spline, x_.data(), y_.data(), x_.size()) != GSL_SUCCESS) {
    throw NumericError("spline construction failed");
  }
}

CubicSpline::CubicSpline() = default;
CubicSpline::~CubicSpline() = default;
CubicSpline::CubicSpline(CubicSpline&&) noexcept = default;
CubicSpline& CubicSpline::operator=(CubicSpline&&) noexcept = default;

CubicSpline::CubicSpline(const CubicSpline& other) {
  if (!other.x_.empty()) *this = CubicSpline(other.x_, other.y_);
}

CubicSpline& CubicSpline::operator=(const CubicSpline& other) {
  if (this != &other) {
    if (other.x_.empty()) {
      x_.clear();
      y_.clear();
      impl_.reset();
    } else {
      *this = CubicSpline(other.x_, other.y_);
    }
  }
  return *this;
}

void CubicSpline::check(double x) const {
  if (x_.empty()) throw RangeError("query on an empty spline");
  if (!contains(x)) {
    throw RangeError("spline query " + std::to_string(x) + " outside [" + std::to_string(lower()) + ", " +
                     std::to_string(upper()) + "]");
  }
}

// A null accelerator keeps evaluation re-entrant.
double CubicSpline::operator()(double x) const {
  check(x);
  return gsl_spline_eval(impl_->spline, x, nullptr);
}

double CubicSpline::derivative(double x) const {
  check(x);
  return gsl_spline_eval_deriv(impl_->spline, x, nullptr);
}

double CubicSpline::second_derivative(double x) const {
  check(x);
  return gsl_spline_eval_deriv2(impl_->spline, x, nullptr);
}

}  // namespace csflow
