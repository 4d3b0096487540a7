#pragma once

#include <filesystem>
#include <functional>
#include <string>
#include <vector>

#include "csflow/background.hpp"
#include "csflow/spline.hpp"

namespace csflow {

/// Flow function, conductivity and second-derivative coefficient at one m2.
struct FlowPoint {
  double m2 = 0.0;
  double g = 0.0;      // flow function G(m2)
  double sigma = 0.0;  // dG/dm2
  double a2 = 0.0;     // d^2G/dm2^2
};

/// All three quantities share the Moeller-transformed state legs, so they
/// are computed together. Throws RangeError for |m2| > bg.m2_max().
FlowPoint flow_point(const Background& bg, double m2);

double flow_value(const Background& bg, double m2);
double sigma_value(const Background& bg, double m2);
double a2_value(const Background& bg, double m2);

struct TableSpec {
  double m2_max = 0.5;
  int points = 101;
  int threads = 1;
};

/// Tabulation of G, sigma, A2 on a uniform m2 grid with natural cubic splines.
class FlowTable {
 public:
  FlowTable() = default;
  FlowTable(std::vector<double> m2, std::vector<double> g, std::vector<double> sigma, std::vector<double> a2,
            std::string background_hash);

  const std::vector<double>& m2() const { return m2_; }
  const std::vector<double>& g() const { return g_; }
  const std::vector<double>& sigma() const { return sigma_; }
  const std::vector<double>& a2() const { return a2_; }
  const std::string& background_hash() const { return hash_; }
  std::size_t size() const { return m2_.size(); }
  double spacing() const { return m2_[1] - m2_[0]; }

  double lower() const { return m2_.front(); }
  double upper() const { return m2_.back(); }
  bool contains(double m2) const { return m2 >= lower() && m2 <= upper(); }

  double g_at(double m2) const { return g_spline_(m2); }
  double sigma_at(double m2) const { return sigma_spline_(m2); }
  double a2_at(double m2) const { return a2_spline_(m2); }
  double sigma_slope_at(double m2) const { return sigma_spline_.derivative(m2); }

 private:
  std::vector<double> m2_, g_, sigma_, a2_;
  std::string hash_;
  CubicSpline g_spline_, sigma_spline_, a2_spline_;
};

FlowTable tabulate(const Background& bg, const TableSpec& spec);

/// "m2,G,sigma,A2" with 17 significant digits.
void write_flow_table_csv(const std::filesystem::path& path, const FlowTable& table);

/// A table of a prescribed function of m2 (test hook, e.g. constant G).
/// sigma and A2 are filled from the supplied derivatives.
FlowTable tabulate_function(double m2_max, int points, const std::function<double(double)>& g,
                            const std::function<double(double)>& dg, const std::function<double(double)>& d2g);

struct DerivativeConsistency {
  double sigma_max_error = 0.0;  // max interior |sigma_i - centred 1st difference|
  double a2_max_error = 0.0;     // max interior |A2_i - centred 2nd difference|
  double spacing = 0.0;
};

DerivativeConsistency derivative_consistency(const FlowTable& table);

struct SigmaWindowReport {
  double c = 0.0;
  double eps_log = 0.0;
  double half_width = 0.0;
  double sigma_min = 0.0;
  double sigma_at_zero = 0.0;
  double log_slope_max = 0.0;  // max |sigma'/sigma| over the window
  bool positive = false;
  bool slope_ok = false;
  bool passed = false;
  std::string remedy;
};

/// Checks sigma >= c and |sigma'/sigma| < eps_log on [-half_width, half_width].
SigmaWindowReport check_sigma_window(const FlowTable& table, double c, double eps_log, double half_width);

}  // namespace csflow
