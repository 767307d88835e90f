#pragma once

#include <cstddef>
#include <string>
#include <vector>

namespace vaporcell {

/// Uniform-or-not sampled (x, y) record. The x grid must be strictly increasing.
struct Spectrum {
  std::vector<double> x;
  std::vector<double> y;
  std::string x_unit;
  std::string y_unit;

  std::size_t size() const noexcept { return x.size(); }

  /// Throws invalid_argument unless len(x) == len(y) >= 2 and x is strictly increasing.
  void validate() const;
};

/// Uniformly sampled time record.
struct TimeSeries {
  std::vector<double> t;
  std::vector<double> y;
  std::string t_unit = "s";
  std::string y_unit;

  std::size_t size() const noexcept { return t.size(); }
  double sample_interval() const;
  double sample_rate() const { return 1.0 / sample_interval(); }

  /// Builds t = t0 + k / fs for the given samples.
  static TimeSeries uniform(std::vector<double> y, double fs, std::string y_unit,
                            double t0 = 0.0);

  /// Throws non_uniform_sampling if any spacing departs from the mean by more than
  /// rel_tol of the mean interval.
  void check_uniform(double rel_tol = 1e-6) const;
};

}  // namespace vaporcell
