#include "vaporcell/records.hpp"

#include <cmath>
#include <utility>

#include "vaporcell/errors.hpp"

namespace vaporcell {

void Spectrum::validate() const {
  require(x.size() == y.size(), "spectrum: x and y lengths differ");
  require(x.size() >= 2, "spectrum: need at least two samples");
  for (std::size_t i = 1; i < x.size(); ++i) {
    require(x[i] > x[i - 1], "spectrum: x grid must be strictly increasing");
  }
}

double TimeSeries::sample_interval() const {
  require(t.size() >= 2, "time series: need at least two samples");
  return (t.back() - t.front()) / static_cast<double>(t.size() - 1);
}

TimeSeries TimeSeries::uniform(std::vector<double> y, double fs, std::string y_unit, double t0) {
  require(fs > 0.0, "time series: sample rate must be positive");
  TimeSeries ts;
  ts.t.resize(y.size());
  for (std::size_t k = 0; k < y.size(); ++k) ts.t[k] = t0 + static_cast<double>(k) / fs;
  ts.y = std::move(y);
  ts.y_unit = std::move(y_unit);
  return ts;
}

void TimeSeries::check_uniform(double rel_tol) const {
  require(t.size() == y.size(), "time series: t and y lengths differ");
  const double dt = sample_interval();
  if (!(dt > 0.0)) fail(ErrorCode::non_uniform_sampling, "time series: time must increase");
  for (std::size_t k = 1; k < t.size(); ++k) {
    if (std::abs((t[k] - t[k - 1]) - dt) > rel_tol * dt) {
      fail(ErrorCode::non_uniform_sampling,
           "time series: sample spacing is not uniform at index " + std::to_string(k));
    }
  }
}

}  // namespace vaporcell
