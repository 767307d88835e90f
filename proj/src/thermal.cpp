#include "vaporcell/thermal.hpp"

#include <algorithm>
#include <cmath>
#include <random>

#include "vaporcell/errors.hpp"

namespace vaporcell::thermal {

void ThermalPlant::validate() const {
  require(time_constant_s > 0.0 && gain_k_per_w > 0.0, "thermal plant: time constant and gain must be positive");
  require(heater_resistance_ohm > 0.0 && sensor_resistance_25c_ohm > 0.0,
          "thermal plant: resistances must be positive");
  require(sensor_noise_std_k >= 0.0, "thermal plant: sensor noise must be non-negative");
  require(ambient_k > 0.0, "thermal plant: ambient must be positive");
}

double ThermalPlant::sensor_resistance(double temperature_k) const {
  return sensor_resistance_25c_ohm + sensor_tempco_ohm_per_k * (temperature_k - 298.15);
}

void PidGains::validate() const {
  require(kp >= 0.0 && ki >= 0.0 && kd >= 0.0, "pid: gains must be non-negative");
  require(output_min_w <= output_max_w, "pid: output limits out of order");
  require(setpoint_k > 0.0, "pid: setpoint must be positive");
}

PidGains PidGains::from_config(const KeyValueConfig& cfg) { return from_config(cfg, PidGains{}); }

PidGains PidGains::from_config(const KeyValueConfig& cfg, PidGains g) {
  g.kp = cfg.get_double("thermal.pid.kp", g.kp);
  g.ki = cfg.get_double("thermal.pid.ki", g.ki);
  g.kd = cfg.get_double("thermal.pid.kd", g.kd);
  g.output_min_w = cfg.get_double("thermal.pid.output_min_w", g.output_min_w);
  g.output_max_w = cfg.get_double("thermal.pid.output_max_w", g.output_max_w);
  g.setpoint_k = cfg.get_double("thermal.pid.setpoint_k", g.setpoint_k);
  g.validate();
  return g;
}

ThermalRun simulate_pid(const ThermalPlant& plant, const PidGains& gains, double duration_s, double dt_s,
                        std::uint64_t seed) {
  plant.validate();
  gains.validate();
  require(duration_s > 0.0 && dt_s > 0.0, "simulate_pid: duration and step must be positive");
  if (dt_s > plant.time_constant_s / 50.0) fail(ErrorCode::unstable_step, "simulate_pid: dt exceeds tau / 50");

  const auto n = static_cast<std::size_t>(std::llround(duration_s / dt_s)) + 1;
  const double decay = std::exp(-dt_s / plant.time_constant_s);
  std::mt19937_64 rng(seed);
  std::normal_distribution<double> noise(0.0, 1.0);

  std::vector<double> temp(n), meas(n), power(n);
  double t_cell = plant.ambient_k;
  double integral = 0.0;
  double prev_meas = t_cell;
  for (std::size_t k = 0; k < n; ++k) {
    const double m = t_cell + plant.sensor_noise_std_k * noise(rng);
    const double e = gains.setpoint_k - m;
    // Derivative on measurement avoids a setpoint kick.
    const double d = k == 0 ? 0.0 : -(m - prev_meas) / dt_s;
    const double trial = gains.kp * e + gains.ki * (integral + e * dt_s) + gains.kd * d;
    const double u = std::clamp(trial, gains.output_min_w, gains.output_max_w);
    const bool pushing_high = trial > gains.output_max_w && e > 0.0;
    const bool pushing_low = trial < gains.output_min_w && e < 0.0;
    if (!pushing_high && !pushing_low) integral += e * dt_s;

    temp[k] = t_cell;
    meas[k] = m;
    power[k] = u;
    prev_meas = m;

    const double target = plant.ambient_k + plant.gain_k_per_w * u;
    t_cell = target + (t_cell - target) * decay;
  }

  const double fs = 1.0 / dt_s;
  ThermalRun run;
  run.temperature = TimeSeries::uniform(std::move(temp), fs, "K");
  run.measured = TimeSeries::uniform(std::move(meas), fs, "K");
  run.power = TimeSeries::uniform(std::move(power), fs, "W");
  return run;
}

SettlingStats settling_stats(const TimeSeries& temperature, double setpoint_k, double band_k, double steady_from_s) {
  require(temperature.size() > 0 && temperature.t.size() == temperature.y.size(), "settling_stats: empty series");
  require(band_k > 0.0, "settling_stats: band must be positive");
  SettlingStats s;
  std::size_t last_outside = temperature.size();
  for (std::size_t k = temperature.size(); k-- > 0;) {
    if (std::abs(temperature.y[k] - setpoint_k) > band_k) {
      last_outside = k;
      break;
    }
  }
  if (last_outside == temperature.size()) {
    s.settling_time_s = temperature.t.front();
  } else if (last_outside + 1 < temperature.size()) {
    s.settling_time_s = temperature.t[last_outside + 1];
  }
  double sum = 0.0;
  std::size_t count = 0;
  for (std::size_t k = 0; k < temperature.size(); ++k) {
    if (temperature.t[k] < steady_from_s) continue;
    const double e = temperature.y[k] - setpoint_k;
    s.peak_fluctuation_k = std::max(s.peak_fluctuation_k, std::abs(e));
    sum += e;
    ++count;
  }
  require(count > 0, "settling_stats: no samples in the steady window");
  s.mean_error_k = sum / static_cast<double>(count);
  return s;
}

double residual_field(double current_ma, double coefficient_nt_per_ma) {
  return coefficient_nt_per_ma * current_ma;
}

ResidualFieldFit fit_residual_field(std::span<const double> current_ma, std::span<const double> field_nt) {
  require(current_ma.size() == field_nt.size(), "fit_residual_field: lengths differ");
  if (current_ma.size() < 2) fail(ErrorCode::insufficient_data, "fit_residual_field: need at least 2 points");

  fitkit::ModelFn model = [](const Eigen::VectorXd& p, std::span<const double> x) {
    Eigen::VectorXd f(static_cast<Eigen::Index>(x.size()));
    for (std::size_t i = 0; i < x.size(); ++i) f(static_cast<Eigen::Index>(i)) = residual_field(x[i], p(0));
    return f;
  };
  fitkit::JacobianFn jac = [](const Eigen::VectorXd&, std::span<const double> x) {
    Eigen::MatrixXd j(static_cast<Eigen::Index>(x.size()), 1);
    for (std::size_t i = 0; i < x.size(); ++i) j(static_cast<Eigen::Index>(i), 0) = x[i];
    return j;
  };
  Eigen::VectorXd p0(1);
  p0(0) = 0.0;
  ResidualFieldFit out;
  out.fit = fitkit::least_squares(model, jac, current_ma, field_nt, {}, p0, {});
  if (!out.fit.converged) throw NonConvergenceError("fit_residual_field: no convergence", out.fit.ssr_trace);
  out.coefficient_nt_per_ma = out.fit.params(0);
  out.stderr_nt_per_ma = std::sqrt(out.fit.covariance(0, 0));
  return out;
}

Resistance resistance_from_iv(std::span<const std::pair<double, double>> v_i, bool through_origin) {
  if (v_i.size() < 3) fail(ErrorCode::insufficient_data, "resistance_from_iv: need at least 3 points");
  std::vector<double> v, i;
  for (const auto& [volt, amp] : v_i) {
    v.push_back(volt);
    i.push_back(amp);
  }
  const auto [vmin, vmax] = std::minmax_element(v.begin(), v.end());
  const auto [imin, imax] = std::minmax_element(i.begin(), i.end());
  if (*vmin == *vmax || *imin == *imax) fail(ErrorCode::degenerate_data, "resistance_from_iv: V or I has no spread");
  const auto line = fitkit::fit_line(i, v, through_origin);
  return {line.slope, line.slope_stderr, line.intercept};
}

}  // namespace vaporcell::thermal
