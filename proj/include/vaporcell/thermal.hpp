#pragma once

// Integrated heater / temperature-sensor chip: first-order thermal plant under
// discrete PID control, residual field of the heater current and I-V resistance
// extraction.

#include <cstdint>
#include <span>
#include <utility>
#include <vector>

#include "vaporcell/config.hpp"
#include "vaporcell/fitkit.hpp"
#include "vaporcell/records.hpp"

namespace vaporcell::thermal {

struct ThermalPlant {
  double time_constant_s = 200.0;
  double gain_k_per_w = 350.0;
  double ambient_k = 298.15;
  double sensor_noise_std_k = 0.003;
  double heater_resistance_ohm = 505.0;
  double sensor_resistance_25c_ohm = 10.5e3;
  double sensor_tempco_ohm_per_k = 40.4;  // Pt, 3.85e-3 / K

  void validate() const;
  double sensor_resistance(double temperature_k) const;
};

struct PidGains {
  double kp = 0.05;     // W/K
  double ki = 1.2e-3;   // W/(K s)
  double kd = 0.0;      // W s/K
  double output_min_w = 0.0;
  double output_max_w = 0.7;
  double setpoint_k = 473.15;

  void validate() const;
  /// Reads thermal.pid.{kp,ki,kd,output_min_w,output_max_w,setpoint_k}.
  static PidGains from_config(const KeyValueConfig& cfg);
  static PidGains from_config(const KeyValueConfig& cfg, PidGains fallback);
};

struct ThermalRun {
  TimeSeries temperature;  // cell temperature, K
  TimeSeries measured;     // sensor reading including noise, K
  TimeSeries power;        // heater power, W
};

/// Exact zero-order-hold update of dT/dt = (gain P - (T - ambient)) / tau under a
/// PID loop acting on the noisy sensor reading. The integrator is frozen while
/// the output is clamped and pushing further into the limit. Throws
/// unstable_step when dt > tau / 50.
ThermalRun simulate_pid(const ThermalPlant& plant, const PidGains& gains, double duration_s,
                        double dt_s, std::uint64_t seed);

struct SettlingStats {
  double settling_time_s = -1.0;   // first time after which |T - setpoint| stays within band
  double peak_fluctuation_k = 0.0; // max |T - setpoint| over the steady window
  double mean_error_k = 0.0;       // mean (T - setpoint) over the steady window
};

/// Statistics of a run: settling within `band_k`, then fluctuation over the
/// samples at t >= steady_from_s.
SettlingStats settling_stats(const TimeSeries& temperature, double setpoint_k, double band_k,
                             double steady_from_s);

double residual_field(double current_ma, double coefficient_nt_per_ma);

struct ResidualFieldFit {
  double coefficient_nt_per_ma = 0.0;
  double stderr_nt_per_ma = 0.0;
  fitkit::FitResult fit;
};

/// Through-origin linear fit of B against I using the shared LM engine.
ResidualFieldFit fit_residual_field(std::span<const double> current_ma,
                                    std::span<const double> field_nt);

struct Resistance {
  double ohms = 0.0;
  double stderr_ohms = 0.0;
  double offset_v = 0.0;  // zero for through-origin fits
};

/// R from (V, I) pairs as the slope of V against I. Throws insufficient_data for
/// fewer than 3 points and degenerate_data when V or I carry no spread.
Resistance resistance_from_iv(std::span<const std::pair<double, double>> v_i,
                              bool through_origin = true);

}  // namespace vaporcell::thermal
