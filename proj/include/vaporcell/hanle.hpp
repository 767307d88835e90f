#pragma once

// Zero-field (Hanle) resonance: closed-form line shapes, their joint fit, the
// linewidth/relaxation conversion and a fixed-step Bloch simulator of the
// single-beam magnetometer.

#include <array>
#include <functional>
#include <numbers>
#include <span>
#include <vector>

#include "vaporcell/fitkit.hpp"
#include "vaporcell/records.hpp"

namespace vaporcell::hanle {

/// Bare electron gyromagnetic ratio, 2 pi * 28.024 Hz/nT.
inline constexpr double kElectronGyromagnetic = 2.0 * std::numbers::pi * 28.024;  // rad s^-1 nT^-1

struct HanleParams {
  double a0 = 1.0;          // absorptive amplitude
  double a1 = 1.0;          // dispersive amplitude (signal * nT)
  double c0 = 0.0;          // absorptive offset
  double c1 = 0.0;          // dispersive offset
  double bx0_nt = 0.0;      // residual field
  double delta_b_nt = 10.0; // HWHM

  void validate() const;
};

/// A0 dB^2 / ((Bx - Bx0)^2 + dB^2) + C0
double in_phase(double bx_nt, const HanleParams& p);
/// A1 (Bx - Bx0) / ((Bx - Bx0)^2 + dB^2) + C1
double out_of_phase(double bx_nt, const HanleParams& p);

/// Rows: one per Bx; columns: {A0, C0, Bx0, dB}.
Eigen::MatrixXd in_phase_jacobian(std::span<const double> bx, const HanleParams& p);
/// Rows: one per Bx; columns: {A1, C1, Bx0, dB}.
Eigen::MatrixXd out_of_phase_jacobian(std::span<const double> bx, const HanleParams& p);

struct HanleFit {
  HanleParams params;
  fitkit::FitResult fit;  // order {A0, A1, C0, C1, Bx0, dB}, natural units
};

/// Joint NLLS over both components with shared {Bx0, dB}. Throws grid_mismatch
/// when the sweeps differ, zero_amplitude when the data carry no resonance and
/// NonConvergenceError when the solver runs out of iterations.
HanleFit fit_zero_field_resonance(const Spectrum& data_in, const Spectrum& data_quad,
                                  const HanleParams& initial,
                                  const fitkit::FitOptions& options = {});

/// Starting point read off the two sweeps: offsets from the sweep edges, Bx0 at
/// the in-phase extremum, dB from its half-maximum width, A1 from the
/// quadrature peak-to-peak.
HanleParams initial_guess(const Spectrum& data_in, const Spectrum& data_quad);

/// Single Lorentzian (in-phase only) fit, used on simulated steady-state sweeps.
HanleFit fit_in_phase(const Spectrum& data, const HanleParams& initial,
                      const fitkit::FitOptions& options = {});

/// Total relaxation rate gamma * dB / q. q is the nuclear slowing factor.
double relaxation_from_linewidth(double delta_b_nt, double gyromagnetic = kElectronGyromagnetic,
                                 double slowing_factor = 1.0);

// ---------------------------------------------------------------------------
// Bloch simulation
// ---------------------------------------------------------------------------

using Vec3 = std::array<double, 3>;
using FieldFn = std::function<Vec3(double t)>;

struct BlochConfig {
  double pumping_rate = 900.0;     // s^-1
  double relaxation_rate = 900.0;  // s^-1
  double gyromagnetic = kElectronGyromagnetic;
  FieldFn field = [](double) { return Vec3{0.0, 0.0, 0.0}; };  // nT
  double duration = 0.05;          // s
  double sample_rate = 200e3;      // Hz, output and integration rate
  double modulation_frequency = 0.0;  // Hz, 0 when the field is static
  double absorption_scale = 0.5;   // transmission proxy = 1 - scale * (1 - 2 Sz)
  Vec3 initial_spin{0.0, 0.0, 0.0};

  void validate() const;
};

struct BlochTrace {
  TimeSeries spin_z;
  TimeSeries transmission;
  Vec3 final_spin{};
  double max_spin_norm = 0.0;
};

/// Integrates dS/dt = gamma S x B + R_op (z/2 - S) - R_rel S with classic RK4 at
/// step 1/sample_rate. Throws step_size when the step exceeds 1/20 of the
/// modulation period or of the instantaneous Larmor period.
BlochTrace bloch_simulate(const BlochConfig& cfg);

/// Closed-form steady state of the Bloch equations for a static field.
Vec3 steady_state_spin(double pumping_rate, double relaxation_rate, double gyromagnetic,
                       const Vec3& field_nt);

/// Steady-state Sz reached by time integration under a static transverse Bx,
/// one simulation per field value. OpenMP-parallel over the sweep.
std::vector<double> steady_state_sweep(const BlochConfig& rates, std::span<const double> bx_nt);
std::vector<double> steady_state_sweep_serial(const BlochConfig& rates,
                                              std::span<const double> bx_nt);

/// Bx(t) = test_field + mod_amp sin(2 pi f t); other components zero.
BlochTrace modulated_response(BlochConfig cfg, double mod_freq_hz, double mod_amp_nt,
                              double test_field_nt);

/// Same, with an extra Bx noise record sampled at cfg.sample_rate and linearly
/// interpolated between samples. Must cover the whole duration.
BlochTrace modulated_response(BlochConfig cfg, double mod_freq_hz, double mod_amp_nt,
                              double test_field_nt, std::span<const double> bx_noise_nt);

}  // namespace vaporcell::hanle
