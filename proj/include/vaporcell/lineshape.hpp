#pragma once

// Pressure-broadened optical depth of the Rb D1 line and its inverse fit.

#include <map>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include "vaporcell/atomic_data.hpp"
#include "vaporcell/fitkit.hpp"
#include "vaporcell/records.hpp"

namespace vaporcell::lineshape {

inline constexpr double kClassicalElectronRadius = 2.8179403262e-15;  // m
inline constexpr double kSpeedOfLight = 299792458.0;                  // m/s
inline constexpr double kRbD1OscillatorStrength = 0.34231;
inline constexpr double kDefaultPathLengthMm = 4.0;
inline constexpr double kWaferThicknessMm = 5.0;

struct AbsorptionParams {
  double atomic_density = 1e18;       // m^-3
  double linewidth_ghz = 16.38;       // Lorentzian FWHM
  double center_shift_ghz = 0.0;
  double path_length_mm = kDefaultPathLengthMm;
  double oscillator_strength = kRbD1OscillatorStrength;
  std::map<std::string, double> isotope_weights{{"Rb85", 0.7215}, {"Rb87", 0.2785}};
  double doppler_fwhm_ghz = 0.0;      // > 0 switches to a Voigt profile

  void validate() const;
};

/// n r_e c f l, the prefactor converting the line-shape sum (in 1/Hz) into OD.
double od_prefactor(const AbsorptionParams& p);

/// Transition lines of every weighted isotope, with strengths scaled by the
/// isotope weight and offsets shifted by the isotope's centroid.
std::vector<atomic::TransitionLine> weighted_lines(
    const AbsorptionParams& p, const atomic::AtomicData& data = atomic::AtomicData::defaults());

/// Lorentzian term (G/2) / (d^2 + (G/2)^2), peak 2/G, area pi.
double lorentz_term(double detuning, double fwhm);

/// Voigt counterpart with the same area (pi) and Lorentzian limit.
double voigt_term(double detuning, double lorentz_fwhm, double gauss_fwhm);

/// Real part of the Faddeeva function w(x + iy), y >= 0 (Humlicek W4, ~1e-4 rel).
double faddeeva_re(double x, double y);

double optical_depth(double nu_ghz, const AbsorptionParams& p,
                     std::span<const atomic::TransitionLine> lines);

/// OD over a frequency grid. OpenMP-parallel; see optical_depth_serial.
std::vector<double> optical_depth(std::span<const double> nu_ghz, const AbsorptionParams& p,
                                  std::span<const atomic::TransitionLine> lines);
std::vector<double> optical_depth_serial(std::span<const double> nu_ghz,
                                         const AbsorptionParams& p,
                                         std::span<const atomic::TransitionLine> lines);

double transmission(double nu_ghz, const AbsorptionParams& p,
                    std::span<const atomic::TransitionLine> lines, double p_in_w);

/// d OD / d{n, Gamma, nu0} in natural units, Lorentzian mode only.
Eigen::MatrixXd optical_depth_jacobian(std::span<const double> nu_ghz,
                                       const AbsorptionParams& p,
                                       std::span<const atomic::TransitionLine> lines);

/// OD spectrum on [center - half_span, center + half_span] with `points` samples.
Spectrum synthesize(const AbsorptionParams& p, std::span<const atomic::TransitionLine> lines,
                    double half_span_ghz, int points);

struct AbsorptionFitOptions {
  fitkit::FitOptions solver{};
  /// Fit log(n) and log(Gamma) instead of n and Gamma.
  bool log_parameterization = true;
  /// Minimum grid span accepted, in GHz.
  double resolution_ghz = 0.0;
};

struct AbsorptionFit {
  AbsorptionParams params;  // fitted n, Gamma, nu0; everything else copied from the initial guess
  fitkit::FitResult fit;    // params/covariance in natural units {n, Gamma, nu0}
};

/// NLLS over {n, Gamma, nu0}. Throws NonConvergenceError (with SSR trace) when the
/// solver hits max_iter, degenerate_grid when the span is below resolution_ghz,
/// and insufficient_data for fewer than 10 points.
AbsorptionFit fit_absorption(const Spectrum& data, const AbsorptionParams& initial,
                             std::span<const atomic::TransitionLine> lines,
                             const AbsorptionFitOptions& options = {});

/// Starting point for fit_absorption read off the data: nu0 at the OD maximum,
/// Gamma from the half-maximum width and n from the peak height. Other fields
/// are copied from `base`.
AbsorptionParams initial_guess(const Spectrum& data, const AbsorptionParams& base);

/// Buffer-gas density in amagat from the pressure-broadened FWHM.
double buffer_density_from_linewidth(double linewidth_ghz,
                                     const atomic::BufferGasCoefficients& coeffs);

struct DriftReport {
  double slope_ghz_per_day = 0.0;
  double intercept_ghz = 0.0;
  double mean_linewidth_ghz = 0.0;
  double max_deviation_ghz = 0.0;  // largest |Gamma_i - mean|
  double trend_drift_ghz = 0.0;    // |slope| * (last day - first day)
  double threshold_ghz = 0.0;
  bool pass = false;
};

/// Linear trend of linewidth over time. Passes when the fitted drift over the
/// series stays within `max_drift_fraction` of the mean linewidth.
DriftReport linewidth_drift_report(std::span<const std::pair<double, double>> day_linewidth,
                                   double max_drift_fraction = 0.02);

}  // namespace vaporcell::lineshape
