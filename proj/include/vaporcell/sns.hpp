#pragma once

// Spin-noise spectra: Larmor-peaked Lorentzians per isotope, their stochastic
// time-domain counterpart and a multi-peak fit.

#include <cstdint>
#include <span>
#include <string>
#include <vector>

#include "vaporcell/atomic_data.hpp"
#include "vaporcell/fitkit.hpp"
#include "vaporcell/records.hpp"

namespace vaporcell::sns {

struct SnsPeak {
  std::string isotope;
  double larmor_khz = 0.0;
  double hwhm_khz = 1.0;
  double area = 1.0;  // integral of the one-sided peak, y^2
};

struct SnsModel {
  std::vector<SnsPeak> peaks;
  double background = 0.0;  // y^2 per kHz

  void validate() const;
};

double larmor_frequency_khz(const atomic::IsotopeSpec& isotope, double field_ut);

/// Natural-abundance model at `field_ut`: one peak per isotope, areas
/// proportional to abundance, equal widths.
SnsModel natural_rubidium_model(double field_ut, double hwhm_khz = 1.0, double total_area = 1.0,
                                double background = 0.0);

double sns_psd_value(double f_khz, const SnsModel& model);

/// PSD in y^2/kHz over `f_khz`. OpenMP-parallel; see sns_psd_serial.
Spectrum sns_psd(std::span<const double> f_khz, const SnsModel& model);
Spectrum sns_psd_serial(std::span<const double> f_khz, const SnsModel& model);

/// Columns per peak {nu, hwhm, area}, then background; natural units.
Eigen::MatrixXd sns_psd_jacobian(std::span<const double> f_khz, const SnsModel& model);

struct NoiseSource {
  double larmor_hz = 0.0;
  double correlation_time_s = 1e-4;  // hwhm = 1 / (2 pi tau)
  double rms = 1.0;                  // standard deviation of this contribution
};

/// Faraday-rotation noise: the real part of a sum of complex Ornstein-Uhlenbeck
/// processes, each rotating at its Larmor frequency and decaying at 1/tau, updated
/// with the exact discrete propagator. Throws undersampling unless fs exceeds four
/// times the largest Larmor frequency.
TimeSeries simulate_spin_noise(double duration_s, double fs_hz,
                               std::span<const NoiseSource> sources, std::uint64_t seed);

/// Sources for natural rubidium at `field_ut` with variance split by abundance.
std::vector<NoiseSource> natural_rubidium_sources(double field_ut, double correlation_time_s,
                                                  double total_rms);

struct SnsFit {
  SnsModel model;
  fitkit::FitResult fit;  // natural units, columns as in sns_psd_jacobian
  bool unresolved_peaks = false;  // some pair closer than the sum of their hwhm
};

/// NLLS over every peak and the background. The PSD's x axis must be kHz and
/// its y axis y^2/kHz.
SnsFit fit_sns(const Spectrum& psd, const SnsModel& initial,
               const fitkit::FitOptions& options = {});

}  // namespace vaporcell::sns
