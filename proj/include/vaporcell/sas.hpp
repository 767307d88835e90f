#pragma once

// Doppler-free saturated absorption on the Rb D1 line: feature positions and a
// synthetic double-pass transmission spectrum for a vacuum (buffer-gas-free) cell.

#include <optional>
#include <span>
#include <string>
#include <vector>

#include "vaporcell/atomic_data.hpp"
#include "vaporcell/records.hpp"

namespace vaporcell::sas {

enum class FeatureKind { dip, crossover };

struct SasFeature {
  double frequency_ghz = 0.0;  // relative to the isotope's own D1 centroid
  FeatureKind kind = FeatureKind::dip;
  std::string label;
  int ground_f = 0;
};

struct WeightedIsotope {
  atomic::IsotopeSpec isotope;
  double weight = 1.0;
};

struct SasConfig {
  std::vector<WeightedIsotope> isotopes;
  double temperature_k = 295.0;
  double lamb_dip_width_mhz = 20.0;  // FWHM of each Doppler-free feature
  double lamb_dip_depth = 0.3;       // fraction of the local Doppler absorption removed
  double peak_optical_depth = 0.8;   // Doppler absorption scale
  double grid_start_ghz = -5.0;      // absolute axis: Rb85 D1 centroid at 0
  double grid_stop_ghz = 6.0;
  double grid_step_ghz = 0.002;
  std::optional<int> only_ground_f;  // restrict to one ground level (all isotopes)

  /// Natural rubidium at room temperature.
  static SasConfig natural_rubidium();
  void validate() const;
};

/// Gaussian FWHM of the Doppler profile at the D1 frequency.
double doppler_fwhm_ghz(double temperature_k, double mass_u);

/// One dip per allowed transition and one crossover at the mean of each pair of
/// distinct transitions sharing a ground level. Frequencies are relative to the
/// isotope's own centroid.
std::vector<SasFeature> sas_feature_frequencies(const atomic::IsotopeSpec& isotope);

/// Features of every configured isotope on the absolute axis, filtered by
/// only_ground_f.
std::vector<SasFeature> configured_features(const SasConfig& cfg);

/// Transmission (P/P_in) over the configured grid. OpenMP-parallel over the grid.
/// Throws grid_too_coarse when the step exceeds a quarter of the feature width.
Spectrum sas_spectrum(const SasConfig& cfg);
Spectrum sas_spectrum_serial(const SasConfig& cfg);

/// Sharp local maxima: interior samples that exceed both neighbours and rise at
/// least `min_prominence` above the samples `half_window` steps away on each side.
std::vector<double> find_sharp_peaks(const Spectrum& s, int half_window, double min_prominence);

}  // namespace vaporcell::sas
