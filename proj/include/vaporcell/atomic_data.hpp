#pragma once

// Rubidium D1 constants and buffer-gas collision coefficients.

#include <map>
#include <string>
#include <vector>

#include "vaporcell/config.hpp"

namespace vaporcell::atomic {

struct IsotopeSpec {
  std::string name;
  double abundance = 0.0;                       // fraction
  double gyromagnetic_ratio_khz_per_ut = 0.0;   // ground-state |g_F| mu_B / h, upper F
  double ground_hyperfine_splitting_ghz = 0.0;
  double excited_d1_hyperfine_splitting_ghz = 0.0;
  std::vector<int> ground_f_levels;
  std::vector<int> excited_f_levels;
  double nuclear_spin = 0.0;
  double mass_u = 0.0;                 // atomic mass units
  double d1_centroid_shift_ghz = 0.0;  // centroid relative to the Rb85 D1 centroid
};

struct BufferGasCoefficients {
  std::string gas;
  double broadening_ghz_per_amg = 0.0;  // FWHM growth
  double shift_ghz_per_amg = 0.0;
};

struct TransitionLine {
  int ground_f = 0;
  int excited_f = 0;
  double center_offset_ghz = 0.0;  // relative to the isotope's own D1 centroid
  double relative_strength = 0.0;
};

/// D1 vacuum frequency of Rb85, used as the optical carrier for Doppler widths.
inline constexpr double kD1FrequencyHz = 377.107385690e12;

/// Immutable registry. Default values follow the standard alkali D-line tables;
/// each can be overridden through a key-value config, e.g.
///
///   isotope.Rb87.gyromagnetic_ratio_khz_per_ut = 6.9958
///   buffer_gas.N2.broadening_ghz_per_amg = 17.8
class AtomicData {
 public:
  static const AtomicData& defaults();

  /// Applies overrides from `cfg`. Throws invalid_argument if the result
  /// violates a registry invariant (abundances sum, positive constants).
  static AtomicData with_overrides(const KeyValueConfig& cfg);

  const IsotopeSpec& isotope(const std::string& name) const;
  const BufferGasCoefficients& buffer_gas(const std::string& gas) const;

  std::vector<std::string> isotope_names() const;

 private:
  AtomicData() = default;
  void validate() const;

  std::map<std::string, IsotopeSpec> isotopes_;
  std::map<std::string, BufferGasCoefficients> gases_;
};

/// Lookup in the default registry; throws unknown_isotope.
const IsotopeSpec& get_isotope(const std::string& name);

/// Allowed D1 hyperfine lines (|dF| <= 1, no 0 -> 0) with centroid-relative
/// offsets and strengths normalized so that they sum to one over the isotope.
std::vector<TransitionLine> d1_transition_lines(const IsotopeSpec& isotope);

/// Energy of hyperfine level F of a J = 1/2 manifold relative to its centroid.
double hyperfine_level_offset_ghz(double splitting_ghz, double nuclear_spin, int f);

/// Relative line strength S_{F,F'} for a J = 1/2 -> J' = 1/2 transition,
/// computed from the Wigner 6-j symbol. Rows sum to one over F'.
double d1_line_strength_factor(double nuclear_spin, int ground_f, int excited_f);

/// Wigner 6-j symbol via the Racah formula. Arguments are doubled
/// (2j) so half-integers stay exact.
double wigner_6j(int two_j1, int two_j2, int two_j3, int two_j4, int two_j5, int two_j6);

}  // namespace vaporcell::atomic
