#include "vaporcell/atomic_data.hpp"

#include <algorithm>
#include <cmath>
#include <cstdlib>

#include "vaporcell/errors.hpp"

namespace vaporcell::atomic {
namespace {

double factorial(int n) {
  require(n >= 0, "factorial of a negative number");
  return std::tgamma(static_cast<double>(n) + 1.0);
}

// Triangle coefficient for doubled arguments; zero when the triad is not allowed.
double triangle(int ta, int tb, int tc) {
  if (ta + tb < tc || ta + tc < tb || tb + tc < ta) return 0.0;
  if ((ta + tb + tc) % 2 != 0) return 0.0;
  return std::sqrt(factorial((ta + tb - tc) / 2) * factorial((ta - tb + tc) / 2) *
                   factorial((-ta + tb + tc) / 2) / factorial((ta + tb + tc) / 2 + 1));
}

AtomicData make_defaults() {
  return AtomicData::with_overrides(KeyValueConfig{});
}

// Standard D-line reference values (hyperfine constants, g-factors, masses).
std::map<std::string, IsotopeSpec> builtin_isotopes() {
  IsotopeSpec rb85;
  rb85.name = "Rb85";
  rb85.abundance = 0.7215;
  rb85.gyromagnetic_ratio_khz_per_ut = 4.6674;   // g_F(F=3) = 0.33348
  rb85.ground_hyperfine_splitting_ghz = 3.035732439;
  rb85.excited_d1_hyperfine_splitting_ghz = 0.361581;  // 3 A(5P1/2), A = 120.527 MHz
  rb85.ground_f_levels = {2, 3};
  rb85.excited_f_levels = {2, 3};
  rb85.nuclear_spin = 2.5;
  rb85.mass_u = 84.911789738;
  rb85.d1_centroid_shift_ghz = 0.0;

  IsotopeSpec rb87;
  rb87.name = "Rb87";
  rb87.abundance = 0.2785;
  rb87.gyromagnetic_ratio_khz_per_ut = 6.9958;   // g_F(F=2) = 0.49984
  rb87.ground_hyperfine_splitting_ghz = 6.834682610904;
  rb87.excited_d1_hyperfine_splitting_ghz = 0.816656;  // 2 A(5P1/2), A = 408.328 MHz
  rb87.ground_f_levels = {1, 2};
  rb87.excited_f_levels = {1, 2};
  rb87.nuclear_spin = 1.5;
  rb87.mass_u = 86.909180527;
  rb87.d1_centroid_shift_ghz = 0.077690;  // 377.107463380 THz - 377.107385690 THz

  return {{rb85.name, rb85}, {rb87.name, rb87}};
}

std::map<std::string, BufferGasCoefficients> builtin_gases() {
  BufferGasCoefficients n2;
  n2.gas = "N2";
  // Ratio of the reported pair 16.38 GHz <-> 0.92 amg (17.80 GHz/amg, in line with
  // the tabulated Rb D1 N2 broadening).
  n2.broadening_ghz_per_amg = 16.38 / 0.92;
  n2.shift_ghz_per_amg = -8.25;
  return {{n2.gas, n2}};
}

}  // namespace

const AtomicData& AtomicData::defaults() {
  static const AtomicData instance = make_defaults();
  return instance;
}

AtomicData AtomicData::with_overrides(const KeyValueConfig& cfg) {
  AtomicData data;
  data.isotopes_ = builtin_isotopes();
  data.gases_ = builtin_gases();
  for (auto& [name, iso] : data.isotopes_) {
    const std::string p = "isotope." + name + ".";
    iso.abundance = cfg.get_double(p + "abundance", iso.abundance);
    iso.gyromagnetic_ratio_khz_per_ut =
        cfg.get_double(p + "gyromagnetic_ratio_khz_per_ut", iso.gyromagnetic_ratio_khz_per_ut);
    iso.ground_hyperfine_splitting_ghz =
        cfg.get_double(p + "ground_hyperfine_splitting_ghz", iso.ground_hyperfine_splitting_ghz);
    iso.excited_d1_hyperfine_splitting_ghz = cfg.get_double(
        p + "excited_d1_hyperfine_splitting_ghz", iso.excited_d1_hyperfine_splitting_ghz);
    iso.mass_u = cfg.get_double(p + "mass_u", iso.mass_u);
    iso.d1_centroid_shift_ghz = cfg.get_double(p + "d1_centroid_shift_ghz", iso.d1_centroid_shift_ghz);
  }
  for (auto& [name, gas] : data.gases_) {
    const std::string p = "buffer_gas." + name + ".";
    gas.broadening_ghz_per_amg = cfg.get_double(p + "broadening_ghz_per_amg", gas.broadening_ghz_per_amg);
    gas.shift_ghz_per_amg = cfg.get_double(p + "shift_ghz_per_amg", gas.shift_ghz_per_amg);
  }
  data.validate();
  return data;
}

void AtomicData::validate() const {
  double total = 0.0;
  for (const auto& [name, iso] : isotopes_) {
    require(iso.abundance >= 0.0, name + ": abundance must be non-negative");
    require(iso.gyromagnetic_ratio_khz_per_ut > 0.0, name + ": gyromagnetic ratio must be positive");
    require(iso.ground_hyperfine_splitting_ghz > 0.0 && iso.excited_d1_hyperfine_splitting_ghz > 0.0,
            name + ": hyperfine splittings must be positive");
    require(iso.mass_u > 0.0, name + ": mass must be positive");
    total += iso.abundance;
  }
  require(std::abs(total - 1.0) <= 1e-9, "isotope abundances must sum to 1");
  for (const auto& [name, gas] : gases_) {
    require(gas.broadening_ghz_per_amg > 0.0, name + ": broadening coefficient must be positive");
  }
}

const IsotopeSpec& AtomicData::isotope(const std::string& name) const {
  const auto it = isotopes_.find(name);
  if (it == isotopes_.end()) fail(ErrorCode::unknown_isotope, "unknown isotope: " + name);
  return it->second;
}

const BufferGasCoefficients& AtomicData::buffer_gas(const std::string& gas) const {
  const auto it = gases_.find(gas);
  if (it == gases_.end()) fail(ErrorCode::invalid_argument, "unknown buffer gas: " + gas);
  return it->second;
}

std::vector<std::string> AtomicData::isotope_names() const {
  std::vector<std::string> names;
  for (const auto& [name, iso] : isotopes_) names.push_back(name);
  return names;
}

const IsotopeSpec& get_isotope(const std::string& name) {
  return AtomicData::defaults().isotope(name);
}

double wigner_6j(int two_j1, int two_j2, int two_j3, int two_j4, int two_j5, int two_j6) {
  const double d = triangle(two_j1, two_j2, two_j3) * triangle(two_j1, two_j5, two_j6) *
                   triangle(two_j4, two_j2, two_j6) * triangle(two_j4, two_j5, two_j3);
  if (d == 0.0) return 0.0;
  const int a1 = (two_j1 + two_j2 + two_j3) / 2;
  const int a2 = (two_j1 + two_j5 + two_j6) / 2;
  const int a3 = (two_j4 + two_j2 + two_j6) / 2;
  const int a4 = (two_j4 + two_j5 + two_j3) / 2;
  const int b1 = (two_j1 + two_j2 + two_j4 + two_j5) / 2;
  const int b2 = (two_j2 + two_j3 + two_j5 + two_j6) / 2;
  const int b3 = (two_j3 + two_j1 + two_j6 + two_j4) / 2;
  const int t_min = std::max({a1, a2, a3, a4});
  const int t_max = std::min({b1, b2, b3});
  double sum = 0.0;
  for (int t = t_min; t <= t_max; ++t) {
    const double sign = (t % 2 == 0) ? 1.0 : -1.0;
    sum += sign * factorial(t + 1) /
           (factorial(t - a1) * factorial(t - a2) * factorial(t - a3) * factorial(t - a4) *
            factorial(b1 - t) * factorial(b2 - t) * factorial(b3 - t));
  }
  return d * sum;
}

double d1_line_strength_factor(double nuclear_spin, int ground_f, int excited_f) {
  const int two_i = static_cast<int>(std::lround(2.0 * nuclear_spin));
  // S = (2F'+1)(2J+1) {J J' 1; F' F I}^2 with J = J' = 1/2.
  const double sixj = wigner_6j(1, 1, 2, 2 * excited_f, 2 * ground_f, two_i);
  return (2.0 * excited_f + 1.0) * 2.0 * sixj * sixj;
}

double hyperfine_level_offset_ghz(double splitting_ghz, double nuclear_spin, int f) {
  const double i = nuclear_spin;
  const double k = f * (f + 1.0) - i * (i + 1.0) - 0.75;
  return splitting_ghz * k / (2.0 * i + 1.0);
}

std::vector<TransitionLine> d1_transition_lines(const IsotopeSpec& isotope) {
  require(!isotope.ground_f_levels.empty() && !isotope.excited_f_levels.empty(),
          isotope.name + ": F-level lists are empty");
  const double i = isotope.nuclear_spin;
  const double ground_states = 2.0 * (2.0 * i + 1.0);
  std::vector<TransitionLine> lines;
  double total = 0.0;
  for (const int fg : isotope.ground_f_levels) {
    for (const int fe : isotope.excited_f_levels) {
      if (std::abs(fe - fg) > 1 || (fg == 0 && fe == 0)) continue;
      TransitionLine line;
      line.ground_f = fg;
      line.excited_f = fe;
      line.center_offset_ghz =
          hyperfine_level_offset_ghz(isotope.excited_d1_hyperfine_splitting_ghz, i, fe) -
          hyperfine_level_offset_ghz(isotope.ground_hyperfine_splitting_ghz, i, fg);
      line.relative_strength =
          (2.0 * fg + 1.0) / ground_states * d1_line_strength_factor(i, fg, fe);
      total += line.relative_strength;
      lines.push_back(line);
    }
  }
  for (auto& line : lines) line.relative_strength /= total;
  return lines;
}

}  // namespace vaporcell::atomic
