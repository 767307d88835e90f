#include "vaporcell/sas.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>

#include "vaporcell/errors.hpp"

namespace vaporcell::sas {
namespace {

constexpr double kBoltzmann = 1.380649e-23;
constexpr double kAtomicMassUnit = 1.66053906660e-27;
constexpr double kSpeedOfLight = 299792458.0;

struct Component {
  double center_ghz;   // absolute
  double strength;     // isotope weight * line strength
  double sigma_ghz;    // Doppler Gaussian sigma
};

struct Feature {
  double center_ghz;   // absolute
  double hwhm_ghz;
};

struct Prepared {
  std::vector<Component> doppler;
  std::vector<Feature> features;
  double depth;
  double od_scale;
};

Prepared prepare(const SasConfig& cfg) {
  cfg.validate();
  Prepared out;
  out.depth = cfg.lamb_dip_depth;
  out.od_scale = cfg.peak_optical_depth;
  for (const auto& wi : cfg.isotopes) {
    const double sigma =
        doppler_fwhm_ghz(cfg.temperature_k, wi.isotope.mass_u) / (2.0 * std::sqrt(2.0 * std::numbers::ln2));
    for (const auto& line : atomic::d1_transition_lines(wi.isotope)) {
      if (cfg.only_ground_f && line.ground_f != *cfg.only_ground_f) continue;
      out.doppler.push_back({line.center_offset_ghz + wi.isotope.d1_centroid_shift_ghz,
                             wi.weight * line.relative_strength, sigma});
    }
  }
  for (const auto& f : configured_features(cfg)) {
    out.features.push_back({f.frequency_ghz, 0.5 * cfg.lamb_dip_width_mhz * 1e-3});
  }
  return out;
}

double doppler_absorption(double nu, const Prepared& prep) {
  double a = 0.0;
  for (const auto& c : prep.doppler) {
    const double u = (nu - c.center_ghz) / c.sigma_ghz;
    a += c.strength * std::exp(-0.5 * u * u);
  }
  return prep.od_scale * a;
}

double evaluate(double nu, const Prepared& prep) {
  double hole = 0.0;
  for (const auto& f : prep.features) {
    const double d = (nu - f.center_ghz) / f.hwhm_ghz;
    hole += 1.0 / (1.0 + d * d);
  }
  const double absorption = doppler_absorption(nu, prep) * std::max(0.0, 1.0 - prep.depth * hole);
  return std::exp(-absorption);
}

Spectrum make_grid(const SasConfig& cfg) {
  Spectrum s;
  s.x_unit = "GHz";
  s.y_unit = "P/Pin";
  const auto n = static_cast<std::size_t>(
      std::floor((cfg.grid_stop_ghz - cfg.grid_start_ghz) / cfg.grid_step_ghz + 1e-9)) + 1;
  s.x.resize(n);
  for (std::size_t i = 0; i < n; ++i) s.x[i] = cfg.grid_start_ghz + static_cast<double>(i) * cfg.grid_step_ghz;
  s.y.resize(n);
  return s;
}

}  // namespace

SasConfig SasConfig::natural_rubidium() {
  SasConfig cfg;
  const auto& data = atomic::AtomicData::defaults();
  for (const auto& name : data.isotope_names()) {
    const auto& iso = data.isotope(name);
    cfg.isotopes.push_back({iso, iso.abundance});
  }
  return cfg;
}

void SasConfig::validate() const {
  require(!isotopes.empty(), "sas: no isotopes configured");
  require(temperature_k > 0.0, "sas: temperature must be positive");
  require(lamb_dip_depth >= 0.0, "sas: dip depth must be non-negative");
  require(lamb_dip_depth <= 1.0, "sas: dip depth must not exceed 1");
  require(lamb_dip_width_mhz > 0.0, "sas: dip width must be positive");
  require(peak_optical_depth > 0.0, "sas: optical depth scale must be positive");
  require(grid_step_ghz > 0.0 && grid_stop_ghz > grid_start_ghz, "sas: invalid frequency grid");
  for (const auto& wi : isotopes) {
    require(wi.weight >= 0.0, "sas: isotope weights must be non-negative");
    require(lamb_dip_width_mhz * 1e-3 < doppler_fwhm_ghz(temperature_k, wi.isotope.mass_u),
            "sas: dip width must be below the Doppler width");
  }
  if (grid_step_ghz > lamb_dip_width_mhz * 1e-3 / 4.0) {
    fail(ErrorCode::grid_too_coarse, "sas: grid step exceeds a quarter of the dip width");
  }
}

double doppler_fwhm_ghz(double temperature_k, double mass_u) {
  require(temperature_k > 0.0 && mass_u > 0.0, "doppler width: temperature and mass must be positive");
  const double m = mass_u * kAtomicMassUnit;
  return atomic::kD1FrequencyHz *
         std::sqrt(8.0 * kBoltzmann * temperature_k * std::numbers::ln2 / (m * kSpeedOfLight * kSpeedOfLight)) *
         1e-9;
}

std::vector<SasFeature> sas_feature_frequencies(const atomic::IsotopeSpec& isotope) {
  const auto lines = atomic::d1_transition_lines(isotope);
  std::vector<SasFeature> out;
  for (const int fg : isotope.ground_f_levels) {
    std::vector<atomic::TransitionLine> group;
    for (const auto& l : lines) {
      if (l.ground_f == fg) group.push_back(l);
    }
    for (const auto& l : group) {
      out.push_back({l.center_offset_ghz, FeatureKind::dip,
                     isotope.name + " Fg=" + std::to_string(fg) + " Fe=" + std::to_string(l.excited_f), fg});
    }
    for (std::size_t a = 0; a < group.size(); ++a) {
      for (std::size_t b = a + 1; b < group.size(); ++b) {
        if (group[a].center_offset_ghz == group[b].center_offset_ghz) continue;
        const double mid = 0.5 * (group[a].center_offset_ghz + group[b].center_offset_ghz);
        out.push_back({mid, FeatureKind::crossover,
                       isotope.name + " Fg=" + std::to_string(fg) + " CO(" +
                           std::to_string(group[a].excited_f) + "," + std::to_string(group[b].excited_f) + ")",
                       fg});
      }
    }
  }
  return out;
}

std::vector<SasFeature> configured_features(const SasConfig& cfg) {
  std::vector<SasFeature> out;
  for (const auto& wi : cfg.isotopes) {
    if (wi.weight == 0.0) continue;
    for (auto f : sas_feature_frequencies(wi.isotope)) {
      if (cfg.only_ground_f && f.ground_f != *cfg.only_ground_f) continue;
      f.frequency_ghz += wi.isotope.d1_centroid_shift_ghz;
      out.push_back(f);
    }
  }
  std::sort(out.begin(), out.end(),
            [](const SasFeature& a, const SasFeature& b) { return a.frequency_ghz < b.frequency_ghz; });
  return out;
}

Spectrum sas_spectrum_serial(const SasConfig& cfg) {
  const Prepared prep = prepare(cfg);
  Spectrum s = make_grid(cfg);
  for (std::size_t i = 0; i < s.x.size(); ++i) s.y[i] = evaluate(s.x[i], prep);
  return s;
}

Spectrum sas_spectrum(const SasConfig& cfg) {
  const Prepared prep = prepare(cfg);
  Spectrum s = make_grid(cfg);
  const auto n = static_cast<std::ptrdiff_t>(s.x.size());
#pragma omp parallel for schedule(static)
  for (std::ptrdiff_t i = 0; i < n; ++i) s.y[i] = evaluate(s.x[i], prep);
  return s;
}

std::vector<double> find_sharp_peaks(const Spectrum& s, int half_window, double min_prominence) {
  require(half_window >= 1, "find_sharp_peaks: half window must be positive");
  std::vector<double> peaks;
  const auto n = static_cast<std::ptrdiff_t>(s.y.size());
  for (std::ptrdiff_t i = half_window; i + half_window < n; ++i) {
    const double v = s.y[i];
    if (!(v > s.y[i - 1] && v >= s.y[i + 1])) continue;
    if (v - s.y[i - half_window] < min_prominence || v - s.y[i + half_window] < min_prominence) continue;
    peaks.push_back(s.x[i]);
  }
  return peaks;
}

}  // namespace vaporcell::sas
