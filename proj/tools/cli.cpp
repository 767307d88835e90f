#include "cli.hpp"

#include <CLI11.hpp>

#include <algorithm>
#include <cmath>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <functional>
#include <memory>
#include <numbers>
#include <optional>
#include <ostream>
#include <random>
#include <sstream>

#include "vaporcell/atomic_data.hpp"
#include "vaporcell/config.hpp"
#include "vaporcell/errors.hpp"
#include "vaporcell/hanle.hpp"
#include "vaporcell/io.hpp"
#include "vaporcell/lineshape.hpp"
#include "vaporcell/sas.hpp"
#include "vaporcell/sigproc.hpp"
#include "vaporcell/sns.hpp"
#include "vaporcell/thermal.hpp"

#ifndef VAPORCELL_DEFAULT_CONFIG
#define VAPORCELL_DEFAULT_CONFIG ""
#endif

namespace vaporcell::cli {
namespace {

namespace fs = std::filesystem;

struct Context {
  KeyValueConfig cfg;
  Summary summary;
  std::uint64_t seed = 0;
  int verbosity = 0;
  std::ostream* log = nullptr;

  double num(const std::string& key, double fallback) const { return cfg.get_double(key, fallback); }
  void note(const std::string& msg) const {
    if (verbosity > 0 && log) *log << msg << '\n';
  }
};

// --config is needed before the grammar is built, because config values become
// the option defaults.
std::optional<std::string> prescan_config(const std::vector<std::string>& args) {
  for (std::size_t i = 0; i < args.size(); ++i) {
    if (args[i] == "--config" && i + 1 < args.size()) return args[i + 1];
    if (args[i].rfind("--config=", 0) == 0) return args[i].substr(9);
  }
  return std::nullopt;
}

KeyValueConfig load_config(const std::vector<std::string>& args) {
  if (auto path = prescan_config(args)) return KeyValueConfig::load(*path);
  if (const char* env = std::getenv("VAPORCELL_CONFIG"); env && *env) return KeyValueConfig::load(env);
  const fs::path builtin = VAPORCELL_DEFAULT_CONFIG;
  if (!builtin.empty() && fs::exists(builtin)) return KeyValueConfig::load(builtin);
  return {};
}

void apply_overrides(KeyValueConfig& cfg, const std::vector<std::string>& sets) {
  for (const auto& s : sets) {
    const auto eq = s.find('=');
    if (eq == std::string::npos) fail(ErrorCode::invalid_argument, "--set expects key=value, got: " + s);
    auto trim = [](std::string v) {
      const auto b = v.find_first_not_of(" \t");
      const auto e = v.find_last_not_of(" \t");
      return b == std::string::npos ? std::string{} : v.substr(b, e - b + 1);
    };
    cfg.set(trim(s.substr(0, eq)), trim(s.substr(eq + 1)));
  }
}

std::vector<double> parse_list(const std::string& text) {
  std::vector<double> out;
  std::stringstream ss(text);
  std::string item;
  while (std::getline(ss, item, ',')) {
    if (item.find_first_not_of(" \t") == std::string::npos) continue;
    out.push_back(io::parse_double(item));
  }
  return out;
}

void add_gaussian_noise(std::vector<double>& y, double sigma, std::mt19937_64& rng) {
  if (sigma <= 0.0) return;
  std::normal_distribution<double> g(0.0, sigma);
  for (auto& v : y) v += g(rng);
}

void add_fit_stats(Summary& s, const fitkit::FitResult& fit) {
  s.add("fit.converged", std::string(fit.converged ? "true" : "false"));
  s.add("fit.termination", std::string(fitkit::to_string(fit.termination)));
  s.add("fit.iterations", static_cast<long long>(fit.iterations));
  s.add("fit.residual_norm", fit.residual_norm);
}

// ---------------------------------------------------------------------------

struct Command {
  CLI::App* app;
  std::function<void(Context&)> run;
};

Command simulate_absorption(CLI::App& root, const KeyValueConfig& cfg) {
  struct Opts {
    double gamma, density, center, path, doppler, half_span, noise = 0.0;
    int points;
    std::string out;
  };
  auto o = std::make_shared<Opts>();
  o->gamma = cfg.get_double("absorption.linewidth_ghz", 16.38);
  o->density = cfg.get_double("absorption.density_m3", 1e18);
  o->center = cfg.get_double("absorption.center_shift_ghz", 0.0);
  o->path = cfg.get_double("absorption.path_length_mm", lineshape::kDefaultPathLengthMm);
  o->doppler = cfg.get_double("absorption.doppler_fwhm_ghz", 0.0);
  o->half_span = cfg.get_double("absorption.half_span_ghz", 60.0);
  o->points = static_cast<int>(cfg.get_int("absorption.points", 601));
  auto* app = root.add_subcommand("simulate-absorption", "Synthesize an optical-depth spectrum");
  app->add_option("--gamma-ghz", o->gamma, "Lorentzian FWHM (GHz)")->capture_default_str();
  app->add_option("--density", o->density, "Atomic density (m^-3)")->capture_default_str();
  app->add_option("--center-ghz", o->center, "Pressure-shifted centre (GHz)")->capture_default_str();
  app->add_option("--path-mm", o->path, "Optical path length (mm)")->capture_default_str();
  app->add_option("--doppler-ghz", o->doppler, "Gaussian FWHM; > 0 gives a Voigt profile")->capture_default_str();
  app->add_option("--half-span-ghz", o->half_span, "Half width of the grid (GHz)")->capture_default_str();
  app->add_option("--points", o->points, "Grid points")->capture_default_str();
  app->add_option("--noise", o->noise, "Gaussian noise, fraction of the peak OD")->capture_default_str();
  app->add_option("--out", o->out, "Output spectrum CSV")->required();
  return {app, [o](Context& ctx) {
            const auto data = atomic::AtomicData::with_overrides(ctx.cfg);
            lineshape::AbsorptionParams p;
            p.linewidth_ghz = o->gamma;
            p.atomic_density = o->density;
            p.center_shift_ghz = o->center;
            p.path_length_mm = o->path;
            p.doppler_fwhm_ghz = o->doppler;
            const auto lines = lineshape::weighted_lines(p, data);
            Spectrum s = lineshape::synthesize(p, lines, o->half_span, o->points);
            const double peak = *std::max_element(s.y.begin(), s.y.end());
            std::mt19937_64 rng(ctx.seed);
            add_gaussian_noise(s.y, o->noise * peak, rng);
            io::write_spectrum(o->out, s);
            ctx.summary.add("linewidth_ghz", p.linewidth_ghz);
            ctx.summary.add("atomic_density_m3", p.atomic_density);
            ctx.summary.add("center_shift_ghz", p.center_shift_ghz);
            ctx.summary.add("points", static_cast<long long>(s.size()));
            ctx.summary.add("peak_od", peak);
            ctx.summary.add("noise_sigma_od", o->noise * peak);
          }};
}

Command fit_absorption(CLI::App& root, const KeyValueConfig& cfg) {
  struct Opts {
    std::string in, out, gas;
    double path, doppler;
    double gamma0 = 0.0, density0 = 0.0;
    std::optional<double> center0;
  };
  auto o = std::make_shared<Opts>();
  o->path = cfg.get_double("absorption.path_length_mm", lineshape::kDefaultPathLengthMm);
  o->doppler = cfg.get_double("absorption.doppler_fwhm_ghz", 0.0);
  o->gas = cfg.get_string("absorption.buffer_gas", "N2");
  auto* app = root.add_subcommand("fit-absorption", "Fit density, linewidth and centre to an OD spectrum");
  app->add_option("--in", o->in, "Input spectrum CSV")->required()->check(CLI::ExistingFile);
  app->add_option("--out", o->out, "Write the fitted curve to this CSV");
  app->add_option("--path-mm", o->path, "Optical path length (mm)")->capture_default_str();
  app->add_option("--doppler-ghz", o->doppler, "Fixed Gaussian FWHM for a Voigt fit")->capture_default_str();
  app->add_option("--gas", o->gas, "Buffer gas for the density conversion")->capture_default_str();
  app->add_option("--gamma0", o->gamma0, "Initial FWHM (GHz); 0 reads it off the data");
  app->add_option("--density0", o->density0, "Initial density (m^-3); 0 reads it off the data");
  app->add_option("--center0", o->center0, "Initial centre (GHz)");
  return {app, [o](Context& ctx) {
            const auto data = atomic::AtomicData::with_overrides(ctx.cfg);
            const Spectrum s = io::read_spectrum(o->in);
            lineshape::AbsorptionParams base;
            base.path_length_mm = o->path;
            base.doppler_fwhm_ghz = o->doppler;
            lineshape::AbsorptionParams init = lineshape::initial_guess(s, base);
            if (o->gamma0 > 0.0) init.linewidth_ghz = o->gamma0;
            if (o->density0 > 0.0) init.atomic_density = o->density0;
            if (o->center0) init.center_shift_ghz = *o->center0;
            const auto lines = lineshape::weighted_lines(init, data);
            const auto fit = lineshape::fit_absorption(s, init, lines);
            const auto se = fit.fit.standard_errors();
            ctx.summary.add("linewidth_ghz", fit.params.linewidth_ghz);
            ctx.summary.add("linewidth_stderr_ghz", se(1));
            ctx.summary.add("atomic_density_m3", fit.params.atomic_density);
            ctx.summary.add("atomic_density_stderr_m3", se(0));
            ctx.summary.add("center_shift_ghz", fit.params.center_shift_ghz);
            ctx.summary.add("center_shift_stderr_ghz", se(2));
            ctx.summary.add("buffer_gas", o->gas);
            ctx.summary.add("buffer_density_amg",
                            lineshape::buffer_density_from_linewidth(fit.params.linewidth_ghz, data.buffer_gas(o->gas)));
            add_fit_stats(ctx.summary, fit.fit);
            if (!o->out.empty()) {
              Spectrum model = s;
              model.y = lineshape::optical_depth(s.x, fit.params, lines);
              io::write_spectrum(o->out, model);
            }
          }};
}

Command aging_report(CLI::App& root, const KeyValueConfig& cfg) {
  struct Opts {
    std::string in;
    double max_drift;
  };
  auto o = std::make_shared<Opts>();
  o->max_drift = cfg.get_double("aging.max_drift_fraction", 0.02);
  auto* app = root.add_subcommand("aging-report", "Linear drift of the linewidth over an aging test");
  app->add_option("--in", o->in, "CSV with columns day,linewidth_ghz")->required()->check(CLI::ExistingFile);
  app->add_option("--max-drift", o->max_drift, "Allowed drift as a fraction of the mean")->capture_default_str();
  return {app, [o](Context& ctx) {
            const auto table = io::read_xy_table(o->in);
            std::vector<std::pair<double, double>> pts;
            for (std::size_t i = 0; i < table.x.size(); ++i) pts.emplace_back(table.x[i], table.y[i]);
            const auto r = lineshape::linewidth_drift_report(pts, o->max_drift);
            ctx.summary.add("slope_ghz_per_day", r.slope_ghz_per_day);
            ctx.summary.add("intercept_ghz", r.intercept_ghz);
            ctx.summary.add("mean_linewidth_ghz", r.mean_linewidth_ghz);
            ctx.summary.add("max_deviation_ghz", r.max_deviation_ghz);
            ctx.summary.add("trend_drift_ghz", r.trend_drift_ghz);
            ctx.summary.add("threshold_ghz", r.threshold_ghz);
            ctx.summary.add("pass", std::string(r.pass ? "true" : "false"));
          }};
}

Command simulate_sas(CLI::App& root, const KeyValueConfig& cfg) {
  struct Opts {
    double temperature, width, depth, od, start, stop, step;
    std::optional<int> ground_f;
    std::string isotope = "natural";
    std::string out, features_out;
  };
  auto o = std::make_shared<Opts>();
  o->temperature = cfg.get_double("sas.temperature_k", 295.0);
  o->width = cfg.get_double("sas.dip_width_mhz", 20.0);
  o->depth = cfg.get_double("sas.dip_depth", 0.3);
  o->od = cfg.get_double("sas.peak_optical_depth", 0.8);
  o->start = cfg.get_double("sas.start_ghz", -5.0);
  o->stop = cfg.get_double("sas.stop_ghz", 6.0);
  o->step = cfg.get_double("sas.step_ghz", 0.002);
  auto* app = root.add_subcommand("simulate-sas", "Synthesize a saturated-absorption spectrum");
  app->add_option("--temperature-k", o->temperature, "Vapor temperature (K)")->capture_default_str();
  app->add_option("--dip-width-mhz", o->width, "FWHM of each Doppler-free feature (MHz)")->capture_default_str();
  app->add_option("--dip-depth", o->depth, "Fractional depth of the features")->capture_default_str();
  app->add_option("--peak-od", o->od, "Doppler absorption scale")->capture_default_str();
  app->add_option("--start-ghz", o->start, "Grid start (GHz, Rb85 centroid at 0)")->capture_default_str();
  app->add_option("--stop-ghz", o->stop, "Grid stop (GHz)")->capture_default_str();
  app->add_option("--step-ghz", o->step, "Grid step (GHz)")->capture_default_str();
  app->add_option("--ground-f", o->ground_f, "Keep only transitions from this ground level");
  app->add_option("--isotope", o->isotope, "natural, Rb85 or Rb87")->capture_default_str();
  app->add_option("--out", o->out, "Output spectrum CSV")->required();
  app->add_option("--features-out", o->features_out, "Write the feature list to this CSV");
  return {app, [o](Context& ctx) {
            const auto data = atomic::AtomicData::with_overrides(ctx.cfg);
            sas::SasConfig c;
            if (o->isotope == "natural") {
              for (const auto& name : data.isotope_names()) {
                c.isotopes.push_back({data.isotope(name), data.isotope(name).abundance});
              }
            } else {
              c.isotopes.push_back({data.isotope(o->isotope), 1.0});
            }
            c.temperature_k = o->temperature;
            c.lamb_dip_width_mhz = o->width;
            c.lamb_dip_depth = o->depth;
            c.peak_optical_depth = o->od;
            c.grid_start_ghz = o->start;
            c.grid_stop_ghz = o->stop;
            c.grid_step_ghz = o->step;
            c.only_ground_f = o->ground_f;
            const Spectrum s = sas::sas_spectrum(c);
            io::write_spectrum(o->out, s);
            const auto features = sas::configured_features(c);
            ctx.summary.add("points", static_cast<long long>(s.size()));
            ctx.summary.add("features", static_cast<long long>(features.size()));
            for (std::size_t i = 0; i < features.size(); ++i) {
              const std::string k = "feature." + std::to_string(i) + ".";
              ctx.summary.add(k + "frequency_ghz", features[i].frequency_ghz);
              ctx.summary.add(k + "label", features[i].label);
            }
            if (!o->features_out.empty()) {
              std::ofstream f(o->features_out);
              if (!f) fail(ErrorCode::io, "cannot write " + o->features_out);
              f << "frequency_ghz,kind,label\n";
              for (const auto& ft : features) {
                f << io::format_double(ft.frequency_ghz) << ','
                  << (ft.kind == sas::FeatureKind::dip ? "dip" : "crossover") << ',' << ft.label << '\n';
              }
            }
          }};
}

Command simulate_sns(CLI::App& root, const KeyValueConfig& cfg) {
  struct Opts {
    double field, duration, fs, hwhm, rms;
    std::size_t segment;
    std::string out, psd_out;
  };
  auto o = std::make_shared<Opts>();
  o->field = cfg.get_double("sns.field_ut", 10.0);
  o->duration = cfg.get_double("sns.duration_s", 10.0);
  o->fs = cfg.get_double("sns.sample_rate_hz", 500e3);
  o->hwhm = cfg.get_double("sns.hwhm_khz", 1.0);
  o->rms = cfg.get_double("sns.rms", 1.0);
  o->segment = static_cast<std::size_t>(cfg.get_int("sns.segment_length", 5000));
  auto* app = root.add_subcommand("simulate-sns", "Simulate a Faraday-rotation spin-noise record");
  app->add_option("--field-ut", o->field, "Bias field (uT)")->capture_default_str();
  app->add_option("--duration-s", o->duration, "Record length (s)")->capture_default_str();
  app->add_option("--sample-rate-hz", o->fs, "Sample rate (Hz)")->capture_default_str();
  app->add_option("--hwhm-khz", o->hwhm, "Peak half width (kHz)")->capture_default_str();
  app->add_option("--rms", o->rms, "Total rms rotation (rad)")->capture_default_str();
  app->add_option("--segment-length", o->segment, "Welch segment for --psd-out")->capture_default_str();
  app->add_option("--out", o->out, "Output time-series CSV")->required();
  app->add_option("--psd-out", o->psd_out, "Also write the Welch ASD");
  return {app, [o](Context& ctx) {
            require(o->hwhm > 0.0, "simulate-sns: hwhm must be positive");
            const auto data = atomic::AtomicData::with_overrides(ctx.cfg);
            const double tau = 1.0 / (2.0 * std::numbers::pi * o->hwhm * 1e3);
            std::vector<sns::NoiseSource> sources;
            for (const auto& name : data.isotope_names()) {
              const auto& iso = data.isotope(name);
              sources.push_back({sns::larmor_frequency_khz(iso, o->field) * 1e3, tau, o->rms * std::sqrt(iso.abundance)});
              ctx.summary.add("larmor." + name + "_khz", sns::larmor_frequency_khz(iso, o->field));
            }
            const TimeSeries ts = sns::simulate_spin_noise(o->duration, o->fs, sources, ctx.seed);
            io::write_time_series(o->out, ts);
            ctx.summary.add("correlation_time_s", tau);
            ctx.summary.add("samples", static_cast<long long>(ts.size()));
            if (!o->psd_out.empty()) {
              sigproc::WelchOptions w;
              w.segment_length = o->segment;
              io::write_psd(o->psd_out, sigproc::welch_asd(ts, w));
            }
          }};
}

Spectrum psd_band_khz(const PsdEstimate& psd, double lo_khz, double hi_khz) {
  Spectrum s;
  s.x_unit = "kHz";
  s.y_unit = psd.y_unit + "2/kHz";
  for (std::size_t k = 0; k < psd.f.size(); ++k) {
    const double f = psd.f[k] / 1e3;
    if (f < lo_khz || f > hi_khz) continue;
    s.x.push_back(f);
    s.y.push_back(psd.asd[k] * psd.asd[k] * 1e3);
  }
  if (s.size() < 2) fail(ErrorCode::empty_band, "fit-sns: band holds fewer than 2 bins");
  return s;
}

Command fit_sns(CLI::App& root, const KeyValueConfig& cfg) {
  struct Opts {
    std::string in, psd_in, out;
    std::size_t segment;
    double lo, hi, field, hwhm;
  };
  auto o = std::make_shared<Opts>();
  o->segment = static_cast<std::size_t>(cfg.get_int("sns.segment_length", 5000));
  o->lo = cfg.get_double("sns.band_lo_khz", 20.0);
  o->hi = cfg.get_double("sns.band_hi_khz", 100.0);
  o->field = cfg.get_double("sns.field_ut", 10.0);
  o->hwhm = 1.5 * cfg.get_double("sns.hwhm_khz", 1.0);
  auto* app = root.add_subcommand("fit-sns", "Fit the two-isotope Larmor-peak model to spin noise");
  auto* in = app->add_option("--in", o->in, "Time-series CSV")->check(CLI::ExistingFile);
  auto* psd = app->add_option("--psd-in", o->psd_in, "ASD CSV instead of a time series")->check(CLI::ExistingFile);
  in->excludes(psd);
  app->add_option("--segment-length", o->segment, "Welch segment length")->capture_default_str();
  app->add_option("--band-lo-khz", o->lo, "Fit band start (kHz)")->capture_default_str();
  app->add_option("--band-hi-khz", o->hi, "Fit band stop (kHz)")->capture_default_str();
  app->add_option("--field-ut", o->field, "Field for the initial peak positions (uT)")->capture_default_str();
  app->add_option("--hwhm-khz", o->hwhm, "Initial half width (kHz)")->capture_default_str();
  app->add_option("--out", o->out, "Write the fitted PSD (kHz, y^2/kHz) to this CSV");
  return {app, [o](Context& ctx) {
            if (o->in.empty() == o->psd_in.empty()) fail(ErrorCode::invalid_argument, "fit-sns: give --in or --psd-in");
            const auto data = atomic::AtomicData::with_overrides(ctx.cfg);
            PsdEstimate est;
            if (!o->in.empty()) {
              sigproc::WelchOptions w;
              w.segment_length = o->segment;
              est = sigproc::welch_asd(io::read_time_series(o->in), w);
            } else {
              est = io::read_psd(o->psd_in);
            }
            const Spectrum band = psd_band_khz(est, o->lo, o->hi);
            double power = 0.0;
            const double df = band.x[1] - band.x[0];
            for (double v : band.y) power += v * df;
            const double bg = std::max(0.0, *std::min_element(band.y.begin(), band.y.end()));
            const double peak_power = std::max(power - bg * (band.x.back() - band.x.front()), 1e-300);
            sns::SnsModel init;
            init.background = bg;
            for (const auto& name : data.isotope_names()) {
              const auto& iso = data.isotope(name);
              init.peaks.push_back({name, sns::larmor_frequency_khz(iso, o->field), o->hwhm, peak_power * iso.abundance});
            }
            const auto fit = sns::fit_sns(band, init);
            const auto se = fit.fit.standard_errors();
            for (std::size_t k = 0; k < fit.model.peaks.size(); ++k) {
              const auto& p = fit.model.peaks[k];
              const std::string key = "peak." + p.isotope + ".";
              const auto b = static_cast<Eigen::Index>(3 * k);
              ctx.summary.add(key + "larmor_khz", p.larmor_khz);
              ctx.summary.add(key + "larmor_stderr_khz", se(b));
              ctx.summary.add(key + "hwhm_khz", p.hwhm_khz);
              ctx.summary.add(key + "area", p.area);
              ctx.summary.add(key + "field_ut", p.larmor_khz / data.isotope(p.isotope).gyromagnetic_ratio_khz_per_ut);
            }
            ctx.summary.add("background", fit.model.background);
            ctx.summary.add("unresolved_peaks", std::string(fit.unresolved_peaks ? "true" : "false"));
            add_fit_stats(ctx.summary, fit.fit);
            if (fit.unresolved_peaks) ctx.note("warning: peaks are closer than the sum of their half widths");
            if (!o->out.empty()) io::write_spectrum(o->out, sns::sns_psd(band.x, fit.model));
          }};
}

Command simulate_hanle(CLI::App& root, const KeyValueConfig& cfg) {
  struct Opts {
    hanle::HanleParams p;
    double span, noise = 0.0;
    int points;
    std::string in_out, quad_out;
  };
  auto o = std::make_shared<Opts>();
  o->p.delta_b_nt = cfg.get_double("hanle.delta_b_nt", 10.5);
  o->p.bx0_nt = cfg.get_double("hanle.bx0_nt", 0.0);
  o->p.a0 = cfg.get_double("hanle.a0", 1.0);
  o->p.a1 = cfg.get_double("hanle.a1", 10.5);
  o->p.c0 = cfg.get_double("hanle.c0", 0.0);
  o->p.c1 = cfg.get_double("hanle.c1", 0.0);
  o->span = cfg.get_double("hanle.span_nt", 60.0);
  o->points = static_cast<int>(cfg.get_int("hanle.points", 241));
  auto* app = root.add_subcommand("simulate-hanle", "Synthesize in-phase and quadrature zero-field sweeps");
  app->add_option("--delta-b-nt", o->p.delta_b_nt, "Half width (nT)")->capture_default_str();
  app->add_option("--bx0-nt", o->p.bx0_nt, "Residual field (nT)")->capture_default_str();
  app->add_option("--a0", o->p.a0, "Absorptive amplitude")->capture_default_str();
  app->add_option("--a1", o->p.a1, "Dispersive amplitude (signal nT)")->capture_default_str();
  app->add_option("--c0", o->p.c0, "Absorptive offset")->capture_default_str();
  app->add_option("--c1", o->p.c1, "Dispersive offset")->capture_default_str();
  app->add_option("--span-nt", o->span, "Sweep from -span to +span (nT)")->capture_default_str();
  app->add_option("--points", o->points, "Sweep points")->capture_default_str();
  app->add_option("--noise", o->noise, "Gaussian noise, fraction of each peak amplitude")->capture_default_str();
  app->add_option("--in-phase-out", o->in_out, "In-phase sweep CSV")->required();
  app->add_option("--quadrature-out", o->quad_out, "Quadrature sweep CSV")->required();
  return {app, [o](Context& ctx) {
            o->p.validate();
            require(o->points >= 2 && o->span > 0.0, "simulate-hanle: need a positive span and >= 2 points");
            Spectrum in, quad;
            in.x_unit = quad.x_unit = "nT";
            in.y_unit = quad.y_unit = "V";
            for (int i = 0; i < o->points; ++i) {
              const double bx = -o->span + 2.0 * o->span * i / (o->points - 1);
              in.x.push_back(bx);
              quad.x.push_back(bx);
              in.y.push_back(hanle::in_phase(bx, o->p));
              quad.y.push_back(hanle::out_of_phase(bx, o->p));
            }
            std::mt19937_64 rng(ctx.seed);
            add_gaussian_noise(in.y, o->noise * std::abs(o->p.a0), rng);
            add_gaussian_noise(quad.y, o->noise * std::abs(o->p.a1) / (2.0 * o->p.delta_b_nt), rng);
            io::write_spectrum(o->in_out, in);
            io::write_spectrum(o->quad_out, quad);
            ctx.summary.add("delta_b_nt", o->p.delta_b_nt);
            ctx.summary.add("bx0_nt", o->p.bx0_nt);
            ctx.summary.add("points", static_cast<long long>(o->points));
          }};
}

Command fit_hanle(CLI::App& root, const KeyValueConfig& cfg) {
  struct Opts {
    std::string in, quad, out_in, out_quad;
    double q;
  };
  auto o = std::make_shared<Opts>();
  o->q = cfg.get_double("hanle.slowing_factor", 1.0);
  auto* app = root.add_subcommand("fit-hanle", "Joint fit of the zero-field resonance pair");
  app->add_option("--in-phase", o->in, "In-phase sweep CSV")->required()->check(CLI::ExistingFile);
  app->add_option("--quadrature", o->quad, "Quadrature sweep CSV")->required()->check(CLI::ExistingFile);
  app->add_option("--slowing-factor", o->q, "Nuclear slowing factor q")->capture_default_str();
  app->add_option("--in-phase-fit-out", o->out_in, "Write the fitted in-phase curve");
  app->add_option("--quadrature-fit-out", o->out_quad, "Write the fitted quadrature curve");
  return {app, [o](Context& ctx) {
            const Spectrum in = io::read_spectrum(o->in);
            const Spectrum quad = io::read_spectrum(o->quad);
            const auto init = hanle::initial_guess(in, quad);
            const auto fit = hanle::fit_zero_field_resonance(in, quad, init);
            const auto se = fit.fit.standard_errors();
            const auto& p = fit.params;
            ctx.summary.add("a0", p.a0);
            ctx.summary.add("a1", p.a1);
            ctx.summary.add("c0", p.c0);
            ctx.summary.add("c1", p.c1);
            ctx.summary.add("bx0_nt", p.bx0_nt);
            ctx.summary.add("bx0_stderr_nt", se(4));
            ctx.summary.add("delta_b_nt", p.delta_b_nt);
            ctx.summary.add("delta_b_stderr_nt", se(5));
            ctx.summary.add("relaxation_rate_per_s", hanle::relaxation_from_linewidth(p.delta_b_nt, hanle::kElectronGyromagnetic, o->q));
            add_fit_stats(ctx.summary, fit.fit);
            if (!o->out_in.empty()) {
              Spectrum m = in;
              for (std::size_t i = 0; i < m.size(); ++i) m.y[i] = hanle::in_phase(m.x[i], p);
              io::write_spectrum(o->out_in, m);
            }
            if (!o->out_quad.empty()) {
              Spectrum m = quad;
              for (std::size_t i = 0; i < m.size(); ++i) m.y[i] = hanle::out_of_phase(m.x[i], p);
              io::write_spectrum(o->out_quad, m);
            }
          }};
}

Command simulate_modulated(CLI::App& root, const KeyValueConfig& cfg) {
  struct Opts {
    double freq, amp, test = 0.0, duration, fs, pump, relax, scale;
    double field_noise_ft = 0.0, bandwidth, electronic_v = 0.0;
    std::string out;
  };
  auto o = std::make_shared<Opts>();
  o->freq = cfg.get_double("modulation.frequency_hz", 890.0);
  o->amp = cfg.get_double("modulation.amplitude_nt", 160.0);
  o->duration = cfg.get_double("modulation.duration_s", 0.2);
  o->fs = cfg.get_double("bloch.sample_rate_hz", 100e3);
  o->pump = cfg.get_double("bloch.pumping_rate", 900.0);
  o->relax = cfg.get_double("bloch.relaxation_rate", 900.0);
  o->scale = cfg.get_double("bloch.absorption_scale", 0.5);
  o->bandwidth = cfg.get_double("modulation.field_noise_bandwidth_hz", 400.0);
  auto* app = root.add_subcommand("simulate-modulated", "Bloch simulation of the field-modulated magnetometer");
  app->add_option("--mod-freq", o->freq, "Modulation frequency (Hz)")->capture_default_str();
  app->add_option("--mod-amp", o->amp, "Modulation amplitude (nT)")->capture_default_str();
  app->add_option("--test-field", o->test, "Static transverse test field (nT)")->capture_default_str();
  app->add_option("--duration-s", o->duration, "Record length (s)")->capture_default_str();
  app->add_option("--sample-rate-hz", o->fs, "Integration and output rate (Hz)")->capture_default_str();
  app->add_option("--pumping-rate", o->pump, "R_op (1/s)")->capture_default_str();
  app->add_option("--relaxation-rate", o->relax, "R_rel (1/s)")->capture_default_str();
  app->add_option("--field-noise-ft", o->field_noise_ft, "White Bx noise (fT/sqrt(Hz))")->capture_default_str();
  app->add_option("--field-noise-bandwidth-hz", o->bandwidth, "Upper edge of the Bx noise band (Hz)")
      ->capture_default_str();
  app->add_option("--electronic-noise-v", o->electronic_v,
                  "Detection noise referred to the lock-in output (V/sqrt(Hz))")
      ->capture_default_str();
  app->add_option("--out", o->out, "Transmission time-series CSV")->required();
  return {app, [o](Context& ctx) {
            hanle::BlochConfig c;
            c.pumping_rate = o->pump;
            c.relaxation_rate = o->relax;
            c.duration = o->duration;
            c.sample_rate = o->fs;
            c.absorption_scale = o->scale;
            hanle::BlochTrace tr;
            if (o->field_noise_ft > 0.0) {
              const auto n = static_cast<std::size_t>(std::llround(o->duration * o->fs)) + 2;
              const double band = o->bandwidth;
              const auto raw = sigproc::white_noise(n, o->fs, o->field_noise_ft * 1e-6, ctx.seed);
              const auto shaped = sigproc::apply_response(raw, o->fs, [band](double f) { return f <= band ? 1.0 : 0.0; });
              tr = hanle::modulated_response(c, o->freq, o->amp, o->test, shaped);
            } else {
              tr = hanle::modulated_response(c, o->freq, o->amp, o->test);
            }
            if (o->electronic_v > 0.0) {
              // Demodulation folds both sidebands onto the output, a factor sqrt(2)
              // in amplitude density for broadband input noise.
              const auto e = sigproc::white_noise(tr.transmission.size(), o->fs, o->electronic_v / std::sqrt(2.0),
                                                  ctx.seed + 1);
              for (std::size_t i = 0; i < e.size(); ++i) tr.transmission.y[i] += e[i];
            }
            io::write_time_series(o->out, tr.transmission);
            ctx.summary.add("samples", static_cast<long long>(tr.transmission.size()));
            ctx.summary.add("final_sx", tr.final_spin[0]);
            ctx.summary.add("final_sy", tr.final_spin[1]);
            ctx.summary.add("final_sz", tr.final_spin[2]);
            ctx.summary.add("max_spin_norm", tr.max_spin_norm);
          }};
}

Command demodulate(CLI::App& root, const KeyValueConfig& cfg) {
  struct Opts {
    double freq, phase = 0.0, cutoff, discard;
    int poles;
    std::size_t decimation;
    std::string in, out, in_phase_out;
  };
  auto o = std::make_shared<Opts>();
  o->freq = cfg.get_double("modulation.frequency_hz", 890.0);
  o->cutoff = cfg.get_double("lockin.cutoff_hz", 300.0);
  o->poles = static_cast<int>(cfg.get_int("lockin.poles", 2));
  o->decimation = static_cast<std::size_t>(cfg.get_int("lockin.decimation", 1));
  o->discard = cfg.get_double("lockin.discard_s", 0.0);
  auto* app = root.add_subcommand("demodulate", "Digital lock-in at the modulation frequency");
  app->add_option("--in", o->in, "Time-series CSV")->required()->check(CLI::ExistingFile);
  app->add_option("--ref-freq", o->freq, "Reference frequency (Hz)")->capture_default_str();
  app->add_option("--ref-phase", o->phase, "Reference phase (rad)")->capture_default_str();
  app->add_option("--cutoff-hz", o->cutoff, "Low-pass cutoff per pole (Hz)")->capture_default_str();
  app->add_option("--poles", o->poles, "Low-pass poles")->capture_default_str();
  app->add_option("--decimation", o->decimation, "Block-average factor for the written outputs")
      ->capture_default_str();
  app->add_option("--discard-s", o->discard, "Drop this much of the start from the written outputs (s)")
      ->capture_default_str();
  app->add_option("--out", o->out, "Quadrature time-series CSV")->required();
  app->add_option("--in-phase-out", o->in_phase_out, "In-phase time-series CSV");
  return {app, [o](Context& ctx) {
            const TimeSeries ts = io::read_time_series(o->in);
            sigproc::LockInOptions lo;
            lo.ref_freq = o->freq;
            lo.ref_phase = o->phase;
            lo.lp_cutoff = o->cutoff;
            lo.lp_poles = o->poles;
            const auto d = sigproc::lock_in(ts, lo);
            const double period = 1.0 / o->freq;
            const double x = sigproc::settled_mean(d.in_phase, 0.5, period);
            const double y = sigproc::settled_mean(d.quadrature, 0.5, period);
            ctx.summary.add("in_phase_mean", x);
            ctx.summary.add("quadrature_mean", y);
            ctx.summary.add("magnitude", std::hypot(x, y));
            ctx.summary.add("phase_rad", std::atan2(y, x));
            if (x != 0.0 || y != 0.0) ctx.summary.add("quadrature_phase_rad", sigproc::quadrature_phase(x, y, o->phase));
            auto shape = [&](const TimeSeries& s) {
              TimeSeries t = sigproc::decimate_mean(s, o->decimation);
              auto skip = static_cast<std::size_t>(std::ceil(o->discard * t.sample_rate() - 1e-9));
              if (skip >= t.size() / 2) {
                ctx.note("note: record too short for --discard-s; dropping the first half instead");
                skip = t.size() / 2;
              }
              t.t.erase(t.t.begin(), t.t.begin() + static_cast<std::ptrdiff_t>(skip));
              t.y.erase(t.y.begin(), t.y.begin() + static_cast<std::ptrdiff_t>(skip));
              return t;
            };
            const TimeSeries q = shape(d.quadrature);
            io::write_time_series(o->out, q);
            ctx.summary.add("output_samples", static_cast<long long>(q.size()));
            ctx.summary.add("output_rate_hz", q.sample_rate());
            if (!o->in_phase_out.empty()) io::write_time_series(o->in_phase_out, shape(d.in_phase));
          }};
}

Command calibrate_sensitivity(CLI::App& root, const KeyValueConfig& cfg) {
  struct Opts {
    std::string in, out, asd_out, poles;
    double slope = 0.0, delta_b = 0.0, a_amp = 0.0, lo, hi;
    std::size_t segment;
  };
  auto o = std::make_shared<Opts>();
  o->poles = cfg.get_string("calibration.response_poles_hz", "");
  o->segment = static_cast<std::size_t>(cfg.get_int("calibration.segment_length", 2000));
  o->lo = cfg.get_double("calibration.band_lo_hz", 10.0);
  o->hi = cfg.get_double("calibration.band_hi_hz", 100.0);
  auto* app = root.add_subcommand("calibrate-sensitivity", "Magnetic sensitivity spectrum from output noise");
  app->add_option("--timeseries", o->in, "Demodulated output CSV (V)")->required()->check(CLI::ExistingFile);
  app->add_option("--slope", o->slope, "Scale factor dv/dB (V/nT)");
  app->add_option("--delta-b", o->delta_b, "Resonance half width (nT), with --a-amp");
  app->add_option("--a-amp", o->a_amp, "Dispersive peak-to-peak amplitude (V), with --delta-b");
  app->add_option("--response-poles-hz", o->poles, "Comma-separated single-pole cutoffs of R(f)")
      ->capture_default_str();
  app->add_option("--segment-length", o->segment, "Welch segment length")->capture_default_str();
  app->add_option("--band-lo-hz", o->lo, "Floor band start (Hz)")->capture_default_str();
  app->add_option("--band-hi-hz", o->hi, "Floor band stop (Hz)")->capture_default_str();
  app->add_option("--out", o->out, "Sensitivity spectrum CSV (fT/sqrt(Hz))")->required();
  app->add_option("--asd-out", o->asd_out, "Also write the voltage ASD");
  return {app, [o](Context& ctx) {
            const TimeSeries ts = io::read_time_series(o->in);
            sigproc::WelchOptions w;
            w.segment_length = o->segment;
            const auto asd = sigproc::welch_asd(ts, w);
            sigproc::CalibrationInputs cal;
            cal.slope_v_per_nt = o->slope;
            cal.delta_b_nt = o->delta_b;
            cal.a_amp_v = o->a_amp;
            cal.response = sigproc::cascaded_response(parse_list(o->poles));
            const Spectrum s = sigproc::sensitivity(asd, cal);
            const double floor = sigproc::noise_floor(s, o->lo, o->hi);
            io::write_spectrum(o->out, s);
            if (!o->asd_out.empty()) io::write_psd(o->asd_out, asd);
            ctx.summary.add("slope_v_per_nt", cal.effective_slope());
            ctx.summary.add("band_lo_hz", o->lo);
            ctx.summary.add("band_hi_hz", o->hi);
            ctx.summary.add("noise_floor_ft_per_rthz", floor);
            ctx.summary.add("segments", static_cast<long long>(asd.segments));
            ctx.summary.add("resolution_hz", asd.resolution());
            ctx.summary.add("enbw_hz", asd.enbw);
          }};
}

Command simulate_thermal(CLI::App& root, const KeyValueConfig& cfg) {
  struct Opts {
    thermal::ThermalPlant plant;
    thermal::PidGains gains;
    double duration, dt, band, steady_from;
    std::string out, measured_out, power_out;
  };
  auto o = std::make_shared<Opts>();
  o->plant.time_constant_s = cfg.get_double("thermal.plant.time_constant_s", o->plant.time_constant_s);
  o->plant.gain_k_per_w = cfg.get_double("thermal.plant.gain_k_per_w", o->plant.gain_k_per_w);
  o->plant.ambient_k = cfg.get_double("thermal.plant.ambient_k", o->plant.ambient_k);
  o->plant.sensor_noise_std_k = cfg.get_double("thermal.plant.sensor_noise_std_k", o->plant.sensor_noise_std_k);
  o->gains = thermal::PidGains::from_config(cfg);
  o->duration = cfg.get_double("thermal.duration_s", 3000.0);
  o->dt = cfg.get_double("thermal.dt_s", 0.1);
  o->band = cfg.get_double("thermal.band_k", 0.05);
  o->steady_from = cfg.get_double("thermal.steady_from_s", 1500.0);
  auto* app = root.add_subcommand("simulate-thermal", "PID-controlled heater chip");
  app->add_option("--setpoint-k", o->gains.setpoint_k, "Setpoint (K)")->capture_default_str();
  app->add_option("--kp", o->gains.kp, "Proportional gain (W/K)")->capture_default_str();
  app->add_option("--ki", o->gains.ki, "Integral gain (W/(K s))")->capture_default_str();
  app->add_option("--kd", o->gains.kd, "Derivative gain (W s/K)")->capture_default_str();
  app->add_option("--noise-k", o->plant.sensor_noise_std_k, "Sensor noise std (K)")->capture_default_str();
  app->add_option("--duration-s", o->duration, "Run length (s)")->capture_default_str();
  app->add_option("--dt-s", o->dt, "Control period (s)")->capture_default_str();
  app->add_option("--band-k", o->band, "Settling band (K)")->capture_default_str();
  app->add_option("--steady-from-s", o->steady_from, "Start of the fluctuation window (s)")->capture_default_str();
  app->add_option("--out", o->out, "Cell temperature time-series CSV")->required();
  app->add_option("--measured-out", o->measured_out, "Sensor reading CSV");
  app->add_option("--power-out", o->power_out, "Heater power CSV");
  return {app, [o](Context& ctx) {
            const auto run = thermal::simulate_pid(o->plant, o->gains, o->duration, o->dt, ctx.seed);
            io::write_time_series(o->out, run.temperature);
            if (!o->measured_out.empty()) io::write_time_series(o->measured_out, run.measured);
            if (!o->power_out.empty()) io::write_time_series(o->power_out, run.power);
            double steady_from = o->steady_from;
            if (steady_from >= o->duration) {
              steady_from = 0.5 * o->duration;
              ctx.note("note: --steady-from-s beyond the run; using the second half");
            }
            const auto st = thermal::settling_stats(run.temperature, o->gains.setpoint_k, o->band, steady_from);
            ctx.summary.add("setpoint_k", o->gains.setpoint_k);
            ctx.summary.add("settling_time_s", st.settling_time_s);
            ctx.summary.add("peak_fluctuation_mk", st.peak_fluctuation_k * 1e3);
            ctx.summary.add("mean_error_mk", st.mean_error_k * 1e3);
            ctx.summary.add("final_power_w", run.power.y.back());
            ctx.summary.add("sensor_resistance_ohm", o->plant.sensor_resistance(run.temperature.y.back()));
          }};
}

Command fit_iv(CLI::App& root, const KeyValueConfig&) {
  struct Opts {
    std::string in;
    bool affine = false;
  };
  auto o = std::make_shared<Opts>();
  auto* app = root.add_subcommand("fit-iv", "Resistance from an I-V sweep");
  app->add_option("--in", o->in, "CSV with columns current_A,voltage_V")->required()->check(CLI::ExistingFile);
  app->add_flag("--affine", o->affine, "Fit an offset as well");
  return {app, [o](Context& ctx) {
            const auto t = io::read_xy_table(o->in);
            std::vector<std::pair<double, double>> vi;
            for (std::size_t i = 0; i < t.x.size(); ++i) vi.emplace_back(t.y[i], t.x[i]);
            const auto r = thermal::resistance_from_iv(vi, !o->affine);
            ctx.summary.add("resistance_ohm", r.ohms);
            ctx.summary.add("resistance_stderr_ohm", r.stderr_ohms);
            ctx.summary.add("offset_v", r.offset_v);
          }};
}

Command fit_residual_field(CLI::App& root, const KeyValueConfig&) {
  auto in = std::make_shared<std::string>();
  auto* app = root.add_subcommand("fit-residual-field", "Residual field per unit heater current");
  app->add_option("--in", *in, "CSV with columns current_mA,field_nT")->required()->check(CLI::ExistingFile);
  return {app, [in](Context& ctx) {
            const auto t = io::read_xy_table(*in);
            const auto r = thermal::fit_residual_field(t.x, t.y);
            ctx.summary.add("coefficient_nt_per_ma", r.coefficient_nt_per_ma);
            ctx.summary.add("coefficient_stderr_nt_per_ma", r.stderr_nt_per_ma);
            add_fit_stats(ctx.summary, r.fit);
          }};
}

}  // namespace

int run(const std::vector<std::string>& args, std::ostream& out, std::ostream& err) {
  KeyValueConfig cfg;
  try {
    cfg = load_config(args);
  } catch (const Error& e) {
    err << "error: " << e.what() << '\n';
    return kExitUsage;
  }

  CLI::App app{"Vapor-cell sensor simulation and analysis", "vaporcell"};
  app.require_subcommand(1, 1);
  app.failure_message(CLI::FailureMessage::help);

  std::string config_path, summary_path;
  std::vector<std::string> sets;
  Context ctx;
  ctx.log = &err;
  long long seed = 0;
  try {
    seed = cfg.get_int("seed", 20240917);
  } catch (const Error& e) {
    err << "error: " << e.what() << '\n';
    return kExitUsage;
  }
  app.add_option("--config", config_path, "Config file (default: $VAPORCELL_CONFIG, then the bundled file)");
  app.add_option("--summary", summary_path, "Also write the key = value summary here");
  app.add_option("--seed", seed, "Random seed")->capture_default_str();
  app.add_option("--set", sets, "Override a config key, key=value (repeatable)");
  app.add_flag("-v,--verbose", ctx.verbosity, "Progress messages on stderr");

  // --set values feed option defaults, so they are applied before the grammar is built.
  for (std::size_t i = 0; i + 1 < args.size(); ++i) {
    if (args[i] == "--set") sets.push_back(args[i + 1]);
  }
  try {
    apply_overrides(cfg, sets);
  } catch (const Error& e) {
    err << "error: " << e.what() << '\n';
    return kExitUsage;
  }
  sets.clear();

  std::vector<Command> commands;
  try {
    for (auto make : {simulate_absorption, fit_absorption, aging_report, simulate_sas, simulate_sns, fit_sns,
                      simulate_hanle, fit_hanle, simulate_modulated, demodulate, calibrate_sensitivity,
                      simulate_thermal, fit_iv, fit_residual_field}) {
      commands.push_back(make(app, cfg));
    }
  } catch (const Error& e) {
    err << "error: " << e.what() << '\n';
    return kExitUsage;
  }

  std::vector<std::string> reversed(args.rbegin(), args.rend());
  try {
    app.parse(reversed);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e, out, err);
    return code == 0 ? kExitOk : kExitUsage;
  }

  ctx.cfg = cfg;
  ctx.seed = static_cast<std::uint64_t>(seed);
  for (auto& cmd : commands) {
    if (!cmd.app->parsed()) continue;
    try {
      ctx.note("running " + cmd.app->get_name());
      cmd.run(ctx);
    } catch (const Error& e) {
      err << "error [" << to_string(e.code()) << "]: " << e.what() << '\n';
      if (e.is_input_error()) {
        err << cmd.app->help();
        return kExitUsage;
      }
      return kExitComputation;
    } catch (const std::exception& e) {
      err << "error: " << e.what() << '\n';
      return kExitComputation;
    }
    ctx.summary.add("command", cmd.app->get_name());
    ctx.summary.add("seed", static_cast<long long>(ctx.seed));
    ctx.summary.write(out);
    if (!summary_path.empty()) {
      try {
        ctx.summary.write(summary_path);
      } catch (const Error& e) {
        err << "error: " << e.what() << '\n';
        return kExitUsage;
      }
    }
    return kExitOk;
  }
  return kExitUsage;
}

}  // namespace vaporcell::cli
