// Prints one PASS/FAIL line per acceptance criterion; exits non-zero if any fails.

#include <algorithm>
#include <chrono>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <functional>
#include <iomanip>
#include <iostream>
#include <random>
#include <sstream>
#include <string>
#include <vector>

#include "cli.hpp"
#include "vaporcell/atomic_data.hpp"
#include "vaporcell/errors.hpp"
#include "vaporcell/fitkit.hpp"
#include "vaporcell/hanle.hpp"
#include "vaporcell/lineshape.hpp"
#include "vaporcell/sas.hpp"
#include "vaporcell/sigproc.hpp"
#include "vaporcell/sns.hpp"
#include "vaporcell/thermal.hpp"

using namespace vaporcell;
namespace fs = std::filesystem;

namespace {

struct Outcome {
  bool pass = true;
  std::ostringstream detail;

  void expect(bool ok, const std::string& what) {
    if (!ok) {
      pass = false;
      detail << " [failed: " << what << "]";
    }
  }
};

std::string fmt(double v, int digits = 4) {
  std::ostringstream os;
  os << std::setprecision(digits) << v;
  return os.str();
}

Eigen::VectorXd to_vec(const std::vector<double>& v) {
  return Eigen::Map<const Eigen::VectorXd>(v.data(), static_cast<Eigen::Index>(v.size()));
}

// ---------------------------------------------------------------------------

void absorption_round_trip(Outcome& o) {
  lineshape::AbsorptionParams truth;
  truth.linewidth_ghz = 16.38;
  truth.atomic_density = 1.7e18;
  truth.center_shift_ghz = -0.9;
  const auto lines = lineshape::weighted_lines(truth);
  const Spectrum clean = lineshape::synthesize(truth, lines, 60.0, 601);

  const auto fit = lineshape::fit_absorption(clean, lineshape::initial_guess(clean, {}), lines);
  const double err0 = std::abs(fit.params.linewidth_ghz / 16.38 - 1.0);
  o.expect(err0 < 1e-3, "noiseless linewidth within 0.1%");

  double worst = 0.0;
  for (std::uint64_t seed = 1; seed <= 100; ++seed) {
    std::mt19937_64 rng(seed);
    std::normal_distribution<double> g(0.0, 0.01);
    Spectrum s = clean;
    for (auto& v : s.y) v *= 1.0 + g(rng);
    const auto f = lineshape::fit_absorption(s, lineshape::initial_guess(s, {}), lines);
    worst = std::max(worst, std::abs(f.params.linewidth_ghz / 16.38 - 1.0));
  }
  o.expect(worst < 0.02, "1% noise linewidth within 2% for 100 seeds");
  o.detail << "noiseless err " << fmt(err0 * 100) << "%, worst noisy err " << fmt(worst * 100) << "%";
}

void buffer_density(Outcome& o) {
  const double amg = lineshape::buffer_density_from_linewidth(16.38, atomic::AtomicData::defaults().buffer_gas("N2"));
  o.expect(std::abs(amg - 0.92) <= 1e-6, "0.92 amg within 1e-6");
  o.detail << "16.38 GHz -> " << fmt(amg, 12) << " amg";
}

void larmor_peaks(Outcome& o) {
  const auto& data = atomic::AtomicData::defaults();
  const double f85 = sns::larmor_frequency_khz(data.isotope("Rb85"), 10.0);
  const double f87 = sns::larmor_frequency_khz(data.isotope("Rb87"), 10.0);
  o.expect(std::abs(f85 - 46.7) <= 1.0 && std::abs(f87 - 70.0) <= 1.0, "predicted peaks near 46.7 and 70.0 kHz");
  o.expect(std::abs(f85 - 47.0) <= 1.0 && std::abs(f87 - 70.0) <= 1.0, "bracket the quoted 47 and 70 kHz");

  const double tau = 1.0 / (2.0 * std::numbers::pi * 1e3);
  const auto ts = sns::simulate_spin_noise(10.0, 500e3, sns::natural_rubidium_sources(10.0, tau, 1.0), 20240917);
  sigproc::WelchOptions w;
  w.segment_length = 5000;
  const auto psd = sigproc::welch_asd(ts, w);
  Spectrum band;
  for (std::size_t k = 0; k < psd.f.size(); ++k) {
    const double f = psd.f[k] / 1e3;
    if (f < 20.0 || f > 100.0) continue;
    band.x.push_back(f);
    band.y.push_back(psd.asd[k] * psd.asd[k] * 1e3);
  }
  const auto fit = sns::fit_sns(band, sns::natural_rubidium_model(10.0, 1.5, 0.8, 0.0));
  const double g85 = fit.model.peaks[0].larmor_khz;
  const double g87 = fit.model.peaks[1].larmor_khz;
  o.expect(std::abs(g85 - f85) <= 0.5 && std::abs(g87 - f87) <= 0.5, "10 s record re-fits within 0.5 kHz");
  o.detail << "predicted " << fmt(f85, 5) << "/" << fmt(f87, 5) << " kHz, fitted " << fmt(g85, 5) << "/"
           << fmt(g87, 5) << " kHz";
}

void hanle_fit(Outcome& o) {
  const hanle::HanleParams truth{1.0, 10.5, 0.0, 0.0, 0.0, 10.5};
  double worst = 0.0;
  for (std::uint64_t seed = 1; seed <= 20; ++seed) {
    std::mt19937_64 rng(seed);
    std::normal_distribution<double> g(0.0, 0.01);
    Spectrum in, quad;
    for (int i = 0; i <= 240; ++i) {
      const double bx = -60.0 + 0.5 * i;
      in.x.push_back(bx);
      quad.x.push_back(bx);
      in.y.push_back(hanle::in_phase(bx, truth) + g(rng) * truth.a0);
      quad.y.push_back(hanle::out_of_phase(bx, truth) + g(rng) * truth.a1 / (2.0 * truth.delta_b_nt));
    }
    const auto fit = hanle::fit_zero_field_resonance(in, quad, hanle::initial_guess(in, quad));
    worst = std::max(worst, std::abs(fit.params.delta_b_nt / 10.5 - 1.0));
  }
  const double rate = hanle::relaxation_from_linewidth(10.5);
  o.expect(worst < 0.02, "linewidth within 2%");
  o.expect(std::abs(rate - 1849.0) < 1.0, "relaxation 1849 /s");
  o.expect(std::abs(rate / 1800.0 - 1.0) < 0.05, "within 5% of 1800 /s");
  o.detail << "worst linewidth err " << fmt(worst * 100) << "% over 20 seeds, relaxation " << fmt(rate, 6) << " /s";
}

void bloch_consistency(Outcome& o) {
  hanle::BlochConfig c;
  c.pumping_rate = 900.0;
  c.relaxation_rate = 900.0;
  const double hwhm = (c.pumping_rate + c.relaxation_rate) / c.gyromagnetic;
  std::vector<double> bx;
  for (int i = 0; i <= 60; ++i) bx.push_back(-60.0 + 2.0 * i);
  Spectrum s;
  s.x = bx;
  s.y = hanle::steady_state_sweep(c, bx);
  const auto fit = hanle::fit_in_phase(s, hanle::HanleParams{0.2, 0.0, 0.0, 0.0, 1.0, 8.0});
  const double err = std::abs(fit.params.delta_b_nt / hwhm - 1.0);
  o.expect(err < 0.01, "HWHM within 1% of (R_op+R_rel)/gamma");
  const auto ss = hanle::steady_state_spin(900.0, 900.0, c.gyromagnetic, {0.0, 0.0, 0.0});
  const double integrated = hanle::steady_state_sweep(c, std::vector<double>{0.0})[0];
  o.expect(ss[2] == 0.25, "closed-form Sz(0) = 0.25");
  o.expect(std::abs(integrated - 0.25) < 1e-9, "integrated Sz(0) = 0.25");
  o.detail << "HWHM " << fmt(fit.params.delta_b_nt, 6) << " nT vs " << fmt(hwhm, 6) << " nT, Sz(0) "
           << fmt(integrated, 10) << " (50% of max)";
}

hanle::BlochConfig operating_point(double duration) {
  hanle::BlochConfig c;
  c.pumping_rate = 900.0;
  c.relaxation_rate = 900.0;
  c.sample_rate = 100e3;
  c.duration = duration;
  return c;
}

sigproc::LockInOptions lock_in_options(double phase) {
  sigproc::LockInOptions o;
  o.ref_freq = 890.0;
  o.ref_phase = phase;
  o.lp_cutoff = 300.0;
  o.lp_poles = 2;
  return o;
}

std::pair<double, double> demodulated_means(double test_field, double phase) {
  const auto tr = hanle::modulated_response(operating_point(0.1), 890.0, 160.0, test_field);
  const auto d = sigproc::lock_in(tr.transmission, lock_in_options(phase));
  return {sigproc::settled_mean(d.in_phase, 0.5, 1.0 / 890.0), sigproc::settled_mean(d.quadrature, 0.5, 1.0 / 890.0)};
}

double calibrated_phase() {
  const auto [x, y] = demodulated_means(1.0, 0.0);
  return sigproc::quadrature_phase(x, y, 0.0);
}

void modulation_linearity(Outcome& o) {
  const double phase = calibrated_phase();
  std::vector<double> b, q;
  for (int i = -4; i <= 4; ++i) {
    b.push_back(0.5 * i);
    q.push_back(demodulated_means(b.back(), phase).second);
  }
  const auto line = fitkit::fit_line(b, q, false);
  double full = 0.0;
  for (double v : q) full = std::max(full, std::abs(v));
  const double zero = std::abs(q[4]);
  o.expect(line.r_squared > 0.999, "R^2 > 0.999 over +/-2 nT");
  o.expect(zero < 0.01 * full, "zero-field quadrature below 1% of full scale");
  o.detail << "R^2 " << fmt(line.r_squared, 7) << ", slope " << fmt(line.slope, 5) << " V/nT, |Q(0)|/full "
           << fmt(zero / full, 3);
}

struct NoiseRun {
  double field_noise_ft = 0.0;
  double electronic_noise_ft = 0.0;
};

double sensitivity_floor(const NoiseRun& cfg, double slope, double phase, std::uint64_t seed) {
  const double fs = 100e3;
  const double duration = 60.0;
  const auto c = operating_point(duration);
  const auto n = static_cast<std::size_t>(std::llround(duration * fs)) + 2;
  hanle::BlochTrace tr;
  if (cfg.field_noise_ft > 0.0) {
    const auto raw = sigproc::white_noise(n, fs, cfg.field_noise_ft * 1e-6, seed);
    const auto bn = sigproc::apply_response(raw, fs, [](double f) { return f <= 400.0 ? 1.0 : 0.0; });
    tr = hanle::modulated_response(c, 890.0, 160.0, 0.0, bn);
  } else {
    tr = hanle::modulated_response(c, 890.0, 160.0, 0.0);
  }
  if (cfg.electronic_noise_ft > 0.0) {
    const double v = cfg.electronic_noise_ft * 1e-6 * slope / std::sqrt(2.0);
    const auto e = sigproc::white_noise(tr.transmission.size(), fs, v, seed + 1);
    for (std::size_t i = 0; i < e.size(); ++i) tr.transmission.y[i] += e[i];
  }
  const auto d = sigproc::lock_in(tr.transmission, lock_in_options(phase));
  TimeSeries q = sigproc::decimate_mean(d.quadrature, 50);
  q.t.erase(q.t.begin(), q.t.begin() + 200);
  q.y.erase(q.y.begin(), q.y.begin() + 200);
  sigproc::WelchOptions w;
  w.segment_length = 2000;
  sigproc::CalibrationInputs cal;
  cal.slope_v_per_nt = slope;
  cal.response = sigproc::cascaded_response({286.5, 300.0, 300.0});
  return sigproc::noise_floor(sigproc::sensitivity(sigproc::welch_asd(q, w), cal), 10.0, 100.0);
}

void sensitivity_pipeline(Outcome& o) {
  const double phase = calibrated_phase();
  std::vector<double> b, q;
  for (int i = -2; i <= 2; ++i) {
    b.push_back(0.5 * i);
    q.push_back(demodulated_means(b.back(), phase).second);
  }
  const double slope = fitkit::fit_line(b, q, false).slope;
  // Field and electronic contributions add in quadrature to the 12 fT target.
  const double full = sensitivity_floor({std::sqrt(144.0 - 4.0), 2.0}, slope, phase, 20240917);
  const double electronic = sensitivity_floor({0.0, 2.0}, slope, phase, 20240918);
  o.expect(std::abs(full / 12.0 - 1.0) <= 0.1, "floor 12 fT/rtHz within 10%");
  o.expect(std::abs(electronic / 2.0 - 1.0) <= 0.1, "electronic floor 2 fT/rtHz within 10%");
  o.detail << "floor " << fmt(full) << " fT/rtHz, electronic " << fmt(electronic) << " fT/rtHz (10-100 Hz)";
}

void sas_positions(Outcome& o) {
  bool exact = true;
  for (const char* name : {"Rb85", "Rb87"}) {
    const auto& iso = atomic::get_isotope(name);
    const auto lines = atomic::d1_transition_lines(iso);
    for (const auto& f : sas::sas_feature_frequencies(iso)) {
      if (f.kind != sas::FeatureKind::crossover) continue;
      std::vector<double> parents;
      for (const auto& l : lines) {
        if (l.ground_f == f.ground_f) parents.push_back(l.center_offset_ghz);
      }
      exact = exact && parents.size() == 2 && f.frequency_ghz == 0.5 * (parents[0] + parents[1]);
    }
  }
  o.expect(exact, "crossovers at the exact parent mean");

  const auto cfg = sas::SasConfig::natural_rubidium();
  const Spectrum s = sas::sas_spectrum(cfg);
  const auto peaks = sas::find_sharp_peaks(s, 10, 1e-4);
  const auto features = sas::configured_features(cfg);
  double worst = 0.0;
  for (const auto& f : features) {
    double best = 1e9;
    for (double p : peaks) best = std::min(best, std::abs(p - f.frequency_ghz));
    worst = std::max(worst, best);
  }
  o.expect(worst <= cfg.grid_step_ghz, "every feature detected within one grid step");
  o.detail << features.size() << " features, " << peaks.size() << " peaks, worst offset " << fmt(worst * 1e3, 3)
           << " MHz (step " << fmt(cfg.grid_step_ghz * 1e3, 3) << " MHz)";
}

void jacobians(Outcome& o) {
  std::ostringstream parts;

  lineshape::AbsorptionParams p;
  p.center_shift_ghz = 0.4;
  const auto lines = lineshape::weighted_lines(p);
  std::vector<double> nu;
  for (int i = 0; i <= 160; ++i) nu.push_back(-40.0 + 0.5 * i);
  const double n_scale = 1e18;
  auto unpack_abs = [&](const Eigen::VectorXd& q) {
    auto t = p;
    t.atomic_density = q(0) * n_scale;
    t.linewidth_ghz = q(1);
    t.center_shift_ghz = q(2);
    return t;
  };
  const double e1 = fitkit::check_jacobian(
      [&](const Eigen::VectorXd& q, std::span<const double> x) { return to_vec(lineshape::optical_depth(x, unpack_abs(q), lines)); },
      [&](const Eigen::VectorXd& q, std::span<const double> x) {
        Eigen::MatrixXd j = lineshape::optical_depth_jacobian(x, unpack_abs(q), lines);
        j.col(0) *= n_scale;
        return j;
      },
      Eigen::Vector3d(p.atomic_density / n_scale, p.linewidth_ghz, p.center_shift_ghz), nu);

  std::vector<double> bx;
  for (int i = 0; i <= 120; ++i) bx.push_back(-60.0 + i);
  auto eval = [](auto fn, const hanle::HanleParams& hp, std::span<const double> x) {
    Eigen::VectorXd y(static_cast<Eigen::Index>(x.size()));
    for (std::size_t i = 0; i < x.size(); ++i) y(static_cast<Eigen::Index>(i)) = fn(x[i], hp);
    return y;
  };
  const double e2 = fitkit::check_jacobian(
      [&](const Eigen::VectorXd& q, std::span<const double> x) {
        return eval(hanle::in_phase, hanle::HanleParams{q(0), 0.0, q(1), 0.0, q(2), q(3)}, x);
      },
      [](const Eigen::VectorXd& q, std::span<const double> x) {
        return hanle::in_phase_jacobian(x, hanle::HanleParams{q(0), 0.0, q(1), 0.0, q(2), q(3)});
      },
      Eigen::Vector4d(1.0, 0.05, 0.7, 10.5), bx);
  const double e3 = fitkit::check_jacobian(
      [&](const Eigen::VectorXd& q, std::span<const double> x) {
        return eval(hanle::out_of_phase, hanle::HanleParams{0.0, q(0), 0.0, q(1), q(2), q(3)}, x);
      },
      [](const Eigen::VectorXd& q, std::span<const double> x) {
        return hanle::out_of_phase_jacobian(x, hanle::HanleParams{0.0, q(0), 0.0, q(1), q(2), q(3)});
      },
      Eigen::Vector4d(10.5, -0.02, 0.7, 10.5), bx);

  const auto model = sns::natural_rubidium_model(10.0, 1.0, 2.0, 0.01);
  auto unpack_sns = [&](const Eigen::VectorXd& q) {
    auto m = model;
    for (std::size_t k = 0; k < m.peaks.size(); ++k) {
      m.peaks[k].larmor_khz = q(static_cast<Eigen::Index>(3 * k));
      m.peaks[k].hwhm_khz = q(static_cast<Eigen::Index>(3 * k + 1));
      m.peaks[k].area = q(static_cast<Eigen::Index>(3 * k + 2));
    }
    m.background = q(q.size() - 1);
    return m;
  };
  std::vector<double> f;
  for (int i = 0; i <= 400; ++i) f.push_back(20.0 + 0.2 * i);
  Eigen::VectorXd q(7);
  q << model.peaks[0].larmor_khz, model.peaks[0].hwhm_khz, model.peaks[0].area, model.peaks[1].larmor_khz,
      model.peaks[1].hwhm_khz, model.peaks[1].area, model.background;
  const double e4 = fitkit::check_jacobian(
      [&](const Eigen::VectorXd& v, std::span<const double> x) { return to_vec(sns::sns_psd(x, unpack_sns(v)).y); },
      [&](const Eigen::VectorXd& v, std::span<const double> x) { return sns::sns_psd_jacobian(x, unpack_sns(v)); }, q, f);

  o.expect(e1 < 1e-6, "optical depth");
  o.expect(e2 < 1e-6, "in-phase resonance");
  o.expect(e3 < 1e-6, "quadrature resonance");
  o.expect(e4 < 1e-6, "spin-noise model");
  o.detail << "max rel err OD " << fmt(e1, 2) << ", in-phase " << fmt(e2, 2) << ", quadrature " << fmt(e3, 2)
           << ", SNS " << fmt(e4, 2);
}

void thermal_control(Outcome& o) {
  const thermal::ThermalPlant plant;
  const thermal::PidGains gains;
  const auto run = thermal::simulate_pid(plant, gains, 3000.0, 0.1, 20240917);
  const auto st = thermal::settling_stats(run.temperature, gains.setpoint_k, 0.05, 1500.0);
  o.expect(st.settling_time_s >= 0.0 && st.settling_time_s <= 1000.0, "settles within 1000 s");
  o.expect(st.peak_fluctuation_k <= 0.010, "holds +/-10 mK");

  std::mt19937_64 rng(7);
  std::normal_distribution<double> g(0.0, 0.01);
  std::vector<double> current, field;
  for (int k = 0; k <= 50; ++k) {
    current.push_back(2.0 * k);
    field.push_back(thermal::residual_field(current.back(), 0.134) + g(rng));
  }
  const auto rf = thermal::fit_residual_field(current, field);
  o.expect(std::abs(rf.coefficient_nt_per_ma / 0.134 - 1.0) < 0.01, "residual field within 1%");

  auto iv = [](double r) {
    std::vector<std::pair<double, double>> v;
    for (int k = 1; k <= 10; ++k) v.emplace_back(r * 1e-4 * k, 1e-4 * k);
    return thermal::resistance_from_iv(v).ohms;
  };
  const double heater = iv(505.0);
  const double sensor = iv(10.5e3);
  o.expect(std::abs(heater - 505.0) <= 1e-9 * 505.0 && std::abs(sensor - 10.5e3) <= 1e-9 * 10.5e3,
           "I-V resistances exact");
  o.detail << "settled at " << fmt(st.settling_time_s) << " s, peak " << fmt(st.peak_fluctuation_k * 1e3, 3)
           << " mK, residual " << fmt(rf.coefficient_nt_per_ma, 5) << " nT/mA, R " << fmt(heater, 10) << " / "
           << fmt(sensor, 10) << " ohm";
}

std::string slurp(const fs::path& p) {
  std::ifstream is(p, std::ios::binary);
  return {std::istreambuf_iterator<char>(is), {}};
}

void determinism(Outcome& o) {
  const std::vector<std::vector<std::string>> goldens{
      {"simulate-absorption", "--noise", "0.01", "--out", "abs.csv"},
      {"fit-absorption", "--in", "abs.csv", "--out", "absfit.csv"},
      {"simulate-sas", "--out", "sas.csv", "--features-out", "features.csv"},
      {"simulate-sns", "--duration-s", "1", "--out", "sns.csv", "--psd-out", "snspsd.csv"},
      {"fit-sns", "--in", "sns.csv", "--out", "snsfit.csv"},
      {"simulate-hanle", "--noise", "0.01", "--in-phase-out", "ip.csv", "--quadrature-out", "q.csv"},
      {"fit-hanle", "--in-phase", "ip.csv", "--quadrature", "q.csv"},
      {"simulate-modulated", "--duration-s", "1", "--field-noise-ft", "12", "--electronic-noise-v", "1e-8", "--out",
       "mod.csv"},
      {"demodulate", "--in", "mod.csv", "--out", "demod.csv"},
      {"calibrate-sensitivity", "--timeseries", "demod.csv", "--slope", "0.0028", "--segment-length", "500", "--out",
       "sens.csv"},
      {"simulate-thermal", "--duration-s", "500", "--out", "thermal.csv"},
  };
  const fs::path root = fs::temp_directory_path() / "vaporcell_acceptance";
  std::size_t files = 0;
  bool identical = true;
  std::vector<std::string> summaries[2];
  for (int pass = 0; pass < 2; ++pass) {
    const fs::path dir = root / (pass == 0 ? "a" : "b");
    fs::remove_all(dir);
    fs::create_directories(dir);
    for (const auto& cmd : goldens) {
      std::vector<std::string> args{"--config", VAPORCELL_TEST_CONFIG, "--seed", "42"};
      for (const auto& a : cmd) args.push_back(a.ends_with(".csv") ? (dir / a).string() : a);
      std::ostringstream out, err;
      const int code = cli::run(args, out, err);
      if (code != 0) {
        o.expect(false, cmd.front() + " exited " + std::to_string(code) + ": " + err.str());
        return;
      }
      summaries[pass].push_back(out.str());
    }
  }
  identical = summaries[0] == summaries[1];
  for (const auto& entry : fs::directory_iterator(root / "a")) {
    ++files;
    identical = identical && slurp(entry.path()) == slurp(root / "b" / entry.path().filename());
  }
  o.expect(identical, "byte-identical outputs");
  o.detail << goldens.size() << " commands, " << files << " files compared";
}

}  // namespace

int main() {
  struct Criterion {
    int id;
    const char* name;
    std::function<void(Outcome&)> run;
    double limit_s;  // 0 means no runtime bound
  };
  const std::vector<Criterion> criteria{
      {1, "absorption round-trip", absorption_round_trip, 5.0},
      {2, "buffer density", buffer_density, 0.0},
      {3, "Larmor peaks", larmor_peaks, 30.0},
      {4, "zero-field resonance fit", hanle_fit, 0.0},
      {5, "Bloch consistency", bloch_consistency, 0.0},
      {6, "modulated magnetometer linearity", modulation_linearity, 0.0},
      {7, "sensitivity pipeline", sensitivity_pipeline, 60.0},
      {8, "SAS positions", sas_positions, 0.0},
      {9, "Jacobian checks", jacobians, 0.0},
      {10, "thermal control", thermal_control, 0.0},
      {11, "determinism", determinism, 0.0},
  };
  int failures = 0;
  for (const auto& c : criteria) {
    Outcome o;
    const auto t0 = std::chrono::steady_clock::now();
    try {
      c.run(o);
    } catch (const std::exception& e) {
      o.expect(false, std::string("exception: ") + e.what());
    }
    const double elapsed = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
    if (c.limit_s > 0.0) o.expect(elapsed < c.limit_s, "runtime under " + fmt(c.limit_s) + " s");
    if (!o.pass) ++failures;
    std::cout << (o.pass ? "PASS" : "FAIL") << "  " << std::setw(2) << c.id << ". " << c.name << ": "
              << o.detail.str() << " (" << std::fixed << std::setprecision(2) << elapsed << " s)"
              << std::defaultfloat << std::endl;
  }
  std::cout << (criteria.size() - static_cast<std::size_t>(failures)) << "/" << criteria.size()
            << " acceptance criteria passed" << std::endl;
  return failures == 0 ? 0 : 1;
}
