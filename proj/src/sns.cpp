#include "vaporcell/sns.hpp"

#include <cmath>
#include <complex>
#include <numbers>
#include <random>

#include "vaporcell/errors.hpp"

namespace vaporcell::sns {
namespace {

constexpr double kPi = std::numbers::pi;

SnsModel unpack(const Eigen::VectorXd& q, const SnsModel& shape) {
  SnsModel m = shape;
  for (std::size_t k = 0; k < m.peaks.size(); ++k) {
    const auto b = static_cast<Eigen::Index>(3 * k);
    m.peaks[k].larmor_khz = q(b);
    m.peaks[k].hwhm_khz = std::exp(q(b + 1));
    m.peaks[k].area = std::exp(q(b + 2));
  }
  m.background = q(q.size() - 1);
  return m;
}

}  // namespace

void SnsModel::validate() const {
  require(background >= 0.0, "sns model: background must be non-negative");
  for (const auto& p : peaks) {
    require(p.larmor_khz >= 0.0 && p.hwhm_khz > 0.0 && p.area >= 0.0,
            "sns model: frequencies and areas must be non-negative, widths positive");
  }
}

double larmor_frequency_khz(const atomic::IsotopeSpec& isotope, double field_ut) {
  require(field_ut >= 0.0, "larmor frequency: field must be non-negative");
  return isotope.gyromagnetic_ratio_khz_per_ut * field_ut;
}

SnsModel natural_rubidium_model(double field_ut, double hwhm_khz, double total_area, double background) {
  SnsModel m;
  const auto& data = atomic::AtomicData::defaults();
  for (const auto& name : data.isotope_names()) {
    const auto& iso = data.isotope(name);
    m.peaks.push_back({name, larmor_frequency_khz(iso, field_ut), hwhm_khz, total_area * iso.abundance});
  }
  m.background = background;
  m.validate();
  return m;
}

double sns_psd_value(double f_khz, const SnsModel& model) {
  double v = model.background;
  for (const auto& p : model.peaks) {
    const double d = f_khz - p.larmor_khz;
    v += p.area * (p.hwhm_khz / kPi) / (d * d + p.hwhm_khz * p.hwhm_khz);
  }
  return v;
}

Spectrum sns_psd_serial(std::span<const double> f_khz, const SnsModel& model) {
  model.validate();
  Spectrum s;
  s.x.assign(f_khz.begin(), f_khz.end());
  s.y.resize(f_khz.size());
  s.x_unit = "kHz";
  s.y_unit = "y2/kHz";
  for (std::size_t i = 0; i < f_khz.size(); ++i) s.y[i] = sns_psd_value(f_khz[i], model);
  return s;
}

Spectrum sns_psd(std::span<const double> f_khz, const SnsModel& model) {
  model.validate();
  Spectrum s;
  s.x.assign(f_khz.begin(), f_khz.end());
  s.y.resize(f_khz.size());
  s.x_unit = "kHz";
  s.y_unit = "y2/kHz";
  const auto n = static_cast<std::ptrdiff_t>(f_khz.size());
#pragma omp parallel for schedule(static)
  for (std::ptrdiff_t i = 0; i < n; ++i) s.y[i] = sns_psd_value(f_khz[i], model);
  return s;
}

Eigen::MatrixXd sns_psd_jacobian(std::span<const double> f_khz, const SnsModel& model) {
  const auto cols = static_cast<Eigen::Index>(3 * model.peaks.size() + 1);
  Eigen::MatrixXd jac(static_cast<Eigen::Index>(f_khz.size()), cols);
  for (std::size_t i = 0; i < f_khz.size(); ++i) {
    const auto r = static_cast<Eigen::Index>(i);
    for (std::size_t k = 0; k < model.peaks.size(); ++k) {
      const auto& p = model.peaks[k];
      const auto c = static_cast<Eigen::Index>(3 * k);
      const double d = f_khz[i] - p.larmor_khz;
      const double h = p.hwhm_khz;
      const double den = d * d + h * h;
      jac(r, c) = p.area * (h / kPi) * 2.0 * d / (den * den);
      jac(r, c + 1) = p.area / kPi * (d * d - h * h) / (den * den);
      jac(r, c + 2) = (h / kPi) / den;
    }
    jac(r, cols - 1) = 1.0;
  }
  return jac;
}

TimeSeries simulate_spin_noise(double duration_s, double fs_hz, std::span<const NoiseSource> sources,
                               std::uint64_t seed) {
  require(duration_s > 0.0 && fs_hz > 0.0, "spin noise: duration and sample rate must be positive");
  double max_larmor = 0.0;
  for (const auto& s : sources) {
    require(s.larmor_hz >= 0.0 && s.correlation_time_s > 0.0 && s.rms >= 0.0, "spin noise: invalid source");
    max_larmor = std::max(max_larmor, s.larmor_hz);
  }
  if (!(fs_hz > 4.0 * max_larmor)) {
    fail(ErrorCode::undersampling, "spin noise: sample rate must exceed 4x the largest Larmor frequency");
  }
  const auto n = static_cast<std::size_t>(std::llround(duration_s * fs_hz));
  const double dt = 1.0 / fs_hz;
  std::vector<double> y(n, 0.0);
  std::mt19937_64 rng(seed);
  std::normal_distribution<double> gauss(0.0, 1.0);
  for (const auto& src : sources) {
    if (src.rms == 0.0) continue;
    const double decay = std::exp(-dt / src.correlation_time_s);
    const std::complex<double> step = decay * std::polar(1.0, 2.0 * kPi * src.larmor_hz * dt);
    const double innovation = src.rms * std::sqrt(1.0 - decay * decay);
    // Start from the stationary distribution: each quadrature has variance rms^2.
    std::complex<double> z(src.rms * gauss(rng), src.rms * gauss(rng));
    for (std::size_t k = 0; k < n; ++k) {
      y[k] += z.real();
      const double a = gauss(rng);
      const double b = gauss(rng);
      z = step * z + innovation * std::complex<double>(a, b);
    }
  }
  return TimeSeries::uniform(std::move(y), fs_hz, "rad");
}

std::vector<NoiseSource> natural_rubidium_sources(double field_ut, double correlation_time_s, double total_rms) {
  std::vector<NoiseSource> out;
  const auto& data = atomic::AtomicData::defaults();
  for (const auto& name : data.isotope_names()) {
    const auto& iso = data.isotope(name);
    out.push_back({larmor_frequency_khz(iso, field_ut) * 1e3, correlation_time_s,
                   total_rms * std::sqrt(iso.abundance)});
  }
  return out;
}

SnsFit fit_sns(const Spectrum& psd, const SnsModel& initial, const fitkit::FitOptions& options) {
  psd.validate();
  initial.validate();
  require(!initial.peaks.empty(), "fit_sns: no peaks in the initial model");
  const double df = (psd.x.back() - psd.x.front()) / static_cast<double>(psd.size() - 1);
  for (const auto& p : initial.peaks) {
    require(p.larmor_khz >= psd.x.front() && p.larmor_khz <= psd.x.back(), "fit_sns: peak outside the PSD grid");
    require(df <= p.hwhm_khz / 5.0 * (1.0 + 1e-9), "fit_sns: need at least 5 points per hwhm");
    require(p.area > 0.0, "fit_sns: initial areas must be positive");
  }

  const auto np = static_cast<Eigen::Index>(3 * initial.peaks.size() + 1);
  Eigen::VectorXd q0(np);
  for (std::size_t k = 0; k < initial.peaks.size(); ++k) {
    const auto b = static_cast<Eigen::Index>(3 * k);
    q0(b) = initial.peaks[k].larmor_khz;
    q0(b + 1) = std::log(initial.peaks[k].hwhm_khz);
    q0(b + 2) = std::log(initial.peaks[k].area);
  }
  q0(np - 1) = initial.background;

  fitkit::ModelFn model = [&](const Eigen::VectorXd& q, std::span<const double> x) {
    const SnsModel m = unpack(q, initial);
    Eigen::VectorXd f(static_cast<Eigen::Index>(x.size()));
    for (std::size_t i = 0; i < x.size(); ++i) f(static_cast<Eigen::Index>(i)) = sns_psd_value(x[i], m);
    return f;
  };
  fitkit::JacobianFn jacobian = [&](const Eigen::VectorXd& q, std::span<const double> x) {
    const SnsModel m = unpack(q, initial);
    Eigen::MatrixXd jac = sns_psd_jacobian(x, m);
    for (std::size_t k = 0; k < m.peaks.size(); ++k) {
      const auto b = static_cast<Eigen::Index>(3 * k);
      jac.col(b + 1) *= m.peaks[k].hwhm_khz;
      jac.col(b + 2) *= m.peaks[k].area;
    }
    return jac;
  };

  fitkit::FitResult fit = fitkit::least_squares(model, jacobian, psd.x, psd.y, {}, q0, options);
  if (!fit.converged) throw NonConvergenceError("fit_sns: no convergence", fit.ssr_trace);

  SnsFit out;
  out.model = unpack(fit.params, initial);
  Eigen::VectorXd d = Eigen::VectorXd::Ones(np);
  for (std::size_t k = 0; k < out.model.peaks.size(); ++k) {
    const auto b = static_cast<Eigen::Index>(3 * k);
    d(b + 1) = out.model.peaks[k].hwhm_khz;
    d(b + 2) = out.model.peaks[k].area;
    fit.params(b + 1) = out.model.peaks[k].hwhm_khz;
    fit.params(b + 2) = out.model.peaks[k].area;
  }
  fit.covariance = d.asDiagonal() * fit.covariance * d.asDiagonal();
  out.fit = std::move(fit);
  for (std::size_t a = 0; a < out.model.peaks.size(); ++a) {
    for (std::size_t b = a + 1; b < out.model.peaks.size(); ++b) {
      const auto& pa = out.model.peaks[a];
      const auto& pb = out.model.peaks[b];
      if (std::abs(pa.larmor_khz - pb.larmor_khz) < pa.hwhm_khz + pb.hwhm_khz) out.unresolved_peaks = true;
    }
  }
  return out;
}

}  // namespace vaporcell::sns
