#include "vaporcell/lineshape.hpp"

#include <algorithm>
#include <cmath>
#include <complex>
#include <numbers>

#include "vaporcell/errors.hpp"

namespace vaporcell::lineshape {
namespace {

constexpr double kGhzToHz = 1e9;

double line_sum(double nu, const AbsorptionParams& p, std::span<const atomic::TransitionLine> lines) {
  double sum = 0.0;
  const bool voigt = p.doppler_fwhm_ghz > 0.0;
  for (const auto& line : lines) {
    const double detuning = nu - p.center_shift_ghz - line.center_offset_ghz;
    sum += line.relative_strength * (voigt ? voigt_term(detuning, p.linewidth_ghz, p.doppler_fwhm_ghz)
                                           : lorentz_term(detuning, p.linewidth_ghz));
  }
  return sum;
}

// Parameter vector used inside the solver.
Eigen::VectorXd to_internal(const AbsorptionParams& p, bool log_param) {
  Eigen::VectorXd q(3);
  q << (log_param ? std::log(p.atomic_density) : p.atomic_density),
      (log_param ? std::log(p.linewidth_ghz) : p.linewidth_ghz), p.center_shift_ghz;
  return q;
}

AbsorptionParams from_internal(const Eigen::VectorXd& q, AbsorptionParams base, bool log_param) {
  base.atomic_density = log_param ? std::exp(q(0)) : q(0);
  base.linewidth_ghz = log_param ? std::exp(q(1)) : q(1);
  base.center_shift_ghz = q(2);
  return base;
}

}  // namespace

void AbsorptionParams::validate() const {
  require(atomic_density > 0.0, "absorption: atomic density must be positive");
  require(linewidth_ghz > 0.0, "absorption: linewidth must be positive");
  require(path_length_mm > 0.0, "absorption: path length must be positive");
  require(oscillator_strength > 0.0, "absorption: oscillator strength must be positive");
  require(doppler_fwhm_ghz >= 0.0, "absorption: Doppler width must be non-negative");
  require(!isotope_weights.empty(), "absorption: no isotope weights");
  double total = 0.0;
  for (const auto& [name, w] : isotope_weights) {
    require(w >= 0.0, "absorption: isotope weights must be non-negative");
    total += w;
  }
  require(std::abs(total - 1.0) <= 1e-9, "absorption: isotope weights must sum to 1");
}

double od_prefactor(const AbsorptionParams& p) {
  return p.atomic_density * kClassicalElectronRadius * kSpeedOfLight * p.oscillator_strength *
         (p.path_length_mm * 1e-3) / kGhzToHz;
}

std::vector<atomic::TransitionLine> weighted_lines(const AbsorptionParams& p,
                                                   const atomic::AtomicData& data) {
  std::vector<atomic::TransitionLine> out;
  for (const auto& [name, weight] : p.isotope_weights) {
    if (weight == 0.0) continue;
    const auto& iso = data.isotope(name);
    for (auto line : atomic::d1_transition_lines(iso)) {
      line.relative_strength *= weight;
      line.center_offset_ghz += iso.d1_centroid_shift_ghz;
      out.push_back(line);
    }
  }
  return out;
}

double lorentz_term(double detuning, double fwhm) {
  const double h = 0.5 * fwhm;
  return h / (detuning * detuning + h * h);
}

double faddeeva_re(double x, double y) {
  // Humlicek (1982) four-region rational approximation of w(x + iy), written in
  // terms of t = y - ix.
  const std::complex<double> t(y, -x);
  const double s = std::abs(x) + y;
  std::complex<double> w;
  if (s >= 15.0) {
    w = t * 0.5641896 / (0.5 + t * t);
  } else if (s >= 5.5) {
    const auto u = t * t;
    w = t * (1.410474 + u * 0.5641896) / (0.75 + u * (3.0 + u));
  } else if (y >= 0.195 * std::abs(x) - 0.176) {
    w = (16.4955 + t * (20.20933 + t * (11.96482 + t * (3.778987 + t * 0.5642236)))) /
        (16.4955 + t * (38.82363 + t * (39.27121 + t * (21.69274 + t * (6.699398 + t)))));
  } else {
    const auto u = t * t;
    w = std::exp(u) -
        t * (36183.31 - u * (3321.9905 - u * (1540.787 - u * (219.0313 - u * (35.76683 - u * (1.320522 - u * 0.56419)))))) /
            (32066.6 - u * (24322.84 - u * (9022.228 - u * (2186.181 - u * (364.2191 - u * (61.57037 - u * (1.841439 - u)))))));
  }
  return w.real();
}

double voigt_term(double detuning, double lorentz_fwhm, double gauss_fwhm) {
  if (gauss_fwhm <= 0.0) return lorentz_term(detuning, lorentz_fwhm);
  const double sigma = gauss_fwhm / (2.0 * std::sqrt(2.0 * std::numbers::ln2));
  const double scale = sigma * std::numbers::sqrt2;
  const double x = detuning / scale;
  const double y = 0.5 * lorentz_fwhm / scale;
  // pi * Re w / (sigma sqrt(2 pi)) keeps the Lorentzian normalization (area pi).
  return std::numbers::pi * faddeeva_re(x, y) / (sigma * std::sqrt(2.0 * std::numbers::pi));
}

double optical_depth(double nu_ghz, const AbsorptionParams& p,
                     std::span<const atomic::TransitionLine> lines) {
  return od_prefactor(p) * line_sum(nu_ghz, p, lines);
}

std::vector<double> optical_depth_serial(std::span<const double> nu_ghz, const AbsorptionParams& p,
                                         std::span<const atomic::TransitionLine> lines) {
  require(!lines.empty(), "optical_depth: no transition lines");
  const double k = od_prefactor(p);
  std::vector<double> out(nu_ghz.size());
  for (std::size_t i = 0; i < nu_ghz.size(); ++i) out[i] = k * line_sum(nu_ghz[i], p, lines);
  return out;
}

std::vector<double> optical_depth(std::span<const double> nu_ghz, const AbsorptionParams& p,
                                  std::span<const atomic::TransitionLine> lines) {
  require(!lines.empty(), "optical_depth: no transition lines");
  const double k = od_prefactor(p);
  const auto n = static_cast<std::ptrdiff_t>(nu_ghz.size());
  std::vector<double> out(nu_ghz.size());
#pragma omp parallel for schedule(static)
  for (std::ptrdiff_t i = 0; i < n; ++i) out[i] = k * line_sum(nu_ghz[i], p, lines);
  return out;
}

double transmission(double nu_ghz, const AbsorptionParams& p,
                    std::span<const atomic::TransitionLine> lines, double p_in_w) {
  require(p_in_w > 0.0, "transmission: input power must be positive");
  return p_in_w * std::exp(-optical_depth(nu_ghz, p, lines));
}

Eigen::MatrixXd optical_depth_jacobian(std::span<const double> nu_ghz, const AbsorptionParams& p,
                                       std::span<const atomic::TransitionLine> lines) {
  require(p.doppler_fwhm_ghz == 0.0, "optical_depth_jacobian: analytic form is Lorentzian only");
  const double k = od_prefactor(p);
  const double h = 0.5 * p.linewidth_ghz;
  Eigen::MatrixXd jac(static_cast<Eigen::Index>(nu_ghz.size()), 3);
  for (std::size_t i = 0; i < nu_ghz.size(); ++i) {
    double sum = 0.0, d_gamma = 0.0, d_center = 0.0;
    for (const auto& line : lines) {
      const double d = nu_ghz[i] - p.center_shift_ghz - line.center_offset_ghz;
      const double den = d * d + h * h;
      sum += line.relative_strength * h / den;
      d_gamma += line.relative_strength * 0.5 * (d * d - h * h) / (den * den);
      d_center += line.relative_strength * 2.0 * d * h / (den * den);
    }
    const auto r = static_cast<Eigen::Index>(i);
    jac(r, 0) = k / p.atomic_density * sum;
    jac(r, 1) = k * d_gamma;
    jac(r, 2) = k * d_center;
  }
  return jac;
}

Spectrum synthesize(const AbsorptionParams& p, std::span<const atomic::TransitionLine> lines,
                    double half_span_ghz, int points) {
  p.validate();
  require(points >= 2 && half_span_ghz > 0.0, "synthesize: need a positive span and >= 2 points");
  Spectrum s;
  s.x_unit = "GHz";
  s.y_unit = "OD";
  s.x.resize(static_cast<std::size_t>(points));
  for (int i = 0; i < points; ++i) {
    s.x[static_cast<std::size_t>(i)] =
        p.center_shift_ghz - half_span_ghz + 2.0 * half_span_ghz * i / (points - 1);
  }
  s.y = optical_depth(s.x, p, lines);
  return s;
}

AbsorptionParams initial_guess(const Spectrum& data, const AbsorptionParams& base) {
  data.validate();
  const auto peak = static_cast<std::size_t>(std::max_element(data.y.begin(), data.y.end()) - data.y.begin());
  const double top = data.y[peak];
  require(top > 0.0, "initial_guess: spectrum has no absorption");
  std::size_t lo = peak;
  std::size_t hi = peak;
  while (lo > 0 && data.y[lo] > 0.5 * top) --lo;
  while (hi + 1 < data.size() && data.y[hi] > 0.5 * top) ++hi;
  AbsorptionParams p = base;
  p.center_shift_ghz = data.x[peak];
  p.linewidth_ghz = std::max(data.x[hi] - data.x[lo], 2.0 * (data.x[1] - data.x[0]));
  AbsorptionParams unit = p;
  unit.atomic_density = 1.0;
  p.atomic_density = top / (od_prefactor(unit) * 2.0 / p.linewidth_ghz);
  return p;
}

AbsorptionFit fit_absorption(const Spectrum& data, const AbsorptionParams& initial,
                             std::span<const atomic::TransitionLine> lines,
                             const AbsorptionFitOptions& options) {
  data.validate();
  initial.validate();
  require(!lines.empty(), "fit_absorption: no transition lines");
  if (data.size() < 10) fail(ErrorCode::insufficient_data, "fit_absorption: need at least 10 points");
  if (data.x.back() - data.x.front() < options.resolution_ghz) {
    fail(ErrorCode::degenerate_grid, "fit_absorption: grid span is below the requested resolution");
  }

  const bool log_param = options.log_parameterization;
  const std::vector<atomic::TransitionLine> line_copy(lines.begin(), lines.end());
  const bool voigt = initial.doppler_fwhm_ghz > 0.0;

  fitkit::ModelFn model = [&](const Eigen::VectorXd& q, std::span<const double> x) {
    const AbsorptionParams p = from_internal(q, initial, log_param);
    const std::vector<double> od = optical_depth_serial(x, p, line_copy);
    return Eigen::VectorXd(Eigen::Map<const Eigen::VectorXd>(od.data(), static_cast<Eigen::Index>(od.size())));
  };
  fitkit::JacobianFn jacobian;
  if (!voigt) {
    jacobian = [&](const Eigen::VectorXd& q, std::span<const double> x) {
      const AbsorptionParams p = from_internal(q, initial, log_param);
      Eigen::MatrixXd jac = optical_depth_jacobian(x, p, line_copy);
      if (log_param) {
        jac.col(0) *= p.atomic_density;
        jac.col(1) *= p.linewidth_ghz;
      }
      return jac;
    };
  }

  fitkit::FitResult fit = fitkit::least_squares(model, jacobian, data.x, data.y, {},
                                                to_internal(initial, log_param), options.solver);
  if (!fit.converged) {
    throw NonConvergenceError("fit_absorption: no convergence after " +
                                  std::to_string(fit.iterations) + " iterations",
                              fit.ssr_trace);
  }

  AbsorptionFit out;
  out.params = from_internal(fit.params, initial, log_param);
  if (log_param) {
    Eigen::Vector3d d(out.params.atomic_density, out.params.linewidth_ghz, 1.0);
    fit.covariance = d.asDiagonal() * fit.covariance * d.asDiagonal();
    fit.params = Eigen::Vector3d(out.params.atomic_density, out.params.linewidth_ghz,
                                 out.params.center_shift_ghz);
  }
  out.fit = std::move(fit);
  return out;
}

double buffer_density_from_linewidth(double linewidth_ghz,
                                     const atomic::BufferGasCoefficients& coeffs) {
  require(linewidth_ghz > 0.0, "buffer density: linewidth must be positive");
  require(coeffs.broadening_ghz_per_amg > 0.0, "buffer density: coefficient must be positive");
  return linewidth_ghz / coeffs.broadening_ghz_per_amg;
}

DriftReport linewidth_drift_report(std::span<const std::pair<double, double>> day_linewidth,
                                   double max_drift_fraction) {
  if (day_linewidth.size() < 2) fail(ErrorCode::insufficient_data, "drift report: need at least 2 samples");
  require(max_drift_fraction > 0.0, "drift report: threshold must be positive");
  std::vector<double> days, gammas;
  for (std::size_t i = 0; i < day_linewidth.size(); ++i) {
    if (i > 0) require(day_linewidth[i].first > day_linewidth[i - 1].first, "drift report: days must increase");
    days.push_back(day_linewidth[i].first);
    gammas.push_back(day_linewidth[i].second);
  }
  const fitkit::LineFit line = fitkit::fit_line(days, gammas, false);

  DriftReport r;
  r.slope_ghz_per_day = line.slope;
  r.intercept_ghz = line.intercept;
  double mean = 0.0;
  for (double g : gammas) mean += g;
  mean /= static_cast<double>(gammas.size());
  r.mean_linewidth_ghz = mean;
  for (double g : gammas) r.max_deviation_ghz = std::max(r.max_deviation_ghz, std::abs(g - mean));
  r.trend_drift_ghz = std::abs(line.slope) * (days.back() - days.front());
  r.threshold_ghz = max_drift_fraction * mean;
  r.pass = r.trend_drift_ghz <= r.threshold_ghz;
  return r;
}

}  // namespace vaporcell::lineshape
