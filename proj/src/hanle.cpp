#include "vaporcell/hanle.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>

#include "vaporcell/errors.hpp"

namespace vaporcell::hanle {
namespace {

Vec3 cross(const Vec3& a, const Vec3& b) {
  return {a[1] * b[2] - a[2] * b[1], a[2] * b[0] - a[0] * b[2], a[0] * b[1] - a[1] * b[0]};
}

double norm(const Vec3& a) { return std::sqrt(a[0] * a[0] + a[1] * a[1] + a[2] * a[2]); }

Vec3 axpy(const Vec3& s, double h, const Vec3& k) {
  return {s[0] + h * k[0], s[1] + h * k[1], s[2] + h * k[2]};
}

struct BlochRhs {
  double pump, relax, gamma;

  Vec3 operator()(const Vec3& s, const Vec3& b) const {
    const Vec3 prec = cross(s, b);
    const double total = pump + relax;
    return {gamma * prec[0] - total * s[0], gamma * prec[1] - total * s[1],
            gamma * prec[2] + 0.5 * pump - total * s[2]};
  }
};

// Integrates with RK4; `observe(k, t, s)` sees the state before step k.
template <typename Observer>
Vec3 integrate(const BlochConfig& cfg, Observer&& observe) {
  cfg.validate();
  const BlochRhs rhs{cfg.pumping_rate, cfg.relaxation_rate, cfg.gyromagnetic};
  const double h = 1.0 / cfg.sample_rate;
  const auto steps = static_cast<std::size_t>(std::llround(cfg.duration * cfg.sample_rate));
  const double max_phase_per_step = 2.0 * std::numbers::pi / 20.0;
  Vec3 s = cfg.initial_spin;
  for (std::size_t k = 0; k < steps; ++k) {
    const double t = static_cast<double>(k) * h;
    observe(k, t, s);
    const Vec3 b0 = cfg.field(t);
    const Vec3 bh = cfg.field(t + 0.5 * h);
    const Vec3 b1 = cfg.field(t + h);
    const double bmax = std::max({norm(b0), norm(bh), norm(b1)});
    if (cfg.gyromagnetic * bmax * h > max_phase_per_step) {
      fail(ErrorCode::step_size, "bloch: step exceeds 1/20 of the Larmor period; raise sample_rate");
    }
    const Vec3 k1 = rhs(s, b0);
    const Vec3 k2 = rhs(axpy(s, 0.5 * h, k1), bh);
    const Vec3 k3 = rhs(axpy(s, 0.5 * h, k2), bh);
    const Vec3 k4 = rhs(axpy(s, h, k3), b1);
    for (int i = 0; i < 3; ++i) s[i] += h / 6.0 * (k1[i] + 2.0 * k2[i] + 2.0 * k3[i] + k4[i]);
  }
  return s;
}

double steady_sz_by_integration(const BlochConfig& rates, double bx) {
  BlochConfig cfg = rates;
  cfg.field = [bx](double) { return Vec3{bx, 0.0, 0.0}; };
  cfg.modulation_frequency = 0.0;
  cfg.initial_spin = {0.0, 0.0, 0.0};
  cfg.duration = 30.0 / (rates.pumping_rate + rates.relaxation_rate);
  // Keep at least 20 steps per Larmor period.
  const double larmor_hz = rates.gyromagnetic * std::abs(bx) / (2.0 * std::numbers::pi);
  cfg.sample_rate = std::max(cfg.sample_rate, 25.0 * larmor_hz);
  return integrate(cfg, [](std::size_t, double, const Vec3&) {})[2];
}

void check_same_grid(const Spectrum& a, const Spectrum& b) {
  if (a.x.size() != b.x.size()) fail(ErrorCode::grid_mismatch, "hanle fit: sweeps have different lengths");
  for (std::size_t i = 0; i < a.x.size(); ++i) {
    if (a.x[i] != b.x[i]) fail(ErrorCode::grid_mismatch, "hanle fit: sweeps do not share the Bx grid");
  }
}

}  // namespace

void HanleParams::validate() const { require(delta_b_nt > 0.0, "hanle: linewidth must be positive"); }

double in_phase(double bx_nt, const HanleParams& p) {
  const double d = bx_nt - p.bx0_nt;
  const double w2 = p.delta_b_nt * p.delta_b_nt;
  return p.a0 * w2 / (d * d + w2) + p.c0;
}

double out_of_phase(double bx_nt, const HanleParams& p) {
  const double d = bx_nt - p.bx0_nt;
  return p.a1 * d / (d * d + p.delta_b_nt * p.delta_b_nt) + p.c1;
}

Eigen::MatrixXd in_phase_jacobian(std::span<const double> bx, const HanleParams& p) {
  Eigen::MatrixXd jac(static_cast<Eigen::Index>(bx.size()), 4);
  const double w = p.delta_b_nt;
  for (std::size_t i = 0; i < bx.size(); ++i) {
    const double d = bx[i] - p.bx0_nt;
    const double den = d * d + w * w;
    const auto r = static_cast<Eigen::Index>(i);
    jac(r, 0) = w * w / den;
    jac(r, 1) = 1.0;
    jac(r, 2) = p.a0 * w * w * 2.0 * d / (den * den);
    jac(r, 3) = p.a0 * 2.0 * w * d * d / (den * den);
  }
  return jac;
}

Eigen::MatrixXd out_of_phase_jacobian(std::span<const double> bx, const HanleParams& p) {
  Eigen::MatrixXd jac(static_cast<Eigen::Index>(bx.size()), 4);
  const double w = p.delta_b_nt;
  for (std::size_t i = 0; i < bx.size(); ++i) {
    const double d = bx[i] - p.bx0_nt;
    const double den = d * d + w * w;
    const auto r = static_cast<Eigen::Index>(i);
    jac(r, 0) = d / den;
    jac(r, 1) = 1.0;
    jac(r, 2) = p.a1 * (d * d - w * w) / (den * den);
    jac(r, 3) = -p.a1 * 2.0 * w * d / (den * den);
  }
  return jac;
}

HanleFit fit_zero_field_resonance(const Spectrum& data_in, const Spectrum& data_quad,
                                  const HanleParams& initial, const fitkit::FitOptions& options) {
  data_in.validate();
  data_quad.validate();
  initial.validate();
  check_same_grid(data_in, data_quad);
  const std::size_t m = data_in.size();
  {
    const auto [in_lo, in_hi] = std::minmax_element(data_in.y.begin(), data_in.y.end());
    const auto [q_lo, q_hi] = std::minmax_element(data_quad.y.begin(), data_quad.y.end());
    const double scale = std::max({std::abs(*in_lo), std::abs(*in_hi), std::abs(*q_lo), std::abs(*q_hi)});
    if (*in_hi - *in_lo <= 1e-12 * scale && *q_hi - *q_lo <= 1e-12 * scale) {
      fail(ErrorCode::zero_amplitude, "hanle fit: both sweeps are flat");
    }
  }

  // Stacked problem: the first m rows are the in-phase sweep, the rest quadrature.
  std::vector<double> x(2 * m), y(2 * m);
  for (std::size_t i = 0; i < m; ++i) {
    x[i] = x[m + i] = data_in.x[i];
    y[i] = data_in.y[i];
    y[m + i] = data_quad.y[i];
  }
  auto unpack = [](const Eigen::VectorXd& q) {
    HanleParams p;
    p.a0 = q(0);
    p.a1 = q(1);
    p.c0 = q(2);
    p.c1 = q(3);
    p.bx0_nt = q(4);
    p.delta_b_nt = std::exp(q(5));
    return p;
  };
  fitkit::ModelFn model = [&](const Eigen::VectorXd& q, std::span<const double> xs) {
    const HanleParams p = unpack(q);
    Eigen::VectorXd f(static_cast<Eigen::Index>(xs.size()));
    for (std::size_t i = 0; i < m; ++i) {
      f(static_cast<Eigen::Index>(i)) = in_phase(xs[i], p);
      f(static_cast<Eigen::Index>(m + i)) = out_of_phase(xs[m + i], p);
    }
    return f;
  };
  fitkit::JacobianFn jacobian = [&](const Eigen::VectorXd& q, std::span<const double> xs) {
    const HanleParams p = unpack(q);
    const auto mi = static_cast<Eigen::Index>(m);
    const Eigen::MatrixXd ji = in_phase_jacobian(xs.subspan(0, m), p);
    const Eigen::MatrixXd jq = out_of_phase_jacobian(xs.subspan(m, m), p);
    Eigen::MatrixXd jac = Eigen::MatrixXd::Zero(2 * mi, 6);
    jac.block(0, 0, mi, 1) = ji.col(0);
    jac.block(0, 2, mi, 1) = ji.col(1);
    jac.block(0, 4, mi, 1) = ji.col(2);
    jac.block(0, 5, mi, 1) = ji.col(3) * p.delta_b_nt;
    jac.block(mi, 1, mi, 1) = jq.col(0);
    jac.block(mi, 3, mi, 1) = jq.col(1);
    jac.block(mi, 4, mi, 1) = jq.col(2);
    jac.block(mi, 5, mi, 1) = jq.col(3) * p.delta_b_nt;
    return jac;
  };

  Eigen::VectorXd q0(6);
  q0 << initial.a0, initial.a1, initial.c0, initial.c1, initial.bx0_nt, std::log(initial.delta_b_nt);

  fitkit::FitResult fit;
  try {
    fit = fitkit::least_squares(model, jacobian, x, y, {}, q0, options);
  } catch (const Error& e) {
    if (e.code() == ErrorCode::singular_normal_equations) {
      fail(ErrorCode::zero_amplitude, "hanle fit: data carry no resolvable resonance");
    }
    throw;
  }
  if (!fit.converged) {
    throw NonConvergenceError("hanle fit: no convergence", fit.ssr_trace);
  }

  HanleFit out;
  out.params = unpack(fit.params);
  const auto se = fit.standard_errors();
  const bool amplitudes_vanish = std::abs(out.params.a0) <= 2.0 * se(0) &&
                                 std::abs(out.params.a1) <= 2.0 * se(1);
  if (amplitudes_vanish) {
    fail(ErrorCode::zero_amplitude, "hanle fit: fitted amplitudes are consistent with zero");
  }
  Eigen::VectorXd d = Eigen::VectorXd::Ones(6);
  d(5) = out.params.delta_b_nt;
  fit.covariance = d.asDiagonal() * fit.covariance * d.asDiagonal();
  fit.params(5) = out.params.delta_b_nt;
  out.fit = std::move(fit);
  return out;
}

HanleFit fit_in_phase(const Spectrum& data, const HanleParams& initial,
                      const fitkit::FitOptions& options) {
  data.validate();
  initial.validate();
  auto unpack = [&initial](const Eigen::VectorXd& q) {
    HanleParams p = initial;
    p.a0 = q(0);
    p.c0 = q(1);
    p.bx0_nt = q(2);
    p.delta_b_nt = std::exp(q(3));
    return p;
  };
  fitkit::ModelFn model = [&](const Eigen::VectorXd& q, std::span<const double> xs) {
    const HanleParams p = unpack(q);
    Eigen::VectorXd f(static_cast<Eigen::Index>(xs.size()));
    for (std::size_t i = 0; i < xs.size(); ++i) f(static_cast<Eigen::Index>(i)) = in_phase(xs[i], p);
    return f;
  };
  fitkit::JacobianFn jacobian = [&](const Eigen::VectorXd& q, std::span<const double> xs) {
    const HanleParams p = unpack(q);
    Eigen::MatrixXd jac = in_phase_jacobian(xs, p);
    jac.col(3) *= p.delta_b_nt;
    return jac;
  };
  Eigen::VectorXd q0(4);
  q0 << initial.a0, initial.c0, initial.bx0_nt, std::log(initial.delta_b_nt);
  fitkit::FitResult fit = fitkit::least_squares(model, jacobian, data.x, data.y, {}, q0, options);
  if (!fit.converged) throw NonConvergenceError("hanle in-phase fit: no convergence", fit.ssr_trace);
  HanleFit out;
  out.params = unpack(fit.params);
  Eigen::Vector4d d(1.0, 1.0, 1.0, out.params.delta_b_nt);
  fit.covariance = d.asDiagonal() * fit.covariance * d.asDiagonal();
  fit.params(3) = out.params.delta_b_nt;
  out.fit = std::move(fit);
  return out;
}

HanleParams initial_guess(const Spectrum& data_in, const Spectrum& data_quad) {
  data_in.validate();
  data_quad.validate();
  check_same_grid(data_in, data_quad);
  const std::size_t n = data_in.size();
  const std::size_t edge = std::max<std::size_t>(1, n / 10);
  auto edge_mean = [&](const std::vector<double>& y) {
    double sum = 0.0;
    for (std::size_t i = 0; i < edge; ++i) sum += y[i] + y[n - 1 - i];
    return sum / static_cast<double>(2 * edge);
  };
  HanleParams p;
  p.c0 = edge_mean(data_in.y);
  p.c1 = edge_mean(data_quad.y);
  std::size_t ext = 0;
  for (std::size_t i = 1; i < n; ++i) {
    if (std::abs(data_in.y[i] - p.c0) > std::abs(data_in.y[ext] - p.c0)) ext = i;
  }
  p.a0 = data_in.y[ext] - p.c0;
  p.bx0_nt = data_in.x[ext];
  std::size_t lo = ext;
  std::size_t hi = ext;
  while (lo > 0 && std::abs(data_in.y[lo] - p.c0) > 0.5 * std::abs(p.a0)) --lo;
  while (hi + 1 < n && std::abs(data_in.y[hi] - p.c0) > 0.5 * std::abs(p.a0)) ++hi;
  const double step = (data_in.x.back() - data_in.x.front()) / static_cast<double>(n - 1);
  p.delta_b_nt = std::max(0.5 * (data_in.x[hi] - data_in.x[lo]), step);
  const auto [mn, mx] = std::minmax_element(data_quad.y.begin(), data_quad.y.end());
  const double sign = (mx - data_quad.y.begin()) > (mn - data_quad.y.begin()) ? 1.0 : -1.0;
  p.a1 = sign * (*mx - *mn) * p.delta_b_nt;
  return p;
}

double relaxation_from_linewidth(double delta_b_nt, double gyromagnetic, double slowing_factor) {
  require(delta_b_nt >= 0.0, "relaxation: linewidth must be non-negative");
  require(gyromagnetic > 0.0 && slowing_factor > 0.0, "relaxation: gyromagnetic ratio and q must be positive");
  return gyromagnetic * delta_b_nt / slowing_factor;
}

void BlochConfig::validate() const {
  require(pumping_rate >= 0.0 && relaxation_rate >= 0.0, "bloch: rates must be non-negative");
  require(gyromagnetic > 0.0, "bloch: gyromagnetic ratio must be positive");
  require(duration > 0.0 && sample_rate > 0.0, "bloch: duration and sample rate must be positive");
  require(static_cast<bool>(field), "bloch: no field waveform");
  if (modulation_frequency > 0.0 && !(sample_rate > 20.0 * modulation_frequency)) {
    fail(ErrorCode::step_size, "bloch: sample_rate must exceed 20x the modulation frequency");
  }
}

BlochTrace bloch_simulate(const BlochConfig& cfg) {
  cfg.validate();
  const auto steps = static_cast<std::size_t>(std::llround(cfg.duration * cfg.sample_rate));
  std::vector<double> sz(steps), power(steps);
  double max_norm = 0.0;
  const Vec3 final_spin = integrate(cfg, [&](std::size_t k, double, const Vec3& s) {
    sz[k] = s[2];
    power[k] = 1.0 - cfg.absorption_scale * (1.0 - 2.0 * s[2]);
    max_norm = std::max(max_norm, norm(s));
  });
  max_norm = std::max(max_norm, norm(final_spin));
  BlochTrace out;
  out.transmission = TimeSeries::uniform(std::move(power), cfg.sample_rate, "V");
  out.spin_z = TimeSeries::uniform(std::move(sz), cfg.sample_rate, "Sz");
  out.final_spin = final_spin;
  out.max_spin_norm = max_norm;
  return out;
}

Vec3 steady_state_spin(double pumping_rate, double relaxation_rate, double gyromagnetic,
                       const Vec3& field_nt) {
  // 0 = gamma S x B - G S + (R_op / 2) z, solved as a 3x3 linear system.
  const double total = pumping_rate + relaxation_rate;
  require(total > 0.0, "steady state: total rate must be positive");
  const Eigen::Vector3d w(gyromagnetic * field_nt[0], gyromagnetic * field_nt[1], gyromagnetic * field_nt[2]);
  Eigen::Matrix3d m;
  // S x w = -[w]_x S
  m << 0.0, w(2), -w(1),
       -w(2), 0.0, w(0),
       w(1), -w(0), 0.0;
  m -= total * Eigen::Matrix3d::Identity();
  const Eigen::Vector3d rhs(0.0, 0.0, -0.5 * pumping_rate);
  const Eigen::Vector3d s = m.partialPivLu().solve(rhs);
  return {s(0), s(1), s(2)};
}

std::vector<double> steady_state_sweep_serial(const BlochConfig& rates, std::span<const double> bx_nt) {
  std::vector<double> out(bx_nt.size());
  for (std::size_t i = 0; i < bx_nt.size(); ++i) out[i] = steady_sz_by_integration(rates, bx_nt[i]);
  return out;
}

std::vector<double> steady_state_sweep(const BlochConfig& rates, std::span<const double> bx_nt) {
  rates.validate();
  std::vector<double> out(bx_nt.size());
  const auto n = static_cast<std::ptrdiff_t>(bx_nt.size());
#pragma omp parallel for schedule(dynamic)
  for (std::ptrdiff_t i = 0; i < n; ++i) out[i] = steady_sz_by_integration(rates, bx_nt[i]);
  return out;
}

BlochTrace modulated_response(BlochConfig cfg, double mod_freq_hz, double mod_amp_nt,
                              double test_field_nt) {
  require(mod_freq_hz > 0.0 && mod_amp_nt > 0.0, "modulated response: frequency and amplitude must be positive");
  const double w = 2.0 * std::numbers::pi * mod_freq_hz;
  cfg.field = [=](double t) { return Vec3{test_field_nt + mod_amp_nt * std::sin(w * t), 0.0, 0.0}; };
  cfg.modulation_frequency = mod_freq_hz;
  return bloch_simulate(cfg);
}

BlochTrace modulated_response(BlochConfig cfg, double mod_freq_hz, double mod_amp_nt, double test_field_nt,
                              std::span<const double> bx_noise_nt) {
  require(mod_freq_hz > 0.0 && mod_amp_nt > 0.0, "modulated response: frequency and amplitude must be positive");
  const auto steps = static_cast<std::size_t>(std::llround(cfg.duration * cfg.sample_rate));
  require(bx_noise_nt.size() > steps, "modulated response: noise record shorter than the run");
  const double w = 2.0 * std::numbers::pi * mod_freq_hz;
  const double fs = cfg.sample_rate;
  cfg.field = [=](double t) {
    const double pos = t * fs;
    const auto k = std::min(static_cast<std::size_t>(pos), bx_noise_nt.size() - 2);
    const double frac = pos - static_cast<double>(k);
    const double noise = bx_noise_nt[k] + frac * (bx_noise_nt[k + 1] - bx_noise_nt[k]);
    return Vec3{test_field_nt + mod_amp_nt * std::sin(w * t) + noise, 0.0, 0.0};
  };
  cfg.modulation_frequency = mod_freq_hz;
  return bloch_simulate(cfg);
}

}  // namespace vaporcell::hanle
