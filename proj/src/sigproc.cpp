#include "vaporcell/sigproc.hpp"

#include <fftw3.h>

#include <algorithm>
#include <cmath>
#include <complex>
#include <memory>
#include <mutex>
#include <numbers>
#include <random>

#include "vaporcell/errors.hpp"

namespace vaporcell::sigproc {
namespace {

constexpr double kPi = std::numbers::pi;

// FFTW planning is not thread-safe; execution with new-array functions is.
std::mutex& planner_mutex() {
  static std::mutex m;
  return m;
}

struct FftwFree {
  void operator()(void* p) const { fftw_free(p); }
};
using RealBuffer = std::unique_ptr<double[], FftwFree>;
using ComplexBuffer = std::unique_ptr<fftw_complex[], FftwFree>;

RealBuffer alloc_real(std::size_t n) { return RealBuffer(fftw_alloc_real(n)); }
ComplexBuffer alloc_complex(std::size_t n) { return ComplexBuffer(fftw_alloc_complex(n)); }

class Plan {
 public:
  Plan(fftw_plan p) : plan_(p) {}
  Plan(const Plan&) = delete;
  Plan& operator=(const Plan&) = delete;
  ~Plan() {
    std::lock_guard lock(planner_mutex());
    fftw_destroy_plan(plan_);
  }
  fftw_plan get() const { return plan_; }

 private:
  fftw_plan plan_;
};

std::unique_ptr<Plan> make_r2c(int n) {
  auto in = alloc_real(static_cast<std::size_t>(n));
  auto out = alloc_complex(static_cast<std::size_t>(n / 2 + 1));
  std::lock_guard lock(planner_mutex());
  return std::make_unique<Plan>(fftw_plan_dft_r2c_1d(n, in.get(), out.get(), FFTW_ESTIMATE));
}

std::unique_ptr<Plan> make_c2r(int n) {
  auto in = alloc_complex(static_cast<std::size_t>(n / 2 + 1));
  auto out = alloc_real(static_cast<std::size_t>(n));
  std::lock_guard lock(planner_mutex());
  return std::make_unique<Plan>(fftw_plan_dft_c2r_1d(n, in.get(), out.get(), FFTW_ESTIMATE));
}

struct WelchSetup {
  std::size_t length;
  std::size_t step;
  std::size_t segments;
  std::size_t bins;
  std::vector<double> window;
  double window_power;  // sum w^2
  double fs;
};

WelchSetup setup(const TimeSeries& ts, const WelchOptions& o) {
  ts.check_uniform();
  require(o.segment_length >= 2, "welch: segment length must be at least 2");
  require(o.overlap >= 0.0 && o.overlap < 1.0, "welch: overlap must be in [0, 1)");
  if (ts.size() < 2 * o.segment_length) fail(ErrorCode::too_short, "welch: series shorter than two segments");
  WelchSetup s;
  s.length = o.segment_length;
  const auto overlap = static_cast<std::size_t>(std::llround(o.overlap * static_cast<double>(s.length)));
  s.step = std::max<std::size_t>(1, s.length - std::min(overlap, s.length - 1));
  s.segments = (ts.size() - s.length) / s.step + 1;
  s.bins = s.length / 2 + 1;
  s.window = make_window(o.window, s.length);
  s.window_power = 0.0;
  for (double w : s.window) s.window_power += w * w;
  s.fs = ts.sample_rate();
  return s;
}

// |X_k|^2 of one windowed, detrended segment.
void periodogram(const TimeSeries& ts, const WelchSetup& s, Detrend detrend, std::size_t seg, fftw_plan plan,
                 double* in, fftw_complex* out, double* dest) {
  const double* src = ts.y.data() + seg * s.step;
  double mean = 0.0;
  if (detrend == Detrend::mean) {
    for (std::size_t i = 0; i < s.length; ++i) mean += src[i];
    mean /= static_cast<double>(s.length);
  }
  for (std::size_t i = 0; i < s.length; ++i) in[i] = (src[i] - mean) * s.window[i];
  fftw_execute_dft_r2c(plan, in, out);
  for (std::size_t k = 0; k < s.bins; ++k) dest[k] = out[k][0] * out[k][0] + out[k][1] * out[k][1];
}

PsdEstimate finish(const TimeSeries& ts, const WelchSetup& s, const WelchOptions& o, const std::vector<double>& acc) {
  PsdEstimate est;
  est.y_unit = ts.y_unit;
  est.window = to_string(o.window);
  est.segment_length = s.length;
  est.overlap = o.overlap;
  est.segments = s.segments;
  double wsum = 0.0;
  for (double w : s.window) wsum += w;
  est.enbw = s.fs * s.window_power / (wsum * wsum);
  est.f.resize(s.bins);
  est.asd.resize(s.bins);
  const double scale = 1.0 / (s.fs * s.window_power * static_cast<double>(s.segments));
  const bool even = s.length % 2 == 0;
  for (std::size_t k = 0; k < s.bins; ++k) {
    est.f[k] = static_cast<double>(k) * s.fs / static_cast<double>(s.length);
    const bool edge = k == 0 || (even && k == s.bins - 1);
    est.asd[k] = std::sqrt(acc[k] * scale * (edge ? 1.0 : 2.0));
  }
  return est;
}

}  // namespace

Window parse_window(const std::string& name) {
  if (name == "hann") return Window::hann;
  if (name == "rectangular" || name == "boxcar") return Window::rectangular;
  fail(ErrorCode::invalid_argument, "unknown window: " + name);
}

const char* to_string(Window w) noexcept {
  return w == Window::hann ? "hann" : "rectangular";
}

std::vector<double> make_window(Window w, std::size_t n) {
  require(n > 0, "window length must be positive");
  std::vector<double> out(n, 1.0);
  if (w == Window::hann) {
    for (std::size_t i = 0; i < n; ++i) {
      out[i] = 0.5 - 0.5 * std::cos(2.0 * kPi * static_cast<double>(i) / static_cast<double>(n));
    }
  }
  return out;
}

PsdEstimate welch_asd_serial(const TimeSeries& ts, const WelchOptions& options) {
  const WelchSetup s = setup(ts, options);
  const auto plan = make_r2c(static_cast<int>(s.length));
  auto in = alloc_real(s.length);
  auto out = alloc_complex(s.bins);
  std::vector<double> acc(s.bins, 0.0);
  std::vector<double> p(s.bins);
  for (std::size_t seg = 0; seg < s.segments; ++seg) {
    periodogram(ts, s, options.detrend, seg, plan->get(), in.get(), out.get(), p.data());
    for (std::size_t k = 0; k < s.bins; ++k) acc[k] += p[k];
  }
  return finish(ts, s, options, acc);
}

PsdEstimate welch_asd(const TimeSeries& ts, const WelchOptions& options) {
  const WelchSetup s = setup(ts, options);
  const auto plan = make_r2c(static_cast<int>(s.length));
  std::vector<double> acc(s.bins, 0.0);
  // Periodograms of a block of segments are computed in parallel, then added in
  // segment order.
  constexpr std::size_t kBlock = 256;
  std::vector<double> block(std::min(kBlock, s.segments) * s.bins);
  for (std::size_t first = 0; first < s.segments; first += kBlock) {
    const auto count = static_cast<std::ptrdiff_t>(std::min(kBlock, s.segments - first));
#pragma omp parallel
    {
      auto in = alloc_real(s.length);
      auto out = alloc_complex(s.bins);
#pragma omp for schedule(static)
      for (std::ptrdiff_t j = 0; j < count; ++j) {
        periodogram(ts, s, options.detrend, first + static_cast<std::size_t>(j), plan->get(), in.get(), out.get(),
                    block.data() + static_cast<std::size_t>(j) * s.bins);
      }
    }
    for (std::ptrdiff_t j = 0; j < count; ++j) {
      const double* p = block.data() + static_cast<std::size_t>(j) * s.bins;
      for (std::size_t k = 0; k < s.bins; ++k) acc[k] += p[k];
    }
  }
  return finish(ts, s, options, acc);
}

double integrated_power(const PsdEstimate& psd) {
  const double df = psd.resolution();
  double p = 0.0;
  for (double a : psd.asd) p += a * a * df;
  return p;
}

double band_power(const PsdEstimate& psd, double f_lo, double f_hi) {
  const double df = psd.resolution();
  double p = 0.0;
  for (std::size_t k = 0; k < psd.f.size(); ++k) {
    if (psd.f[k] >= f_lo && psd.f[k] <= f_hi) p += psd.asd[k] * psd.asd[k] * df;
  }
  return p;
}

LockInOutput lock_in(const TimeSeries& ts, const LockInOptions& o) {
  ts.check_uniform();
  require(ts.size() >= 2, "lock-in: need at least two samples");
  require(o.ref_freq > 0.0 && o.lp_cutoff > 0.0 && o.lp_poles >= 1,
          "lock-in: reference, cutoff and pole count must be positive");
  const double fs = ts.sample_rate();
  if (o.ref_freq >= fs / 2.0) fail(ErrorCode::aliasing, "lock-in: reference at or above Nyquist");
  if (o.lp_cutoff >= o.ref_freq / 2.0) fail(ErrorCode::aliasing, "lock-in: cutoff must be below ref_freq / 2");

  const double alpha = 1.0 - std::exp(-2.0 * kPi * o.lp_cutoff / fs);
  const double w = 2.0 * kPi * o.ref_freq;
  std::vector<double> sx(static_cast<std::size_t>(o.lp_poles), 0.0);
  std::vector<double> sy(sx);
  std::vector<double> x(ts.size());
  std::vector<double> y(ts.size());
  for (std::size_t k = 0; k < ts.size(); ++k) {
    const double arg = w * ts.t[k] + o.ref_phase;
    double ix = ts.y[k] * std::sin(arg);
    double iy = ts.y[k] * std::cos(arg);
    for (std::size_t p = 0; p < sx.size(); ++p) {
      sx[p] += alpha * (ix - sx[p]);
      sy[p] += alpha * (iy - sy[p]);
      ix = sx[p];
      iy = sy[p];
    }
    x[k] = 2.0 * ix;
    y[k] = 2.0 * iy;
  }
  LockInOutput out;
  out.in_phase.t = ts.t;
  out.in_phase.y = std::move(x);
  out.in_phase.y_unit = ts.y_unit;
  out.quadrature.t = ts.t;
  out.quadrature.y = std::move(y);
  out.quadrature.y_unit = ts.y_unit;
  return out;
}

double settled_mean(const TimeSeries& ts, double discard_fraction) {
  require(discard_fraction >= 0.0 && discard_fraction < 1.0, "settled_mean: discard fraction must be in [0, 1)");
  const auto start = static_cast<std::size_t>(discard_fraction * static_cast<double>(ts.size()));
  require(start < ts.size(), "settled_mean: no samples left");
  double sum = 0.0;
  for (std::size_t i = start; i < ts.size(); ++i) sum += ts.y[i];
  return sum / static_cast<double>(ts.size() - start);
}

double settled_mean(const TimeSeries& ts, double discard_fraction, double period_s) {
  require(period_s > 0.0, "settled_mean: period must be positive");
  require(discard_fraction >= 0.0 && discard_fraction < 1.0, "settled_mean: discard fraction must be in [0, 1)");
  const double fs = ts.sample_rate();
  const double available = (1.0 - discard_fraction) * static_cast<double>(ts.size()) / fs;
  const double periods = std::floor(available / period_s);
  require(periods >= 1.0, "settled_mean: window shorter than one period");
  const auto count = static_cast<std::size_t>(std::llround(periods * period_s * fs));
  double sum = 0.0;
  for (std::size_t i = ts.size() - count; i < ts.size(); ++i) sum += ts.y[i];
  return sum / static_cast<double>(count);
}

double quadrature_phase(double x, double y, double measured_at) {
  require(x != 0.0 || y != 0.0, "quadrature_phase: zero signal");
  return measured_at + std::atan2(y, x) - kPi / 2.0;
}

ResponseFn single_pole_response(double cutoff_hz) {
  require(cutoff_hz > 0.0, "single-pole response: cutoff must be positive");
  return [cutoff_hz](double f) {
    const double r = f / cutoff_hz;
    return 1.0 / std::sqrt(1.0 + r * r);
  };
}

ResponseFn cascaded_response(std::vector<double> cutoffs_hz) {
  for (double fc : cutoffs_hz) require(fc > 0.0, "cascaded response: cutoffs must be positive");
  return [cutoffs = std::move(cutoffs_hz)](double f) {
    double r = 1.0;
    for (double fc : cutoffs) r /= std::sqrt(1.0 + (f / fc) * (f / fc));
    return r;
  };
}

TimeSeries decimate_mean(const TimeSeries& ts, std::size_t factor) {
  require(factor >= 1, "decimate: factor must be positive");
  ts.check_uniform();
  const std::size_t blocks = ts.size() / factor;
  require(blocks >= 1, "decimate: series shorter than one block");
  std::vector<double> y(blocks);
  for (std::size_t b = 0; b < blocks; ++b) {
    double sum = 0.0;
    for (std::size_t i = 0; i < factor; ++i) sum += ts.y[b * factor + i];
    y[b] = sum / static_cast<double>(factor);
  }
  return TimeSeries::uniform(std::move(y), ts.sample_rate() / static_cast<double>(factor), ts.y_unit, ts.t.front());
}

double CalibrationInputs::effective_slope() const {
  return slope_v_per_nt > 0.0 ? slope_v_per_nt : a_amp_v / delta_b_nt;
}

void CalibrationInputs::validate() const {
  require(static_cast<bool>(response), "calibration: response function missing");
  if (slope_v_per_nt > 0.0) return;
  require(delta_b_nt > 0.0 && a_amp_v > 0.0, "calibration: need a positive slope or a positive (A_amp, dB) pair");
}

Spectrum sensitivity(const PsdEstimate& asd, const CalibrationInputs& cal) {
  cal.validate();
  require(asd.f.size() == asd.asd.size() && !asd.f.empty(), "sensitivity: malformed ASD");
  const double slope = cal.effective_slope();
  Spectrum out;
  out.x_unit = "Hz";
  out.y_unit = "fT/sqrt(Hz)";
  for (std::size_t k = 0; k < asd.f.size(); ++k) {
    const double f = asd.f[k];
    if (f <= 0.0) continue;
    const double r = std::abs(cal.response(f));
    if (r < 1e-3) fail(ErrorCode::zero_response, "sensitivity: |R(f)| below 1e-3 at f = " + std::to_string(f));
    out.x.push_back(f);
    out.y.push_back(asd.asd[k] / (slope * r) * 1e6);
  }
  return out;
}

double noise_floor(const Spectrum& s, double f_lo, double f_hi) {
  std::vector<double> v;
  for (std::size_t k = 0; k < s.x.size(); ++k) {
    if (s.x[k] >= f_lo && s.x[k] <= f_hi) v.push_back(s.y[k]);
  }
  if (v.empty()) fail(ErrorCode::empty_band, "noise_floor: no bins in the requested band");
  const std::size_t mid = v.size() / 2;
  std::nth_element(v.begin(), v.begin() + static_cast<std::ptrdiff_t>(mid), v.end());
  if (v.size() % 2 == 1) return v[mid];
  const double upper = v[mid];
  const double lower = *std::max_element(v.begin(), v.begin() + static_cast<std::ptrdiff_t>(mid));
  return 0.5 * (lower + upper);
}

std::vector<double> white_noise(std::size_t n, double fs, double asd, std::uint64_t seed) {
  require(fs > 0.0 && asd >= 0.0, "white_noise: sample rate must be positive and ASD non-negative");
  std::mt19937_64 rng(seed);
  std::normal_distribution<double> gauss(0.0, asd * std::sqrt(fs / 2.0));
  std::vector<double> out(n);
  for (auto& v : out) v = gauss(rng);
  return out;
}

std::vector<double> apply_response(std::span<const double> samples, double fs, const ResponseFn& response) {
  require(fs > 0.0 && static_cast<bool>(response), "apply_response: invalid arguments");
  const std::size_t n = samples.size();
  if (n == 0) return {};
  const std::size_t bins = n / 2 + 1;
  auto fwd = make_r2c(static_cast<int>(n));
  auto inv = make_c2r(static_cast<int>(n));
  auto in = alloc_real(n);
  auto spec = alloc_complex(bins);
  std::copy(samples.begin(), samples.end(), in.get());
  fftw_execute_dft_r2c(fwd->get(), in.get(), spec.get());
  for (std::size_t k = 0; k < bins; ++k) {
    const double g = response(static_cast<double>(k) * fs / static_cast<double>(n)) / static_cast<double>(n);
    spec[k][0] *= g;
    spec[k][1] *= g;
  }
  fftw_execute_dft_c2r(inv->get(), spec.get(), in.get());
  return std::vector<double>(in.get(), in.get() + n);
}

double tone_amplitude(std::span<const double> f, std::span<const double> asd, double f0, int half_width) {
  require(f.size() == asd.size() && f.size() >= 2, "tone_amplitude: malformed spectrum");
  require(half_width >= 0, "tone_amplitude: half width must be non-negative");
  const double df = f[1] - f[0];
  const auto centre = static_cast<std::ptrdiff_t>(
      std::min_element(f.begin(), f.end(), [f0](double a, double b) { return std::abs(a - f0) < std::abs(b - f0); }) -
      f.begin());
  const auto lo = std::max<std::ptrdiff_t>(0, centre - half_width);
  const auto hi = std::min<std::ptrdiff_t>(static_cast<std::ptrdiff_t>(f.size()) - 1, centre + half_width);
  double power = 0.0;
  for (auto k = lo; k <= hi; ++k) power += asd[static_cast<std::size_t>(k)] * asd[static_cast<std::size_t>(k)] * df;
  return std::sqrt(2.0 * power);
}

}  // namespace vaporcell::sigproc
