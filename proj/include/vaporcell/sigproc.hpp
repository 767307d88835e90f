#pragma once

// Welch spectral estimation, digital lock-in demodulation and the conversion of
// a voltage noise density into magnetic sensitivity.

#include <cstdint>
#include <functional>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include "vaporcell/records.hpp"

namespace vaporcell {

/// One-sided amplitude spectral density.
struct PsdEstimate {
  std::vector<double> f;    // Hz
  std::vector<double> asd;  // y_unit / sqrt(Hz)
  std::string y_unit;
  std::string window = "hann";
  std::size_t segment_length = 0;
  double overlap = 0.5;
  double enbw = 0.0;  // Hz
  std::size_t segments = 0;

  double resolution() const { return f.size() > 1 ? f[1] - f[0] : 0.0; }
};

}  // namespace vaporcell

namespace vaporcell::sigproc {

enum class Window { hann, rectangular };
enum class Detrend { none, mean };

Window parse_window(const std::string& name);
const char* to_string(Window w) noexcept;

/// Periodic window of length n.
std::vector<double> make_window(Window w, std::size_t n);

struct WelchOptions {
  std::size_t segment_length = 1024;
  double overlap = 0.5;
  Window window = Window::hann;
  Detrend detrend = Detrend::mean;
};

/// Averaged modified periodograms. Interior bins are doubled for the one-sided
/// convention; DC and (even-length) Nyquist bins are not. Segments are
/// transformed in parallel and summed in segment order, so the result is
/// bit-identical to welch_asd_serial.
PsdEstimate welch_asd(const TimeSeries& ts, const WelchOptions& options = {});
PsdEstimate welch_asd_serial(const TimeSeries& ts, const WelchOptions& options = {});

/// Sum of PSD * df over all bins, i.e. the variance the estimate accounts for.
double integrated_power(const PsdEstimate& psd);
/// Sum of PSD * df over [f_lo, f_hi].
double band_power(const PsdEstimate& psd, double f_lo, double f_hi);

struct LockInOptions {
  double ref_freq = 1000.0;  // Hz
  double ref_phase = 0.0;    // rad
  double lp_cutoff = 100.0;  // Hz, -3 dB point of each pole
  int lp_poles = 1;          // cascaded identical single-pole IIR sections
};

struct LockInOutput {
  TimeSeries in_phase;    // 2 LP[v sin(w t + phi)]
  TimeSeries quadrature;  // 2 LP[v cos(w t + phi)]
};

/// Digital lock-in. A v = A sin(w t + phi) input settles to in-phase A and
/// quadrature 0; a 90 degree advance swaps them. Throws aliasing when the
/// reference is at or above Nyquist or the cutoff is not below ref_freq / 2.
LockInOutput lock_in(const TimeSeries& ts, const LockInOptions& options);

/// Mean of the samples after discarding the leading `discard_fraction`.
double settled_mean(const TimeSeries& ts, double discard_fraction = 0.5);
/// Same, trimmed to a whole number of `period_s` ending at the last sample, so
/// ripple at the reference harmonics averages out.
double settled_mean(const TimeSeries& ts, double discard_fraction, double period_s);

/// Reference phase that places a first-harmonic signal, measured as (x, y) with
/// phase `measured_at`, entirely in the positive quadrature output.
double quadrature_phase(double x, double y, double measured_at = 0.0);

using ResponseFn = std::function<double(double f_hz)>;

/// |R(f)| of a single-pole low-pass with the given -3 dB cutoff.
ResponseFn single_pole_response(double cutoff_hz);
/// Product of single-pole responses, one per cutoff. Empty means R = 1.
ResponseFn cascaded_response(std::vector<double> cutoffs_hz);

/// Block average over `factor` samples; the tail that does not fill a block is
/// dropped.
TimeSeries decimate_mean(const TimeSeries& ts, std::size_t factor);

struct CalibrationInputs {
  double slope_v_per_nt = 0.0;  // dv/dB; used when > 0
  double delta_b_nt = 0.0;      // surrogate pair when no slope is given
  double a_amp_v = 0.0;         // peak-to-peak height of the dispersive curve
  ResponseFn response = [](double) { return 1.0; };

  /// Effective dv/dB: the direct slope, or a_amp / delta_b.
  double effective_slope() const;
  void validate() const;
};

/// Field sensitivity in fT/sqrt(Hz): S_v / (slope |R(f)|), with S_v in V/sqrt(Hz)
/// and slope in V/nT. DC is skipped. Throws zero_response if |R(f)| < 1e-3
/// anywhere on the grid.
Spectrum sensitivity(const PsdEstimate& asd, const CalibrationInputs& cal);

/// Median of the spectrum over [f_lo, f_hi]. Throws empty_band.
double noise_floor(const Spectrum& sensitivity, double f_lo, double f_hi);

/// Gaussian white noise whose one-sided ASD is `asd` (y/sqrt(Hz)).
std::vector<double> white_noise(std::size_t n, double fs, double asd, std::uint64_t seed);

/// Shapes `samples` by the real, zero-phase gain |R(f)| in the frequency domain.
std::vector<double> apply_response(std::span<const double> samples, double fs,
                                   const ResponseFn& response);

/// Peak amplitude of a tone near f0 recovered from a sensitivity-style ASD by
/// integrating the power within +/- half_width bins.
double tone_amplitude(std::span<const double> f, std::span<const double> asd, double f0,
                      int half_width = 3);

}  // namespace vaporcell::sigproc
