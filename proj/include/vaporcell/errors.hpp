#pragma once

#include <stdexcept>
#include <string>
#include <utility>
#include <vector>

namespace vaporcell {

enum class ErrorCode {
  invalid_argument,
  unknown_isotope,
  non_convergence,
  singular_normal_equations,
  degenerate_grid,
  insufficient_data,
  grid_too_coarse,
  grid_mismatch,
  zero_amplitude,
  step_size,
  undersampling,
  too_short,
  non_uniform_sampling,
  aliasing,
  zero_response,
  empty_band,
  unstable_step,
  degenerate_data,
  io,
};

const char* to_string(ErrorCode code) noexcept;

/// Base for every error raised by the library. The code lets callers (the CLI in
/// particular) map failures onto exit statuses without string matching.
class Error : public std::runtime_error {
 public:
  Error(ErrorCode code, const std::string& what)
      : std::runtime_error(what), code_(code) {}

  ErrorCode code() const noexcept { return code_; }

  /// Usage-type problems (bad input) as opposed to computational failures.
  bool is_input_error() const noexcept;

 private:
  ErrorCode code_;
};

/// Raised by fits that ran out of iterations; carries the SSR after each iteration.
class NonConvergenceError : public Error {
 public:
  NonConvergenceError(const std::string& what, std::vector<double> trace)
      : Error(ErrorCode::non_convergence, what), trace_(std::move(trace)) {}

  const std::vector<double>& trace() const noexcept { return trace_; }

 private:
  std::vector<double> trace_;
};

[[noreturn]] inline void fail(ErrorCode code, const std::string& what) {
  throw Error(code, what);
}

inline void require(bool cond, const std::string& what) {
  if (!cond) fail(ErrorCode::invalid_argument, what);
}

}  // namespace vaporcell
