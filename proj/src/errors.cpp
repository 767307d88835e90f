#include "vaporcell/errors.hpp"

namespace vaporcell {

const char* to_string(ErrorCode code) noexcept {
  switch (code) {
    case ErrorCode::invalid_argument: return "invalid-argument";
    case ErrorCode::unknown_isotope: return "unknown-isotope";
    case ErrorCode::non_convergence: return "non-convergence";
    case ErrorCode::singular_normal_equations: return "singular-normal-equations";
    case ErrorCode::degenerate_grid: return "degenerate-grid";
    case ErrorCode::insufficient_data: return "insufficient-data";
    case ErrorCode::grid_too_coarse: return "grid-too-coarse";
    case ErrorCode::grid_mismatch: return "grid-mismatch";
    case ErrorCode::zero_amplitude: return "zero-amplitude";
    case ErrorCode::step_size: return "step-size";
    case ErrorCode::undersampling: return "undersampling";
    case ErrorCode::too_short: return "too-short";
    case ErrorCode::non_uniform_sampling: return "non-uniform-sampling";
    case ErrorCode::aliasing: return "aliasing";
    case ErrorCode::zero_response: return "zero-response";
    case ErrorCode::empty_band: return "empty-band";
    case ErrorCode::unstable_step: return "unstable-step";
    case ErrorCode::degenerate_data: return "degenerate-data";
    case ErrorCode::io: return "io";
  }
  return "unknown";
}

bool Error::is_input_error() const noexcept {
  switch (code_) {
    case ErrorCode::invalid_argument:
    case ErrorCode::unknown_isotope:
    case ErrorCode::io:
      return true;
    default:
      return false;
  }
}

}  // namespace vaporcell
