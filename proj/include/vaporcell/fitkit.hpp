#pragma once

// Damped least squares (Levenberg-Marquardt) shared by every fitting routine.

#include <functional>
#include <span>
#include <vector>

#include <Eigen/Dense>

namespace vaporcell::fitkit {

/// Evaluates the model at every abscissa for the given parameter vector.
using ModelFn =
    std::function<Eigen::VectorXd(const Eigen::VectorXd& params, std::span<const double> x)>;

/// d model_i / d param_j, shape (x.size(), params.size()).
using JacobianFn =
    std::function<Eigen::MatrixXd(const Eigen::VectorXd& params, std::span<const double> x)>;

enum class Termination { gradient_tol, step_tol, max_iter };

const char* to_string(Termination t) noexcept;

struct FitOptions {
  int max_iter = 200;
  double gtol = 1e-10;
  double xtol = 1e-12;
  double lambda0 = 1e-3;
};

struct FitResult {
  Eigen::VectorXd params;
  Eigen::MatrixXd covariance;
  double residual_norm = 0.0;  ///< sqrt of the weighted SSR at params
  int iterations = 0;
  bool converged = false;
  Termination termination = Termination::max_iter;
  std::vector<double> ssr_trace;  ///< weighted SSR after each iteration, starting with the initial value

  double ssr() const noexcept { return residual_norm * residual_norm; }
  Eigen::VectorXd standard_errors() const;
};

/// Minimizes sum_i w_i (y_i - model(p, x)_i)^2.
///
/// The damping follows Marquardt's schedule: lambda is divided by 10 after an
/// accepted step and multiplied by 10 after a rejected one, with the damping
/// matrix taken as diag(J^T W J). When `jacobian` is empty, central
/// differences are used. Empty `weights` means unit weights.
///
/// Running out of iterations is reported through `converged == false`, not an
/// exception. A rank-deficient J^T W J at the solution throws
/// singular_normal_equations, since no covariance exists.
///
/// The covariance is (J^T W J)^-1 * SSR / dof with dof = max(m - p, 1).
FitResult least_squares(const ModelFn& model, const JacobianFn& jacobian,
                        std::span<const double> x, std::span<const double> y,
                        std::span<const double> weights, const Eigen::VectorXd& initial,
                        const FitOptions& options = {});

/// Central-difference Jacobian with step cbrt(eps) * max(|p_j|, 1).
Eigen::MatrixXd numeric_jacobian(const ModelFn& model, const Eigen::VectorXd& params,
                                 std::span<const double> x);

/// Worst element-wise relative mismatch between the analytic and the
/// central-difference Jacobian. Entries smaller than 1e-4 of their column's
/// largest magnitude are compared against that floor instead of themselves.
double check_jacobian(const ModelFn& model, const JacobianFn& jacobian,
                      const Eigen::VectorXd& params, std::span<const double> x);

/// Straight-line fit y = slope * x (+ intercept). Closed form; used where a
/// linear model needs no iteration.
struct LineFit {
  double slope = 0.0;
  double intercept = 0.0;
  double slope_stderr = 0.0;
  double intercept_stderr = 0.0;
  double r_squared = 0.0;
};
LineFit fit_line(std::span<const double> x, std::span<const double> y, bool through_origin);

}  // namespace vaporcell::fitkit
