#include "vaporcell/fitkit.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

#include "vaporcell/errors.hpp"

namespace vaporcell::fitkit {
namespace {

double weighted_ssr(const Eigen::VectorXd& r, const Eigen::VectorXd& w) {
  return (w.array() * r.array().square()).sum();
}

Eigen::VectorXd residuals(const ModelFn& model, const Eigen::VectorXd& p,
                          std::span<const double> x, const Eigen::VectorXd& y) {
  Eigen::VectorXd f = model(p, x);
  if (f.size() != y.size()) fail(ErrorCode::invalid_argument, "model returned wrong number of values");
  return y - f;
}

bool all_finite(const Eigen::VectorXd& v) { return v.allFinite(); }

// Normal matrix J^T W J is inverted after symmetric diagonal scaling so that the
// rank decision does not depend on parameter units.
Eigen::MatrixXd covariance_from(const Eigen::MatrixXd& jtwj) {
  const Eigen::Index p = jtwj.rows();
  Eigen::VectorXd scale(p);
  for (Eigen::Index j = 0; j < p; ++j) {
    const double d = jtwj(j, j);
    if (!(d > 0.0) || !std::isfinite(d)) {
      fail(ErrorCode::singular_normal_equations,
           "normal equations are singular: parameter " + std::to_string(j) + " has no influence");
    }
    scale(j) = 1.0 / std::sqrt(d);
  }
  const Eigen::MatrixXd scaled = scale.asDiagonal() * jtwj * scale.asDiagonal();
  Eigen::ColPivHouseholderQR<Eigen::MatrixXd> qr(scaled);
  qr.setThreshold(1e-12);
  if (qr.rank() < p) {
    fail(ErrorCode::singular_normal_equations, "normal equations are rank deficient");
  }
  const Eigen::MatrixXd inv = qr.inverse();
  Eigen::MatrixXd cov = scale.asDiagonal() * inv * scale.asDiagonal();
  return 0.5 * (cov + cov.transpose());
}

}  // namespace

const char* to_string(Termination t) noexcept {
  switch (t) {
    case Termination::gradient_tol: return "gradient_tol";
    case Termination::step_tol: return "step_tol";
    case Termination::max_iter: return "max_iter";
  }
  return "unknown";
}

Eigen::VectorXd FitResult::standard_errors() const {
  return covariance.diagonal().cwiseMax(0.0).cwiseSqrt();
}

Eigen::MatrixXd numeric_jacobian(const ModelFn& model, const Eigen::VectorXd& params,
                                 std::span<const double> x) {
  const double base_step = std::cbrt(std::numeric_limits<double>::epsilon());
  Eigen::MatrixXd jac(static_cast<Eigen::Index>(x.size()), params.size());
  Eigen::VectorXd p = params;
  for (Eigen::Index j = 0; j < params.size(); ++j) {
    const double h = base_step * std::max(std::abs(params(j)), 1.0);
    p(j) = params(j) + h;
    const Eigen::VectorXd fp = model(p, x);
    p(j) = params(j) - h;
    const Eigen::VectorXd fm = model(p, x);
    p(j) = params(j);
    // (p + h) - (p - h) is the step actually taken after rounding.
    const double span = (params(j) + h) - (params(j) - h);
    jac.col(j) = (fp - fm) / span;
  }
  return jac;
}

double check_jacobian(const ModelFn& model, const JacobianFn& jacobian,
                      const Eigen::VectorXd& params, std::span<const double> x) {
  const Eigen::MatrixXd analytic = jacobian(params, x);
  const Eigen::MatrixXd numeric = numeric_jacobian(model, params, x);
  require(analytic.rows() == numeric.rows() && analytic.cols() == numeric.cols(),
          "check_jacobian: analytic Jacobian has the wrong shape");
  double worst = 0.0;
  for (Eigen::Index j = 0; j < analytic.cols(); ++j) {
    const double col_scale =
        std::max(analytic.col(j).cwiseAbs().maxCoeff(), numeric.col(j).cwiseAbs().maxCoeff());
    if (col_scale == 0.0) continue;
    const double floor = 1e-4 * col_scale;
    for (Eigen::Index i = 0; i < analytic.rows(); ++i) {
      const double a = analytic(i, j);
      const double n = numeric(i, j);
      const double denom = std::max({std::abs(a), std::abs(n), floor});
      worst = std::max(worst, std::abs(a - n) / denom);
    }
  }
  return worst;
}

FitResult least_squares(const ModelFn& model, const JacobianFn& jacobian,
                        std::span<const double> x, std::span<const double> y,
                        std::span<const double> weights, const Eigen::VectorXd& initial,
                        const FitOptions& options) {
  const auto m = static_cast<Eigen::Index>(y.size());
  const Eigen::Index n = initial.size();
  require(x.size() == y.size(), "least_squares: x and y lengths differ");
  require(n >= 1, "least_squares: no parameters");
  require(m >= n, "least_squares: fewer data points than parameters");
  require(weights.empty() || weights.size() == y.size(), "least_squares: weights length differs");
  require(all_finite(initial), "least_squares: initial parameters must be finite");
  require(options.max_iter >= 1, "least_squares: max_iter must be positive");
  require(options.lambda0 >= 0.0, "least_squares: lambda0 must be non-negative");

  const Eigen::VectorXd yv = Eigen::Map<const Eigen::VectorXd>(y.data(), m);
  Eigen::VectorXd w = Eigen::VectorXd::Ones(m);
  if (!weights.empty()) w = Eigen::Map<const Eigen::VectorXd>(weights.data(), m);
  require((w.array() >= 0.0).all(), "least_squares: weights must be non-negative");

  auto jac_at = [&](const Eigen::VectorXd& p) -> Eigen::MatrixXd {
    Eigen::MatrixXd j = jacobian ? jacobian(p, x) : numeric_jacobian(model, p, x);
    if (j.rows() != m || j.cols() != n) fail(ErrorCode::invalid_argument, "Jacobian has the wrong shape");
    return j;
  };

  FitResult out;
  Eigen::VectorXd p = initial;
  Eigen::VectorXd r = residuals(model, p, x, yv);
  if (!all_finite(r)) fail(ErrorCode::invalid_argument, "least_squares: model is not finite at the initial point");
  double ssr = weighted_ssr(r, w);
  out.ssr_trace.push_back(ssr);

  double lambda = options.lambda0;
  bool done = false;
  int iter = 0;
  while (!done && iter < options.max_iter) {
    ++iter;
    const Eigen::MatrixXd J = jac_at(p);
    const Eigen::MatrixXd JtW = J.transpose() * w.asDiagonal();
    const Eigen::MatrixXd A = JtW * J;
    const Eigen::VectorXd g = JtW * r;

    // Scale-free gradient test: cosine between the residual and each column.
    double gmax = 0.0;
    for (Eigen::Index j = 0; j < n; ++j) {
      const double denom = std::sqrt(A(j, j) * ssr);
      if (denom > 0.0) gmax = std::max(gmax, std::abs(g(j)) / denom);
    }
    if (ssr == 0.0 || gmax <= options.gtol) {
      out.termination = Termination::gradient_tol;
      out.converged = true;
      out.ssr_trace.push_back(ssr);
      break;
    }

    Eigen::VectorXd damping = A.diagonal();
    const double dmax = damping.maxCoeff();
    for (Eigen::Index j = 0; j < n; ++j) damping(j) = std::max(damping(j), 1e-15 * dmax);

    bool accepted = false;
    for (int attempt = 0; attempt < 64; ++attempt) {
      Eigen::MatrixXd lhs = A;
      lhs.diagonal() += lambda * damping;
      const Eigen::VectorXd delta = lhs.ldlt().solve(g);
      const Eigen::VectorXd p_new = p + delta;
      const bool tiny_step = delta.norm() <= options.xtol * (p.norm() + options.xtol);

      if (all_finite(delta) && all_finite(p_new)) {
        const Eigen::VectorXd r_new = residuals(model, p_new, x, yv);
        const double ssr_new = all_finite(r_new) ? weighted_ssr(r_new, w)
                                                 : std::numeric_limits<double>::infinity();
        if (ssr_new < ssr) {
          p = p_new;
          r = r_new;
          ssr = ssr_new;
          lambda /= 10.0;
          accepted = true;
          if (tiny_step) {
            out.termination = Termination::step_tol;
            out.converged = true;
            done = true;
          }
          break;
        }
      }
      if (tiny_step) {
        out.termination = Termination::step_tol;
        out.converged = true;
        done = true;
        break;
      }
      lambda = lambda == 0.0 ? 1e-3 : lambda * 10.0;
    }
    if (!accepted && !done) {
      // Damping saturated without progress: the point is a minimum to working precision.
      out.termination = Termination::step_tol;
      out.converged = true;
      done = true;
    }
    out.ssr_trace.push_back(ssr);
  }

  if (!out.converged) out.termination = Termination::max_iter;
  out.iterations = iter;
  out.params = p;
  out.residual_norm = std::sqrt(ssr);

  const Eigen::MatrixXd J = jac_at(p);
  const Eigen::MatrixXd A = J.transpose() * w.asDiagonal() * J;
  const double dof = static_cast<double>(std::max<Eigen::Index>(m - n, 1));
  out.covariance = covariance_from(A) * (ssr / dof);
  return out;
}

LineFit fit_line(std::span<const double> x, std::span<const double> y, bool through_origin) {
  require(x.size() == y.size(), "fit_line: lengths differ");
  const std::size_t m = x.size();
  const std::size_t params = through_origin ? 1 : 2;
  if (m < params) fail(ErrorCode::insufficient_data, "fit_line: not enough points");

  LineFit out;
  double sxx = 0.0, sxy = 0.0;
  double xm = 0.0, ym = 0.0;
  if (!through_origin) {
    for (std::size_t i = 0; i < m; ++i) {
      xm += x[i];
      ym += y[i];
    }
    xm /= static_cast<double>(m);
    ym /= static_cast<double>(m);
  }
  for (std::size_t i = 0; i < m; ++i) {
    const double dx = x[i] - xm;
    const double dy = y[i] - ym;
    sxx += dx * dx;
    sxy += dx * dy;
  }
  if (!(sxx > 0.0)) fail(ErrorCode::degenerate_data, "fit_line: abscissa has no spread");
  out.slope = sxy / sxx;
  out.intercept = through_origin ? 0.0 : ym - out.slope * xm;

  double ssr = 0.0, sst = 0.0;
  double ymean = 0.0;
  for (std::size_t i = 0; i < m; ++i) ymean += y[i];
  ymean /= static_cast<double>(m);
  for (std::size_t i = 0; i < m; ++i) {
    const double res = y[i] - (out.slope * x[i] + out.intercept);
    ssr += res * res;
    sst += (y[i] - ymean) * (y[i] - ymean);
  }
  const double sigma2 = m > params ? ssr / static_cast<double>(m - params) : 0.0;
  out.slope_stderr = std::sqrt(sigma2 / sxx);
  if (!through_origin) {
    out.intercept_stderr = std::sqrt(sigma2 * (1.0 / static_cast<double>(m) + xm * xm / sxx));
  }
  out.r_squared = sst > 0.0 ? 1.0 - ssr / sst : 1.0;
  return out;
}

}  // namespace vaporcell::fitkit
