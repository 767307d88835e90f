#include <doctest.h>

#include <cmath>
#include <random>
#include <vector>

#include "vaporcell/errors.hpp"
#include "vaporcell/fitkit.hpp"
#include "vaporcell/lineshape.hpp"

using namespace vaporcell;
using namespace vaporcell::lineshape;

namespace {

std::vector<atomic::TransitionLine> single_line() {
  return {atomic::TransitionLine{1, 1, 0.0, 1.0}};
}

}  // namespace

TEST_CASE("single-line peak and half width") {
  AbsorptionParams p;
  p.linewidth_ghz = 5.0;
  p.center_shift_ghz = 1.5;
  const auto lines = single_line();
  const double expected_peak = p.atomic_density * 2.8179403262e-15 * 299792458.0 * 0.34231 * 4e-3 * 2.0 / 5e9;
  CHECK(optical_depth(1.5, p, lines) == doctest::Approx(expected_peak).epsilon(1e-12));
  CHECK(optical_depth(1.5 + 2.5, p, lines) == doctest::Approx(0.5 * expected_peak).epsilon(1e-12));
  CHECK(optical_depth(1.5 - 2.5, p, lines) == doctest::Approx(0.5 * expected_peak).epsilon(1e-12));
}

TEST_CASE("transmission follows Beer-Lambert") {
  AbsorptionParams p;
  const auto lines = weighted_lines(p);
  CHECK(transmission(1e6, p, lines, 2.0) == doctest::Approx(2.0).epsilon(1e-6));
  const double od = optical_depth(0.0, p, lines);
  CHECK(transmission(0.0, p, lines, 1.0) == doctest::Approx(std::exp(-od)).epsilon(1e-14));

  AbsorptionParams half = p;
  const double od0 = optical_depth(0.0, p, lines);
  half.atomic_density *= std::log(2.0) / od0;
  CHECK(transmission(0.0, half, lines, 1.0) == doctest::Approx(0.5).epsilon(1e-12));
}

TEST_CASE("broad line merges the hyperfine structure") {
  AbsorptionParams p;  // 16.38 GHz
  const auto lines = weighted_lines(p);
  const Spectrum s = synthesize(p, lines, 40.0, 801);
  int maxima = 0;
  for (std::size_t i = 1; i + 1 < s.size(); ++i) {
    CHECK(s.y[i] >= 0.0);
    if (s.y[i] > s.y[i - 1] && s.y[i] > s.y[i + 1]) ++maxima;
  }
  CHECK(maxima == 1);
  CHECK(optical_depth(1e5, p, lines) < 1e-6 * optical_depth(0.0, p, lines));
}

TEST_CASE("voigt term keeps area and Lorentzian limit") {
  double area = 0.0;
  const double h = 0.01;
  for (double d = -400.0; d <= 400.0; d += h) area += voigt_term(d, 2.0, 3.0) * h;
  CHECK(area == doctest::Approx(M_PI).epsilon(2e-3));
  CHECK(voigt_term(0.7, 2.0, 0.0) == lorentz_term(0.7, 2.0));
  CHECK(voigt_term(0.7, 2.0, 1e-4) == doctest::Approx(lorentz_term(0.7, 2.0)).epsilon(1e-3));
}

TEST_CASE("analytic Jacobian matches finite differences") {
  AbsorptionParams p;
  p.center_shift_ghz = 0.8;
  const auto lines = weighted_lines(p);
  std::vector<double> nu;
  for (int i = 0; i <= 120; ++i) nu.push_back(-30.0 + 0.5 * i);
  // Scaled parameters keep the central-difference step well conditioned.
  const double n_scale = 1e18;
  auto model = [&](const Eigen::VectorXd& q, std::span<const double> x) {
    AbsorptionParams t = p;
    t.atomic_density = q(0) * n_scale;
    t.linewidth_ghz = q(1);
    t.center_shift_ghz = q(2);
    const auto v = optical_depth(x, t, lines);
    return Eigen::VectorXd(Eigen::Map<const Eigen::VectorXd>(v.data(), static_cast<Eigen::Index>(v.size())));
  };
  auto jac = [&](const Eigen::VectorXd& q, std::span<const double> x) {
    AbsorptionParams t = p;
    t.atomic_density = q(0) * n_scale;
    t.linewidth_ghz = q(1);
    t.center_shift_ghz = q(2);
    Eigen::MatrixXd j = optical_depth_jacobian(x, t, lines);
    j.col(0) *= n_scale;
    return j;
  };
  Eigen::VectorXd q(3);
  q << p.atomic_density / n_scale, p.linewidth_ghz, p.center_shift_ghz;
  CHECK(fitkit::check_jacobian(model, jac, q, nu) < 1e-6);
}

TEST_CASE("noiseless round trip") {
  AbsorptionParams truth;
  truth.atomic_density = 2.3e18;
  truth.center_shift_ghz = -1.2;
  const auto lines = weighted_lines(truth);
  const Spectrum s = synthesize(truth, lines, 60.0, 601);
  const auto init = initial_guess(s, AbsorptionParams{});
  const auto fit = fit_absorption(s, init, lines);
  CHECK(fit.fit.converged);
  CHECK(fit.params.linewidth_ghz == doctest::Approx(16.38).epsilon(1e-3));
  CHECK(fit.params.atomic_density == doctest::Approx(2.3e18).epsilon(1e-3));
  CHECK(fit.params.center_shift_ghz == doctest::Approx(-1.2).epsilon(1e-3));
}

TEST_CASE("noisy round trip over seeds") {
  AbsorptionParams truth;
  const auto lines = weighted_lines(truth);
  const Spectrum clean = synthesize(truth, lines, 60.0, 601);
  for (std::uint64_t seed = 1; seed <= 20; ++seed) {
    std::mt19937_64 rng(seed);
    std::normal_distribution<double> g(0.0, 0.01);
    Spectrum s = clean;
    for (auto& v : s.y) v *= 1.0 + g(rng);
    const auto fit = fit_absorption(s, initial_guess(s, truth), lines);
    CHECK(fit.params.linewidth_ghz == doctest::Approx(16.38).epsilon(0.02));
  }
}

TEST_CASE("fit input checks") {
  AbsorptionParams p;
  const auto lines = weighted_lines(p);
  Spectrum tiny = synthesize(p, lines, 10.0, 5);
  CHECK_THROWS_AS(fit_absorption(tiny, p, lines), Error);
  Spectrum narrow = synthesize(p, lines, 1.0, 50);
  AbsorptionFitOptions o;
  o.resolution_ghz = 10.0;
  try {
    fit_absorption(narrow, p, lines, o);
    FAIL("expected degenerate_grid");
  } catch (const Error& e) {
    CHECK(e.code() == ErrorCode::degenerate_grid);
  }
}

TEST_CASE("buffer-gas density") {
  atomic::BufferGasCoefficients c{"N2", 17.8, 0.0};
  CHECK(buffer_density_from_linewidth(35.6, c) == doctest::Approx(2.0).epsilon(1e-12));
  CHECK(buffer_density_from_linewidth(1e-12, c) == doctest::Approx(0.0).scale(1.0));
  const auto& n2 = atomic::AtomicData::defaults().buffer_gas("N2");
  CHECK(std::abs(buffer_density_from_linewidth(16.38, n2) - 0.92) < 1e-6);
}

TEST_CASE("linewidth drift report") {
  std::vector<std::pair<double, double>> flat;
  for (int d = 0; d < 7; ++d) flat.emplace_back(5.0 * d, 16.38);
  const auto r0 = linewidth_drift_report(flat);
  CHECK(r0.slope_ghz_per_day == doctest::Approx(0.0).scale(1.0));
  CHECK(r0.pass);

  std::vector<std::pair<double, double>> ramp;
  for (int d = 0; d <= 30; ++d) ramp.emplace_back(d, 16.0 + 0.1 * d);
  const auto r1 = linewidth_drift_report(ramp);
  CHECK(r1.slope_ghz_per_day == doctest::Approx(0.1).epsilon(0.01));
  CHECK_FALSE(r1.pass);

  const std::vector<std::pair<double, double>> paper{{0, 16.38}, {5, 16.41}, {10, 16.35}, {15, 16.40},
                                                     {20, 16.36}, {25, 16.39}};
  CHECK(linewidth_drift_report(paper).pass);
}
