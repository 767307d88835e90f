#include <doctest.h>

#include <cmath>
#include <random>
#include <vector>

#include "vaporcell/errors.hpp"
#include "vaporcell/fitkit.hpp"
#include "vaporcell/hanle.hpp"
#include "vaporcell/sigproc.hpp"

using namespace vaporcell;
using namespace vaporcell::hanle;

namespace {

// Sz of dS/dt = gamma S x B + R (z/2 - S) - r S with B = (Bx, 0, 0):
// Sy = gamma Bx Sz / G and Sz (G + (gamma Bx)^2 / G) = R / 2, G = R + r.
double sz_oracle(double r_op, double r_rel, double gamma, double bx) {
  const double g = r_op + r_rel;
  return 0.5 * r_op * g / (g * g + gamma * gamma * bx * bx);
}

struct Sweep {
  Spectrum in, quad;
};

Sweep make_sweep(const HanleParams& p, double noise, std::uint64_t seed) {
  Sweep s;
  std::mt19937_64 rng(seed);
  std::normal_distribution<double> g(0.0, 1.0);
  const double quad_scale = std::abs(p.a1) / (2.0 * p.delta_b_nt);
  for (int i = 0; i <= 240; ++i) {
    const double bx = -60.0 + 0.5 * i;
    s.in.x.push_back(bx);
    s.quad.x.push_back(bx);
    s.in.y.push_back(in_phase(bx, p) + noise * std::abs(p.a0) * g(rng));
    s.quad.y.push_back(out_of_phase(bx, p) + noise * quad_scale * g(rng));
  }
  return s;
}

}  // namespace

TEST_CASE("line shape landmarks") {
  HanleParams p{2.0, 3.0, 0.1, -0.2, 1.5, 10.5};
  CHECK(in_phase(1.5, p) == doctest::Approx(2.1));
  CHECK(in_phase(1.5 + 10.5, p) == doctest::Approx(1.1));
  CHECK(in_phase(1.5 - 10.5, p) == doctest::Approx(1.1));
  CHECK(in_phase(1e9, p) == doctest::Approx(0.1));
  CHECK(out_of_phase(1.5, p) == doctest::Approx(-0.2));
  CHECK(out_of_phase(1.5 + 10.5, p) == doctest::Approx(3.0 / 21.0 - 0.2));
}

TEST_CASE("line shape Jacobians") {
  HanleParams p{1.3, 7.0, 0.05, 0.01, 0.7, 10.5};
  std::vector<double> bx;
  for (int i = 0; i <= 80; ++i) bx.push_back(-40.0 + i);
  auto in_model = [](const Eigen::VectorXd& q, std::span<const double> x) {
    HanleParams t{q(0), 0.0, q(1), 0.0, q(2), q(3)};
    Eigen::VectorXd y(static_cast<Eigen::Index>(x.size()));
    for (std::size_t i = 0; i < x.size(); ++i) y(static_cast<Eigen::Index>(i)) = in_phase(x[i], t);
    return y;
  };
  auto in_jac = [](const Eigen::VectorXd& q, std::span<const double> x) {
    return in_phase_jacobian(x, HanleParams{q(0), 0.0, q(1), 0.0, q(2), q(3)});
  };
  auto q_model = [](const Eigen::VectorXd& q, std::span<const double> x) {
    HanleParams t{0.0, q(0), 0.0, q(1), q(2), q(3)};
    Eigen::VectorXd y(static_cast<Eigen::Index>(x.size()));
    for (std::size_t i = 0; i < x.size(); ++i) y(static_cast<Eigen::Index>(i)) = out_of_phase(x[i], t);
    return y;
  };
  auto q_jac = [](const Eigen::VectorXd& q, std::span<const double> x) {
    return out_of_phase_jacobian(x, HanleParams{0.0, q(0), 0.0, q(1), q(2), q(3)});
  };
  Eigen::VectorXd a(4), b(4);
  a << p.a0, p.c0, p.bx0_nt, p.delta_b_nt;
  b << p.a1, p.c1, p.bx0_nt, p.delta_b_nt;
  CHECK(fitkit::check_jacobian(in_model, in_jac, a, bx) < 1e-6);
  CHECK(fitkit::check_jacobian(q_model, q_jac, b, bx) < 1e-6);
}

TEST_CASE("joint fit round trips") {
  const HanleParams truth{1.0, 10.5, 0.02, -0.01, 0.8, 10.5};
  const auto clean = make_sweep(truth, 0.0, 1);
  const auto fit = fit_zero_field_resonance(clean.in, clean.quad, initial_guess(clean.in, clean.quad));
  CHECK(fit.params.a0 == doctest::Approx(truth.a0).epsilon(1e-3));
  CHECK(fit.params.a1 == doctest::Approx(truth.a1).epsilon(1e-3));
  CHECK(fit.params.bx0_nt == doctest::Approx(truth.bx0_nt).epsilon(1e-3));
  CHECK(fit.params.delta_b_nt == doctest::Approx(truth.delta_b_nt).epsilon(1e-3));

  for (std::uint64_t seed = 1; seed <= 10; ++seed) {
    const auto noisy = make_sweep(truth, 0.01, seed);
    const auto f = fit_zero_field_resonance(noisy.in, noisy.quad, initial_guess(noisy.in, noisy.quad));
    CHECK(f.params.delta_b_nt == doctest::Approx(10.5).epsilon(0.02));
  }
}

TEST_CASE("pure offsets are rejected") {
  const HanleParams flat{0.0, 0.0, 0.3, 0.1, 0.0, 10.0};
  const auto s = make_sweep(flat, 0.0, 1);
  HanleParams init{1.0, 1.0, 0.0, 0.0, 0.0, 10.0};
  try {
    fit_zero_field_resonance(s.in, s.quad, init);
    FAIL("expected a failure");
  } catch (const Error& e) {
    CHECK((e.code() == ErrorCode::zero_amplitude || e.code() == ErrorCode::non_convergence));
  }
}

TEST_CASE("mismatched sweeps are rejected") {
  const HanleParams p{1.0, 10.5, 0.0, 0.0, 0.0, 10.5};
  auto s = make_sweep(p, 0.0, 1);
  s.quad.x.pop_back();
  s.quad.y.pop_back();
  try {
    fit_zero_field_resonance(s.in, s.quad, p);
    FAIL("expected grid_mismatch");
  } catch (const Error& e) {
    CHECK(e.code() == ErrorCode::grid_mismatch);
  }
}

TEST_CASE("relaxation from linewidth") {
  CHECK(relaxation_from_linewidth(10.5) == doctest::Approx(2.0 * M_PI * 28.024 * 10.5).epsilon(1e-12));
  CHECK(std::abs(relaxation_from_linewidth(10.5) / 1800.0 - 1.0) < 0.05);
  CHECK(relaxation_from_linewidth(1e-12) == doctest::Approx(0.0).scale(1.0));
  CHECK(relaxation_from_linewidth(10.5, kElectronGyromagnetic, 2.0) ==
        doctest::Approx(0.5 * relaxation_from_linewidth(10.5)));
}

TEST_CASE("Bloch zero-field polarization") {
  BlochConfig c;
  c.duration = 0.02;
  const auto tr = bloch_simulate(c);
  CHECK(tr.final_spin[2] == doctest::Approx(0.25).epsilon(1e-6));
  CHECK(tr.max_spin_norm <= 0.5);
  const auto ss = steady_state_spin(900.0, 900.0, kElectronGyromagnetic, {0.0, 0.0, 0.0});
  CHECK(ss[2] == 0.25);
}

TEST_CASE("steady-state closed form against the oracle") {
  for (double bx : {0.0, 3.0, 10.0, 40.0}) {
    const auto s = steady_state_spin(700.0, 1100.0, kElectronGyromagnetic, {bx, 0.0, 0.0});
    CHECK(s[2] == doctest::Approx(sz_oracle(700.0, 1100.0, kElectronGyromagnetic, bx)).epsilon(1e-12));
  }
}

TEST_CASE("steady-state sweep is Lorentzian with the predicted width") {
  std::mt19937_64 rng(11);
  std::uniform_real_distribution<double> u(300.0, 2000.0);
  for (int k = 0; k < 10; ++k) {
    BlochConfig c;
    c.pumping_rate = u(rng);
    c.relaxation_rate = u(rng);
    const double hwhm = (c.pumping_rate + c.relaxation_rate) / kElectronGyromagnetic;
    const std::vector<double> bx{0.0, hwhm};
    const auto sz = steady_state_sweep(c, bx);
    CHECK(sz[1] / sz[0] == doctest::Approx(0.5).epsilon(0.01));
    CHECK(sz[0] == doctest::Approx(sz_oracle(c.pumping_rate, c.relaxation_rate, kElectronGyromagnetic, 0.0)).epsilon(1e-4));
  }
}

TEST_CASE("step-size guard") {
  BlochConfig c;
  c.sample_rate = 10e3;
  try {
    modulated_response(c, 890.0, 160.0, 0.0);
    FAIL("expected step_size");
  } catch (const Error& e) {
    CHECK(e.code() == ErrorCode::step_size);
  }
}

TEST_CASE("modulated response is odd in the test field") {
  BlochConfig c;
  c.sample_rate = 100e3;
  c.duration = 0.1;
  auto demod = [&](double b) {
    const auto tr = modulated_response(c, 890.0, 160.0, b);
    sigproc::LockInOptions o;
    o.ref_freq = 890.0;
    o.lp_cutoff = 300.0;
    o.lp_poles = 2;
    const auto d = sigproc::lock_in(tr.transmission, o);
    return std::pair{sigproc::settled_mean(d.in_phase, 0.5, 1.0 / 890.0),
                     sigproc::settled_mean(d.quadrature, 0.5, 1.0 / 890.0)};
  };
  const auto [x0, y0] = demod(0.0);
  const auto [xp, yp] = demod(0.5);
  const auto [xm, ym] = demod(-0.5);
  const double full = std::hypot(xp, yp);
  CHECK(std::hypot(x0, y0) < 0.01 * full);
  CHECK(xp == doctest::Approx(-xm).epsilon(0.01));
  CHECK(yp == doctest::Approx(-ym).epsilon(0.01));
}
