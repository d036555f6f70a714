#include <doctest.h>

#include <cmath>
#include <numbers>
#include <random>

#include "gfprop/amplitude.hpp"
#include "gfprop/quadrature.hpp"
#include "gfprop/stationary.hpp"

using namespace gfprop;

namespace {

const double pi = std::numbers::pi;

HamiltonianSpec oscillator(double a = 0.0) {
  const Eigen::MatrixXd L = Eigen::MatrixXd::Constant(1, 1, 0.5);
  return {a > 0.0 ? PotentialSpec::with_cosine(L, a, Eigen::VectorXd::Ones(1)) : PotentialSpec::quadratic(L), 1.0};
}

Eigen::VectorXd v1(double a) { return Eigen::VectorXd::Constant(1, a); }

ModeVector random_low(const AczConfig& cfg, std::mt19937_64& rng, double scale) {
  std::normal_distribution<double> normal(0.0, scale);
  ModeVector th(cfg.basis, Band::low);
  for (Eigen::Index i = 0; i < th.coeffs().size(); ++i) th.coeffs().data()[i] = normal(rng);
  return th;
}

// Tensor Gauss-Hermite integral of rho in k dimensions.
double integrate_rho(const SymbolConfig& sym, int k, int points) {
  const GaussRule gh = gauss_hermite(points);
  Eigen::VectorXi idx = Eigen::VectorXi::Zero(k);
  Eigen::VectorXd theta(k);
  double total = 0.0;
  while (true) {
    double w = 1.0;
    for (int i = 0; i < k; ++i) {
      theta(i) = gh.nodes(idx(i));
      w *= gh.weights(idx(i)) * std::exp(theta(i) * theta(i));
    }
    total += w * rho(sym, theta);
    int d = 0;
    while (d < k && ++idx(d) == points) idx(d++) = 0;
    if (d == k) break;
  }
  return total;
}

}  // namespace

TEST_SUITE("amplitude") {
  TEST_CASE("rho") {
    const SymbolConfig sym;
    CHECK(rho(sym, Eigen::VectorXd::Zero(2)) == doctest::Approx(1.0 / pi).epsilon(1e-15));
    Eigen::VectorXd th(3);
    th << 0.3, -1.2, 0.5;
    CHECK(rho(sym, th) == rho(sym, -th));
    CHECK(std::log(rho(sym, th)) == doctest::Approx(log_rho(sym, th)).epsilon(1e-14));
    for (int k = 1; k <= 6; ++k) CHECK(std::abs(integrate_rho(sym, k, k <= 4 ? 12 : 8) - 1.0) <= 1e-10);
    SymbolConfig narrow;
    narrow.rho_width = 0.8;
    for (int k = 1; k <= 4; ++k) CHECK(std::abs(integrate_rho(narrow, k, 24) - 1.0) <= 1e-10);
  }

  TEST_CASE("b0 at t = 0 is rho") {
    const AczConfig cfg = make_acz_config(oscillator(0.1), 1.0, 1);
    const SymbolConfig sym;
    std::mt19937_64 rng(1);
    const ModeVector th = random_low(cfg, rng, 0.5);
    CHECK(b0(cfg, sym, 0.0, v1(0.4), v1(-0.7), th) == rho(sym, th.flat()));
  }

  TEST_CASE("b0 tau-quadrature self-convergence for the oscillator") {
    const AczConfig cfg = make_acz_config(oscillator(), 1.0, 1);
    SymbolConfig one, two;
    two.tau_panels = 2;
    const ModeVector zero(cfg.basis, Band::low);
    for (double t : {0.3, 0.8}) {
      const double a = b0(cfg, one, t, v1(0.5), v1(0.2), zero);
      const double b = b0(cfg, two, t, v1(0.5), v1(0.2), zero);
      CHECK(std::abs(a - b) <= 1e-10 * b);
      // Laplacian is independent of x for a quadratic action.
      CHECK(b0(cfg, one, t, v1(-1.4), v1(0.2), zero) == doctest::Approx(a).epsilon(1e-10));
    }
    const AmplitudeEval e = evaluate_b0(cfg, one, 0.8, v1(0.5), v1(0.2), zero, true);
    CHECK(e.quadrature_error <= 1e-10 * e.b0);
  }

  TEST_CASE("b0 is positive and decays like rho") {
    const AczConfig cfg = make_acz_config(oscillator(0.1), 1.0, 1);
    const SymbolConfig sym;
    std::mt19937_64 rng(2);
    double worst = 0.0;
    for (int s = 0; s < 24; ++s) {
      const ModeVector th = random_low(cfg, rng, 0.5 + 0.25 * (s % 8));
      const AmplitudeEval e = evaluate_b0(cfg, sym, 0.7, v1(0.3), v1(-0.4), th);
      CHECK(e.b0 > 0.0);
      worst = std::max(worst, std::abs(e.log_transport));
    }
    // b0 e^{|theta|^2} = pi^{-k/2} e^{log_transport} stays bounded on the samples.
    CHECK(worst < 5.0);
  }

  TEST_CASE("transport equation holds at stationary points") {
    const AczConfig cfg = make_acz_config(oscillator(0.1), 2.0, 3);
    const SymbolConfig sym;
    for (double x : {-1.0, 0.6}) {
      const BranchSet set = find_branches(cfg, 1.2, v1(x), v1(0.4));
      REQUIRE(set.count() >= 1);
      for (const Branch& b : set.branches)
        CHECK(transport_residual_b0(cfg, sym, 1.2, v1(x), v1(0.4), b.theta_star) <= 1e-5);
    }
  }

  TEST_CASE("b1") {
    const AczConfig cfg = make_acz_config(oscillator(0.1), 1.0, 1);
    const SymbolConfig sym;
    std::mt19937_64 rng(4);
    const ModeVector th = random_low(cfg, rng, 0.3);
    const Eigen::VectorXd x = v1(0.4), eta = v1(-0.3);
    CHECK(std::abs(bj(cfg, sym, 1, 0.0, x, eta, th)) == 0.0);
    CHECK_THROWS_AS(bj(cfg, sym, 2, 0.5, x, eta, th), std::invalid_argument);
    CHECK(bj(cfg, sym, 0, 0.5, x, eta, th).real() == doctest::Approx(b0(cfg, sym, 0.5, x, eta, th)));

    // Oscillator at theta = 0: b0 does not depend on x, so b1 vanishes.
    const AczConfig ho = make_acz_config(oscillator(), 1.0, 1);
    CHECK(std::abs(bj(ho, sym, 1, 0.6, x, eta, ModeVector(ho.basis, Band::low))) <= 1e-8);

    // Growth from zero under the crude bound t sup|Delta b0| sup|Phi| / 2m.
    double sup_lap_b0 = 0.0, sup_lap_S = 0.0;
    const double h = 1e-3;
    for (double tau = 0.1; tau <= 0.8 + 1e-12; tau += 0.1)
      for (double z = -1.5; z <= 1.5 + 1e-12; z += 0.25) {
        const double lap = (b0(cfg, sym, tau, v1(z + h), eta, th) - 2.0 * b0(cfg, sym, tau, v1(z), eta, th) +
                            b0(cfg, sym, tau, v1(z - h), eta, th)) /
                           (h * h);
        sup_lap_b0 = std::max(sup_lap_b0, std::abs(lap));
        sup_lap_S = std::max(sup_lap_S, std::abs(laplacian_x_S(cfg, tau, v1(z), eta, th.coeffs()).laplacian));
      }
    double previous = 0.0;
    for (double t : {0.05, 0.2, 0.4, 0.8}) {
      const double value = std::abs(bj(cfg, sym, 1, t, x, eta, th));
      const double sup_phi = std::exp(t * sup_lap_S / 2.0);
      CHECK(value <= t * sup_lap_b0 * sup_phi / 2.0);
      CHECK(value > previous);
      previous = value;
    }

    // Halving the x-step moves b1 by at most 1e-5 relative.
    SymbolConfig half = sym;
    half.laplacian_step = sym.laplacian_step / 2.0;
    const std::complex<double> a = bj(cfg, sym, 1, 0.8, x, eta, th);
    const std::complex<double> b = bj(cfg, half, 1, 0.8, x, eta, th);
    CHECK(std::abs(a - b) <= 1e-5 * std::abs(b));
  }
}
