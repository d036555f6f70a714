#include "gfprop/amplitude.hpp"

#include <cmath>
#include <numbers>
#include <stdexcept>
#include <string>

#include "gfprop/ode.hpp"
#include "gfprop/quadrature.hpp"

namespace gfprop {

double log_rho(const SymbolConfig& sym, const Eigen::VectorXd& theta) {
  const double w2 = sym.rho_width * sym.rho_width;
  return -0.5 * theta.size() * std::log(std::numbers::pi * w2) - theta.squaredNorm() / w2;
}

double rho(const SymbolConfig& sym, const Eigen::VectorXd& theta) { return std::exp(log_rho(sym, theta)); }

namespace {

LaplacianEval laplacian_with(GenFunEvaluator& ev, const Eigen::VectorXd& z, const Eigen::VectorXd& eta,
                             const Eigen::MatrixXd& theta) {
  const int n = static_cast<int>(z.size());
  const int dim = 2 * n + static_cast<int>(theta.size());
  ev.solve(z, theta);
  LaplacianEval out{0.0, Eigen::VectorXd(n)};
  for (int i = 0; i < n; ++i) {
    Eigen::VectorXd e = Eigen::VectorXd::Zero(dim);
    e(i) = 1.0;
    const auto d = ev.directional2(z, eta, theta, e, e);
    out.gradient(i) = d[1];
    out.laplacian += d[3];
  }
  return out;
}

// int_0^t Delta_x S(tau, gamma^x(t, x, theta)(tau), eta, theta) dtau with a
// composite Gauss-Legendre rule on [0, t].
double transport_integral(const AczConfig& cfg, double t, const Eigen::VectorXd& x, const Eigen::VectorXd& eta,
                          const Eigen::MatrixXd& theta, int nodes, int panels) {
  if (t == 0.0) return 0.0;
  GenFunEvaluator ev(cfg, t);
  ev.solve(x, theta);
  const Eigen::MatrixXd phx = ev.work().phx;
  const Eigen::VectorXd ix = ev.work().ix;
  const GaussRule rule = gauss_legendre(nodes);
  const double h = t / panels;
  double acc = 0.0;
  for (int p = 0; p < panels; ++p)
    for (int a = 0; a < nodes; ++a) {
      const double tau = p * h + 0.5 * h * (rule.nodes(a) + 1.0);
      const Eigen::VectorXd z = x - (ix - integrate_nodal(ev.grid(), phx, tau).transpose());
      // Along the curve the tail is the same path on [0, T]; reuse it as warm start.
      GenFunEvaluator at(cfg, tau);
      at.warm_start(transfer_tail(ev.grid(), ev.tail(), at.grid()));
      acc += 0.5 * h * rule.weights(a) * laplacian_with(at, z, eta, theta).laplacian;
    }
  return acc;
}

void check_point(const AczConfig& cfg, double t, const Eigen::VectorXd& x, const Eigen::VectorXd& eta,
                 const ModeVector& theta) {
  if (!(t >= 0.0 && t <= cfg.period())) throw std::domain_error("amplitude: t outside [0, T]");
  if (x.size() != cfg.hamiltonian.dim() || eta.size() != x.size())
    throw std::invalid_argument("amplitude: dimension mismatch");
  if (theta.band() != Band::low || theta.coeffs().rows() != cfg.basis.low_modes())
    throw std::invalid_argument("amplitude: theta must be a low-band mode vector");
}

}  // namespace

LaplacianEval laplacian_x_S(const AczConfig& cfg, double tau, const Eigen::VectorXd& z, const Eigen::VectorXd& eta,
                            const Eigen::MatrixXd& theta) {
  GenFunEvaluator ev(cfg, tau);
  return laplacian_with(ev, z, eta, theta);
}

AmplitudeEval evaluate_b0(const AczConfig& cfg, const SymbolConfig& sym, double t, const Eigen::VectorXd& x,
                          const Eigen::VectorXd& eta, const ModeVector& theta, bool estimate_error) {
  check_point(cfg, t, x, eta, theta);
  const double inv_2m = 0.5 / cfg.hamiltonian.mass;
  AmplitudeEval out;
  const double I = transport_integral(cfg, t, x, eta, theta.coeffs(), sym.tau_nodes, sym.tau_panels);
  out.log_transport = -inv_2m * I;
  out.b0 = std::exp(out.log_transport + log_rho(sym, theta.flat()));
  if (estimate_error && t > 0.0) {
    const double coarse =
        transport_integral(cfg, t, x, eta, theta.coeffs(), std::max(1, sym.tau_nodes / 2), sym.tau_panels);
    out.quadrature_error = std::abs(std::exp(-inv_2m * coarse) - std::exp(out.log_transport)) *
                           std::exp(log_rho(sym, theta.flat()));
  }
  return out;
}

double b0(const AczConfig& cfg, const SymbolConfig& sym, double t, const Eigen::VectorXd& x,
          const Eigen::VectorXd& eta, const ModeVector& theta) {
  return evaluate_b0(cfg, sym, t, x, eta, theta).b0;
}

std::complex<double> bj(const AczConfig& cfg, const SymbolConfig& sym, int j, double t, const Eigen::VectorXd& x,
                        const Eigen::VectorXd& eta, const ModeVector& theta) {
  check_point(cfg, t, x, eta, theta);
  if (j < 0 || j > sym.j_max)
    throw std::invalid_argument("bj: order " + std::to_string(j) + " exceeds j_max=" + std::to_string(sym.j_max));
  if (j == 0) return b0(cfg, sym, t, x, eta, theta);
  if (t == 0.0) return 0.0;
  const int n = cfg.hamiltonian.dim();
  const double m = cfg.hamiltonian.mass;
  const Eigen::MatrixXd th = theta.coeffs();

  // Delta_x b_{j-1}(tau, z) by second differences with one Richardson step.
  auto lap_prev = [&](double tau, const Eigen::VectorXd& z) {
    const std::complex<double> centre = bj(cfg, sym, j - 1, tau, z, eta, theta);
    auto stencil = [&](double h) {
      std::complex<double> acc = 0.0;
      for (int i = 0; i < n; ++i) {
        Eigen::VectorXd zp = z, zm = z;
        zp(i) += h;
        zm(i) -= h;
        acc += (bj(cfg, sym, j - 1, tau, zp, eta, theta) - 2.0 * centre + bj(cfg, sym, j - 1, tau, zm, eta, theta)) /
               (h * h);
      }
      return acc;
    };
    const double h = sym.laplacian_step * (1.0 + z.norm());
    return (4.0 * stencil(0.5 * h) - stencil(h)) / 3.0;
  };

  // State (zeta, Lambda, J) integrated backwards from tau = t to 0, with
  // Lambda(tau) = int_tau^t Delta_x S and J(tau) = int_tau^t e^{-Lambda/2m} Delta_x b_{j-1}.
  auto rhs = [&](double tau, const Eigen::VectorXd& y) {
    const Eigen::VectorXd zeta = y.head(n);
    Eigen::VectorXd dy(n + 3);
    const LaplacianEval L = laplacian_x_S(cfg, tau, zeta, eta, th);
    dy.head(n) = L.gradient / m;
    dy(n) = -L.laplacian;
    const std::complex<double> src = -std::exp(-y(n) / (2.0 * m)) * lap_prev(tau, zeta);
    dy(n + 1) = src.real();
    dy(n + 2) = src.imag();
    return dy;
  };
  Eigen::VectorXd y0 = Eigen::VectorXd::Zero(n + 3);
  y0.head(n) = x;
  OdeOptions opt;
  opt.rtol = sym.characteristic_tol;
  opt.atol = sym.characteristic_tol * 1e-3;
  opt.initial_step = t / 8.0;
  const Eigen::VectorXd y = integrate_dp45(rhs, t, 0.0, y0, opt);
  const std::complex<double> J(y(n + 1), y(n + 2));
  return std::complex<double>(0.0, 1.0 / (2.0 * m)) * J;
}

double transport_residual_b0(const AczConfig& cfg, const SymbolConfig& sym, double t, const Eigen::VectorXd& x,
                             const Eigen::VectorXd& eta, const ModeVector& theta, double step) {
  check_point(cfg, t, x, eta, theta);
  const int n = cfg.hamiltonian.dim();
  const double m = cfg.hamiltonian.mass;
  const double T = cfg.period();
  const double b = b0(cfg, sym, t, x, eta, theta);
  auto b_at = [&](double tt, const Eigen::VectorXd& xx) { return b0(cfg, sym, tt, xx, eta, theta); };

  auto dt_at = [&](double h) {
    if (t - h >= 0.0 && t + h <= T) return (b_at(t + h, x) - b_at(t - h, x)) / (2.0 * h);
    if (t - h < 0.0) return (-3.0 * b + 4.0 * b_at(t + h, x) - b_at(t + 2.0 * h, x)) / (2.0 * h);
    return (3.0 * b - 4.0 * b_at(t - h, x) + b_at(t - 2.0 * h, x)) / (2.0 * h);
  };
  const double db_dt = (4.0 * dt_at(0.5 * step) - dt_at(step)) / 3.0;

  Eigen::VectorXd grad_b(n);
  for (int i = 0; i < n; ++i) {
    auto central = [&](double h) {
      Eigen::VectorXd xp = x, xm = x;
      xp(i) += h;
      xm(i) -= h;
      return (b_at(t, xp) - b_at(t, xm)) / (2.0 * h);
    };
    grad_b(i) = (4.0 * central(0.5 * step) - central(step)) / 3.0;
  }
  const LaplacianEval L = laplacian_x_S(cfg, t, x, eta, theta.coeffs());
  return std::abs(db_dt + L.gradient.dot(grad_b) / m + L.laplacian * b / (2.0 * m));
}

}  // namespace gfprop
