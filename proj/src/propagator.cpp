#include "gfprop/propagator.hpp"

#include <Eigen/Dense>

#include <algorithm>
#include <cmath>
#include <numbers>
#include <string>

#include "gfprop/parallel.hpp"
#include "gfprop/quadrature.hpp"

namespace gfprop {

namespace {

using cd = std::complex<double>;
constexpr double pi = std::numbers::pi;

void check_resonance(const AczConfig& cfg, double t, double margin) {
  for (double r : resonant_times(cfg.hamiltonian, cfg.period()).times)
    if (std::abs(t - r) < margin)
      throw ResonanceError("kernel: t = " + std::to_string(t) + " is within " + std::to_string(margin) +
                           " of the resonant time " + std::to_string(r));
}

Eigen::VectorXd unit(int dim, int i) {
  Eigen::VectorXd e = Eigen::VectorXd::Zero(dim);
  e(i) = 1.0;
  return e;
}

}  // namespace

void check_nyquist(const UniformGrid& x_grid, const UniformGrid& eta_grid, double hbar) {
  if (!(hbar > 0.0)) throw std::invalid_argument("hbar must be positive");
  if (eta_grid.spacing() > pi * hbar / x_grid.X * (1.0 + 1e-12))
    throw NyquistError("eta grid spacing " + std::to_string(eta_grid.spacing()) + " exceeds pi hbar / X = " +
                       std::to_string(pi * hbar / x_grid.X));
  if (x_grid.spacing() > pi * hbar / eta_grid.X * (1.0 + 1e-12))
    throw NyquistError("x grid spacing " + std::to_string(x_grid.spacing()) + " exceeds pi hbar / X_eta = " +
                       std::to_string(pi * hbar / eta_grid.X));
}

Eigen::VectorXcd hbar_ft(const Wavefunction& phi, const UniformGrid& eta_grid) {
  check_nyquist(phi.grid, eta_grid, phi.hbar);
  const Eigen::VectorXd y = phi.grid.nodes(), eta = eta_grid.nodes();
  Eigen::VectorXcd out(eta.size());
  for (Eigen::Index i = 0; i < eta.size(); ++i) {
    cd acc = 0.0;
    for (Eigen::Index j = 0; j < y.size(); ++j) acc += std::exp(cd(0.0, -y(j) * eta(i) / phi.hbar)) * phi.values(j);
    out(i) = phi.grid.spacing() * acc;
  }
  return out;
}

Wavefunction inverse_hbar_ft(const Eigen::VectorXcd& phi_hat, const UniformGrid& eta_grid, const UniformGrid& x_grid,
                             double hbar) {
  check_nyquist(x_grid, eta_grid, hbar);
  if (phi_hat.size() != eta_grid.N) throw std::invalid_argument("inverse_hbar_ft: values do not match the eta grid");
  const Eigen::VectorXd x = x_grid.nodes(), eta = eta_grid.nodes();
  Wavefunction out{x_grid, Eigen::VectorXcd(x.size()), hbar};
  const double scale = eta_grid.spacing() / (2.0 * pi * hbar);
  for (Eigen::Index i = 0; i < x.size(); ++i) {
    cd acc = 0.0;
    for (Eigen::Index j = 0; j < eta.size(); ++j) acc += std::exp(cd(0.0, x(i) * eta(j) / hbar)) * phi_hat(j);
    out.values(i) = scale * acc;
  }
  return out;
}

cd gaussian_hbar_ft(double eta, double hbar, const GaussianDatum& g) {
  const double s = resolved_width(g, hbar);
  const double d = eta - g.momentum;
  return std::pow(pi * s * s, -0.25) * std::sqrt(2.0 * pi) * s * std::exp(-s * s * d * d / (2.0 * hbar * hbar)) *
         std::exp(cd(0.0, -g.center * eta / hbar));
}

int reference_signature(const AczConfig& cfg, const SearchOptions& opt) {
  const int n = cfg.hamiltonian.dim();
  const BranchSet set =
      find_branches(cfg, 1e-2 * cfg.period(), Eigen::VectorXd::Zero(n), Eigen::VectorXd::Zero(n), opt);
  return set.count() ? set.branches.front().signature : 0;
}

cd branch_term(const AczConfig& cfg, const SymbolConfig& sym, double t, const Eigen::VectorXd& x,
               const Eigen::VectorXd& eta, const Branch& b, double hbar, AmplitudeForm form, int sigma_ref) {
  const int k = cfg.parameter_dim();
  if (form == AmplitudeForm::transport) {
    const AmplitudeEval a = evaluate_b0(cfg, sym, t, x, eta, b.theta_star);
    const double log_amp =
        0.5 * k * std::log(2.0 * pi * hbar) - 0.5 * b.log_abs_det + a.log_transport + log_rho(sym, b.theta_star.flat());
    return std::exp(cd(log_amp, b.action / hbar + 0.25 * pi * b.signature));
  }
  // Mixed Hessian of the reduced phase: S_xeta - S_xtheta (S_thetatheta)^{-1} S_thetaeta.
  const int n = static_cast<int>(x.size());
  const int dim = 2 * n + k;
  GenFunEvaluator ev(cfg, t);
  const Eigen::MatrixXd theta = b.theta_star.coeffs();
  ev.solve(x, theta);
  Eigen::MatrixXd s_xeta(n, n), s_xth(n, k), s_thEta(k, n);
  for (int i = 0; i < n; ++i) {
    for (int j = 0; j < n; ++j) s_xeta(i, j) = ev.directional2(x, eta, theta, unit(dim, i), unit(dim, n + j))[3];
    for (int a = 0; a < k; ++a) {
      s_xth(i, a) = ev.directional2(x, eta, theta, unit(dim, i), unit(dim, 2 * n + a))[3];
      s_thEta(a, i) = ev.directional2(x, eta, theta, unit(dim, 2 * n + a), unit(dim, n + i))[3];
    }
  }
  const Eigen::MatrixXd reduced = s_xeta - s_xth * b.hess_theta.fullPivLu().solve(s_thEta);
  const double amp = std::sqrt(std::abs(reduced.determinant()));
  return amp * std::exp(cd(0.0, b.action / hbar + 0.25 * pi * (b.signature - sigma_ref)));
}

KernelMatrix wkb_kernel(const AczConfig& cfg, const SymbolConfig& sym, double t, const Eigen::VectorXd& x,
                        const Eigen::VectorXd& eta, double hbar, const KernelOptions& opt,
                        const std::vector<bool>& active) {
  if (cfg.hamiltonian.dim() != 1) throw std::invalid_argument("wkb_kernel: kernel assembly supports n = 1 only");
  if (!(hbar > 0.0)) throw std::invalid_argument("wkb_kernel: hbar must be positive");
  if (!active.empty() && active.size() != static_cast<std::size_t>(eta.size()))
    throw std::invalid_argument("wkb_kernel: column mask has the wrong length");
  if (!(t >= 0.0 && t <= cfg.period())) throw std::domain_error("wkb_kernel: t outside [0, T]");
  const int nx = static_cast<int>(x.size()), ne = static_cast<int>(eta.size());
  KernelMatrix K;
  K.t = t;
  K.hbar = hbar;
  K.x = x;
  K.eta = eta;
  K.values = Eigen::MatrixXcd::Zero(nx, ne);
  K.counts = Eigen::MatrixXi::Constant(nx, ne, -2);
  auto is_active = [&](int j) { return active.empty() || active[j]; };

  if (t == 0.0) {
    // S = <x, eta> and b0 = rho with unit mass: the kernel is the plane wave.
    for (int j = 0; j < ne; ++j) {
      if (!is_active(j)) continue;
      for (int i = 0; i < nx; ++i) {
        K.values(i, j) = std::exp(cd(0.0, x(i) * eta(j) / hbar));
        K.counts(i, j) = 1;
      }
    }
    return K;
  }
  check_resonance(cfg, t, opt.search.resonance_margin);
  if (opt.form == AmplitudeForm::van_vleck) K.sigma_ref = reference_signature(cfg, opt.search);

  parallel_for(ne, opt.threads, [&](long jl) {
    const int j = static_cast<int>(jl);
    if (!is_active(j)) return;
    GenFunEvaluator ev(cfg, t);
    std::vector<Eigen::VectorXd> seeds;
    const Eigen::VectorXd e = Eigen::VectorXd::Constant(1, eta(j));
    for (int i = 0; i < nx; ++i) {
      const Eigen::VectorXd xi = Eigen::VectorXd::Constant(1, x(i));
      SearchOptions so = opt.search;
      so.stream = static_cast<std::uint64_t>(j) * nx + i;
      const bool full = !opt.continuation || seeds.empty() || i % std::max(1, opt.refresh_stride) == 0;
      const BranchSet set = full ? find_branches(cfg, t, xi, e, so)
                                 : refine_branches(ev, xi, e, seeds, so, opt.continuation_starts);
      seeds.clear();
      if (set.search_failed || set.count() == 0) {
        K.counts(i, j) = -1;
        continue;
      }
      cd acc = 0.0;
      for (const Branch& b : set.branches) {
        acc += branch_term(cfg, sym, t, xi, e, b, hbar, opt.form, K.sigma_ref);
        seeds.push_back(b.theta_star.flat());
      }
      K.values(i, j) = acc;
      K.counts(i, j) = set.count();
    }
  });
  K.flagged = static_cast<int>((K.counts.array() == -1).count());
  return K;
}

int refined_nodes_per_dim(int nodes_per_dim, int k) {
  int m = nodes_per_dim + 1;
  while (k * std::log(static_cast<double>(m)) < std::log(2.0) + k * std::log(static_cast<double>(nodes_per_dim)) -
                                                    1e-12)
    ++m;
  return m;
}

ThetaSamples sample_theta_integrand(const AczConfig& cfg, const SymbolConfig& sym, double t, const Eigen::VectorXd& x,
                                    const Eigen::VectorXd& eta, const DirectOptions& opt) {
  const int k = cfg.parameter_dim();
  if (k > opt.max_dim)
    throw std::invalid_argument("direct kernel: k = " + std::to_string(k) + " exceeds the tensor limit " +
                                std::to_string(opt.max_dim));
  const int q = opt.nodes_per_dim;
  if (q < 1) throw std::invalid_argument("direct kernel: need at least one node per dimension");
  const double total_d = std::pow(static_cast<double>(q), k);
  if (total_d > static_cast<double>(opt.max_nodes))
    throw std::invalid_argument("direct kernel: " + std::to_string(q) + "^" + std::to_string(k) +
                                " nodes exceed the budget " + std::to_string(opt.max_nodes));
  const long total = static_cast<long>(total_d);
  const GaussRule rule = gauss_hermite(q);
  ThetaSamples s;
  s.nodes_per_dim = q;
  s.weights.resize(total);
  s.action.resize(total);
  s.log_transport.resize(total);
  const double norm = std::pow(pi, -0.5 * k);

  parallel_for(total, opt.threads, [&](long idx) {
    Eigen::VectorXd u(k);
    double w = norm;
    long rest = idx;
    for (int a = 0; a < k; ++a) {
      const int r = static_cast<int>(rest % q);
      rest /= q;
      u(a) = rule.nodes(r);
      w *= rule.weights(r);
    }
    const ModeVector theta = ModeVector::from_flat(cfg.basis, Band::low, Eigen::VectorXd(sym.rho_width * u));
    s.weights(idx) = w;
    if (t == 0.0) {
      s.action(idx) = x.dot(eta);
      s.log_transport(idx) = 0.0;
      return;
    }
    s.action(idx) = eval_S(cfg, t, x, eta, theta).S;
    s.log_transport(idx) = evaluate_b0(cfg, sym, t, x, eta, theta).log_transport;
  });
  return s;
}

cd theta_integral(const ThetaSamples& s, double hbar) {
  cd acc = 0.0;
  for (Eigen::Index i = 0; i < s.weights.size(); ++i)
    acc += s.weights(i) * std::exp(cd(s.log_transport(i), s.action(i) / hbar));
  return acc;
}

DirectResult direct_theta_kernel(const AczConfig& cfg, const SymbolConfig& sym, double t, const Eigen::VectorXd& x,
                                 const Eigen::VectorXd& eta, double hbar, const DirectOptions& opt,
                                 bool check_refinement) {
  DirectResult out;
  out.value = theta_integral(sample_theta_integrand(cfg, sym, t, x, eta, opt), hbar);
  out.refined = out.value;
  if (check_refinement) {
    DirectOptions fine = opt;
    fine.nodes_per_dim = refined_nodes_per_dim(opt.nodes_per_dim, cfg.parameter_dim());
    out.refined = theta_integral(sample_theta_integrand(cfg, sym, t, x, eta, fine), hbar);
    out.relative_change = std::abs(out.refined - out.value) / std::max(std::abs(out.refined), 1e-300);
    out.nonconverged = out.relative_change > 0.1;
  }
  return out;
}

PropagationResult propagate(const AczConfig& cfg, const SymbolConfig& sym, double t, const Wavefunction& phi,
                            PropagationMethod method, const PropagateOptions& opt) {
  const UniformGrid& grid = phi.grid;
  const double hbar = phi.hbar;
  check_nyquist(grid, grid, hbar);
  const Eigen::VectorXcd phi_hat = hbar_ft(phi, grid);
  const double peak = phi_hat.cwiseAbs().maxCoeff();
  std::vector<bool> active(grid.N);
  int n_active = 0;
  for (int j = 0; j < grid.N; ++j) n_active += (active[j] = std::abs(phi_hat(j)) >= opt.column_tol * peak);

  const Eigen::VectorXd nodes = grid.nodes();
  PropagationResult out;
  out.active_columns = n_active;
  if (method == PropagationMethod::wkb) {
    out.kernel = wkb_kernel(cfg, sym, t, nodes, nodes, hbar, opt.kernel, active);
  } else {
    KernelMatrix& K = out.kernel;
    K.t = t;
    K.hbar = hbar;
    K.x = K.eta = nodes;
    K.values = Eigen::MatrixXcd::Zero(grid.N, grid.N);
    K.counts = Eigen::MatrixXi::Constant(grid.N, grid.N, -2);
    for (int j = 0; j < grid.N; ++j) {
      if (!active[j]) continue;
      for (int i = 0; i < grid.N; ++i) {
        K.values(i, j) = direct_theta_kernel(cfg, sym, t, nodes.segment(i, 1), nodes.segment(j, 1), hbar, opt.direct)
                             .value;
        K.counts(i, j) = 0;
      }
    }
  }
  const long entries = static_cast<long>(n_active) * grid.N;
  if (out.kernel.flagged > opt.max_flagged_fraction * entries)
    throw std::runtime_error("propagate: " + std::to_string(out.kernel.flagged) + " of " + std::to_string(entries) +
                             " kernel entries flagged, above the allowed share");

  Eigen::VectorXcd weighted = phi_hat;
  for (int j = 0; j < grid.N; ++j)
    if (!active[j]) weighted(j) = 0.0;
  out.psi = Wavefunction{grid, out.kernel.values * weighted * (grid.spacing() / (2.0 * pi * hbar)), hbar};
  return out;
}

}  // namespace gfprop
