#include "gfprop/genfun.hpp"

#include <Eigen/SVD>
#include <cmath>
#include <numbers>
#include <stdexcept>
#include <string>

namespace gfprop {

double cutoff_bound(const HamiltonianSpec& h, double T, int M) {
  return T * T * sup_hess_H(h) * (1.0 + std::sqrt(2.0 * M)) / (2.0 * std::numbers::pi * M);
}

double tail_contraction(const HamiltonianSpec& h, double T, int M) {
  const double q = T / (2.0 * std::numbers::pi) * std::sqrt(2.0 / M);
  const double sym = h.potential.symmetric_part().jacobiSvd().singularValues()(0);
  return T * T / h.mass * q * q * sym;
}

CutoffSelection select_cutoff(const HamiltonianSpec& h, double T) {
  h.validate();
  if (!(T > 0.0) || !std::isfinite(T)) throw std::invalid_argument("select_cutoff: T must be positive");
  for (int M = 1; M <= 1000000; ++M) {
    const double b = cutoff_bound(h, T, M);
    if (b < 1.0) return {M, b, tail_contraction(h, T, M)};
  }
  throw std::invalid_argument("select_cutoff: no admissible cutoff for this horizon");
}

AczConfig make_acz_config(const HamiltonianSpec& h, double T, int M, int M_tail) {
  h.validate();
  AczConfig cfg;
  cfg.hamiltonian = h;
  if (M <= 0) {
    M = select_cutoff(h, T).M;
  } else if (cutoff_bound(h, T, M) >= 1.0) {
    throw std::invalid_argument("make_acz_config: cutoff M=" + std::to_string(M) +
                                " violates the tail contraction bound for T=" + std::to_string(T));
  }
  if (M_tail <= 0) M_tail = 4 * M;
  cfg.basis = FourierBasis::make(T, M, M_tail, h.dim());
  cfg.contraction = tail_contraction(h, T, M);
  return cfg;
}

Eigen::RowVectorXd interpolate_nodal(const TimeGrid<double>& grid, const Eigen::MatrixXd& values, double s) {
  const auto [p, u] = grid.locate(s);
  const int q = grid.panel_size();
  return panel16().interpolation_row(u) * values.middleRows(p * q, q);
}

Eigen::RowVectorXd integrate_nodal(const TimeGrid<double>& grid, const Eigen::MatrixXd& values, double s) {
  const auto [p, u] = grid.locate(s);
  const int q = grid.panel_size(), P = grid.panels_per_side();
  const double t = grid.t(), T = grid.basis().period;
  auto half = [&](int panel) { return 0.5 * (panel < P ? t : T - t) / P; };
  Eigen::RowVectorXd acc = Eigen::RowVectorXd::Zero(values.cols());
  for (int k = 0; k < p; ++k)
    acc += half(k) * (panel16().weights().transpose() * values.middleRows(k * q, q));
  acc += half(p) * (panel16().partial_integration_row(u) * values.middleRows(p * q, q));
  return acc;
}

NodalTail<double> transfer_tail(const TimeGrid<double>& from, const NodalTail<double>& f, const TimeGrid<double>& to) {
  NodalTail<double> out{Eigen::MatrixXd(to.size(), f.fx.cols()), Eigen::MatrixXd(to.size(), f.fp.cols())};
  for (int j = 0; j < to.size(); ++j) {
    out.fx.row(j) = interpolate_nodal(from, f.fx, to.nodes()(j));
    out.fp.row(j) = interpolate_nodal(from, f.fp, to.nodes()(j));
  }
  return out;
}

namespace {

void check_inputs(const AczConfig& cfg, double t, const Eigen::VectorXd& x) {
  if (!(t >= 0.0 && t <= cfg.period())) throw std::domain_error("generating function: t outside [0, T]");
  if (x.size() != cfg.hamiltonian.dim()) throw std::invalid_argument("generating function: x has wrong dimension");
  if (!x.allFinite()) throw std::invalid_argument("generating function: non-finite x");
}

void check_theta(const AczConfig& cfg, const ModeVector& theta) {
  if (theta.band() != Band::low || theta.coeffs().rows() != cfg.basis.low_modes() ||
      theta.coeffs().cols() != cfg.basis.components())
    throw std::invalid_argument("generating function: theta must be a low-band mode vector of the configured basis");
}

template <typename S, typename G>
S action_pass(const AczConfig& cfg, const TimeGrid<G>& grid, const VectorX<S>& x, const VectorX<S>& eta,
              const MatrixX<S>& theta, const NodalTail<double>& warm) {
  NodalTail<S> f;
  if (warm.fx.rows() == grid.size()) {
    f.fx = warm.fx.template cast<S>();
    f.fp = warm.fp.template cast<S>();
  }
  PathWork<S> w;
  solve_tail_nodal(cfg.hamiltonian, grid, x, theta, f, cfg.tail_tol, cfg.tail_max_iterations, w);
  evaluate_G(cfg.hamiltonian, grid, x, f, w);
  return action_from_work(cfg.hamiltonian, grid, x, eta, w);
}

// Unpacks z = (x, eta, theta_flat) of generic scalar type.
template <typename S>
void unpack(const AczConfig& cfg, const VectorX<S>& z, VectorX<S>& x, VectorX<S>& eta, MatrixX<S>& theta) {
  const int n = cfg.hamiltonian.dim();
  const int K = cfg.basis.low_modes();
  x = z.head(n);
  eta = z.segment(n, n);
  theta = Eigen::Map<const MatrixX<S>>(z.data() + 2 * n, K, 2 * n);
}

Eigen::VectorXd pack(const Eigen::VectorXd& x, const Eigen::VectorXd& eta, const Eigen::MatrixXd& theta) {
  Eigen::VectorXd z(x.size() + eta.size() + theta.size());
  z << x, eta, Eigen::Map<const Eigen::VectorXd>(theta.data(), theta.size());
  return z;
}

}  // namespace

GenFunEvaluator::GenFunEvaluator(const AczConfig& cfg, double t)
    : cfg_(cfg), t_(t), grid_(cfg.basis, t, cfg.panels_per_side()) {}

TailStats GenFunEvaluator::solve(const Eigen::VectorXd& x, const Eigen::MatrixXd& theta) {
  check_inputs(cfg_, t_, x);
  NodalTail<double> f = tail_;
  TailStats stats =
      solve_tail_nodal(cfg_.hamiltonian, grid_, x, theta, f, cfg_.tail_tol, cfg_.tail_max_iterations, work_);
  tail_ = std::move(f);
  evaluate_G(cfg_.hamiltonian, grid_, x, tail_, work_);
  return stats;
}

double GenFunEvaluator::action(const Eigen::VectorXd& x, const Eigen::VectorXd& eta, const Eigen::MatrixXd& theta) {
  solve(x, theta);
  return action_from_work(cfg_.hamiltonian, grid_, x, eta, work_);
}

Eigen::VectorXd GenFunEvaluator::residual(const Eigen::VectorXd& x, const Eigen::VectorXd& eta,
                                          const Eigen::MatrixXd& theta) {
  solve(x, theta);
  const Eigen::MatrixXd r = residual_from_work(cfg_.hamiltonian, grid_, Eigen::VectorXd(eta), theta, work_);
  return Eigen::Map<const Eigen::VectorXd>(r.data(), r.size());
}

std::array<double, 2> GenFunEvaluator::directional1(const Eigen::VectorXd& x, const Eigen::VectorXd& eta,
                                                    const Eigen::MatrixXd& theta, const Eigen::VectorXd& dir) {
  const Eigen::VectorXd z = pack(x, eta, theta);
  VectorX<Dual1> zd(z.size());
  for (Eigen::Index i = 0; i < z.size(); ++i) zd(i) = Dual1(z(i), dir(i));
  VectorX<Dual1> xd, ed;
  MatrixX<Dual1> td;
  unpack(cfg_, zd, xd, ed, td);
  const Dual1 s = action_pass(cfg_, grid_, xd, ed, td, tail_);
  return {s.v, s.d};
}

std::array<double, 4> GenFunEvaluator::directional2(const Eigen::VectorXd& x, const Eigen::VectorXd& eta,
                                                    const Eigen::MatrixXd& theta, const Eigen::VectorXd& dir1,
                                                    const Eigen::VectorXd& dir2) {
  const Eigen::VectorXd z = pack(x, eta, theta);
  VectorX<Dual2> zd(z.size());
  for (Eigen::Index i = 0; i < z.size(); ++i) zd(i) = Dual2(Dual1(z(i), dir1(i)), Dual1(dir2(i), 0.0));
  VectorX<Dual2> xd, ed;
  MatrixX<Dual2> td;
  unpack(cfg_, zd, xd, ed, td);
  const Dual2 s = action_pass(cfg_, grid_, xd, ed, td, tail_);
  return {s.v.v, s.v.d, s.d.v, s.d.d};
}

GenFunPoint GenFunEvaluator::derivatives(const Eigen::VectorXd& x, const Eigen::VectorXd& eta,
                                         const Eigen::MatrixXd& theta, const DerivRequest& request) {
  return request.method == DerivativeMethod::automatic ? derivatives_ad(x, eta, theta, request)
                                                       : derivatives_fd(x, eta, theta, request);
}

GenFunPoint GenFunEvaluator::derivatives_ad(const Eigen::VectorXd& x, const Eigen::VectorXd& eta,
                                            const Eigen::MatrixXd& theta, const DerivRequest& request) {
  GenFunPoint out;
  const TailStats stats = solve(x, theta);
  out.S = action_from_work(cfg_.hamiltonian, grid_, x, eta, work_);
  out.tail_iterations = stats.iterations;
  out.tail_residual = stats.residual;

  const int n = cfg_.hamiltonian.dim();
  const int k = cfg_.parameter_dim();
  const int dim = 2 * n + k;
  auto unit = [&](int i) {
    Eigen::VectorXd e = Eigen::VectorXd::Zero(dim);
    e(i) = 1.0;
    return e;
  };

  if (request.hess_theta) {
    out.hess_theta.resize(k, k);
    out.grad_theta.resize(k);
    for (int i = 0; i < k; ++i)
      for (int j = i; j < k; ++j) {
        const auto d = directional2(x, eta, theta, unit(2 * n + i), unit(2 * n + j));
        out.hess_theta(i, j) = out.hess_theta(j, i) = d[3];
        if (i == j) out.grad_theta(i) = d[1];
      }
  } else if (request.grad_theta) {
    out.grad_theta.resize(k);
    for (int i = 0; i < k; ++i) out.grad_theta(i) = directional1(x, eta, theta, unit(2 * n + i))[1];
  }

  if (request.laplacian_x) {
    out.grad_x.resize(n);
    out.laplacian_x = 0.0;
    for (int i = 0; i < n; ++i) {
      const auto d = directional2(x, eta, theta, unit(i), unit(i));
      out.grad_x(i) = d[1];
      out.laplacian_x += d[3];
    }
  } else if (request.grad_x) {
    out.grad_x.resize(n);
    for (int i = 0; i < n; ++i) out.grad_x(i) = directional1(x, eta, theta, unit(i))[1];
  }

  if (request.grad_eta) {
    out.grad_eta.resize(n);
    for (int i = 0; i < n; ++i) out.grad_eta(i) = directional1(x, eta, theta, unit(n + i))[1];
  }

  if (request.dt) {
    const TimeGrid<Dual1> grid(cfg_.basis, Dual1(t_, 1.0), cfg_.panels_per_side());
    const Dual1 s = action_pass(cfg_, grid, VectorX<Dual1>(x.cast<Dual1>()), VectorX<Dual1>(eta.cast<Dual1>()),
                                MatrixX<Dual1>(theta.cast<Dual1>()), tail_);
    out.dt = s.d;
  }
  return out;
}

GenFunPoint GenFunEvaluator::derivatives_fd(const Eigen::VectorXd& x, const Eigen::VectorXd& eta,
                                            const Eigen::MatrixXd& theta, const DerivRequest& request) {
  GenFunPoint out;
  const TailStats stats = solve(x, theta);
  out.S = action_from_work(cfg_.hamiltonian, grid_, x, eta, work_);
  out.tail_iterations = stats.iterations;
  out.tail_residual = stats.residual;

  const int n = cfg_.hamiltonian.dim();
  const int k = cfg_.parameter_dim();
  const Eigen::VectorXd z0 = pack(x, eta, theta);
  auto S_at = [&](const Eigen::VectorXd& z) {
    VectorX<double> xs, es;
    MatrixX<double> ts;
    unpack(cfg_, z, xs, es, ts);
    return action(xs, es, ts);
  };
  // Central first difference with one Richardson step.
  auto first = [&](int i) {
    const double h = request.fd_step_scale * 1e-5 * (1.0 + std::abs(z0(i)));
    auto central = [&](double step) {
      Eigen::VectorXd zp = z0, zm = z0;
      zp(i) += step;
      zm(i) -= step;
      return (S_at(zp) - S_at(zm)) / (2.0 * step);
    };
    return (4.0 * central(0.5 * h) - central(h)) / 3.0;
  };
  auto second = [&](int i, int j) {
    const double hi = request.fd_step_scale * 1e-4 * (1.0 + std::abs(z0(i)));
    const double hj = request.fd_step_scale * 1e-4 * (1.0 + std::abs(z0(j)));
    auto stencil = [&](double a, double b) {
      if (i == j) {
        Eigen::VectorXd zp = z0, zm = z0;
        zp(i) += a;
        zm(i) -= a;
        return (S_at(zp) - 2.0 * out.S + S_at(zm)) / (a * a);
      }
      double acc = 0.0;
      for (int si = -1; si <= 1; si += 2)
        for (int sj = -1; sj <= 1; sj += 2) {
          Eigen::VectorXd zz = z0;
          zz(i) += si * a;
          zz(j) += sj * b;
          acc += si * sj * S_at(zz);
        }
      return acc / (4.0 * a * b);
    };
    return (4.0 * stencil(0.5 * hi, 0.5 * hj) - stencil(hi, hj)) / 3.0;
  };

  if (request.grad_x || request.laplacian_x) {
    out.grad_x.resize(n);
    for (int i = 0; i < n; ++i) out.grad_x(i) = first(i);
  }
  if (request.laplacian_x) {
    out.laplacian_x = 0.0;
    for (int i = 0; i < n; ++i) out.laplacian_x += second(i, i);
  }
  if (request.grad_eta) {
    out.grad_eta.resize(n);
    for (int i = 0; i < n; ++i) out.grad_eta(i) = first(n + i);
  }
  if (request.grad_theta || request.hess_theta) {
    out.grad_theta.resize(k);
    for (int i = 0; i < k; ++i) out.grad_theta(i) = first(2 * n + i);
  }
  if (request.hess_theta) {
    out.hess_theta.resize(k, k);
    for (int i = 0; i < k; ++i)
      for (int j = i; j < k; ++j) out.hess_theta(i, j) = out.hess_theta(j, i) = second(2 * n + i, 2 * n + j);
  }
  if (request.dt) {
    const double h = request.fd_step_scale * 1e-5 * (1.0 + t_);
    auto S_time = [&](double tt) {
      GenFunEvaluator other(cfg_, tt);
      return other.action(x, eta, theta);
    };
    auto diff = [&](double step) {
      const double T = cfg_.period();
      if (t_ - step >= 0.0 && t_ + step <= T) return (S_time(t_ + step) - S_time(t_ - step)) / (2.0 * step);
      if (t_ - step < 0.0) return (-3.0 * out.S + 4.0 * S_time(t_ + step) - S_time(t_ + 2.0 * step)) / (2.0 * step);
      return (3.0 * out.S - 4.0 * S_time(t_ - step) + S_time(t_ - 2.0 * step)) / (2.0 * step);
    };
    out.dt = (4.0 * diff(0.5 * h) - diff(h)) / 3.0;
  }
  solve(x, theta);
  return out;
}

ModeVector g_map(const AczConfig& cfg, double t, const Eigen::VectorXd& x, const Eigen::VectorXd& eta,
                 const ModeVector& phi) {
  check_inputs(cfg, t, x);
  if (eta.size() != x.size()) throw std::invalid_argument("g_map: eta has wrong dimension");
  if (phi.band() != Band::full || phi.basis().period != cfg.basis.period || phi.basis().cutoff != cfg.basis.cutoff ||
      phi.basis().tail_cutoff != cfg.basis.tail_cutoff || phi.basis().dim != cfg.basis.dim)
    throw std::invalid_argument("g_map: phi must be a full-band mode vector of the configured basis");
  const FourierBasis& b = cfg.basis;
  const int n = b.dim;
  const TimeGrid<double> grid(b, t, std::max(1, (b.tail_cutoff + 2) / 2));
  const int N = grid.size();
  Eigen::MatrixXd values(N, 2 * n);
  for (int j = 0; j < N; ++j) values.row(j) = synthesize(phi, grid.nodes()(j)).transpose();
  PathWork<double> w;
  w.thx = values.leftCols(n);
  w.thp = values.rightCols(n);
  NodalTail<double> zero{Eigen::MatrixXd::Zero(N, n), Eigen::MatrixXd::Zero(N, n)};
  evaluate_G(cfg.hamiltonian, grid, Eigen::VectorXd(x), zero, w);
  SampledPath samples{grid.nodes(), grid.weights(), Eigen::MatrixXd(N, 2 * n)};
  samples.values.leftCols(n) = w.gx.rowwise() + (eta / cfg.hamiltonian.mass).transpose();
  samples.values.rightCols(n) = w.gp;
  return project(samples, b, Band::full);
}

TailSolution solve_tail(const AczConfig& cfg, double t, const Eigen::VectorXd& x, const ModeVector& theta,
                        const TailSolution* warm) {
  check_inputs(cfg, t, x);
  check_theta(cfg, theta);
  const TimeGrid<double> grid(cfg.basis, t, cfg.panels_per_side());
  NodalTail<double> f;
  if (warm && warm->fx.rows() == grid.size()) f = {warm->fx, warm->fp};
  PathWork<double> w;
  const TailStats stats =
      solve_tail_nodal(cfg.hamiltonian, grid, x, theta.coeffs(), f, cfg.tail_tol, cfg.tail_max_iterations, w);
  TailSolution out{t, x, theta, f.fx, f.fp, ModeVector(cfg.basis, Band::tail), stats.iterations, stats.residual,
                   stats.max_rate, stats.history};
  // Tail-band coefficients from the interpolated nodal tail on a dense grid.
  SampledPath dense = standard_nodes(cfg.basis);
  const int n = cfg.basis.dim;
  for (Eigen::Index j = 0; j < dense.nodes.size(); ++j) {
    dense.values.row(j).head(n) = interpolate_nodal(grid, f.fx, dense.nodes(j));
    dense.values.row(j).tail(n) = interpolate_nodal(grid, f.fp, dense.nodes(j));
  }
  out.tail = project(dense, cfg.basis, Band::tail);
  return out;
}

CurvePair curve_gamma(const AczConfig& cfg, double t, const Eigen::VectorXd& x, const ModeVector& theta) {
  check_inputs(cfg, t, x);
  check_theta(cfg, theta);
  GenFunEvaluator ev(cfg, t);
  ev.solve(x, theta.coeffs());
  const auto& w = ev.work();
  const int inner = ev.grid().inner_size();
  const int n = cfg.hamiltonian.dim();
  CurvePair out;
  out.gamma_x.nodes = out.gamma_p.nodes = ev.grid().nodes().head(inner);
  out.gamma_x.weights = out.gamma_p.weights = ev.grid().weights().head(inner);
  out.gamma_x.values.resize(inner, n);
  out.gamma_p.values = w.cp.topRows(inner);
  for (int j = 0; j < inner; ++j) out.gamma_x.values.row(j) = x.transpose() - (w.ix.transpose() - w.cx.row(j));
  out.velocity_x = w.phx.topRows(inner);
  out.velocity_p = w.php.topRows(inner);
  out.start_x = x - w.ix;
  out.end_x = x;
  out.start_p = Eigen::VectorXd::Zero(n);
  out.end_p = w.ip;
  return out;
}

GenFunPoint eval_S(const AczConfig& cfg, double t, const Eigen::VectorXd& x, const Eigen::VectorXd& eta,
                   const ModeVector& theta) {
  return eval_S_derivs(cfg, t, x, eta, theta, DerivRequest{});
}

GenFunPoint eval_S_derivs(const AczConfig& cfg, double t, const Eigen::VectorXd& x, const Eigen::VectorXd& eta,
                          const ModeVector& theta, const DerivRequest& request) {
  check_inputs(cfg, t, x);
  check_theta(cfg, theta);
  if (eta.size() != x.size() || !eta.allFinite()) throw std::invalid_argument("eval_S: invalid eta");
  GenFunEvaluator ev(cfg, t);
  return ev.derivatives(x, eta, theta.coeffs(), request);
}

Eigen::VectorXd stationarity_residual(const AczConfig& cfg, double t, const Eigen::VectorXd& x,
                                      const Eigen::VectorXd& eta, const ModeVector& theta) {
  check_inputs(cfg, t, x);
  check_theta(cfg, theta);
  GenFunEvaluator ev(cfg, t);
  return ev.residual(x, eta, theta.coeffs());
}

}  // namespace gfprop
