#include "gfprop/stationary.hpp"

#include <Eigen/Dense>
#include <Eigen/Eigenvalues>
#include <Eigen/SVD>
#include <algorithm>
#include <cmath>
#include <limits>
#include <numbers>
#include <random>

#include "gfprop/parallel.hpp"

namespace gfprop {

namespace {

Eigen::MatrixXd as_theta(const AczConfig& cfg, const Eigen::VectorXd& flat) {
  return Eigen::Map<const Eigen::MatrixXd>(flat.data(), cfg.basis.low_modes(), cfg.basis.components());
}

bool near_resonance(const AczConfig& cfg, double t, double margin) {
  const ResonantTimes rt = resonant_times(cfg.hamiltonian, std::max(t + margin, cfg.period()));
  return std::any_of(rt.times.begin(), rt.times.end(), [&](double tr) { return std::abs(tr - t) < margin; });
}

std::mt19937_64 point_rng(std::uint64_t seed, std::uint64_t stream) {
  std::seed_seq seq{static_cast<std::uint32_t>(seed), static_cast<std::uint32_t>(seed >> 32),
                    static_cast<std::uint32_t>(stream), static_cast<std::uint32_t>(stream >> 32)};
  return std::mt19937_64(seq);
}

// Adds a root unless it duplicates an existing one; returns true if added.
bool add_unique(std::vector<NewtonResult>& roots, const NewtonResult& root, double radius) {
  for (const auto& r : roots)
    if ((r.theta - root.theta).norm() <= radius) return false;
  roots.push_back(root);
  return true;
}

BranchSet assemble(GenFunEvaluator& ev, const Eigen::VectorXd& x, const Eigen::VectorXd& eta,
                   std::vector<NewtonResult>& roots, const SearchOptions& opt) {
  BranchSet set;
  set.t = ev.t();
  set.x = x;
  set.eta = eta;
  set.converged_starts = static_cast<int>(roots.size());
  for (const auto& root : roots) set.branches.push_back(describe_branch(ev, x, eta, root, opt));
  std::sort(set.branches.begin(), set.branches.end(), [](const Branch& a, const Branch& b) {
    if (a.action != b.action) return a.action < b.action;
    return a.theta_star.coeffs()(0, 0) < b.theta_star.coeffs()(0, 0);
  });
  set.certified = !near_resonance(ev.config(), ev.t(), opt.resonance_margin);
  if (!set.certified) set.note = "within resonance margin";
  return set;
}

}  // namespace

NewtonResult newton_stationary(GenFunEvaluator& ev, const Eigen::VectorXd& x, const Eigen::VectorXd& eta,
                               Eigen::VectorXd theta0, const SearchOptions& opt) {
  const AczConfig& cfg = ev.config();
  const int k = cfg.parameter_dim();
  NewtonResult out;
  out.theta = std::move(theta0);
  const double escape = 1e3 * std::max(1.0, out.theta.norm()) + 1e3 * lambda_weight(x, eta);
  try {
    Eigen::VectorXd r = ev.residual(x, eta, as_theta(cfg, out.theta));
    Eigen::MatrixXd J(k, k);
    for (int it = 0; it < opt.newton_max_iterations; ++it) {
      const double rn = r.norm();
      out.residual = rn;
      out.iterations = it;
      if (rn <= opt.newton_tol) {
        out.converged = true;
        return out;
      }
      for (int i = 0; i < k; ++i) {
        Eigen::VectorXd probe = out.theta;
        const double h = opt.fd_step * (1.0 + std::abs(probe(i)));
        probe(i) += h;
        J.col(i) = (ev.residual(x, eta, as_theta(cfg, probe)) - r) / h;
      }
      Eigen::FullPivLU<Eigen::MatrixXd> lu(J);
      if (lu.rank() < k) return out;
      const Eigen::VectorXd step = -lu.solve(r);
      double alpha = 1.0;
      Eigen::VectorXd trial, rt;
      bool accepted = false;
      while (alpha >= 1.0 / 1024.0) {
        trial = out.theta + alpha * step;
        rt = ev.residual(x, eta, as_theta(cfg, trial));
        if (rt.norm() < (1.0 - 1e-4 * alpha) * rn || rt.norm() <= opt.newton_tol) {
          accepted = true;
          break;
        }
        alpha *= 0.5;
      }
      if (!accepted) {
        // Stagnation at round-off level counts as convergence.
        if (rn <= 1e3 * opt.newton_tol) out.converged = true;
        return out;
      }
      out.theta = trial;
      r = rt;
      if (out.theta.norm() > escape) return out;
    }
    out.residual = r.norm();
    out.iterations = opt.newton_max_iterations;
    out.converged = out.residual <= opt.newton_tol;
  } catch (const TailNonConvergence&) {
    out.converged = false;
  }
  return out;
}

Branch describe_branch(GenFunEvaluator& ev, const Eigen::VectorXd& x, const Eigen::VectorXd& eta,
                       const NewtonResult& root, const SearchOptions& opt) {
  const AczConfig& cfg = ev.config();
  Branch b;
  b.theta_star = ModeVector::from_flat(cfg.basis, Band::low, root.theta);
  b.newton_iters = root.iterations;
  b.residual_norm = root.residual;
  if (!opt.enrich) {
    b.action = ev.action(x, eta, as_theta(cfg, root.theta));
    return b;
  }
  DerivRequest req;
  req.grad_x = req.grad_eta = req.dt = req.hess_theta = true;
  const GenFunPoint p = ev.derivatives(x, eta, as_theta(cfg, root.theta), req);
  b.action = p.S;
  b.grad_x = p.grad_x;
  b.grad_eta = p.grad_eta;
  b.dt = p.dt;
  b.hess_theta = p.hess_theta;
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> eig(0.5 * (p.hess_theta + p.hess_theta.transpose()),
                                                     Eigen::EigenvaluesOnly);
  b.log_abs_det = 0.0;
  b.min_abs_eigenvalue = std::numeric_limits<double>::infinity();
  for (Eigen::Index i = 0; i < eig.eigenvalues().size(); ++i) {
    const double lam = eig.eigenvalues()(i);
    b.signature += lam > 0 ? 1 : (lam < 0 ? -1 : 0);
    b.log_abs_det += std::log(std::abs(lam));
    b.min_abs_eigenvalue = std::min(b.min_abs_eigenvalue, std::abs(lam));
  }
  b.hess_det = std::exp(b.log_abs_det);
  const HamiltonianSpec& h = cfg.hamiltonian;
  b.hj_residual = std::abs(p.dt + p.grad_x.squaredNorm() / (2.0 * h.mass) + eval_V(h.potential, x));
  const PhasePoint end = classical_flow(h, p.grad_eta, eta, ev.t(), opt.flow_tol);
  b.gen_residual = std::max((end.x - x).lpNorm<Eigen::Infinity>(), (end.p - p.grad_x).lpNorm<Eigen::Infinity>());
  return b;
}

BranchSet refine_branches(GenFunEvaluator& ev, const Eigen::VectorXd& x, const Eigen::VectorXd& eta,
                          const std::vector<Eigen::VectorXd>& seeds, const SearchOptions& opt, int extra_starts) {
  const int k = ev.config().parameter_dim();
  std::vector<NewtonResult> roots;
  for (const auto& seed : seeds) {
    bool known = false;
    for (const auto& r : roots) known = known || (r.theta - seed).norm() <= opt.dedupe_radius;
    if (known) continue;
    const NewtonResult res = newton_stationary(ev, x, eta, seed, opt);
    if (res.converged) add_unique(roots, res, opt.dedupe_radius);
  }
  if (extra_starts > 0) {
    std::mt19937_64 rng = point_rng(opt.seed, opt.stream);
    std::normal_distribution<double> normal(0.0, 1.0);
    const double radius = opt.radius > 0 ? opt.radius : 2.0 * lambda_weight(x, eta);
    for (int s = 0; s < extra_starts; ++s) {
      Eigen::VectorXd start(k);
      for (int i = 0; i < k; ++i) start(i) = normal(rng) * radius / std::sqrt(double(k));
      const NewtonResult res = newton_stationary(ev, x, eta, start, opt);
      if (res.converged) add_unique(roots, res, opt.dedupe_radius);
    }
  }
  BranchSet set = assemble(ev, x, eta, roots, opt);
  set.search_failed = roots.empty();
  return set;
}

BranchSet find_branches(const AczConfig& cfg, double t, const Eigen::VectorXd& x, const Eigen::VectorXd& eta,
                        const SearchOptions& opt) {
  if (!(t >= 0.0 && t <= cfg.period())) throw std::domain_error("find_branches: t outside [0, T]");
  if (x.size() != cfg.hamiltonian.dim() || eta.size() != x.size())
    throw std::invalid_argument("find_branches: dimension mismatch");
  if (opt.n_starts < 1) throw std::invalid_argument("find_branches: need at least one start");
  GenFunEvaluator ev(cfg, t);
  const int k = cfg.parameter_dim();
  std::vector<Eigen::VectorXd> seeds{Eigen::VectorXd::Zero(k)};
  BranchSet set = refine_branches(ev, x, eta, seeds, opt, opt.n_starts - 1);
  if (set.search_failed) set.note = set.note.empty() ? "no start converged" : set.note + "; no start converged";
  return set;
}

BranchMap scan_branch_map(const AczConfig& cfg, double t, const std::vector<double>& xs,
                          const std::vector<double>& etas, const SearchOptions& opt, int threads) {
  if (cfg.hamiltonian.dim() != 1) throw std::invalid_argument("scan_branch_map: grid scans are one-dimensional");
  BranchMap map;
  map.t = t;
  map.xs = xs;
  map.etas = etas;
  const long nx = static_cast<long>(xs.size()), ne = static_cast<long>(etas.size());
  map.counts = Eigen::MatrixXi::Zero(nx, ne);
  map.cells.resize(nx * ne);
  parallel_for(nx * ne, threads, [&](long idx) {
    const long i = idx / ne, j = idx % ne;
    SearchOptions local = opt;
    local.stream = opt.stream * 1000003ULL + static_cast<std::uint64_t>(idx);
    const Eigen::VectorXd x = Eigen::VectorXd::Constant(1, xs[i]);
    const Eigen::VectorXd eta = Eigen::VectorXd::Constant(1, etas[j]);
    BranchSet set = find_branches(cfg, t, x, eta, local);
    map.counts(i, j) = set.search_failed ? -1 : set.count();
    map.cells[idx] = std::move(set);
  });
  return map;
}

std::vector<ShootingRoot> shooting_roots(const HamiltonianSpec& h, double t, double x, double eta,
                                         const ShootingOptions& opt) {
  if (h.dim() != 1) throw std::invalid_argument("shooting_roots: one-dimensional problems only");
  const Eigen::VectorXd e = Eigen::VectorXd::Constant(1, eta);
  auto F = [&](double y) { return classical_flow(h, Eigen::VectorXd::Constant(1, y), e, t, opt.flow_tol).x(0) - x; };
  const double Y = opt.span_factor * lambda_weight(Eigen::VectorXd::Constant(1, x), e);
  std::vector<ShootingRoot> roots;
  auto record = [&](double y) {
    const PhasePoint end = classical_flow(h, Eigen::VectorXd::Constant(1, y), e, t, opt.flow_tol);
    roots.push_back({y, end.p(0)});
  };
  double y0 = -Y, f0 = F(y0);
  if (f0 == 0.0) record(y0);
  for (int i = 1; i < opt.nodes; ++i) {
    const double y1 = -Y + 2.0 * Y * i / (opt.nodes - 1);
    const double f1 = F(y1);
    if (f1 == 0.0) {
      record(y1);
    } else if (f0 != 0.0 && (f0 < 0) != (f1 < 0)) {
      double a = y0, b = y1, fa = f0;
      for (int it = 0; it < 200 && b - a > 1e-14 * std::max(1.0, std::abs(a)); ++it) {
        const double m = 0.5 * (a + b);
        const double fm = F(m);
        if (fm == 0.0) {
          a = b = m;
          break;
        }
        if ((fm < 0) == (fa < 0)) {
          a = m;
          fa = fm;
        } else {
          b = m;
        }
      }
      record(0.5 * (a + b));
    }
    y0 = y1;
    f0 = f1;
  }
  return roots;
}

namespace {

// W^{1/2} (I - L(t)) W^{-1/2} on the positive-weight nodes of the grid at t,
// where L(t, phi) = ((1/m) int_0^s phi^p, (L + L^T) int_s^t phi^x).
Eigen::MatrixXd weighted_linearization(const AczConfig& cfg, double t) {
  const TimeGrid<double> grid(cfg.basis, t, cfg.panels_per_side());
  const int N = grid.size(), n = cfg.hamiltonian.dim();
  // Cumulative-integration matrix: column j is the response to a unit sample at node j.
  Eigen::MatrixXd C(N, N), unit = Eigen::MatrixXd::Zero(N, 1), col;
  Eigen::VectorXd total;
  Eigen::RowVectorXd to_t(N);
  for (int j = 0; j < N; ++j) {
    unit.setZero();
    unit(j, 0) = 1.0;
    grid.cumulate(unit, col, total);
    C.col(j) = col.col(0);
    to_t(j) = total(0);
  }
  std::vector<int> keep;
  for (int j = 0; j < N; ++j)
    if (grid.weights()(j) > 0.0) keep.push_back(j);
  const int Nk = static_cast<int>(keep.size());
  const Eigen::MatrixXd sym = cfg.hamiltonian.potential.symmetric_part();
  const double inv_m = 1.0 / cfg.hamiltonian.mass;
  Eigen::MatrixXd A = Eigen::MatrixXd::Identity(2 * n * Nk, 2 * n * Nk);
  for (int a = 0; a < Nk; ++a)
    for (int b = 0; b < Nk; ++b) {
      const int ja = keep[a], jb = keep[b];
      const double scale = std::sqrt(grid.weights()(ja) / grid.weights()(jb));
      const double xp = inv_m * C(ja, jb) * scale;
      const double px = (to_t(jb) - C(ja, jb)) * scale;
      for (int i = 0; i < n; ++i) {
        A(i * Nk + a, (n + i) * Nk + b) -= xp;
        for (int l = 0; l < n; ++l) A((n + i) * Nk + a, l * Nk + b) -= sym(i, l) * px;
      }
    }
  return A;
}

}  // namespace

double linearized_sigma_min(const AczConfig& cfg, double t) {
  const Eigen::VectorXd sv = weighted_linearization(cfg, t).bdcSvd().singularValues();
  return sv(sv.size() - 1);
}

BoundEstimates compute_branch_bound(const AczConfig& cfg, double t, const BoundSampling& sampling) {
  if (!(t > 0.0 && t <= cfg.period())) throw std::domain_error("compute_branch_bound: t outside (0, T]");
  const HamiltonianSpec& h = cfg.hamiltonian;
  const int n = h.dim();
  const double T = cfg.period();
  BoundEstimates out;
  out.t = t;
  out.k = cfg.parameter_dim();

  out.sigma_min = linearized_sigma_min(cfg, t);
  if (out.sigma_min < 1e-8)
    throw ResonanceError("compute_branch_bound: I - L(t) is singular at t=" + std::to_string(t) +
                         " (resonant time)");
  for (int s = 1; s <= sampling.time_samples; ++s) {
    const double ts = T * s / sampling.time_samples;
    const Eigen::VectorXd sv = weighted_linearization(cfg, ts).bdcSvd().singularValues();
    out.sup_norm_M = std::max(out.sup_norm_M, sv(0));
  }

  const Eigen::MatrixXd sym = h.potential.symmetric_part();
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> eig(sym, Eigen::EigenvaluesOnly);
  const double lam_abs_min = eig.eigenvalues().cwiseAbs().minCoeff();
  const double lam_abs_max = eig.eigenvalues().cwiseAbs().maxCoeff();
  const double inv_m = 1.0 / h.mass;
  const double mu_min = std::min(inv_m * inv_m, lam_abs_min * lam_abs_min);
  const double mu_max = std::max(inv_m * inv_m, lam_abs_max * lam_abs_max);
  const double C1 = std::sqrt(T) * h.potential.perturbation_bound(1);
  const double W0 = std::sqrt(T * mu_min / 2.0);

  out.K1_tilde = (std::sqrt(T * mu_max) + C1) / out.sigma_min;
  const double K2 = W0 / (2.0 * out.sup_norm_M);
  const int M = cfg.basis.cutoff;
  const double c = T / (2.0 * std::numbers::pi) * (std::sqrt(2.0 / M) + 1.0 / (M + 1.0)) * std::max(inv_m, lam_abs_max);
  out.K2_tilde = c < 1.0 ? 0.5 * (1.0 - c) * K2 : 0.0;
  double D = 1.0;
  if (W0 > 0.0) {
    const double D0 = 2.0 * C1 / W0;
    D = std::max(D, std::sqrt(std::max(0.0, D0 * D0 - 1.0)));
  }
  if (out.K2_tilde > 0.0 && C1 > 0.0) D = std::max(D, C1 / out.K2_tilde);
  out.D = D;
  out.E_tilde = 2.0 * C1 / out.sigma_min;

  // Separation radius: inf max|d^2 S| over sup max|d^3 S| from sampled points.
  GenFunEvaluator ev(cfg, t);
  std::mt19937_64 rng(sampling.seed);
  std::uniform_real_distribution<double> box(-sampling.box, sampling.box);
  std::normal_distribution<double> normal(0.0, 1.0);
  const int k = out.k;
  double inf_d2 = std::numeric_limits<double>::infinity(), sup_d3 = 0.0;
  DerivRequest req;
  req.hess_theta = true;
  for (int s = 0; s < sampling.hessian_samples; ++s) {
    Eigen::VectorXd x(n), eta(n), th(k);
    for (int i = 0; i < n; ++i) x(i) = box(rng), eta(i) = box(rng);
    const double lam = lambda_weight(x, eta);
    for (int i = 0; i < k; ++i) th(i) = normal(rng) * lam / std::sqrt(double(k));
    const Eigen::MatrixXd H = ev.derivatives(x, eta, as_theta(cfg, th), req).hess_theta;
    inf_d2 = std::min(inf_d2, H.cwiseAbs().maxCoeff());
    for (int l = 0; l < k; ++l) {
      const double step = 1e-4 * (1.0 + std::abs(th(l)));
      Eigen::VectorXd tp = th, tm = th;
      tp(l) += step;
      tm(l) -= step;
      const Eigen::MatrixXd d3 = (ev.derivatives(x, eta, as_theta(cfg, tp), req).hess_theta -
                                  ev.derivatives(x, eta, as_theta(cfg, tm), req).hess_theta) /
                                 (2.0 * step);
      sup_d3 = std::max(sup_d3, d3.cwiseAbs().maxCoeff());
    }
  }
  out.epsilon = inf_d2 / (k * (sup_d3 + 1.0));
  // The volume bound (2E / epsilon)^k degenerates to 0 when E = 0; a unique
  // branch still exists there, so the bound is clamped at one.
  out.log10_N_max = out.E_tilde > 0.0 ? std::max(0.0, k * std::log10(2.0 * out.E_tilde / out.epsilon)) : 0.0;
  out.N_max = std::pow(10.0, out.log10_N_max);
  return out;
}

RegionReport check_critical_free_region(const AczConfig& cfg, double t, const BoundEstimates& bounds,
                                        const std::vector<RegionSample>& samples, double flag_tol) {
  GenFunEvaluator ev(cfg, t);
  RegionReport rep;
  rep.samples = static_cast<int>(samples.size());
  rep.min_grad_norm = std::numeric_limits<double>::infinity();
  DerivRequest req;
  req.grad_theta = true;
  for (const auto& s : samples) {
    const double radius = std::sqrt(s.x.squaredNorm() + s.eta.squaredNorm());
    const double lam = lambda_weight(s.x, s.eta);
    if (!(radius > bounds.D && s.theta.norm() <= bounds.K2_tilde * lam)) continue;
    ++rep.in_region;
    const double g = ev.derivatives(s.x, s.eta, s.theta.coeffs(), req).grad_theta.norm();
    rep.min_grad_norm = std::min(rep.min_grad_norm, g);
    if (g <= flag_tol) ++rep.flagged;
  }
  return rep;
}

}  // namespace gfprop
