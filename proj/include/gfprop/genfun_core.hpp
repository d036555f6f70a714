#pragma once

// Scalar-generic core of the generating function. Paths live as nodal
// values on composite 16-point Gauss-Legendre panels, P panels on [0, t]
// followed by P panels on [t, T], so every quantity is smooth in t and the
// integrals over [0, t] need no interpolation. The tail equation
// f = Q_M G(theta + f) is solved by Picard iteration on the nodes with
// Q_M = I - P_M evaluated by the same quadrature.
//
// G is the grid scalar (double, or a dual type when differentiating in t);
// S is the path scalar and must accept products with G.

#include <Eigen/Core>
#include <algorithm>
#include <cmath>
#include <limits>
#include <stdexcept>
#include <string>
#include <vector>

#include "gfprop/dual.hpp"
#include "gfprop/hamiltonian.hpp"
#include "gfprop/pathspace.hpp"
#include "gfprop/quadrature.hpp"

namespace gfprop {

class TailNonConvergence : public std::runtime_error {
 public:
  TailNonConvergence(const std::string& what, std::vector<double> history)
      : std::runtime_error(what), history_(std::move(history)) {}
  const std::vector<double>& history() const { return history_; }

 private:
  std::vector<double> history_;
};

template <typename G>
class TimeGrid {
 public:
  TimeGrid(const FourierBasis& basis, const G& t, int panels_per_side)
      : basis_(basis), t_(t), panels_(panels_per_side) {
    const LegendrePanel& ref = panel16();
    q_ = ref.size();
    const int N = size();
    const int K = basis.low_modes();
    nodes_.resize(N);
    weights_.resize(N);
    half_width_.resize(2 * panels_);
    start_.resize(2 * panels_);
    const G inner_h = t / double(panels_);
    const G outer_h = (G(basis.period) - t) / double(panels_);
    for (int p = 0; p < 2 * panels_; ++p) {
      const bool inner = p < panels_;
      const G h = inner ? inner_h : outer_h;
      start_[p] = inner ? h * double(p) : t + h * double(p - panels_);
      half_width_[p] = h * 0.5;
      for (int a = 0; a < q_; ++a) {
        nodes_(p * q_ + a) = start_[p] + half_width_[p] * (ref.nodes()(a) + 1.0);
        weights_(p * q_ + a) = half_width_[p] * ref.weights()(a);
      }
    }
    basis_values_.resize(N, K);
    weighted_.resize(N, K);
    std::vector<G> row(K);
    for (int j = 0; j < N; ++j) {
      basis_row(basis, nodes_(j), K, row.data());
      for (int r = 0; r < K; ++r) {
        basis_values_(j, r) = row[r];
        weighted_(j, r) = row[r] * weights_(j);
      }
    }
  }

  const FourierBasis& basis() const { return basis_; }
  const G& t() const { return t_; }
  int panels_per_side() const { return panels_; }
  int panel_size() const { return q_; }
  int size() const { return 2 * panels_ * q_; }
  int inner_size() const { return panels_ * q_; }
  const VectorX<G>& nodes() const { return nodes_; }
  const VectorX<G>& weights() const { return weights_; }
  const MatrixX<G>& basis_values() const { return basis_values_; }
  const MatrixX<G>& weighted_basis() const { return weighted_; }

  // out(j, c) = int_0^{s_j} u(., c); total(c) = int_0^t u(., c).
  template <typename S>
  void cumulate(const MatrixX<S>& u, MatrixX<S>& out, VectorX<S>& total) const {
    const Eigen::MatrixXd& A = panel16().integration();
    const Eigen::VectorXd& w = panel16().weights();
    const int cols = static_cast<int>(u.cols());
    out.resize(u.rows(), cols);
    total.resize(cols);
    for (int c = 0; c < cols; ++c) {
      S running(0.0);
      for (int p = 0; p < 2 * panels_; ++p) {
        const int base = p * q_;
        for (int a = 0; a < q_; ++a) {
          S acc(0.0);
          for (int b = 0; b < q_; ++b) acc += A(a, b) * u(base + b, c);
          out(base + a, c) = running + half_width_[p] * acc;
        }
        S panel(0.0);
        for (int b = 0; b < q_; ++b) panel += w(b) * u(base + b, c);
        running += half_width_[p] * panel;
        if (p == panels_ - 1) total(c) = running;
      }
    }
  }

  // coeffs = (w B)^T u, the low-band projection coefficients.
  template <typename S>
  void project_low(const MatrixX<S>& u, MatrixX<S>& coeffs) const {
    const int N = size(), K = basis_.low_modes(), cols = static_cast<int>(u.cols());
    coeffs.resize(K, cols);
    for (int c = 0; c < cols; ++c)
      for (int r = 0; r < K; ++r) {
        S acc(0.0);
        for (int j = 0; j < N; ++j) acc += weighted_(j, r) * u(j, c);
        coeffs(r, c) = acc;
      }
  }

  // out -= B coeffs.
  template <typename S>
  void subtract_low(const MatrixX<S>& coeffs, MatrixX<S>& out) const {
    const int N = size(), K = basis_.low_modes(), cols = static_cast<int>(coeffs.cols());
    for (int c = 0; c < cols; ++c)
      for (int j = 0; j < N; ++j) {
        S acc(0.0);
        for (int r = 0; r < K; ++r) acc += basis_values_(j, r) * coeffs(r, c);
        out(j, c) -= acc;
      }
  }

  // out = B coeffs (synthesis of low-band coefficients at the nodes).
  template <typename S>
  void synthesize_low(const MatrixX<S>& coeffs, MatrixX<S>& out) const {
    out = MatrixX<S>::Zero(size(), coeffs.cols());
    subtract_low(coeffs, out);
    out = -out;
  }

  // Panel index and local coordinate in [-1, 1] of a point s in [0, T].
  std::pair<int, double> locate(double s) const {
    const double t = value_of(t_);
    const bool inner = s <= t && t > 0.0;
    const double lo = inner ? 0.0 : t, hi = inner ? t : basis_.period;
    const double h = (hi - lo) / panels_;
    int p = h > 0.0 ? static_cast<int>(std::floor((s - lo) / h)) : 0;
    p = std::clamp(p, 0, panels_ - 1);
    const double a = lo + p * h;
    const double u = h > 0.0 ? 2.0 * (s - a) / h - 1.0 : 0.0;
    return {inner ? p : p + panels_, std::clamp(u, -1.0, 1.0)};
  }

 private:
  FourierBasis basis_;
  G t_;
  int panels_ = 1;
  int q_ = 16;
  VectorX<G> nodes_, weights_;
  std::vector<G> half_width_, start_;
  MatrixX<G> basis_values_, weighted_;
};

// Interpolated nodal data at arbitrary s (double grids only).
Eigen::RowVectorXd interpolate_nodal(const TimeGrid<double>& grid, const Eigen::MatrixXd& values, double s);
// int_0^s of nodal data at arbitrary s (double grids only).
Eigen::RowVectorXd integrate_nodal(const TimeGrid<double>& grid, const Eigen::MatrixXd& values, double s);

template <typename S>
struct NodalTail {
  MatrixX<S> fx;  // N x n
  MatrixX<S> fp;  // N x n
};

template <typename S>
struct PathWork {
  MatrixX<S> thx, thp;  // theta synthesized on nodes
  MatrixX<S> phx, php;  // phi = theta + f
  MatrixX<S> cx, cp;    // int_0^s phi
  VectorX<S> ix, ip;    // int_0^t phi
  MatrixX<S> gx, gp;    // G(phi); gx omits the constant eta / m
  MatrixX<S> coeff;     // scratch projection coefficients
};

struct TailStats {
  int iterations = 0;
  double residual = 0.0;
  double max_rate = 0.0;  // largest residual ratio after the first step, above the round-off floor
  std::vector<double> history;
};

template <typename S, typename G>
void synthesize_theta(const TimeGrid<G>& grid, const MatrixX<S>& theta, PathWork<S>& w) {
  const int n = grid.basis().dim;
  MatrixX<S> tx = theta.leftCols(n), tp = theta.rightCols(n);
  grid.synthesize_low(tx, w.thx);
  grid.synthesize_low(tp, w.thp);
}

// Fills phi, the cumulative integrals and G(phi) from w.thx/w.thp and f.
template <typename S, typename G>
void evaluate_G(const HamiltonianSpec& h, const TimeGrid<G>& grid, const VectorX<S>& x, const NodalTail<S>& f,
                PathWork<S>& w) {
  const int N = grid.size(), n = h.dim();
  w.phx = w.thx + f.fx;
  w.php = w.thp + f.fp;
  grid.cumulate(w.phx, w.cx, w.ix);
  grid.cumulate(w.php, w.cp, w.ip);
  w.gx.resize(N, n);
  w.gp.resize(N, n);
  const double inv_m = 1.0 / h.mass;
  VectorX<S> z(n), g(n);
  for (int j = 0; j < N; ++j) {
    for (int i = 0; i < n; ++i) {
      w.gx(j, i) = w.cp(j, i) * inv_m;
      z(i) = x(i) - (w.ix(i) - w.cx(j, i));
    }
    potential_gradient(h.potential, z.data(), g.data());
    for (int i = 0; i < n; ++i) w.gp(j, i) = -g(i);
  }
}

// Fixed-point iteration for the tail, f^p from f^x and then f^x from the new
// f^p, so one sweep applies the composed map with contraction factor d.
// f holds the warm start on entry.
template <typename S, typename G>
TailStats solve_tail_nodal(const HamiltonianSpec& h, const TimeGrid<G>& grid, const VectorX<S>& x,
                           const MatrixX<S>& theta, NodalTail<S>& f, double tol, int max_iterations,
                           PathWork<S>& w) {
  const int N = grid.size(), n = h.dim();
  if (f.fx.rows() != N || f.fx.cols() != n) f.fx = MatrixX<S>::Zero(N, n);
  if (f.fp.rows() != N || f.fp.cols() != n) f.fp = MatrixX<S>::Zero(N, n);
  synthesize_theta(grid, theta, w);
  TailStats stats;
  const double floor = 1e3 * std::numeric_limits<double>::epsilon();
  const double inv_m = 1.0 / h.mass;
  VectorX<S> z(n), g(n);
  w.gx.resize(N, n);
  w.gp.resize(N, n);
  for (int it = 1; it <= max_iterations; ++it) {
    w.phx = w.thx + f.fx;
    grid.cumulate(w.phx, w.cx, w.ix);
    for (int j = 0; j < N; ++j) {
      for (int i = 0; i < n; ++i) z(i) = x(i) - (w.ix(i) - w.cx(j, i));
      potential_gradient(h.potential, z.data(), g.data());
      for (int i = 0; i < n; ++i) w.gp(j, i) = -g(i);
    }
    grid.project_low(w.gp, w.coeff);
    grid.subtract_low(w.coeff, w.gp);
    w.php = w.thp + w.gp;
    grid.cumulate(w.php, w.cp, w.ip);
    for (int j = 0; j < N; ++j)
      for (int i = 0; i < n; ++i) w.gx(j, i) = w.cp(j, i) * inv_m;
    grid.project_low(w.gx, w.coeff);
    grid.subtract_low(w.coeff, w.gx);
    double sq = 0.0;
    for (int j = 0; j < N; ++j) {
      double local = 0.0;
      for (int i = 0; i < n; ++i) {
        const double dx = magnitude(w.gx(j, i) - f.fx(j, i));
        const double dp = magnitude(w.gp(j, i) - f.fp(j, i));
        local += dx * dx + dp * dp;
      }
      sq += value_of(grid.weights()(j)) * local;
    }
    f.fx.swap(w.gx);
    f.fp.swap(w.gp);
    const double res = std::sqrt(sq);
    // The first ratio mixes the start-up step into the rate, so it is skipped.
    if (stats.history.size() >= 2 && stats.history.back() > floor && res > floor)
      stats.max_rate = std::max(stats.max_rate, res / stats.history.back());
    stats.history.push_back(res);
    stats.iterations = it;
    stats.residual = res;
    if (!std::isfinite(res)) break;
    if (res <= tol) return stats;
  }
  throw TailNonConvergence("tail fixed point did not converge (residual " + std::to_string(stats.residual) + ")",
                           stats.history);
}

// Action S = <x, eta> + int_0^t [gamma^p . phi^x - H(gamma^x, eta + gamma^p)] ds
// evaluated from a PathWork filled by evaluate_G at the converged tail.
template <typename S, typename G>
S action_from_work(const HamiltonianSpec& h, const TimeGrid<G>& grid, const VectorX<S>& x, const VectorX<S>& eta,
                   const PathWork<S>& w) {
  const int n = h.dim();
  S acc(0.0);
  for (int i = 0; i < n; ++i) acc += x(i) * eta(i);
  const double inv_2m = 0.5 / h.mass;
  VectorX<S> z(n);
  for (int j = 0; j < grid.inner_size(); ++j) {
    S lag(0.0);
    S kin(0.0);
    for (int i = 0; i < n; ++i) {
      lag += w.cp(j, i) * w.phx(j, i);
      const S p = eta(i) + w.cp(j, i);
      kin += p * p;
      z(i) = x(i) - (w.ix(i) - w.cx(j, i));
    }
    lag -= kin * inv_2m + potential_value(h.potential, z.data());
    acc += grid.weights()(j) * lag;
  }
  return acc;
}

// r(theta) = theta - P_M G(theta + f) as a (2M+1) x 2n coefficient block.
template <typename S, typename G>
MatrixX<S> residual_from_work(const HamiltonianSpec& h, const TimeGrid<G>& grid, const VectorX<S>& eta,
                              const MatrixX<S>& theta, PathWork<S>& w) {
  const int n = h.dim();
  MatrixX<S> gx = w.gx;
  for (int j = 0; j < gx.rows(); ++j)
    for (int i = 0; i < n; ++i) gx(j, i) += eta(i) / h.mass;
  MatrixX<S> px, pp;
  grid.project_low(gx, px);
  grid.project_low(w.gp, pp);
  MatrixX<S> r(theta.rows(), 2 * n);
  r.leftCols(n) = theta.leftCols(n) - px;
  r.rightCols(n) = theta.rightCols(n) - pp;
  return r;
}

}  // namespace gfprop
