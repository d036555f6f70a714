#pragma once

// Global generating function S(t, x, eta, theta) built from the finite
// reduction of the path-space fixed point, and its derivatives.

#include <Eigen/Core>
#include <array>
#include <limits>
#include <memory>
#include <vector>

#include "gfprop/genfun_core.hpp"
#include "gfprop/hamiltonian.hpp"
#include "gfprop/pathspace.hpp"

namespace gfprop {

// T^2 sup|d^2 H| (1 + sqrt(2M)) / (2 pi M); the tail map contracts when < 1.
double cutoff_bound(const HamiltonianSpec& h, double T, int M);
// d = (T^2 / m) ||Q_M||^2 ||L + L^T|| with ||Q_M|| <= (T / 2 pi) sqrt(2 / M).
double tail_contraction(const HamiltonianSpec& h, double T, int M);

struct CutoffSelection {
  int M = 1;
  double bound = 0.0;
  double contraction = 0.0;
};

// Smallest M with cutoff_bound < 1.
CutoffSelection select_cutoff(const HamiltonianSpec& h, double T);

enum class DerivativeMethod { automatic, finite_difference };

struct AczConfig {
  HamiltonianSpec hamiltonian;
  FourierBasis basis;
  double contraction = 0.0;
  double tail_tol = 1e-12;
  int tail_max_iterations = 200;

  double period() const { return basis.period; }
  int parameter_dim() const { return basis.parameter_dim(); }
  // Panels on each of [0, t] and [t, T]; 2P >= (M_tail + 1) / 2 in total.
  int panels_per_side() const { return std::max(1, (basis.tail_cutoff + 4) / 4); }
};

// M = 0 selects the cutoff automatically; M_tail = 0 means 4M.
// A forced M that violates the contraction bound is rejected.
AczConfig make_acz_config(const HamiltonianSpec& h, double T, int M = 0, int M_tail = 0);

struct TailSolution {
  double t = 0.0;
  Eigen::VectorXd x;
  ModeVector theta;
  Eigen::MatrixXd fx, fp;  // nodal values on the evaluation grid at t
  ModeVector tail;         // tail-band coefficients of f
  int iterations = 0;
  double residual = 0.0;
  double observed_rate = 0.0;
  std::vector<double> history;
};

struct CurvePair {
  SampledPath gamma_x;  // gamma^x(s) = x - int_s^t phi^x on the nodes of [0, t]
  SampledPath gamma_p;  // gamma^p(s) = int_0^s phi^p
  Eigen::MatrixXd velocity_x, velocity_p;  // phi^x, phi^p at the same nodes
  Eigen::VectorXd start_x;                 // gamma^x(0)
  Eigen::VectorXd end_x;                   // gamma^x(t)
  Eigen::VectorXd start_p;                 // gamma^p(0)
  Eigen::VectorXd end_p;                   // gamma^p(t)
};

struct DerivRequest {
  bool grad_x = false;
  bool grad_eta = false;
  bool grad_theta = false;
  bool dt = false;
  bool hess_theta = false;
  bool laplacian_x = false;
  DerivativeMethod method = DerivativeMethod::automatic;
  double fd_step_scale = 1.0;  // multiplies the default steps 1e-5 (first) and 1e-4 (second) times (1 + |z|)

  static DerivRequest all() { return {true, true, true, true, true, true, DerivativeMethod::automatic, 1.0}; }
};

struct GenFunPoint {
  double S = 0.0;
  Eigen::VectorXd grad_x, grad_eta, grad_theta;
  double dt = std::numeric_limits<double>::quiet_NaN();
  Eigen::MatrixXd hess_theta;
  double laplacian_x = std::numeric_limits<double>::quiet_NaN();
  int tail_iterations = 0;
  double tail_residual = 0.0;
};

// Evaluation context at a fixed time t. Keeps the grid and the last tail
// solution, which warm-starts the next solve.
class GenFunEvaluator {
 public:
  GenFunEvaluator(const AczConfig& cfg, double t);

  const AczConfig& config() const { return cfg_; }
  double t() const { return t_; }
  const TimeGrid<double>& grid() const { return grid_; }
  const NodalTail<double>& tail() const { return tail_; }
  const PathWork<double>& work() const { return work_; }
  void reset_warm_start() { tail_ = {}; }
  void warm_start(NodalTail<double> f) { tail_ = std::move(f); }

  // Solves the tail at (x, theta); theta is (2M+1) x 2n. Leaves work() at the solution.
  TailStats solve(const Eigen::VectorXd& x, const Eigen::MatrixXd& theta);
  double action(const Eigen::VectorXd& x, const Eigen::VectorXd& eta, const Eigen::MatrixXd& theta);
  // r(theta) flattened component-major.
  Eigen::VectorXd residual(const Eigen::VectorXd& x, const Eigen::VectorXd& eta, const Eigen::MatrixXd& theta);

  GenFunPoint derivatives(const Eigen::VectorXd& x, const Eigen::VectorXd& eta, const Eigen::MatrixXd& theta,
                          const DerivRequest& request);

  // Directional derivatives in z = (x, eta, theta_flat): {S, d1 S, d2 S, d1 d2 S}.
  std::array<double, 4> directional2(const Eigen::VectorXd& x, const Eigen::VectorXd& eta,
                                     const Eigen::MatrixXd& theta, const Eigen::VectorXd& dir1,
                                     const Eigen::VectorXd& dir2);
  std::array<double, 2> directional1(const Eigen::VectorXd& x, const Eigen::VectorXd& eta,
                                     const Eigen::MatrixXd& theta, const Eigen::VectorXd& dir);

 private:
  GenFunPoint derivatives_ad(const Eigen::VectorXd& x, const Eigen::VectorXd& eta, const Eigen::MatrixXd& theta,
                             const DerivRequest& request);
  GenFunPoint derivatives_fd(const Eigen::VectorXd& x, const Eigen::VectorXd& eta, const Eigen::MatrixXd& theta,
                             const DerivRequest& request);

  AczConfig cfg_;
  double t_;
  TimeGrid<double> grid_;
  NodalTail<double> tail_;
  PathWork<double> work_;
};

// Re-samples a nodal tail from one time grid onto another (same basis).
NodalTail<double> transfer_tail(const TimeGrid<double>& from, const NodalTail<double>& f, const TimeGrid<double>& to);

ModeVector g_map(const AczConfig& cfg, double t, const Eigen::VectorXd& x, const Eigen::VectorXd& eta,
                 const ModeVector& phi);
TailSolution solve_tail(const AczConfig& cfg, double t, const Eigen::VectorXd& x, const ModeVector& theta,
                        const TailSolution* warm = nullptr);
CurvePair curve_gamma(const AczConfig& cfg, double t, const Eigen::VectorXd& x, const ModeVector& theta);
GenFunPoint eval_S(const AczConfig& cfg, double t, const Eigen::VectorXd& x, const Eigen::VectorXd& eta,
                   const ModeVector& theta);
GenFunPoint eval_S_derivs(const AczConfig& cfg, double t, const Eigen::VectorXd& x, const Eigen::VectorXd& eta,
                          const ModeVector& theta, const DerivRequest& request);
Eigen::VectorXd stationarity_residual(const AczConfig& cfg, double t, const Eigen::VectorXd& x,
                                      const Eigen::VectorXd& eta, const ModeVector& theta);

}  // namespace gfprop
