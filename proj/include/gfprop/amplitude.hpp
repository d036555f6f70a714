#pragma once

// Symbols of the parametrix: b0 by integrating Delta_x S along the curve
// gamma^x, and the higher terms b_j by characteristics of the transport
// operator d_t + (1/m) grad_x S . grad_x + (1/2m) Delta_x S.

#include <Eigen/Core>
#include <complex>

#include "gfprop/genfun.hpp"

namespace gfprop {

struct SymbolConfig {
  double rho_width = 1.0;  // rho(theta) = (pi w^2)^{-k/2} exp(-|theta|^2 / w^2)
  int j_max = 1;
  int tau_nodes = 8;        // Gauss-Legendre nodes per tau panel
  int tau_panels = 1;
  double laplacian_step = 1e-3;  // finite-difference step for Delta_x b_{j-1}
  double characteristic_tol = 1e-8;
};

double rho(const SymbolConfig& sym, const Eigen::VectorXd& theta);
double log_rho(const SymbolConfig& sym, const Eigen::VectorXd& theta);

struct AmplitudeEval {
  double b0 = 0.0;
  double log_transport = 0.0;       // -(1/2m) int_0^t Delta_x S(tau, gamma^x(tau)) dtau
  double quadrature_error = 0.0;    // |difference| against a half-resolution tau rule
};

// Delta_x S at (tau, z, eta, theta) together with grad_x S.
struct LaplacianEval {
  double laplacian = 0.0;
  Eigen::VectorXd gradient;
};
LaplacianEval laplacian_x_S(const AczConfig& cfg, double tau, const Eigen::VectorXd& z, const Eigen::VectorXd& eta,
                            const Eigen::MatrixXd& theta);

AmplitudeEval evaluate_b0(const AczConfig& cfg, const SymbolConfig& sym, double t, const Eigen::VectorXd& x,
                          const Eigen::VectorXd& eta, const ModeVector& theta, bool estimate_error = false);
double b0(const AczConfig& cfg, const SymbolConfig& sym, double t, const Eigen::VectorXd& x,
          const Eigen::VectorXd& eta, const ModeVector& theta);

// b_j for 1 <= j <= sym.j_max; j = 0 returns b0.
std::complex<double> bj(const AczConfig& cfg, const SymbolConfig& sym, int j, double t, const Eigen::VectorXd& x,
                        const Eigen::VectorXd& eta, const ModeVector& theta);

// Finite-difference residual of the b0 transport equation at (t, x, eta, theta).
double transport_residual_b0(const AczConfig& cfg, const SymbolConfig& sym, double t, const Eigen::VectorXd& x,
                             const Eigen::VectorXd& eta, const ModeVector& theta, double step = 1e-3);

}  // namespace gfprop
