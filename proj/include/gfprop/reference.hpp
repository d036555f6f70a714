#pragma once

// Independent oracles: Strang split-step spectral solver, closed-form free
// Gaussian, the harmonic-oscillator phase, and L2 error metrics.

#include <Eigen/Core>
#include <stdexcept>

#include "gfprop/hamiltonian.hpp"
#include "gfprop/wavefunction.hpp"

namespace gfprop {

struct SplitStepConfig {
  double dt = 1e-3;
  double boundary_fraction = 0.05;  // outer share of the grid on each side watched for mass
  double boundary_tol = 1e-10;
};

class BoundaryMassError : public std::runtime_error {
 public:
  BoundaryMassError(const std::string& what, double mass) : std::runtime_error(what), mass(mass) {}
  double mass;
};

struct SplitStepStats {
  int steps = 0;
  double dt = 0.0;
  double max_boundary_mass = 0.0;
  double max_norm_drift = 0.0;  // largest |norm change| over one step
};

// psi(t) = exp(-i H t / hbar) phi with H = -hbar^2 / (2m) d^2 + V, n = 1, periodic.
Wavefunction split_step(const HamiltonianSpec& h, const SplitStepConfig& cfg, double t, const Wavefunction& phi,
                        SplitStepStats* stats = nullptr);

// Exact free evolution (V = 0) of a Gaussian packet on R, sampled on the grid.
Wavefunction free_gaussian(const UniformGrid& grid, double hbar, double mass, const GaussianDatum& g, double t);

// (1 / cos t)(x eta - (sin t / 2)(eta^2 + x^2)) for m = 1, V = x^2 / 2.
double mehler_phase(double t, double x, double eta);

struct L2Error {
  double absolute = 0.0;
  double relative = 0.0;  // absolute / ||b||, infinite for b = 0
};
L2Error l2_error(const Wavefunction& a, const Wavefunction& b);

// Band-limited periodic interpolant of psi evaluated at arbitrary points.
Eigen::VectorXcd sample_trigonometric(const Wavefunction& psi, const Eigen::VectorXd& points);
// Resamples psi onto another grid with the interpolant above.
Wavefunction resample(const Wavefunction& psi, const UniformGrid& grid);

// <x> and <p> of a normalized state (p by spectral differentiation).
double mean_position(const Wavefunction& psi);
double mean_momentum(const Wavefunction& psi);

}  // namespace gfprop
