#pragma once

// H(x, p) = |p|^2 / (2m) + <L x, x> + V0(x) with V0 either zero or
// a cos(<w, x>).

#include <Eigen/Core>
#include <optional>
#include <vector>

#include "gfprop/pathspace.hpp"

namespace gfprop {

struct CosinePerturbation {
  double amplitude = 0.0;
  Eigen::VectorXd wavevector;
};

struct PotentialSpec {
  Eigen::MatrixXd L;
  std::optional<CosinePerturbation> cosine;

  static PotentialSpec quadratic(const Eigen::MatrixXd& L);
  static PotentialSpec with_cosine(const Eigen::MatrixXd& L, double amplitude, const Eigen::VectorXd& wavevector);

  // L square, finite and invertible; amplitude >= 0; wavevector of size n.
  void validate() const;
  int dim() const { return static_cast<int>(L.rows()); }
  Eigen::MatrixXd symmetric_part() const { return L + L.transpose(); }
  // sup |d^j V0| over R^n: a |w|^j, zero without perturbation.
  double perturbation_bound(int order) const;
};

struct HamiltonianSpec {
  PotentialSpec potential;
  double mass = 1.0;

  int dim() const { return potential.dim(); }
  void validate() const;
};

// V(z) for generic scalars; z points to n entries.
template <typename S>
S potential_value(const PotentialSpec& v, const S* z) {
  using std::cos;
  const int n = v.dim();
  S acc(0.0);
  for (int i = 0; i < n; ++i)
    for (int j = 0; j < n; ++j) acc += v.L(i, j) * z[i] * z[j];
  if (v.cosine) {
    S phase(0.0);
    for (int i = 0; i < n; ++i) phase += v.cosine->wavevector(i) * z[i];
    acc += v.cosine->amplitude * cos(phase);
  }
  return acc;
}

// grad V(z) written to out[0..n).
template <typename S>
void potential_gradient(const PotentialSpec& v, const S* z, S* out) {
  using std::sin;
  const int n = v.dim();
  for (int i = 0; i < n; ++i) {
    S acc(0.0);
    for (int j = 0; j < n; ++j) acc += (v.L(i, j) + v.L(j, i)) * z[j];
    out[i] = acc;
  }
  if (v.cosine) {
    S phase(0.0);
    for (int i = 0; i < n; ++i) phase += v.cosine->wavevector(i) * z[i];
    const S s = sin(phase) * v.cosine->amplitude;
    for (int i = 0; i < n; ++i) out[i] -= s * v.cosine->wavevector(i);
  }
}

double eval_V(const PotentialSpec& v, const Eigen::VectorXd& x);
Eigen::VectorXd grad_V(const PotentialSpec& v, const Eigen::VectorXd& x);
Eigen::MatrixXd hess_V(const PotentialSpec& v, const Eigen::VectorXd& x);
double eval_H(const HamiltonianSpec& h, const Eigen::VectorXd& x, const Eigen::VectorXd& p);

// max(1/m, ||L + L^T||_2 + a |w|^2).
double sup_hess_H(const HamiltonianSpec& h);

struct PhasePoint {
  Eigen::VectorXd x;
  Eigen::VectorXd p;
};

// Hamiltonian flow from (y, eta) at time 0 to time t (adaptive Dormand-Prince).
PhasePoint classical_flow(const HamiltonianSpec& h, const Eigen::VectorXd& y, const Eigen::VectorXd& eta, double t,
                          double tol = 1e-10);

struct ResonantTimes {
  std::vector<double> times;
  bool flagged = false;  // L + L^T not positive definite: no resonance structure
};

// Times pi (2 beta + 1) / (2 sqrt(lambda)) <= T over eigenvalues lambda of L + L^T.
ResonantTimes resonant_times(const HamiltonianSpec& h, double T);

// sqrt(1 + |x|^2 + |eta|^2)
double lambda_weight(const Eigen::VectorXd& x, const Eigen::VectorXd& eta);

}  // namespace gfprop
