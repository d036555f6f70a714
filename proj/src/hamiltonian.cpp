#include "gfprop/hamiltonian.hpp"

#include <Eigen/Dense>
#include <Eigen/Eigenvalues>
#include <Eigen/SVD>
#include <algorithm>
#include <cmath>
#include <numbers>
#include <stdexcept>

#include "gfprop/ode.hpp"

namespace gfprop {

PotentialSpec PotentialSpec::quadratic(const Eigen::MatrixXd& L) {
  PotentialSpec v{L, std::nullopt};
  v.validate();
  return v;
}

PotentialSpec PotentialSpec::with_cosine(const Eigen::MatrixXd& L, double amplitude, const Eigen::VectorXd& wavevector) {
  PotentialSpec v{L, CosinePerturbation{amplitude, wavevector}};
  v.validate();
  return v;
}

void PotentialSpec::validate() const {
  if (L.rows() < 1 || L.rows() != L.cols()) throw std::invalid_argument("PotentialSpec: L must be a non-empty square matrix");
  if (!L.allFinite()) throw std::invalid_argument("PotentialSpec: L must be finite");
  const double scale = std::pow(std::max(1.0, L.cwiseAbs().maxCoeff()), static_cast<double>(L.rows()));
  if (!(std::abs(L.determinant()) > 1e-14 * scale)) throw std::invalid_argument("PotentialSpec: L must be invertible");
  if (cosine) {
    if (cosine->wavevector.size() != L.rows()) throw std::invalid_argument("PotentialSpec: wavevector dimension mismatch");
    if (!(cosine->amplitude >= 0.0) || !std::isfinite(cosine->amplitude) || !cosine->wavevector.allFinite())
      throw std::invalid_argument("PotentialSpec: amplitude must be finite and >= 0, wavevector finite");
  }
}

double PotentialSpec::perturbation_bound(int order) const {
  if (!cosine) return 0.0;
  return cosine->amplitude * std::pow(cosine->wavevector.norm(), order);
}

void HamiltonianSpec::validate() const {
  if (!(mass > 0.0) || !std::isfinite(mass)) throw std::invalid_argument("HamiltonianSpec: mass must be positive");
  potential.validate();
}

double eval_V(const PotentialSpec& v, const Eigen::VectorXd& x) { return potential_value(v, x.data()); }

Eigen::VectorXd grad_V(const PotentialSpec& v, const Eigen::VectorXd& x) {
  Eigen::VectorXd g(x.size());
  potential_gradient(v, x.data(), g.data());
  return g;
}

Eigen::MatrixXd hess_V(const PotentialSpec& v, const Eigen::VectorXd& x) {
  Eigen::MatrixXd hess = v.symmetric_part();
  if (v.cosine) {
    const Eigen::VectorXd& w = v.cosine->wavevector;
    hess -= v.cosine->amplitude * std::cos(w.dot(x)) * (w * w.transpose());
  }
  return hess;
}

double eval_H(const HamiltonianSpec& h, const Eigen::VectorXd& x, const Eigen::VectorXd& p) {
  return p.squaredNorm() / (2.0 * h.mass) + eval_V(h.potential, x);
}

double sup_hess_H(const HamiltonianSpec& h) {
  const double quad = h.potential.symmetric_part().jacobiSvd().singularValues()(0);
  return std::max(1.0 / h.mass, quad + h.potential.perturbation_bound(2));
}

PhasePoint classical_flow(const HamiltonianSpec& h, const Eigen::VectorXd& y, const Eigen::VectorXd& eta, double t,
                          double tol) {
  const int n = h.dim();
  if (y.size() != n || eta.size() != n) throw std::invalid_argument("classical_flow: dimension mismatch");
  Eigen::VectorXd state(2 * n);
  state << y, eta;
  auto rhs = [&](double, const Eigen::VectorXd& z) {
    Eigen::VectorXd dz(2 * n);
    dz.head(n) = z.tail(n) / h.mass;
    potential_gradient(h.potential, z.data(), dz.data() + n);
    dz.tail(n) *= -1.0;
    return dz;
  };
  OdeOptions opt;
  opt.rtol = tol;
  opt.atol = tol;
  const Eigen::VectorXd end = integrate_dp45(rhs, 0.0, t, state, opt);
  return {end.head(n), end.tail(n)};
}

ResonantTimes resonant_times(const HamiltonianSpec& h, double T) {
  ResonantTimes out;
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> eig(h.potential.symmetric_part(), Eigen::EigenvaluesOnly);
  for (Eigen::Index a = 0; a < eig.eigenvalues().size(); ++a) {
    const double lam = eig.eigenvalues()(a);
    if (lam <= 0.0) {
      out.flagged = true;
      out.times.clear();
      return out;
    }
    for (int beta = 0;; ++beta) {
      const double tr = std::numbers::pi * (2.0 * beta + 1.0) / (2.0 * std::sqrt(lam));
      if (tr > T) break;
      out.times.push_back(tr);
    }
  }
  std::sort(out.times.begin(), out.times.end());
  out.times.erase(std::unique(out.times.begin(), out.times.end(),
                              [](double a, double b) { return std::abs(a - b) <= 1e-12 * std::max(1.0, a); }),
                  out.times.end());
  return out;
}

double lambda_weight(const Eigen::VectorXd& x, const Eigen::VectorXd& eta) {
  return std::sqrt(1.0 + x.squaredNorm() + eta.squaredNorm());
}

}  // namespace gfprop
