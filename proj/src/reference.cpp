#include "gfprop/reference.hpp"

#include <unsupported/Eigen/FFT>

#include <cmath>
#include <complex>
#include <limits>
#include <numbers>
#include <string>

namespace gfprop {

namespace {

using cd = std::complex<double>;

// Angular wavenumbers in FFT order; the Nyquist mode is taken as negative.
Eigen::VectorXd wavenumbers(const UniformGrid& grid) {
  const int N = grid.N;
  const double base = 2.0 * std::numbers::pi / (N * grid.spacing());
  Eigen::VectorXd k(N);
  for (int j = 0; j < N; ++j) k(j) = base * (j < (N + 1) / 2 ? j : j - N);
  return k;
}

double boundary_mass(const Wavefunction& psi, int edge) {
  return psi.grid.spacing() * (psi.values.head(edge).squaredNorm() + psi.values.tail(edge).squaredNorm());
}

void require_same_grid(const Wavefunction& a, const Wavefunction& b) {
  if (!(a.grid == b.grid) || a.values.size() != b.values.size()) throw std::invalid_argument("l2_error: grid mismatch");
  if (a.hbar != b.hbar) throw std::invalid_argument("l2_error: hbar mismatch");
}

}  // namespace

Wavefunction split_step(const HamiltonianSpec& h, const SplitStepConfig& cfg, double t, const Wavefunction& phi,
                        SplitStepStats* stats) {
  if (h.dim() != 1) throw std::invalid_argument("split_step: only n = 1 is supported");
  if (!(cfg.dt > 0.0) || t < 0.0) throw std::invalid_argument("split_step: need dt > 0 and t >= 0");
  if (phi.values.size() != phi.grid.N) throw std::invalid_argument("split_step: values do not match the grid");
  const int N = phi.grid.N;
  const double hbar = phi.hbar, m = h.mass;
  const int steps = t == 0.0 ? 0 : static_cast<int>(std::ceil(t / cfg.dt - 1e-12));
  const double dt = steps ? t / steps : 0.0;
  const int edge = std::max(1, static_cast<int>(std::ceil(cfg.boundary_fraction * N)));

  Eigen::VectorXcd half_potential(N), kinetic(N);
  for (int j = 0; j < N; ++j) {
    Eigen::VectorXd z(1);
    z << phi.grid.node(j);
    half_potential(j) = std::exp(cd(0.0, -0.5 * dt * eval_V(h.potential, z) / hbar));
  }
  const Eigen::VectorXd k = wavenumbers(phi.grid);
  for (int j = 0; j < N; ++j) kinetic(j) = std::exp(cd(0.0, -dt * hbar * k(j) * k(j) / (2.0 * m)));

  Eigen::FFT<double> fft;
  Wavefunction psi = phi;
  Eigen::VectorXcd spectrum(N);
  SplitStepStats st;
  st.steps = steps;
  st.dt = dt;
  st.max_boundary_mass = boundary_mass(psi, edge);
  double norm = psi.norm();
  for (int s = 0; s < steps; ++s) {
    psi.values.array() *= half_potential.array();
    fft.fwd(spectrum, psi.values);
    spectrum.array() *= kinetic.array();
    fft.inv(psi.values, spectrum);
    psi.values.array() *= half_potential.array();
    const double next = psi.norm();
    st.max_norm_drift = std::max(st.max_norm_drift, std::abs(next - norm));
    norm = next;
    st.max_boundary_mass = std::max(st.max_boundary_mass, boundary_mass(psi, edge));
  }
  if (stats) *stats = st;
  if (st.max_boundary_mass > cfg.boundary_tol)
    throw BoundaryMassError("split_step: boundary mass " + std::to_string(st.max_boundary_mass) + " exceeds tolerance",
                            st.max_boundary_mass);
  return psi;
}

Wavefunction free_gaussian(const UniformGrid& grid, double hbar, double mass, const GaussianDatum& g, double t) {
  const double s = resolved_width(g, hbar);
  const cd spread(1.0, hbar * t / (mass * s * s));
  const double v = g.momentum / mass;
  const cd amp = std::pow(std::numbers::pi * s * s, -0.25) / std::sqrt(spread);
  Wavefunction out{grid, Eigen::VectorXcd(grid.N), hbar};
  for (int j = 0; j < grid.N; ++j) {
    const double d = grid.node(j) - g.center;
    const double c = d - v * t;
    out.values(j) = amp * std::exp(-c * c / (2.0 * s * s * spread) +
                                   cd(0.0, g.momentum * d / hbar - g.momentum * g.momentum * t / (2.0 * mass * hbar)));
  }
  return out;
}

double mehler_phase(double t, double x, double eta) {
  const double c = std::cos(t);
  if (std::abs(c) <= 1e-6) throw std::domain_error("mehler_phase: t is within 1e-6 of a caustic (cos t = 0)");
  return (x * eta - 0.5 * std::sin(t) * (eta * eta + x * x)) / c;
}

L2Error l2_error(const Wavefunction& a, const Wavefunction& b) {
  require_same_grid(a, b);
  L2Error out;
  out.absolute = std::sqrt(a.grid.spacing() * (a.values - b.values).squaredNorm());
  const double nb = b.norm();
  out.relative = nb > 0.0 ? out.absolute / nb : std::numeric_limits<double>::infinity();
  return out;
}

Eigen::VectorXcd sample_trigonometric(const Wavefunction& psi, const Eigen::VectorXd& points) {
  const int N = psi.grid.N;
  Eigen::FFT<double> fft;
  Eigen::VectorXcd c(N);
  fft.fwd(c, psi.values);
  c /= static_cast<double>(N);
  const Eigen::VectorXd k = wavenumbers(psi.grid);
  const bool even = N % 2 == 0;
  Eigen::VectorXcd out(points.size());
  for (Eigen::Index i = 0; i < points.size(); ++i) {
    const double u = points(i) - psi.grid.node(0);
    cd acc = 0.0;
    for (int j = 0; j < N; ++j) {
      if (even && j == N / 2)
        acc += c(j) * std::cos(k(j) * u);  // split the Nyquist mode evenly between +-k
      else
        acc += c(j) * std::exp(cd(0.0, k(j) * u));
    }
    out(i) = acc;
  }
  return out;
}

Wavefunction resample(const Wavefunction& psi, const UniformGrid& grid) {
  return Wavefunction{grid, sample_trigonometric(psi, grid.nodes()), psi.hbar};
}

double mean_position(const Wavefunction& psi) {
  return psi.grid.spacing() * (psi.values.cwiseAbs2().array() * psi.grid.nodes().array()).sum();
}

double mean_momentum(const Wavefunction& psi) {
  Eigen::FFT<double> fft;
  Eigen::VectorXcd spectrum(psi.grid.N), derivative(psi.grid.N);
  fft.fwd(spectrum, psi.values);
  const Eigen::VectorXd k = wavenumbers(psi.grid);
  spectrum.array() *= k.array().cast<cd>() * cd(0.0, 1.0);
  fft.inv(derivative, spectrum);
  // <p> = int conj(psi) (-i hbar) psi'
  return (psi.grid.spacing() * psi.values.dot(derivative) * cd(0.0, -psi.hbar)).real();
}

}  // namespace gfprop
