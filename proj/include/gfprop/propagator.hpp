#pragma once

// Quantum kernel assembly: hbar-Fourier transforms, the multivalued
// stationary-phase kernel, the direct theta-quadrature of the oscillatory
// integral, and end-to-end propagation (n = 1).

#include <Eigen/Core>
#include <complex>
#include <stdexcept>
#include <vector>

#include "gfprop/amplitude.hpp"
#include "gfprop/stationary.hpp"
#include "gfprop/wavefunction.hpp"

namespace gfprop {

class NyquistError : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

// Throws NyquistError unless d_eta <= pi hbar / X_x and d_x <= pi hbar / X_eta.
void check_nyquist(const UniformGrid& x_grid, const UniformGrid& eta_grid, double hbar);

// phi_hat(eta) = int e^{-i y eta / hbar} phi(y) dy by the trapezoid rule.
Eigen::VectorXcd hbar_ft(const Wavefunction& phi, const UniformGrid& eta_grid);
// phi(x) = (2 pi hbar)^{-1} int e^{i x eta / hbar} phi_hat(eta) d eta.
Wavefunction inverse_hbar_ft(const Eigen::VectorXcd& phi_hat, const UniformGrid& eta_grid, const UniformGrid& x_grid,
                             double hbar);
// Closed-form transform of gaussian_packet on R.
std::complex<double> gaussian_hbar_ft(double eta, double hbar, const GaussianDatum& g);

enum class AmplitudeForm {
  transport,  // (2 pi hbar)^{k/2} |det d2_theta S|^{-1/2} e^{i pi sigma / 4} b0(theta*)
  van_vleck,  // |det d2_{x eta} S_red|^{1/2} e^{i pi (sigma - sigma_ref) / 4}; diagnostic
};

struct KernelOptions {
  SearchOptions search;
  AmplitudeForm form = AmplitudeForm::transport;
  bool continuation = true;   // seed each x from the branches of its neighbour
  int continuation_starts = 4;  // extra random starts at continued nodes
  int refresh_stride = 8;     // full multistart every this many x nodes
  int threads = 1;
};

struct KernelMatrix {
  double t = 0.0;
  double hbar = 1.0;
  Eigen::VectorXd x, eta;
  Eigen::MatrixXcd values;  // x.size() x eta.size()
  Eigen::MatrixXi counts;   // branches used; -1 flagged (zeroed), -2 skipped column
  int flagged = 0;
  int sigma_ref = 0;        // reference signature used by the van Vleck form
};

// Stationary-phase kernel summed over branches. `active`, when non-empty,
// selects the eta columns to assemble; the others are zero.
KernelMatrix wkb_kernel(const AczConfig& cfg, const SymbolConfig& sym, double t, const Eigen::VectorXd& x,
                        const Eigen::VectorXd& eta, double hbar, const KernelOptions& opt = {},
                        const std::vector<bool>& active = {});

// Contribution of one branch with the given amplitude form.
std::complex<double> branch_term(const AczConfig& cfg, const SymbolConfig& sym, double t, const Eigen::VectorXd& x,
                                 const Eigen::VectorXd& eta, const Branch& b, double hbar, AmplitudeForm form,
                                 int sigma_ref = 0);

// Signature of d2_theta S near t = 0+, which the van Vleck form subtracts.
int reference_signature(const AczConfig& cfg, const SearchOptions& opt = {});

// The theta-integrand S and log transport factor on the tensor Gauss-Hermite
// nodes theta = w u. Independent of hbar, so one sample serves a sweep.
struct ThetaSamples {
  int nodes_per_dim = 0;
  Eigen::VectorXd weights;        // product Gauss-Hermite weights times pi^{-k/2}
  Eigen::VectorXd action;         // S(t, x, eta, theta)
  Eigen::VectorXd log_transport;  // -(1/2m) int_0^t Delta_x S
};

struct DirectOptions {
  int nodes_per_dim = 7;
  long max_nodes = 5'000'000;
  int max_dim = 10;
  int threads = 1;
};

ThetaSamples sample_theta_integrand(const AczConfig& cfg, const SymbolConfig& sym, double t, const Eigen::VectorXd& x,
                                    const Eigen::VectorXd& eta, const DirectOptions& opt = {});
std::complex<double> theta_integral(const ThetaSamples& s, double hbar);

struct DirectResult {
  std::complex<double> value;
  std::complex<double> refined;  // with the refined node count, when requested
  double relative_change = 0.0;
  bool nonconverged = false;     // refinement moved the value by more than 10%
};

// int e^{i S / hbar} b0 d theta. With check_refinement the rule is repeated
// with the smallest per-dimension count whose tensor size at least doubles.
DirectResult direct_theta_kernel(const AczConfig& cfg, const SymbolConfig& sym, double t, const Eigen::VectorXd& x,
                                 const Eigen::VectorXd& eta, double hbar, const DirectOptions& opt = {},
                                 bool check_refinement = false);
// Per-dimension count n' with n'^k >= 2 n^k.
int refined_nodes_per_dim(int nodes_per_dim, int k);

enum class PropagationMethod { wkb, direct };

struct PropagateOptions {
  KernelOptions kernel;
  DirectOptions direct;
  double column_tol = 1e-14;  // eta columns with |phi_hat| below this share of the max are skipped
  double max_flagged_fraction = 0.01;
};

struct PropagationResult {
  Wavefunction psi;
  KernelMatrix kernel;
  int active_columns = 0;
};

// psi(t, x) = (2 pi hbar)^{-1} int U(t, x, eta) phi_hat(eta) d eta on the grid of phi.
PropagationResult propagate(const AczConfig& cfg, const SymbolConfig& sym, double t, const Wavefunction& phi,
                            PropagationMethod method, const PropagateOptions& opt = {});

}  // namespace gfprop
