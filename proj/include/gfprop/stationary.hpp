#pragma once

// Critical points of theta -> S(t, x, eta, theta): the branches of the
// multivalued WKB expansion, plus the diagnostics that bound them.

#include <Eigen/Core>
#include <cstdint>
#include <stdexcept>
#include <string>
#include <vector>

#include "gfprop/genfun.hpp"

namespace gfprop {

struct SearchOptions {
  int n_starts = 64;
  double radius = 0.0;  // 0: 2 lambda(x, eta)
  double dedupe_radius = 1e-6;
  double newton_tol = 1e-12;
  int newton_max_iterations = 60;
  double fd_step = 1e-7;
  std::uint64_t seed = 20240601;
  std::uint64_t stream = 0;  // per-point stream index
  double resonance_margin = 1e-3;
  bool enrich = true;        // compute Hessian, HJ and flow residuals
  double flow_tol = 1e-11;
};

struct Branch {
  ModeVector theta_star;
  double action = 0.0;
  double hess_det = 0.0;
  double log_abs_det = 0.0;
  int signature = 0;
  double min_abs_eigenvalue = 0.0;
  double hj_residual = 0.0;
  double gen_residual = 0.0;
  int newton_iters = 0;
  double residual_norm = 0.0;
  Eigen::VectorXd grad_x, grad_eta;
  double dt = 0.0;
  Eigen::MatrixXd hess_theta;
};

struct BranchSet {
  double t = 0.0;
  Eigen::VectorXd x, eta;
  std::vector<Branch> branches;
  bool certified = true;  // false within the resonance margin
  bool search_failed = false;
  int converged_starts = 0;
  std::string note;

  int count() const { return static_cast<int>(branches.size()); }
};

struct NewtonResult {
  Eigen::VectorXd theta;
  double residual = 0.0;
  int iterations = 0;
  bool converged = false;
};

// Damped Newton on r(theta) with a forward-difference Jacobian.
NewtonResult newton_stationary(GenFunEvaluator& ev, const Eigen::VectorXd& x, const Eigen::VectorXd& eta,
                               Eigen::VectorXd theta0, const SearchOptions& opt);

// Fills action, Hessian data, HJ and flow residuals for a converged root.
Branch describe_branch(GenFunEvaluator& ev, const Eigen::VectorXd& x, const Eigen::VectorXd& eta,
                       const NewtonResult& root, const SearchOptions& opt);

BranchSet find_branches(const AczConfig& cfg, double t, const Eigen::VectorXd& x, const Eigen::VectorXd& eta,
                        const SearchOptions& opt = {});

// Newton from the given seeds only (continuation), plus `extra_starts` random starts.
BranchSet refine_branches(GenFunEvaluator& ev, const Eigen::VectorXd& x, const Eigen::VectorXd& eta,
                          const std::vector<Eigen::VectorXd>& seeds, const SearchOptions& opt, int extra_starts);

struct BranchMap {
  double t = 0.0;
  std::vector<double> xs, etas;
  Eigen::MatrixXi counts;  // xs.size() x etas.size(); -1 marks a failed search
  std::vector<BranchSet> cells;
};

BranchMap scan_branch_map(const AczConfig& cfg, double t, const std::vector<double>& xs,
                          const std::vector<double>& etas, const SearchOptions& opt = {}, int threads = 1);

// Independent oracle (n = 1): roots y of x(t; y, eta) = x by scanning and bisection.
struct ShootingOptions {
  int nodes = 2048;
  double span_factor = 4.0;  // scan y in [-span lambda, span lambda]
  double flow_tol = 1e-11;
};

struct ShootingRoot {
  double y = 0.0;
  double p_end = 0.0;
};

std::vector<ShootingRoot> shooting_roots(const HamiltonianSpec& h, double t, double x, double eta,
                                         const ShootingOptions& opt = {});

class ResonanceError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

struct BoundSampling {
  int time_samples = 12;
  int hessian_samples = 4;
  double box = 2.0;  // (x, eta) sampled in [-box, box]^{2n}
  std::uint64_t seed = 7;
};

// Numerical estimates of the solution bounds; diagnostics, not certificates.
struct BoundEstimates {
  double t = 0.0;
  double sigma_min = 0.0;       // smallest singular value of I - L(t) (Nystrom)
  double sup_norm_M = 0.0;      // sup over sampled t of ||I - L(t)||
  double K1_tilde = 0.0;        // ||theta*|| <= K1_tilde lambda
  double K2_tilde = 0.0;        // ||theta*|| > K2_tilde lambda once |(x, eta)| > D
  double D = 0.0;
  double E_tilde = 0.0;         // diameter of the critical set in theta
  double epsilon = 0.0;         // separation radius from second / third derivatives
  double log10_N_max = 0.0;     // log10 of the branch-count bound
  double N_max = 0.0;           // may be +inf when it overflows
  int k = 0;
};

// Smallest singular value of I - L(t) on the Nystrom grid of cfg (throws near resonance).
double linearized_sigma_min(const AczConfig& cfg, double t);
BoundEstimates compute_branch_bound(const AczConfig& cfg, double t, const BoundSampling& sampling = {});

struct RegionSample {
  Eigen::VectorXd x, eta;
  ModeVector theta;
};

struct RegionReport {
  int samples = 0;
  int in_region = 0;
  int flagged = 0;  // in-region samples with a vanishing theta-gradient
  double min_grad_norm = 0.0;
};

RegionReport check_critical_free_region(const AczConfig& cfg, double t, const BoundEstimates& bounds,
                                        const std::vector<RegionSample>& samples, double flag_tol = 1e-8);

}  // namespace gfprop
