#pragma once

// Experiment runner: versioned JSON configuration and one entry point per
// subcommand. Each subcommand writes <out>/<name>.csv and
// <out>/<name>_summary.json and returns the process exit code.

#include <cstdint>
#include <optional>
#include <stdexcept>
#include <string>
#include <vector>

#include <json.hpp>

#include "gfprop/amplitude.hpp"
#include "gfprop/genfun.hpp"
#include "gfprop/hamiltonian.hpp"
#include "gfprop/propagator.hpp"
#include "gfprop/reference.hpp"
#include "gfprop/stationary.hpp"
#include "gfprop/wavefunction.hpp"

namespace gfprop::cli {

inline constexpr int exit_pass = 0;
inline constexpr int exit_tolerance = 1;
inline constexpr int exit_config = 2;
inline constexpr const char* schema_id = "gfprop.experiment/1";

class ConfigError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

struct Range {
  double lo = -2.0;
  double hi = 2.0;
  int count = 5;
  std::vector<double> values() const;
};

struct ExperimentConfig {
  // potential
  std::string family = "quadratic";  // "quadratic" or "cosine"
  Eigen::MatrixXd L = Eigen::MatrixXd::Constant(1, 1, 0.5);
  double amplitude = 0.0;
  Eigen::VectorXd wavevector = Eigen::VectorXd::Ones(1);
  double mass = 1.0;

  double T = 1.0;
  std::vector<double> times{1.0};
  std::optional<int> M;  // nullopt: "auto"
  int M_tail = 0;        // 0: 4M

  UniformGrid grid{12.0, 2048};  // split-step reference grid
  double split_dt = 1e-3;
  double kernel_radius = 1.0;    // kernel grid half-width X = radius + sigmas sqrt(hbar)
  double kernel_sigmas = 8.0;
  double kernel_oversampling = 1.5;
  std::string amplitude_form = "transport";  // or "van_vleck"

  GaussianDatum initial{0.5, 0.3, 0.0};
  std::vector<double> hbars{0.4, 0.2, 0.1, 0.05};

  double flow_tol = 1e-6;
  double mehler_tol = 1e-8;
  double hj_tol = 1e-6;
  double error_ratio_lo = 0.35;
  double error_ratio_hi = 0.7;
  double absolute_error_tol = 1e-3;

  int samples = 20;
  double box = 2.0;
  Range scan_x, scan_eta;
  bool oracle = true;

  int n_starts = 64;
  double rho_width = 1.0;
  int tau_nodes = 8;
  int tail_samples = 100;
  int bound_time_samples = 12;

  std::uint64_t seed = 20240601;
  int threads = 1;
  std::string output = "out";

  HamiltonianSpec hamiltonian() const;
  SymbolConfig symbol() const;
  SearchOptions search() const;
};

ExperimentConfig parse_config(const nlohmann::json& j);
ExperimentConfig load_config(const std::string& path);
// The resolved configuration, with "auto" replaced by the selected cutoff.
nlohmann::json resolved_json(const ExperimentConfig& cfg, const AczConfig& acz);

// Resonant times within `window` of any requested t.
std::vector<std::string> resonance_warnings(const ExperimentConfig& cfg, double window = 0.05);

struct RunContext {
  ExperimentConfig cfg;
  std::string out_dir;
};

int cmd_flow_check(const RunContext& ctx);
int cmd_branches(const RunContext& ctx);
int cmd_propagate(const RunContext& ctx);
int cmd_mehler_check(const RunContext& ctx);
int cmd_diagnostics(const RunContext& ctx);

// Dispatches by name; config errors map to exit_config.
int run_command(const std::string& name, const std::string& config_path, const std::string& out_dir,
                std::optional<std::uint64_t> seed, std::optional<int> threads);

// Kernel grid for one hbar: X = radius + sigmas sqrt(hbar), spacing below pi hbar / X.
UniformGrid kernel_grid(const ExperimentConfig& cfg, double hbar);

// "%.17g"; non-finite values print as nan / inf.
std::string csv_number(double v);

}  // namespace gfprop::cli
