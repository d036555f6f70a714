#include <algorithm>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <limits>
#include <random>

#include "gfprop/cli.hpp"
#include "gfprop/parallel.hpp"

namespace gfprop::cli {

using nlohmann::json;

namespace {

constexpr double nan = std::numeric_limits<double>::quiet_NaN();
constexpr double identity_tol = 1e-8;

class CsvWriter {
 public:
  explicit CsvWriter(const std::vector<std::string>& header) {
    for (std::size_t i = 0; i < header.size(); ++i) text_ += (i ? "," : "") + header[i];
    text_ += "\n";
    width_ = header.size();
  }
  void row(const std::vector<double>& values) {
    if (values.size() != width_) throw std::logic_error("csv row width mismatch");
    for (std::size_t i = 0; i < values.size(); ++i) text_ += (i ? "," : "") + csv_number(values[i]);
    text_ += "\n";
  }
  void write(const std::filesystem::path& path) const {
    std::ofstream out(path);
    out << text_;
    if (!out) throw std::runtime_error("cannot write " + path.string());
  }

 private:
  std::string text_;
  std::size_t width_ = 0;
};

void write_json(const std::filesystem::path& path, const json& j) {
  std::ofstream out(path);
  out << j.dump(2) << "\n";
  if (!out) throw std::runtime_error("cannot write " + path.string());
}

struct Prepared {
  HamiltonianSpec h;
  bool auto_cutoff = false;
  AczConfig acz;
  json config;
  std::filesystem::path dir;
};

Prepared prepare(const RunContext& ctx) {
  Prepared p;
  p.h = ctx.cfg.hamiltonian();
  try {
    p.acz = make_acz_config(p.h, ctx.cfg.T, ctx.cfg.M.value_or(0), ctx.cfg.M_tail);
  } catch (const std::invalid_argument& e) {
    throw ConfigError(std::string("basis: ") + e.what());
  }
  p.config = resolved_json(ctx.cfg, p.acz);
  p.auto_cutoff = !ctx.cfg.M.has_value();
  p.dir = ctx.out_dir;
  std::filesystem::create_directories(p.dir);
  for (const auto& w : resonance_warnings(ctx.cfg)) std::cerr << "warning: " << w << "\n";
  return p;
}

json summary_head(const Prepared& p, const std::string& command) {
  json s;
  s["command"] = command;
  s["config"] = p.config;
  s["cutoff_auto"] = p.auto_cutoff;
  return s;
}

bool near_resonant(const AczConfig& acz, double t, double margin) {
  for (double r : resonant_times(acz.hamiltonian, acz.period()).times)
    if (std::abs(t - r) < margin) return true;
  return false;
}

void require_one_dim(const ExperimentConfig& cfg, const std::string& command) {
  if (cfg.L.rows() != 1) throw ConfigError(command + ": only n = 1 is supported");
}

}  // namespace

int cmd_flow_check(const RunContext& ctx) {
  const Prepared p = prepare(ctx);
  const ExperimentConfig& c = ctx.cfg;
  const int n = p.h.dim();
  json summary = summary_head(p, "flow_check");
  const SearchOptions search = c.search();
  for (double t : c.times)
    if (t > 0.0 && near_resonant(p.acz, t, search.resonance_margin)) {
      const std::string msg = "flow_check: t = " + std::to_string(t) +
                              " is resonant; the generating function is not defined there";
      std::cerr << msg << "\n";
      summary["refused"] = msg;
      write_json(p.dir / "flow_check_summary.json", summary);
      return exit_config;
    }

  std::vector<std::string> header{"t"};
  for (int i = 0; i < n; ++i) header.push_back("y" + std::to_string(i));
  for (int i = 0; i < n; ++i) header.push_back("eta" + std::to_string(i));
  for (int i = 0; i < n; ++i) header.push_back("x" + std::to_string(i));
  for (int i = 0; i < n; ++i) header.push_back("p" + std::to_string(i));
  header.insert(header.end(), {"count", "residual", "hj_residual"});
  CsvWriter csv(header);

  double worst = 0.0, worst_hj = 0.0;
  int failures = 0;
  std::mt19937_64 rng(c.seed);
  std::uniform_real_distribution<double> u(-c.box, c.box);
  for (double t : c.times) {
    std::vector<Eigen::VectorXd> ys(c.samples), etas(c.samples);
    for (int s = 0; s < c.samples; ++s) {
      ys[s].resize(n);
      etas[s].resize(n);
      for (int i = 0; i < n; ++i) ys[s](i) = u(rng);
      for (int i = 0; i < n; ++i) etas[s](i) = u(rng);
    }
    std::vector<std::vector<double>> rows(c.samples);
    parallel_for(c.samples, ctx.cfg.threads, [&](long s) {
      const PhasePoint end = classical_flow(p.h, ys[s], etas[s], t);
      SearchOptions so = search;
      so.stream = static_cast<std::uint64_t>(s);
      const BranchSet set = find_branches(p.acz, t, end.x, etas[s], so);
      double best = std::numeric_limits<double>::infinity(), hj = 0.0;
      for (const Branch& b : set.branches) {
        best = std::min(best, (b.grad_eta - ys[s]).norm() + (b.grad_x - end.p).norm());
        hj = std::max(hj, b.hj_residual);
      }
      std::vector<double> row{t};
      for (int i = 0; i < n; ++i) row.push_back(ys[s](i));
      for (int i = 0; i < n; ++i) row.push_back(etas[s](i));
      for (int i = 0; i < n; ++i) row.push_back(end.x(i));
      for (int i = 0; i < n; ++i) row.push_back(end.p(i));
      row.insert(row.end(), {static_cast<double>(set.count()), best, hj});
      rows[s] = std::move(row);
    });
    for (const auto& row : rows) {
      csv.row(row);
      const double r = row[row.size() - 2];
      worst = std::max(worst, r);
      worst_hj = std::max(worst_hj, row.back());
      if (!(r <= c.flow_tol)) ++failures;
    }
  }
  csv.write(p.dir / "flow_check.csv");
  summary["max_residual"] = worst;
  summary["max_hj_residual"] = worst_hj;
  summary["failures"] = failures;
  summary["tolerance"] = c.flow_tol;
  summary["pass"] = failures == 0;
  write_json(p.dir / "flow_check_summary.json", summary);
  return failures ? exit_tolerance : exit_pass;
}

int cmd_branches(const RunContext& ctx) {
  const ExperimentConfig& c = ctx.cfg;
  require_one_dim(c, "branches");
  const Prepared p = prepare(ctx);
  json summary = summary_head(p, "branches");
  CsvWriter csv({"t", "x", "eta", "count", "oracle_count", "branch", "S", "det", "signature", "hj_residual"});
  const std::vector<double> xs = c.scan_x.values(), etas = c.scan_eta.values();
  int cells = 0, mismatches = 0, failed = 0, max_count = 0;
  double worst_hj = 0.0;
  json per_t = json::array();
  for (double t : c.times) {
    const BranchMap map = scan_branch_map(p.acz, t, xs, etas, c.search(), c.threads);
    std::vector<int> oracle(xs.size() * etas.size(), -1);
    if (c.oracle)
      parallel_for(static_cast<long>(oracle.size()), c.threads, [&](long idx) {
        oracle[idx] = static_cast<int>(shooting_roots(p.h, t, xs[idx / etas.size()], etas[idx % etas.size()]).size());
      });
    int t_mismatch = 0;
    for (std::size_t i = 0; i < xs.size(); ++i)
      for (std::size_t j = 0; j < etas.size(); ++j) {
        const int count = map.counts(i, j);
        const int orc = oracle[i * etas.size() + j];
        ++cells;
        if (count < 0) ++failed;
        if (c.oracle && count != orc) ++t_mismatch;
        max_count = std::max(max_count, count);
        const BranchSet& set = map.cells[i * etas.size() + j];
        const double oc = c.oracle ? orc : nan;
        if (set.branches.empty()) csv.row({t, xs[i], etas[j], static_cast<double>(count), oc, -1, nan, nan, nan, nan});
        for (std::size_t b = 0; b < set.branches.size(); ++b) {
          const Branch& br = set.branches[b];
          worst_hj = std::max(worst_hj, br.hj_residual);
          csv.row({t, xs[i], etas[j], static_cast<double>(count), oc, static_cast<double>(b), br.action, br.hess_det,
                   static_cast<double>(br.signature), br.hj_residual});
        }
      }
    mismatches += t_mismatch;
    per_t.push_back({{"t", t}, {"oracle_mismatches", t_mismatch}});
  }
  csv.write(p.dir / "branches.csv");
  const bool pass = mismatches == 0 && failed == 0 && worst_hj <= c.hj_tol;
  summary["cells"] = cells;
  summary["failed_searches"] = failed;
  summary["oracle_mismatches"] = mismatches;
  summary["max_count"] = max_count;
  summary["max_hj_residual"] = worst_hj;
  summary["per_t"] = per_t;
  summary["pass"] = pass;
  write_json(p.dir / "branches_summary.json", summary);
  return pass ? exit_pass : exit_tolerance;
}

int cmd_propagate(const RunContext& ctx) {
  const ExperimentConfig& c = ctx.cfg;
  require_one_dim(c, "propagate");
  const Prepared p = prepare(ctx);
  json summary = summary_head(p, "propagate");
  CsvWriter csv({"t", "hbar", "x", "abs2", "re", "im", "ref_re", "ref_im"});
  const SymbolConfig sym = c.symbol();
  PropagateOptions po;
  po.kernel.search = c.search();
  po.kernel.threads = c.threads;
  po.kernel.form = c.amplitude_form == "van_vleck" ? AmplitudeForm::van_vleck : AmplitudeForm::transport;
  const bool pure = c.family == "quadratic";
  bool pass = true;
  json runs = json::array();
  for (double t : c.times) {
    std::vector<double> errors;
    for (double hbar : c.hbars) {
      json run = {{"t", t}, {"hbar", hbar}};
      const UniformGrid kg = kernel_grid(c, hbar);
      run["grid"] = {{"X", kg.X}, {"N", kg.N}};
      try {
        const Wavefunction phi = gaussian_packet(kg, hbar, c.initial);
        const PropagationResult res = propagate(p.acz, sym, t, phi, PropagationMethod::wkb, po);
        const Wavefunction ref =
            resample(split_step(p.h, {c.split_dt}, t, gaussian_packet(c.grid, hbar, c.initial)), kg);
        const L2Error err = l2_error(res.psi, ref);
        errors.push_back(err.absolute);
        run["error"] = err.absolute;
        run["relative_error"] = err.relative;
        run["norm_ratio"] = res.psi.norm() / phi.norm();
        run["flagged"] = res.kernel.flagged;
        run["active_columns"] = res.active_columns;
        const Eigen::VectorXd nodes = kg.nodes();
        for (int i = 0; i < kg.N; ++i)
          csv.row({t, hbar, nodes(i), std::norm(res.psi.values(i)), res.psi.values(i).real(), res.psi.values(i).imag(),
                   ref.values(i).real(), ref.values(i).imag()});
        if (t == 0.0 && !(err.relative <= identity_tol)) pass = false;
        if (t > 0.0 && pure && hbar <= 0.1 + 1e-12 && !(err.absolute <= c.absolute_error_tol)) pass = false;
      } catch (const std::exception& e) {
        run["error_message"] = e.what();
        errors.push_back(nan);
        pass = false;
      }
      runs.push_back(run);
    }
    json ratios = json::array();
    for (std::size_t i = 1; i < errors.size(); ++i) {
      const double r = errors[i] / errors[i - 1];
      ratios.push_back(r);
      if (t > 0.0 && !pure && !(r >= c.error_ratio_lo && r <= c.error_ratio_hi)) pass = false;
    }
    runs.push_back({{"t", t}, {"error_ratios", ratios}});
  }
  csv.write(p.dir / "propagate.csv");
  summary["runs"] = runs;
  summary["pass"] = pass;
  write_json(p.dir / "propagate_summary.json", summary);
  return pass ? exit_pass : exit_tolerance;
}

int cmd_mehler_check(const RunContext& ctx) {
  const ExperimentConfig& c = ctx.cfg;
  if (c.family != "quadratic" || c.L.rows() != 1 || c.L(0, 0) != 0.5 || c.mass != 1.0)
    throw ConfigError("mehler_check: needs the pure oscillator (quadratic, L = [[0.5]], mass 1)");
  const Prepared p = prepare(ctx);
  json summary = summary_head(p, "mehler_check");
  CsvWriter csv({"t", "x", "eta", "count", "S", "mehler", "abs_diff"});
  const std::vector<double> xs = c.scan_x.values(), etas = c.scan_eta.values();
  double worst = 0.0;
  int missing = 0;
  json per_t = json::array();
  for (double t : c.times) {
    const BranchMap map = scan_branch_map(p.acz, t, xs, etas, c.search(), c.threads);
    double t_worst = 0.0;
    for (std::size_t i = 0; i < xs.size(); ++i)
      for (std::size_t j = 0; j < etas.size(); ++j) {
        const BranchSet& set = map.cells[i * etas.size() + j];
        const double ref = mehler_phase(t, xs[i], etas[j]);
        if (set.branches.empty()) {
          ++missing;
          csv.row({t, xs[i], etas[j], 0, nan, ref, nan});
        }
        for (const Branch& b : set.branches) {
          const double d = std::abs(b.action - ref);
          t_worst = std::max(t_worst, d);
          csv.row({t, xs[i], etas[j], static_cast<double>(set.count()), b.action, ref, d});
        }
      }
    worst = std::max(worst, t_worst);
    per_t.push_back({{"t", t}, {"max_abs_diff", t_worst}});
  }
  csv.write(p.dir / "mehler_check.csv");
  const bool pass = missing == 0 && worst <= c.mehler_tol;
  summary["max_abs_diff"] = worst;
  summary["missing_branches"] = missing;
  summary["tolerance"] = c.mehler_tol;
  summary["per_t"] = per_t;
  summary["pass"] = pass;
  write_json(p.dir / "mehler_check_summary.json", summary);
  return pass ? exit_pass : exit_tolerance;
}

int cmd_diagnostics(const RunContext& ctx) {
  const ExperimentConfig& c = ctx.cfg;
  const Prepared p = prepare(ctx);
  const int n = p.h.dim();
  const int k = p.acz.parameter_dim();
  json summary = summary_head(p, "diagnostics");
  summary["cutoff"] = {{"M", p.acz.basis.cutoff},
                       {"auto", !c.M.has_value()},
                       {"bound", cutoff_bound(p.h, c.T, p.acz.basis.cutoff)},
                       {"contraction", p.acz.contraction}};
  const ResonantTimes rt = resonant_times(p.h, c.T);
  summary["resonant_times"] = rt.times;
  summary["resonance_structure_flagged"] = rt.flagged;
  summary["warnings"] = resonance_warnings(c);
  CsvWriter csv({"t", "resonant", "sigma_min", "K1_tilde", "K2_tilde", "D", "E_tilde", "epsilon", "log10_N_max",
                 "max_observed_rate", "max_iterations", "contraction"});
  bool pass = true;
  json per_t = json::array();
  std::mt19937_64 rng(c.seed);
  std::uniform_real_distribution<double> box(-c.box, c.box);
  std::normal_distribution<double> gauss(0.0, 1.0);
  std::uniform_real_distribution<double> unit(0.0, 1.0);
  for (double t : c.times) {
    json entry = {{"t", t}};
    const bool resonant = near_resonant(p.acz, t, c.search().resonance_margin);
    entry["resonant"] = resonant;

    // Tail contraction: observed iteration rates against the reported d.
    double max_rate = 0.0;
    int max_iter = 0, nonconverged = 0;
    for (int s = 0; s < c.tail_samples; ++s) {
      Eigen::VectorXd x(n);
      for (int i = 0; i < n; ++i) x(i) = box(rng);
      Eigen::VectorXd th(k);
      for (int i = 0; i < k; ++i) th(i) = gauss(rng);
      try {
        const TailSolution sol = solve_tail(p.acz, t, x, ModeVector::from_flat(p.acz.basis, Band::low, th));
        max_rate = std::max(max_rate, sol.observed_rate);
        max_iter = std::max(max_iter, sol.iterations);
      } catch (const TailNonConvergence&) {
        ++nonconverged;
      }
    }
    entry["tail"] = {{"samples", c.tail_samples},
                     {"max_observed_rate", max_rate},
                     {"max_iterations", max_iter},
                     {"nonconverged", nonconverged},
                     {"contraction", p.acz.contraction}};
    if (nonconverged || max_rate > p.acz.contraction) pass = false;

    std::vector<double> row{t, resonant ? 1.0 : 0.0};
    if (t == 0.0 || resonant) {
      entry["bounds"] = nullptr;
      entry["bounds_note"] = t == 0.0 ? "t = 0: the critical set is all of theta space"
                                      : "resonant time: I - L(t) is singular";
      row.insert(row.end(), {nan, nan, nan, nan, nan, nan, nan});
    } else {
      try {
        BoundSampling bs;
        bs.time_samples = c.bound_time_samples;
        bs.box = c.box;
        bs.seed = c.seed;
        const BoundEstimates b = compute_branch_bound(p.acz, t, bs);
        entry["bounds"] = {{"sigma_min", b.sigma_min}, {"sup_norm_M", b.sup_norm_M}, {"K1_tilde", b.K1_tilde},
                           {"K2_tilde", b.K2_tilde},   {"D", b.D},                   {"E_tilde", b.E_tilde},
                           {"epsilon", b.epsilon},     {"log10_N_max", b.log10_N_max}, {"k", b.k}};
        std::vector<RegionSample> samples;
        for (int s = 0; s < std::max(1, c.samples); ++s) {
          RegionSample r{Eigen::VectorXd(n), Eigen::VectorXd(n), ModeVector(p.acz.basis, Band::low)};
          for (int i = 0; i < n; ++i) r.x(i) = box(rng);
          for (int i = 0; i < n; ++i) r.eta(i) = box(rng);
          // Uniform in the ball |theta| <= K2_tilde lambda, where the region claims no critical points.
          Eigen::VectorXd th(k);
          for (int i = 0; i < k; ++i) th(i) = gauss(rng);
          const double radius = b.K2_tilde * lambda_weight(r.x, r.eta) * std::pow(unit(rng), 1.0 / k);
          th *= radius / th.norm();
          r.theta = ModeVector::from_flat(p.acz.basis, Band::low, th);
          samples.push_back(std::move(r));
        }
        const RegionReport reg = check_critical_free_region(p.acz, t, b, samples);
        entry["critical_free_region"] = {{"samples", reg.samples},
                                         {"in_region", reg.in_region},
                                         {"flagged", reg.flagged},
                                         {"min_grad_norm", reg.in_region ? json(reg.min_grad_norm) : json(nullptr)}};
        row.insert(row.end(), {b.sigma_min, b.K1_tilde, b.K2_tilde, b.D, b.E_tilde, b.epsilon, b.log10_N_max});
      } catch (const ResonanceError& e) {
        entry["resonant"] = true;
        entry["bounds"] = nullptr;
        entry["bounds_note"] = e.what();
        row.insert(row.end(), {nan, nan, nan, nan, nan, nan, nan});
      }
    }
    row.insert(row.end(), {max_rate, static_cast<double>(max_iter), p.acz.contraction});
    csv.row(row);
    per_t.push_back(entry);
  }
  csv.write(p.dir / "diagnostics.csv");
  summary["per_t"] = per_t;
  summary["pass"] = pass;
  write_json(p.dir / "diagnostics_summary.json", summary);
  return pass ? exit_pass : exit_tolerance;
}

int run_command(const std::string& name, const std::string& config_path, const std::string& out_dir,
                std::optional<std::uint64_t> seed, std::optional<int> threads) {
  try {
    RunContext ctx{load_config(config_path), out_dir};
    if (seed) ctx.cfg.seed = *seed;
    if (threads) {
      if (*threads < 1) throw ConfigError("--threads must be >= 1");
      ctx.cfg.threads = *threads;
    }
    if (ctx.out_dir.empty()) ctx.out_dir = ctx.cfg.output;
    if (name == "flow_check") return cmd_flow_check(ctx);
    if (name == "branches") return cmd_branches(ctx);
    if (name == "propagate") return cmd_propagate(ctx);
    if (name == "mehler_check") return cmd_mehler_check(ctx);
    if (name == "diagnostics") return cmd_diagnostics(ctx);
    throw ConfigError("unknown subcommand '" + name + "'");
  } catch (const ConfigError& e) {
    std::cerr << "config error: " << e.what() << "\n";
    return exit_config;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return exit_tolerance;
  }
}

}  // namespace gfprop::cli
