#include <cmath>
#include <cstdio>
#include <fstream>
#include <numbers>
#include <set>
#include <sstream>

#include "gfprop/cli.hpp"

namespace gfprop::cli {

using nlohmann::json;

std::vector<double> Range::values() const {
  std::vector<double> out;
  if (count <= 0) return out;
  if (count == 1) return {0.5 * (lo + hi)};
  for (int i = 0; i < count; ++i) out.push_back(lo + (hi - lo) * i / (count - 1));
  return out;
}

HamiltonianSpec ExperimentConfig::hamiltonian() const {
  HamiltonianSpec h{family == "cosine" ? PotentialSpec::with_cosine(L, amplitude, wavevector) : PotentialSpec::quadratic(L),
                    mass};
  h.validate();
  return h;
}

SymbolConfig ExperimentConfig::symbol() const {
  SymbolConfig s;
  s.rho_width = rho_width;
  s.tau_nodes = tau_nodes;
  return s;
}

SearchOptions ExperimentConfig::search() const {
  SearchOptions s;
  s.n_starts = n_starts;
  s.seed = seed;
  return s;
}

std::string csv_number(double v) {
  if (std::isnan(v)) return "nan";
  if (std::isinf(v)) return v > 0 ? "inf" : "-inf";
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  return buf;
}

namespace {

// Reads an object and rejects keys outside `allowed`.
const json& object_at(const json& j, const std::string& where, std::initializer_list<const char*> allowed) {
  if (!j.is_object()) throw ConfigError(where + ": expected an object");
  std::set<std::string> ok(allowed.begin(), allowed.end());
  for (auto it = j.begin(); it != j.end(); ++it)
    if (!ok.count(it.key())) throw ConfigError(where + ": unknown key '" + it.key() + "'");
  return j;
}

double number(const json& j, const std::string& where) {
  if (!j.is_number()) throw ConfigError(where + ": expected a number");
  const double v = j.get<double>();
  if (!std::isfinite(v)) throw ConfigError(where + ": must be finite");
  return v;
}

double positive(const json& j, const std::string& where) {
  const double v = number(j, where);
  if (!(v > 0.0)) throw ConfigError(where + ": must be positive");
  return v;
}

int integer(const json& j, const std::string& where, int lo) {
  if (!j.is_number_integer()) throw ConfigError(where + ": expected an integer");
  const long long v = j.get<long long>();
  if (v < lo || v > 1'000'000'000) throw ConfigError(where + ": out of range");
  return static_cast<int>(v);
}

std::vector<double> number_list(const json& j, const std::string& where) {
  std::vector<double> out;
  if (j.is_array()) {
    for (std::size_t i = 0; i < j.size(); ++i) out.push_back(number(j[i], where + "[" + std::to_string(i) + "]"));
  } else {
    out.push_back(number(j, where));
  }
  return out;
}

Range read_range(const json& j, const std::string& where) {
  object_at(j, where, {"lo", "hi", "count"});
  Range r;
  if (j.contains("lo")) r.lo = number(j["lo"], where + ".lo");
  if (j.contains("hi")) r.hi = number(j["hi"], where + ".hi");
  if (j.contains("count")) r.count = integer(j["count"], where + ".count", 0);
  if (r.hi < r.lo) throw ConfigError(where + ": hi < lo");
  return r;
}

json range_json(const Range& r) { return {{"lo", r.lo}, {"hi", r.hi}, {"count", r.count}}; }

}  // namespace

ExperimentConfig parse_config(const json& j) {
  object_at(j, "config", {"schema", "potential", "mass", "T", "t", "basis", "grid", "kernel", "initial", "hbar",
                          "tolerances", "sampling", "seed", "threads", "output"});
  if (!j.contains("schema") || !j["schema"].is_string() || j["schema"].get<std::string>() != schema_id)
    throw ConfigError(std::string("config: 'schema' must be \"") + schema_id + "\"");
  ExperimentConfig c;

  if (!j.contains("potential")) throw ConfigError("config: 'potential' is required");
  const json& pot = object_at(j["potential"], "potential", {"family", "L", "amplitude", "wavevector"});
  if (pot.contains("family")) {
    if (!pot["family"].is_string()) throw ConfigError("potential.family: expected a string");
    c.family = pot["family"].get<std::string>();
  }
  if (c.family != "quadratic" && c.family != "cosine")
    throw ConfigError("potential.family: expected \"quadratic\" or \"cosine\"");
  if (!pot.contains("L") || !pot["L"].is_array() || pot["L"].empty())
    throw ConfigError("potential.L: expected a non-empty square matrix");
  const int n = static_cast<int>(pot["L"].size());
  c.L.resize(n, n);
  for (int r = 0; r < n; ++r) {
    const json& row = pot["L"][r];
    if (!row.is_array() || static_cast<int>(row.size()) != n) throw ConfigError("potential.L: matrix must be square");
    for (int s = 0; s < n; ++s) c.L(r, s) = number(row[s], "potential.L");
  }
  c.wavevector = Eigen::VectorXd::Ones(n);
  if (c.family == "cosine") {
    if (!pot.contains("amplitude")) throw ConfigError("potential.amplitude: required for the cosine family");
    c.amplitude = number(pot["amplitude"], "potential.amplitude");
    if (pot.contains("wavevector")) {
      const auto w = number_list(pot["wavevector"], "potential.wavevector");
      if (static_cast<int>(w.size()) != n) throw ConfigError("potential.wavevector: needs n entries");
      c.wavevector = Eigen::Map<const Eigen::VectorXd>(w.data(), n);
    }
  } else if (pot.contains("amplitude") || pot.contains("wavevector")) {
    throw ConfigError("potential: amplitude / wavevector only apply to the cosine family");
  }
  if (j.contains("mass")) c.mass = positive(j["mass"], "mass");

  if (!j.contains("T")) throw ConfigError("config: 'T' is required");
  c.T = positive(j["T"], "T");
  if (j.contains("t")) c.times = number_list(j["t"], "t");
  else c.times = {c.T};
  for (double t : c.times)
    if (t < 0.0 || t > c.T) throw ConfigError("t: every time must lie in [0, T]");

  if (j.contains("basis")) {
    const json& b = object_at(j["basis"], "basis", {"M", "M_tail"});
    if (b.contains("M")) {
      if (b["M"].is_string()) {
        if (b["M"].get<std::string>() != "auto") throw ConfigError("basis.M: expected an integer or \"auto\"");
      } else {
        c.M = integer(b["M"], "basis.M", 1);
      }
    }
    if (b.contains("M_tail")) c.M_tail = integer(b["M_tail"], "basis.M_tail", 0);
  }

  if (j.contains("grid")) {
    const json& g = object_at(j["grid"], "grid", {"X", "N", "dt"});
    if (g.contains("X")) c.grid.X = positive(g["X"], "grid.X");
    if (g.contains("N")) c.grid.N = integer(g["N"], "grid.N", 8);
    if (g.contains("dt")) c.split_dt = positive(g["dt"], "grid.dt");
  }
  if (j.contains("kernel")) {
    const json& k = object_at(j["kernel"], "kernel",
                              {"radius", "sigmas", "oversampling", "amplitude_form", "rho_width", "tau_nodes"});
    if (k.contains("radius")) c.kernel_radius = positive(k["radius"], "kernel.radius");
    if (k.contains("sigmas")) c.kernel_sigmas = positive(k["sigmas"], "kernel.sigmas");
    if (k.contains("oversampling")) c.kernel_oversampling = number(k["oversampling"], "kernel.oversampling");
    if (c.kernel_oversampling < 1.0) throw ConfigError("kernel.oversampling: must be >= 1");
    if (k.contains("amplitude_form")) {
      if (!k["amplitude_form"].is_string()) throw ConfigError("kernel.amplitude_form: expected a string");
      c.amplitude_form = k["amplitude_form"].get<std::string>();
    }
    if (c.amplitude_form != "transport" && c.amplitude_form != "van_vleck")
      throw ConfigError("kernel.amplitude_form: expected \"transport\" or \"van_vleck\"");
    if (k.contains("rho_width")) c.rho_width = positive(k["rho_width"], "kernel.rho_width");
    if (k.contains("tau_nodes")) c.tau_nodes = integer(k["tau_nodes"], "kernel.tau_nodes", 1);
  }
  if (j.contains("initial")) {
    const json& g = object_at(j["initial"], "initial", {"type", "center", "momentum", "width"});
    if (g.contains("type") && (!g["type"].is_string() || g["type"].get<std::string>() != "gaussian"))
      throw ConfigError("initial.type: only \"gaussian\" is supported");
    if (g.contains("center")) c.initial.center = number(g["center"], "initial.center");
    if (g.contains("momentum")) c.initial.momentum = number(g["momentum"], "initial.momentum");
    if (g.contains("width")) c.initial.width = number(g["width"], "initial.width");
    if (c.initial.width < 0.0) throw ConfigError("initial.width: must be >= 0 (0 means sqrt(hbar))");
  }
  if (j.contains("hbar")) c.hbars = number_list(j["hbar"], "hbar");
  for (double h : c.hbars)
    if (!(h > 0.0)) throw ConfigError("hbar: every value must be positive");

  if (j.contains("tolerances")) {
    const json& t =
        object_at(j["tolerances"], "tolerances", {"flow", "mehler", "hj", "error_ratio", "absolute_error"});
    if (t.contains("flow")) c.flow_tol = positive(t["flow"], "tolerances.flow");
    if (t.contains("mehler")) c.mehler_tol = positive(t["mehler"], "tolerances.mehler");
    if (t.contains("hj")) c.hj_tol = positive(t["hj"], "tolerances.hj");
    if (t.contains("absolute_error")) c.absolute_error_tol = positive(t["absolute_error"], "tolerances.absolute_error");
    if (t.contains("error_ratio")) {
      const auto r = number_list(t["error_ratio"], "tolerances.error_ratio");
      if (r.size() != 2 || !(r[0] < r[1])) throw ConfigError("tolerances.error_ratio: expected [lo, hi] with lo < hi");
      c.error_ratio_lo = r[0];
      c.error_ratio_hi = r[1];
    }
  }
  if (j.contains("sampling")) {
    const json& s = object_at(j["sampling"], "sampling",
                              {"samples", "box", "scan_x", "scan_eta", "oracle", "n_starts", "tail_samples",
                               "bound_time_samples"});
    if (s.contains("samples")) c.samples = integer(s["samples"], "sampling.samples", 0);
    if (s.contains("box")) c.box = positive(s["box"], "sampling.box");
    if (s.contains("scan_x")) c.scan_x = read_range(s["scan_x"], "sampling.scan_x");
    if (s.contains("scan_eta")) c.scan_eta = read_range(s["scan_eta"], "sampling.scan_eta");
    if (s.contains("oracle")) {
      if (!s["oracle"].is_boolean()) throw ConfigError("sampling.oracle: expected a boolean");
      c.oracle = s["oracle"].get<bool>();
    }
    if (s.contains("n_starts")) c.n_starts = integer(s["n_starts"], "sampling.n_starts", 1);
    if (s.contains("tail_samples")) c.tail_samples = integer(s["tail_samples"], "sampling.tail_samples", 0);
    if (s.contains("bound_time_samples"))
      c.bound_time_samples = integer(s["bound_time_samples"], "sampling.bound_time_samples", 1);
  }
  if (j.contains("seed")) {
    if (!j["seed"].is_number_unsigned()) throw ConfigError("seed: expected a non-negative integer");
    c.seed = j["seed"].get<std::uint64_t>();
  }
  if (j.contains("threads")) c.threads = integer(j["threads"], "threads", 1);
  if (j.contains("output")) {
    if (!j["output"].is_string()) throw ConfigError("output: expected a string");
    c.output = j["output"].get<std::string>();
  }
  try {
    c.hamiltonian();
  } catch (const std::exception& e) {
    throw ConfigError(std::string("potential: ") + e.what());
  }
  return c;
}

ExperimentConfig load_config(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot open config file '" + path + "'");
  json j;
  try {
    j = json::parse(in);
  } catch (const json::parse_error& e) {
    throw ConfigError(std::string("config is not valid JSON: ") + e.what());
  }
  return parse_config(j);
}

json resolved_json(const ExperimentConfig& c, const AczConfig& acz) {
  json L = json::array();
  for (int r = 0; r < c.L.rows(); ++r) {
    json row = json::array();
    for (int s = 0; s < c.L.cols(); ++s) row.push_back(c.L(r, s));
    L.push_back(row);
  }
  json pot = {{"family", c.family}, {"L", L}};
  if (c.family == "cosine") {
    pot["amplitude"] = c.amplitude;
    pot["wavevector"] = std::vector<double>(c.wavevector.data(), c.wavevector.data() + c.wavevector.size());
  }
  return {
      {"schema", schema_id},
      {"potential", pot},
      {"mass", c.mass},
      {"T", c.T},
      {"t", c.times},
      {"basis",
       {{"M", acz.basis.cutoff}, {"M_tail", acz.basis.tail_cutoff}}},
      {"grid", {{"X", c.grid.X}, {"N", c.grid.N}, {"dt", c.split_dt}}},
      {"kernel",
       {{"radius", c.kernel_radius},
        {"sigmas", c.kernel_sigmas},
        {"oversampling", c.kernel_oversampling},
        {"amplitude_form", c.amplitude_form},
        {"rho_width", c.rho_width},
        {"tau_nodes", c.tau_nodes}}},
      {"initial",
       {{"type", "gaussian"}, {"center", c.initial.center}, {"momentum", c.initial.momentum}, {"width", c.initial.width}}},
      {"hbar", c.hbars},
      {"tolerances",
       {{"flow", c.flow_tol},
        {"mehler", c.mehler_tol},
        {"hj", c.hj_tol},
        {"error_ratio", {c.error_ratio_lo, c.error_ratio_hi}},
        {"absolute_error", c.absolute_error_tol}}},
      {"sampling",
       {{"samples", c.samples},
        {"box", c.box},
        {"scan_x", range_json(c.scan_x)},
        {"scan_eta", range_json(c.scan_eta)},
        {"oracle", c.oracle},
        {"n_starts", c.n_starts},
        {"tail_samples", c.tail_samples},
        {"bound_time_samples", c.bound_time_samples}}},
      {"seed", c.seed},
      {"output", c.output},
  };
}

std::vector<std::string> resonance_warnings(const ExperimentConfig& cfg, double window) {
  std::vector<std::string> out;
  const ResonantTimes rt = resonant_times(cfg.hamiltonian(), cfg.T);
  for (double t : cfg.times)
    for (double r : rt.times)
      if (std::abs(t - r) < window) {
        std::ostringstream s;
        s << "t = " << t << " lies within " << window << " of the resonant time " << r;
        out.push_back(s.str());
      }
  return out;
}

UniformGrid kernel_grid(const ExperimentConfig& cfg, double hbar) {
  const double X = cfg.kernel_radius + cfg.kernel_sigmas * std::sqrt(hbar);
  // Same grid for x and eta: spacing 2X / N <= pi hbar / (X oversampling).
  int N = static_cast<int>(std::ceil(2.0 * X * X * cfg.kernel_oversampling / (std::numbers::pi * hbar)));
  N += N % 2;
  return UniformGrid{X, std::max(N, 8)};
}

}  // namespace gfprop::cli
