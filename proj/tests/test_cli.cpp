#include <doctest.h>

#include <filesystem>
#include <fstream>
#include <numbers>
#include <sstream>

#include "gfprop/cli.hpp"

using namespace gfprop;
using namespace gfprop::cli;
using nlohmann::json;
namespace fs = std::filesystem;

namespace {

json minimal() {
  return json::parse(R"({
    "schema": "gfprop.experiment/1",
    "potential": {"family": "quadratic", "L": [[0.5]]},
    "T": 1.0
  })");
}

json perturbed() {
  json j = minimal();
  j["potential"] = {{"family", "cosine"}, {"L", {{0.5}}}, {"amplitude", 0.1}, {"wavevector", {1.0}}};
  return j;
}

// Fresh scratch directory per test case.
fs::path scratch(const std::string& name) {
  const fs::path dir = fs::temp_directory_path() / ("gfprop_cli_test_" + name);
  fs::remove_all(dir);
  fs::create_directories(dir);
  return dir;
}

std::string write_config(const fs::path& dir, const json& j) {
  const fs::path path = dir / "config.json";
  std::ofstream(path) << j.dump(2);
  return path.string();
}

std::string slurp(const fs::path& path) {
  std::ifstream in(path);
  std::stringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

}  // namespace

TEST_SUITE("cli") {
  TEST_CASE("minimal configuration and defaults") {
    const ExperimentConfig c = parse_config(minimal());
    CHECK(c.family == "quadratic");
    CHECK(c.T == 1.0);
    REQUIRE(c.times.size() == 1);
    CHECK(c.times.front() == 1.0);
    CHECK_FALSE(c.M.has_value());
    CHECK(c.hbars == std::vector<double>{0.4, 0.2, 0.1, 0.05});
    CHECK(c.mass == 1.0);

    json j = perturbed();
    j["t"] = {0.0, 0.5};
    j["basis"] = {{"M", 2}, {"M_tail", 12}};
    j["hbar"] = {0.3};
    const ExperimentConfig d = parse_config(j);
    CHECK(d.family == "cosine");
    CHECK(d.amplitude == 0.1);
    CHECK(d.times == std::vector<double>{0.0, 0.5});
    CHECK(d.M == 2);
    CHECK(d.M_tail == 12);
    CHECK(d.hbars == std::vector<double>{0.3});
  }

  TEST_CASE("invalid configurations are rejected") {
    auto rejects = [](json j) { CHECK_THROWS_AS(parse_config(j), ConfigError); };
    json j = minimal();
    j.erase("schema");
    rejects(j);
    j = minimal();
    j["schema"] = "gfprop.experiment/0";
    rejects(j);
    j = minimal();
    j["unexpected"] = 1;
    rejects(j);
    j = minimal();
    j["potential"]["L"] = {{0.5, 0.0}};
    rejects(j);
    j = minimal();
    j["potential"]["L"] = {{0.0}};
    rejects(j);
    j = minimal();
    j["potential"]["family"] = "quartic";
    rejects(j);
    j = minimal();
    j["potential"]["amplitude"] = 0.1;
    rejects(j);
    j = perturbed();
    j["potential"]["amplitude"] = -0.1;
    rejects(j);
    j = minimal();
    j["t"] = 2.0;
    rejects(j);
    j = minimal();
    j["hbar"] = {0.1, -0.2};
    rejects(j);
    j = minimal();
    j["basis"] = {{"M", "many"}};
    rejects(j);
    j = minimal();
    j["mass"] = 0.0;
    rejects(j);
    j = minimal();
    j["tolerances"] = {{"error_ratio", {0.7, 0.35}}};
    rejects(j);
  }

  TEST_CASE("resolved configuration re-parses") {
    json j = perturbed();
    j["T"] = 3.0;
    j["t"] = {1.0, 2.0};
    const ExperimentConfig c = parse_config(j);
    const AczConfig acz = make_acz_config(c.hamiltonian(), c.T);
    const json resolved = resolved_json(c, acz);
    CHECK(resolved["basis"]["M"] == acz.basis.cutoff);
    const ExperimentConfig again = parse_config(resolved);
    CHECK(again.M == acz.basis.cutoff);
    CHECK(again.times == c.times);
    CHECK(resolved_json(again, acz) == resolved);
  }

  TEST_CASE("resonance warnings") {
    json j = minimal();
    j["T"] = 2.0;
    j["t"] = {1.0, 1.56};
    const std::vector<std::string> w = resonance_warnings(parse_config(j));
    CHECK(w.size() == 1);
  }

  TEST_CASE("csv numbers") {
    CHECK(csv_number(0.1) == "0.10000000000000001");
    CHECK(csv_number(-2.0) == "-2");
    CHECK(csv_number(std::numeric_limits<double>::quiet_NaN()) == "nan");
    CHECK(csv_number(std::numeric_limits<double>::infinity()) == "inf");
    CHECK(csv_number(-std::numeric_limits<double>::infinity()) == "-inf");
  }

  TEST_CASE("exit codes") {
    const fs::path dir = scratch("exit");
    CHECK(run_command("flow_check", (dir / "missing.json").string(), (dir / "out").string(), {}, {}) == exit_config);
    std::ofstream(dir / "broken.json") << "{ not json";
    CHECK(run_command("flow_check", (dir / "broken.json").string(), (dir / "out").string(), {}, {}) == exit_config);
    const std::string cfg = write_config(dir, minimal());
    CHECK(run_command("nonsense", cfg, (dir / "out").string(), {}, {}) == exit_config);
    CHECK(run_command("flow_check", cfg, (dir / "out").string(), {}, 0) == exit_config);

    // Mehler check needs the pure oscillator.
    const std::string cos_cfg = write_config(dir, perturbed());
    CHECK(run_command("mehler_check", cos_cfg, (dir / "out").string(), {}, {}) == exit_config);

    // Resonant flow check is refused.
    json res = minimal();
    res["T"] = 2.0;
    res["t"] = std::numbers::pi / 2.0;
    CHECK(run_command("flow_check", write_config(dir, res), (dir / "out").string(), {}, {}) == exit_config);

    // A tolerance nobody can meet gives exit 1.
    json strict = perturbed();
    strict["sampling"] = {{"samples", 2}};
    strict["tolerances"] = {{"flow", 1e-30}};
    CHECK(run_command("flow_check", write_config(dir, strict), (dir / "out").string(), {}, {}) == exit_tolerance);
  }

  TEST_CASE("flow_check is deterministic and embeds the config") {
    const fs::path dir = scratch("flow");
    json j = minimal();
    j["t"] = 0.7;
    j["sampling"] = {{"samples", 4}};
    const std::string cfg = write_config(dir, j);
    CHECK(run_command("flow_check", cfg, (dir / "a").string(), 5, 1) == exit_pass);
    CHECK(run_command("flow_check", cfg, (dir / "b").string(), 5, 2) == exit_pass);
    CHECK(slurp(dir / "a" / "flow_check.csv") == slurp(dir / "b" / "flow_check.csv"));
    const json summary = json::parse(slurp(dir / "a" / "flow_check_summary.json"));
    CHECK(summary["pass"] == true);
    CHECK(summary["max_residual"].get<double>() <= 1e-8);
    CHECK(summary["config"]["seed"] == 5);
    CHECK_NOTHROW(parse_config(summary["config"]));

    const std::string header = slurp(dir / "a" / "flow_check.csv").substr(0, 40);
    CHECK(header.rfind("t,y0,eta0,x0,p0,count,residual", 0) == 0);
  }

  TEST_CASE("branches on an empty grid writes a header-only CSV") {
    const fs::path dir = scratch("empty");
    json j = minimal();
    j["t"] = 0.5;
    j["sampling"] = {{"scan_x", {{"lo", -1}, {"hi", 1}, {"count", 0}}}};
    CHECK(run_command("branches", write_config(dir, j), (dir / "out").string(), {}, {}) == exit_pass);
    CHECK(slurp(dir / "out" / "branches.csv") == "t,x,eta,count,oracle_count,branch,S,det,signature,hj_residual\n");
  }

  TEST_CASE("branches for the oscillator") {
    const fs::path dir = scratch("branches");
    json j = minimal();
    j["t"] = 0.5;
    j["sampling"] = {{"scan_x", {{"lo", -2}, {"hi", 2}, {"count", 3}}},
                     {"scan_eta", {{"lo", -2}, {"hi", 2}, {"count", 3}}}};
    CHECK(run_command("branches", write_config(dir, j), (dir / "out").string(), {}, {}) == exit_pass);
    std::ifstream in(dir / "out" / "branches.csv");
    std::string line;
    std::getline(in, line);
    int rows = 0;
    while (std::getline(in, line)) {
      ++rows;
      std::stringstream ss(line);
      std::string cell;
      for (int col = 0; col < 4; ++col) std::getline(ss, cell, ',');
      CHECK(cell == "1");
    }
    CHECK(rows == 9);
  }

  TEST_CASE("diagnostics flags resonant times") {
    const fs::path dir = scratch("diagnostics");
    json j = minimal();
    j["T"] = 2.0;
    j["t"] = {1.0, std::numbers::pi / 2.0};
    j["sampling"] = {{"samples", 3}, {"tail_samples", 4}, {"bound_time_samples", 4}};
    const std::string cfg = write_config(dir, j);
    CHECK(run_command("diagnostics", cfg, (dir / "a").string(), {}, {}) == exit_pass);
    CHECK(run_command("diagnostics", cfg, (dir / "b").string(), {}, {}) == exit_pass);
    const std::string text = slurp(dir / "a" / "diagnostics_summary.json");
    CHECK(text == slurp(dir / "b" / "diagnostics_summary.json"));
    const json s = json::parse(text);
    CHECK(s["per_t"][0]["resonant"] == false);
    CHECK(s["per_t"][1]["resonant"] == true);
    CHECK(s["per_t"][1]["bounds"].is_null());
    CHECK(s["cutoff"]["contraction"].get<double>() < 1.0);
    CHECK(s["cutoff_auto"] == true);
  }
}
