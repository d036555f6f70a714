#include <CLI11.hpp>

#include <optional>
#include <string>

#include "gfprop/cli.hpp"

int main(int argc, char** argv) {
  CLI::App app{"Global generating-function propagator: experiments and oracles"};
  app.require_subcommand(1);
  std::string config, out;
  std::optional<std::uint64_t> seed;
  std::optional<int> threads;
  const std::pair<const char*, const char*> commands[] = {
      {"flow_check", "forward-flow endpoints against branch derivatives"},
      {"branches", "branch counts and per-branch data over an (x, eta) grid"},
      {"propagate", "wave propagation against the split-step reference over an hbar sweep"},
      {"mehler_check", "stationary actions against the oscillator phase"},
      {"diagnostics", "cutoff, contraction, resonant times and bound estimates"},
  };
  for (const auto& [name, help] : commands) {
    CLI::App* sub = app.add_subcommand(name, help);
    sub->add_option("--config", config, "experiment config (JSON)")->required()->check(CLI::ExistingFile);
    sub->add_option("--out", out, "output directory (default: the config's \"output\")");
    sub->add_option("--seed", seed, "override the config seed");
    sub->add_option("--threads", threads, "worker threads");
  }
  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? 0 : gfprop::cli::exit_config;
  }
  return gfprop::cli::run_command(app.get_subcommands().front()->get_name(), config, out, seed, threads);
}
