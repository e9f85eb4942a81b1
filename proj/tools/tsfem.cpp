#include "tsfem/harness.hpp"

#include <CLI11.hpp>

#include <iostream>

int main(int argc, char** argv) {
  CLI::App app{"Two-scale finite element solver for Isaacs equations"};
  app.require_subcommand(1);

  std::string config_path;
  std::optional<std::string> out_dir;
  std::optional<std::uint64_t> seed;
  app.add_option("--config", config_path, "INI configuration file");
  app.add_option("--out", out_dir, "Output directory (overrides output.dir)");
  app.add_option("--seed", seed, "Seed for randomized loads (overrides output.seed)");

  for (const char* name : {"solve", "study", "consistency", "abp", "mesh-info"}) app.add_subcommand(name);
  app.get_subcommand("solve")->description("Solve one problem and write the solution and iteration report");
  app.get_subcommand("study")->description("Convergence study over mesh.n");
  app.get_subcommand("consistency")->description("Consistency error over mesh.n");
  app.get_subcommand("abp")->description("Discrete ABP ratios for seeded random loads");
  app.get_subcommand("mesh-info")->description("Mesh and operator summary");
  app.fallthrough();

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? 0 : tsfem::kConfigError;
  }
  const std::string command = app.get_subcommands().front()->get_name();
  return tsfem::run_cli(command, config_path, out_dir, seed, std::cout, std::cerr);
}
