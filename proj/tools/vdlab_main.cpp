#include <iostream>
#include <string>

#include <CLI11.hpp>

#include "experiment/config.hpp"
#include "experiment/pipeline.hpp"
#include "vdlab/error.hpp"

int main(int argc, char** argv) {
  namespace ex = vdlab::experiment;
  CLI::App app{"Vanishing-discount lab for degenerate viscous contact Hamilton-Jacobi equations"};
  app.require_subcommand(1);
  std::string config;
  std::string out;
  int threads = 0;
  std::uint64_t seed = 0;
  bool have_seed = false;
  for (const char* name : {"audit", "ergodic", "solve", "sweep", "adjoint", "mather", "select", "run"}) {
    auto* sub = app.add_subcommand(name, std::string("run the ") + name + " stage");
    sub->add_option("--config", config, "experiment config (YAML)")->required();
    sub->add_option("--out", out, "output directory, overrides the config");
    sub->add_option("--threads", threads, "worker threads")->check(CLI::PositiveNumber);
    sub->add_option_function<std::uint64_t>("--seed", [&](std::uint64_t v) {
      seed = v;
      have_seed = true;
    }, "sampling seed");
  }
  CLI11_PARSE(app, argc, argv);

  ex::ExperimentConfig cfg;
  try {
    cfg = ex::load_config(config);
  } catch (const vdlab::ConfigError& e) {
    std::cerr << "config error";
    if (!e.key().empty()) std::cerr << " [" << e.key() << "]";
    if (e.line() > 0) std::cerr << " line " << e.line();
    std::cerr << ": " << e.what() << "\n";
    return ex::kExitConfig;
  }
  if (!out.empty()) cfg.output = out;
  if (threads > 0) cfg.threads = threads;
  if (have_seed) cfg.seed = seed;
  const std::string stage = app.get_subcommands().front()->get_name();
  return ex::run_stage(cfg, ex::parse_stage(stage), std::cout, std::cerr);
}
