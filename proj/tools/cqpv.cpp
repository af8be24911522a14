#include <CLI11.hpp>

#include <iostream>
#include <optional>
#include <string>

#include "cqpv/experiment.hpp"

namespace ex = cqpv::experiment;

int main(int argc, char** argv) {
  CLI::App app{"Simulator for committing quantum position verification"};
  app.require_subcommand(1);

  std::string config;
  std::optional<std::uint64_t> seed;
  std::optional<std::size_t> trials;
  std::optional<unsigned> workers;
  std::string out_dir = "out";
  bool quiet = false;

  for (const char* name : {"simulate", "bounds", "estimate", "verify-lemmas", "sweep"}) {
    auto* sub = app.add_subcommand(name);
    sub->add_option("--config", config, "JSON configuration file")->required();
    sub->add_option("--seed", seed, "master seed (overrides the config)");
    sub->add_option("--trials", trials, "number of trials (overrides the config)");
    sub->add_option("--workers", workers, "worker threads (overrides the config)")->check(CLI::PositiveNumber);
    sub->add_option("--out-dir", out_dir, "directory for reports");
    sub->add_flag("--quiet,-q", quiet, "no progress output");
  }

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int rc = app.exit(e);
    return rc == 0 ? 0 : ex::kConfigError;
  }

  const std::string command = app.get_subcommands().front()->get_name();
  ex::RunOptions opt;
  opt.out_dir = out_dir;
  opt.log = quiet ? nullptr : &std::cout;
  try {
    return ex::execute(command, config, {seed, trials, workers}, opt, std::cerr);
  } catch (const cqpv::CausalityError& e) {
    std::cerr << "invariant violation: " << e.what() << '\n';
    return ex::kInvariantViolation;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << '\n';
    return 1;
  }
}
