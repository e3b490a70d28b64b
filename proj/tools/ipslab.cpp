#include <iostream>

#include "CLI11.hpp"
#include "ipslab/acceptance.hpp"
#include "ipslab/experiment.hpp"

int main(int argc, char** argv) {
  using namespace ipslab;
  CLI::App app{"Exact experiments on interacting particle systems over small tori"};
  app.require_subcommand(1);

  std::uint64_t seed = 0;
  int threads = 1;
  std::string out;
  auto* seed_opt = app.add_option("--seed", seed, "Seed overriding the config")->type_name("U64");
  app.add_option("--threads", threads, "Worker threads for suites or criteria")->check(CLI::Range(1, 256));
  auto* out_opt = app.add_option("--out", out, "Output directory overriding the config");

  std::string config;
  auto* run = app.add_subcommand("run", "Run the suites of an experiment config");
  run->add_option("config", config, "Experiment config (JSON)")->required();

  std::string scale = "small";
  auto* verify = app.add_subcommand("verify-all", "Run every acceptance criterion");
  verify->add_option("--scale", scale, "small or medium")->check(CLI::IsMember({"small", "medium"}));

  std::string run_dir;
  auto* plots = app.add_subcommand("emit-plots", "Turn run artifacts into tidy CSVs");
  plots->add_option("dir", run_dir, "Run output directory")->required();

  for (auto* sub : {run, verify, plots}) sub->fallthrough();

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    int code = app.exit(e);
    return code == 0 ? kExitPass : kExitConfig;
  }

  RunOptions opt;
  if (*seed_opt) opt.seed = seed;
  if (*out_opt) opt.out = out;
  opt.threads = threads;

  if (*run) return cmd_run(config, opt, std::cout, std::cerr);
  if (*verify) return cmd_verify_all(scale == "medium" ? Scale::medium : Scale::small, threads, std::cout);
  return cmd_emit_plots(run_dir, opt.out, std::cout, std::cerr);
}
