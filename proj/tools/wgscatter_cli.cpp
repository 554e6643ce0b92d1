// Command-line front-end: parse an experiment config, run the engine, emit
// machine-readable tables and a summary document.
#include <CLI11.hpp>
#include <iostream>

#include "wgscatter/experiments.hpp"

namespace {

struct CliArgs {
  std::string config_path;
  std::string out_dir;
  std::vector<std::string> overrides;
  int threads = -1;
  long long seed = -1;
};

void add_common(CLI::App* sub, CliArgs& args) {
  sub->add_option("--config", args.config_path, "experiment config file (JSON)")->required();
  sub->add_option("--set", args.overrides, "override config entries, key.path=value");
  sub->add_option("--out", args.out_dir, "output directory (overrides outputs.dir)");
  sub->add_option("--threads", args.threads, "worker threads (0 = all cores)");
  sub->add_option("--seed", args.seed, "random seed (overrides config)");
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"few-photon scattering into chiral waveguides: temporal-mode simulator"};
  app.require_subcommand(1);
  CliArgs args;

  const char* names[] = {"tls", "pair", "trajectories", "convergence"};
  const char* blurbs[] = {"driven two-level system photocounts and field amplitudes",
                          "photon-pair source observables and entanglement measures",
                          "jump-unravelling Monte Carlo photocount estimates",
                          "time-step convergence study of the driven propagator"};
  for (int i = 0; i < 4; ++i) add_common(app.add_subcommand(names[i], blurbs[i]), args);

  CLI11_PARSE(app, argc, argv);
  const std::string experiment = app.get_subcommands().front()->get_name();

  try {
    wgscatter::Json config = wgscatter::load_config_file(args.config_path);
    for (const auto& assignment : args.overrides)
      wgscatter::apply_override(config, assignment);
    if (config.contains("experiment") &&
        config.at("experiment").get<std::string>() != experiment)
      throw wgscatter::ConfigError("$.experiment: config is for '" +
                                   config.at("experiment").get<std::string>() +
                                   "' but the '" + experiment + "' subcommand was invoked");
    config["experiment"] = experiment;
    if (!args.out_dir.empty()) config["outputs"]["dir"] = args.out_dir;
    if (args.threads >= 0) config["threads"] = args.threads;
    if (args.seed >= 0) config["seed"] = static_cast<std::uint64_t>(args.seed);
    return wgscatter::run_experiment(config);
  } catch (const wgscatter::ConfigError& e) {
    std::cerr << "config error: " << e.what() << "\n";
    return 2;
  } catch (const wgscatter::IoError& e) {
    std::cerr << "io error: " << e.what() << "\n";
    return 1;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  }
}
