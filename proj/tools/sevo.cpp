#include <CLI11.hpp>

#include <cstdio>
#include <exception>
#include <string>
#include <utility>
#include <vector>

#include "sevo/runner.hpp"

namespace {

struct CommonArgs {
  std::string config_path;
  std::string out_dir;
  long long seed = -1;
  int threads = 0;
};

void attach_common(CLI::App* sub, CommonArgs& args) {
  sub->add_option("--config", args.config_path, "configuration file")->required();
  sub->add_option("--seed", args.seed, "override the config seed");
  sub->add_option("--out", args.out_dir, "override the output directory");
  sub->add_option("--threads", args.threads, "override the worker count");
}

int execute(const std::string& experiment, const CommonArgs& args) {
  sevo::RunConfig cfg = sevo::load_run_config(args.config_path);
  const std::string configured = sevo::detail::get_or(cfg.experiment, "type", experiment);
  if (configured != experiment)
    throw sevo::ConfigError("config declares experiment '" + configured +
                            "' but the subcommand is '" + experiment + "'");
  cfg.experiment["type"] = experiment;
  if (args.seed >= 0) cfg.run["seed"] = std::to_string(args.seed);
  if (!args.out_dir.empty()) cfg.run["out"] = args.out_dir;
  if (args.threads > 0) cfg.run["threads"] = std::to_string(args.threads);

  const sevo::RunManifest manifest = sevo::run_config(cfg);
  for (const auto& o : manifest.outputs)
    std::printf("wrote %s (fnv1a64 %s)\n", o.file.c_str(), o.digest.c_str());
  if (!manifest.checks_passed) {
    std::fprintf(stderr, "verification failed for experiment '%s'\n", experiment.c_str());
    return 2;
  }
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"spectral SPDE toolkit: simulation, skeletons, rate minimization, and "
               "large-deviation verification"};
  app.require_subcommand(1);

  const std::vector<std::pair<std::string, std::string>> experiments{
      {"simulate", "integrate one noisy path and write its trajectory"},
      {"skeleton", "solve the deterministic controlled equation"},
      {"rate", "minimize the control energy needed to reach the target"},
      {"verify-ldp", "check the small-noise scaling against the minimized energy"},
      {"check-hypotheses", "audit the model's declared structure constants"},
      {"inequality-suite", "run the pathwise and moment inequality checks"}};
  std::vector<CommonArgs> args(experiments.size());
  for (std::size_t i = 0; i < experiments.size(); ++i)
    attach_common(app.add_subcommand(experiments[i].first, experiments[i].second), args[i]);

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    return app.exit(e) == 0 ? 0 : 1;
  }

  try {
    for (std::size_t i = 0; i < experiments.size(); ++i)
      if (app.get_subcommand(experiments[i].first)->parsed())
        return execute(experiments[i].first, args[i]);
    std::fprintf(stderr, "no subcommand selected\n");
    return 1;
  } catch (const sevo::ConfigError& e) {
    std::fprintf(stderr, "config error: %s\n", e.what());
    return 1;
  } catch (const std::exception& e) {
    std::fprintf(stderr, "error: %s\n", e.what());
    return 1;
  }
}
