#include <iostream>
#include <string>
#include <vector>

#include <CLI11.hpp>

#include "gnas/run.hpp"
#include "gnas/util.hpp"

namespace {

struct CommonOptions {
  std::string config_file;
  std::vector<std::string> overrides;
  std::string out_dir;
  std::string seed;
  int threads = 0;
};

void add_common(CLI::App* cmd, CommonOptions& opts) {
  cmd->add_option("-c,--config", opts.config_file, "JSON run configuration")->required();
  cmd->add_option("--set", opts.overrides,
                  "override a config key, e.g. --set train.max_iters=500");
  cmd->add_option("--out-dir", opts.out_dir, "output directory (overrides config)");
  cmd->add_option("--seed", opts.seed, "root seed (overrides config)");
  cmd->add_option("--threads", opts.threads, "evaluation fan-out cap (overrides config)");
}

int execute(const std::string& command, const CommonOptions& opts) {
  try {
    nlohmann::json config = gnas::cli::load_config(opts.config_file);
    for (const std::string& assignment : opts.overrides)
      gnas::cli::apply_override(config, assignment);
    if (!opts.out_dir.empty()) config["out_dir"] = opts.out_dir;
    if (!opts.seed.empty()) config["seed"] = std::stoull(opts.seed);
    if (opts.threads > 0) config["threads"] = opts.threads;
    return gnas::cli::dispatch(command, config);
  } catch (const gnas::ValidationError& e) {
    std::cerr << "config error: " << e.what() << "\n";
    return gnas::cli::kExitConfigError;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return gnas::cli::kExitRuntimeAbort;
  }
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"greedy one-shot architecture search over a shared-weight toy supernet"};
  app.require_subcommand(1);

  CommonOptions train_opts, search_opts, analyze_opts, oracle_opts;
  add_common(app.add_subcommand("train", "train the supernet with greedy path filtering"),
             train_opts);
  add_common(app.add_subcommand("search", "evolutionary architecture search"), search_opts);
  add_common(app.add_subcommand("analyze",
                                "diagnostics: correlation, confidence-curves, pool-trace"),
             analyze_opts);
  add_common(app.add_subcommand("oracle-gen", "generate a tabular oracle space"), oracle_opts);

  CLI11_PARSE(app, argc, argv);

  if (app.got_subcommand("train")) return execute("train", train_opts);
  if (app.got_subcommand("search")) return execute("search", search_opts);
  if (app.got_subcommand("analyze")) return execute("analyze", analyze_opts);
  if (app.got_subcommand("oracle-gen")) return execute("oracle-gen", oracle_opts);
  return gnas::cli::kExitConfigError;
}
