#pragma once

#include <string>

#include <json.hpp>

namespace gnas::cli {

inline constexpr int kExitOk = 0;
inline constexpr int kExitConfigError = 2;
inline constexpr int kExitRuntimeAbort = 3;

/// Loads and schema-checks a JSON run configuration.
nlohmann::json load_config(const std::string& file);

/// Applies a "key.path=value" override onto the config.
void apply_override(nlohmann::json& config, const std::string& assignment);

/// Commands; each validates its config section, runs, and writes artifacts
/// atomically into the output directory. Throws ValidationError for config
/// and input problems, RuntimeAbort for failures during the run.
void run_train(const nlohmann::json& config);
void run_search(const nlohmann::json& config);
void run_analyze(const nlohmann::json& config);
void run_oracle_gen(const nlohmann::json& config);

/// Executes a command by name, mapping exceptions to exit codes
/// (0 ok, 2 config error, 3 runtime abort) and diagnostics to stderr.
int dispatch(const std::string& command, const nlohmann::json& config);

/// Output directory from the config, falling back to $GNAS_OUT_DIR.
std::string resolve_out_dir(const nlohmann::json& config);

}  // namespace gnas::cli
