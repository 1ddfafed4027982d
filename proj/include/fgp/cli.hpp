#pragma once

#include <json.hpp>

namespace fgp::cli {

// Subcommand entry points. Each takes a resolved-or-partial run config,
// applies defaults, executes, and writes its outputs (plus the resolved
// config and a manifest with input/output content hashes) into
// config["out_dir"]. Exposed so tests can drive the pipeline in-process.
void cmd_synth(nlohmann::json config);
void cmd_fit(nlohmann::json config);
void cmd_predict(nlohmann::json config);
void cmd_loo(nlohmann::json config);
void cmd_doe(nlohmann::json config);
void cmd_metrics(nlohmann::json config);

// Full argv entry: parses flags, merges --config, dispatches, and maps the
// error taxonomy to exit codes (0 ok, 1 data/usage, 2 numerical).
int run(int argc, char** argv);

}  // namespace fgp::cli
