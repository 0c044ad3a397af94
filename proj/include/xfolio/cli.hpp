#pragma once

#include <optional>
#include <string>
#include <vector>

#include "xfolio/config.hpp"

namespace xfolio::cli {

// Exit codes shared by every command.
inline constexpr int kOk = 0;
inline constexpr int kFailure = 1;       // unexpected
inline constexpr int kInputError = 2;    // files, parsing, config
inline constexpr int kTrainError = 3;    // non-finite loss
inline constexpr int kCheckpointError = 4;
inline constexpr int kConsistencyError = 5;  // log/model mismatch

struct CommandOptions {
  std::vector<std::string> instances;  // ISO dates; overrides config
  std::optional<std::size_t> output;   // restrict to one output head
  std::string feature;                 // single-feature force plot
  bool force_plot = false;
};

void cmd_ingest(const RunConfig& cfg);
void cmd_train(const RunConfig& cfg);
void cmd_trade(const RunConfig& cfg);
void cmd_explain(const RunConfig& cfg, const CommandOptions& opts);
void cmd_report(const RunConfig& cfg);

// Full argv-style entry point (without the program name); maps errors to
// exit codes.
int run(const std::vector<std::string>& args);

}  // namespace xfolio::cli
