#pragma once

// Executes a RunConfig. Every command writes into the output directory:
//
//   results.tsv   main table (with seed and config hash as metadata)
//   summary.json  status, fitted values, violations or the error
//   plot_*.tsv    series along the axes of the corresponding figure
//
// Outputs are assembled in memory and written with temp + rename. On failure
// the command's tables are removed and summary.json describes the error.

#include "ionpulse/io/config.hpp"

#include <exception>
#include <filesystem>
#include <string>
#include <vector>

namespace ionpulse::io {

enum ExitCode : int {
  kExitOk = 0,
  kExitOther = 1,
  kExitSchema = 2,
  kExitPhysics = 3,
  kExitFit = 4,
  kExitScheduler = 5,
  kExitIo = 6,
};

struct RunOutcome {
  int exit_code = kExitOk;
  std::string message;  // empty on success
  std::vector<std::filesystem::path> files;
};

// Maps an exception thrown by any module to its exit code.
int exit_code_for(const std::exception& error);

RunOutcome run(const RunConfig& config);

// summary.json for failures that happen before a RunConfig exists.
void write_error_summary(const std::filesystem::path& output_dir, const std::string& command,
                         int exit_code, const std::string& error_type, const std::string& message);

}  // namespace ionpulse::io
