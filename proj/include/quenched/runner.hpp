#pragma once

// Subcommand dispatch for the quenched-limits tool.

#include <filesystem>
#include <string>
#include <string_view>
#include <vector>

#include "quenched/config.hpp"
#include "quenched/io.hpp"

namespace quenched::cli {

enum ExitStatus : int { kExitOk = 0, kExitConfig = 2, kExitNumeric = 3, kExitIo = 4 };

const std::vector<std::string>& subcommands();

struct RunReport {
  int status = kExitOk;
  std::string message;              // error text for non-zero status
  std::vector<WrittenFile> files;   // includes manifest.json when it could be written
  Json summary;                     // the subcommand's main JSON document
};

// Runs one subcommand and writes its outputs plus manifest.json into out_dir.
// Errors are reported through the status, never thrown.
RunReport run(std::string_view subcommand, const ExperimentConfig& config, const std::filesystem::path& out_dir,
              int threads = 0);

}  // namespace quenched::cli
