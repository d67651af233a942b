#pragma once

#include <cstdint>
#include <filesystem>
#include <optional>
#include <ostream>
#include <string>

#include "survbench/harness.hpp"
#include "survbench/simulate.hpp"

namespace survbench {

enum ExitCode : int { kExitOk = 0, kExitUsage = 1, kExitData = 2, kExitRunFailed = 3 };

int cmd_validate(const std::filesystem::path& manifest, std::ostream& out, std::ostream& err);

struct RunOptions {
  std::optional<int> workers;
  std::optional<std::uint64_t> seed;
  bool dry_run = false;
  std::optional<std::filesystem::path> output_dir;
};

int cmd_run(const std::filesystem::path& config, const RunOptions& options, std::ostream& out, std::ostream& err);

// `results` is a summary.json or the output directory holding one.
int cmd_report(const std::filesystem::path& results, const std::string& format, std::ostream& out, std::ostream& err);

int cmd_simulate(const std::filesystem::path& directory, const SimulationSpec& spec, std::ostream& out,
                 std::ostream& err);

// The three result tables as aligned text ("text") or CSV sections ("csv").
std::string render_report(const AggregateTables& tables, const std::string& format);

int run_cli(int argc, const char* const* argv, std::ostream& out, std::ostream& err);

}  // namespace survbench
