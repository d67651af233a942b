#pragma once

#include <cstdint>
#include <filesystem>
#include <optional>
#include <vector>

#include <json.hpp>

#include "survbench/harness.hpp"
#include "survbench/learners.hpp"

namespace survbench {

struct ExperimentConfig {
  std::vector<std::filesystem::path> datasets;  // manifest paths, resolved against the config file
  std::vector<LearnerSpec> learners;
  std::uint64_t master_seed = 1;
  int workers = 1;
  std::filesystem::path output_dir = "results";
  std::optional<double> tau;
  std::optional<int> n_trees;
  std::optional<int> inner_k;
  std::optional<CvScheme> cv;

  BenchmarkSettings settings() const;
};

inline constexpr int kConfigSchemaVersion = 1;

// Strict parse: unknown keys, duplicate learner names, unknown method ids and
// missing manifests raise ConfigError.
ExperimentConfig parse_config(const nlohmann::json& j, const std::filesystem::path& base_dir,
                              bool check_paths = true);
ExperimentConfig load_config(const std::filesystem::path& path);

}  // namespace survbench
