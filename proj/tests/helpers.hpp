#pragma once

#include <filesystem>
#include <fstream>
#include <random>
#include <string>

#include "survbench/dataset.hpp"

namespace testing {

inline survbench::Outcomes outcomes(std::initializer_list<std::pair<double, int>> pairs) {
  survbench::Outcomes out;
  for (const auto& [t, e] : pairs) out.push_back({t, e});
  return out;
}

// Fresh scratch directory under the system temp dir.
inline std::filesystem::path scratch(const std::string& name) {
  auto dir = std::filesystem::temp_directory_path() / ("survbench_test_" + name);
  std::filesystem::remove_all(dir);
  std::filesystem::create_directories(dir);
  return dir;
}

inline void write_file(const std::filesystem::path& path, const std::string& text) { std::ofstream(path) << text; }

// Two groups of independent normals; the first `clinical` columns form group
// "clin" (the clinical block), the rest group "omics".
inline survbench::SurvivalDataset two_group_data(std::uint64_t seed, survbench::Index n, survbench::Index clinical,
                                                 survbench::Index omics, double effect = 0.8,
                                                 double censor = 0.3) {
  std::mt19937_64 gen(seed);
  std::normal_distribution<double> normal;
  std::uniform_real_distribution<double> unif(0.0, 1.0);
  survbench::SurvivalDataset d;
  d.name = "toy" + std::to_string(seed);
  d.features.resize(n, clinical + omics);
  for (survbench::Index i = 0; i < n; ++i)
    for (survbench::Index j = 0; j < clinical + omics; ++j) d.features(i, j) = normal(gen);
  std::vector<survbench::Index> c, o;
  for (survbench::Index j = 0; j < clinical; ++j) c.push_back(j);
  for (survbench::Index j = clinical; j < clinical + omics; ++j) o.push_back(j);
  d.groups = survbench::FeatureGroupMap({"clin", "omics"}, {c, o}, std::string("clin"));
  for (survbench::Index i = 0; i < n; ++i) {
    const double rate = std::exp(effect * d.features(i, 0));
    const double t = -std::log(1.0 - unif(gen)) / rate;
    const bool cens = unif(gen) < censor;
    d.outcomes.push_back({cens ? t * unif(gen) + 1e-6 : t + 1e-6, cens ? 0 : 1});
    d.observation_ids.push_back("o" + std::to_string(i));
  }
  return d;
}

}  // namespace testing
