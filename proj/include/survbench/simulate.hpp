#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "survbench/dataset.hpp"

namespace survbench {

// Multi-block data with exponential Cox survival times and independent
// exponential censoring calibrated to a target censoring fraction.
struct SimulationSpec {
  std::string name = "synthetic";
  Index n = 150;
  Index clinical_features = 8;
  int binary_clinical = 3;                       // the first ones are Bernoulli(1/2), the rest N(0,1)
  std::vector<double> clinical_effects{0.25, 0.25, 0.2, 0.2, 0.15};  // on the first clinical features
  std::vector<Index> omics_sizes{300, 500, 1000};
  std::vector<std::vector<double>> omics_effects;  // per omics group, on its first features; may be empty
  double baseline_hazard = 0.1;
  double censoring_fraction = 0.3;
  std::uint64_t seed = 1;
};

SurvivalDataset simulate_dataset(const SimulationSpec& spec);

}  // namespace survbench
