#pragma once

#include <cstdint>
#include <optional>
#include <span>
#include <vector>

#include "survbench/dataset.hpp"
#include "survbench/step_function.hpp"

namespace survbench {

struct ForestConfig {
  int n_trees = 500;
  std::optional<int> mtry;  // nullopt = tune by OOB error
  int min_node_deaths = 1;
  int min_node_size = 3;
  bool bootstrap = true;
  std::optional<std::vector<double>> block_weights;  // block forest; nullopt = tune
  std::uint64_t seed = 1;
  int weight_trials = 100;
  int pilot_trees = 50;
  int threads = 1;
};

struct TreeNode {
  int feature = -1;  // -1 for a leaf
  double threshold = 0.0;
  int left = -1;
  int right = -1;
  int leaf = -1;     // row in SurvivalTree::leaf_chf
};

struct SurvivalTree {
  std::vector<TreeNode> nodes;                 // nodes[0] is the root
  std::vector<std::vector<double>> leaf_chf;   // Nelson-Aalen of the in-bag members on the forest grid
  std::vector<std::size_t> out_of_bag;         // training rows never drawn for this tree

  int leaf_of(const Eigen::Ref<const Vector>& x) const;
};

struct ForestModel {
  std::vector<SurvivalTree> trees;
  std::vector<double> unique_event_times;
  std::vector<double> block_weights;
  std::vector<int> mtry;  // per block (one entry for a plain forest)

  StepFunction leaf_chf(std::size_t tree, int leaf) const;
  StepFunction predict_chf(const Eigen::Ref<const Vector>& x) const;
  StepFunction predict_survival(const Eigen::Ref<const Vector>& x) const;
  // Ensemble mortality: the ensemble CHF summed over the event-time grid.
  double risk_score(const Eigen::Ref<const Vector>& x) const;
};

// Standardized two-sample log-rank statistic for the split x <= split_point;
// 0 when its variance vanishes.
double logrank_split_statistic(std::span<const SurvivalOutcome> node, std::span<const double> feature,
                               double split_point);

// How candidate features are drawn at each node. A plain forest is one block
// that is always included with weight 1.
struct BlockSampling {
  std::vector<std::vector<Index>> blocks;
  std::vector<int> mtry;
  std::vector<double> weights;
};

// Grows a forest under an explicit sampling scheme; per-node streams are
// derived from (seed, tree, node).
ForestModel grow_forest(const SurvivalDataset& data, const BlockSampling& sampling, const ForestConfig& cfg);

// 1 - Uno C of the out-of-bag risk scores; rows never out of bag are skipped.
double oob_error(const ForestModel& forest, const SurvivalDataset& data, std::optional<double> tau = std::nullopt);

struct MtryTuning {
  std::vector<int> grid;
  std::vector<double> errors;
  int best = 1;
  ForestModel forest;  // grown with the winning mtry
};

std::vector<int> mtry_grid(Index p);
MtryTuning tune_mtry(const SurvivalDataset& data, const ForestConfig& cfg);
int tune_mtry_oob(const SurvivalDataset& data, const ForestConfig& cfg);

ForestModel fit_rsf(const SurvivalDataset& data, const ForestConfig& cfg);

struct BlockForestFit {
  ForestModel forest;
  std::vector<double> weights;
  std::vector<double> trial_errors;
};

BlockForestFit fit_block_forest(const SurvivalDataset& data, const ForestConfig& cfg);

}  // namespace survbench
