#pragma once

#include <cstdint>
#include <optional>
#include <vector>

#include "survbench/cox.hpp"
#include "survbench/dataset.hpp"

namespace survbench {

struct BoostingConfig {
  std::optional<int> m_stop;       // nullopt = tune by inner CV over 1..m_grid_max
  int m_grid_max = 0;              // 0 = fitter default (1000 model-based, 100 likelihood-based)
  double nu = 0.1;                 // model-based boosting only
  std::optional<double> penalty;   // likelihood-based only; nullopt = 9 x events
  std::vector<Index> mandatory_features;
  int inner_k = 10;
  std::uint64_t seed = 1;
};

struct BoostingFit {
  LinearSurvivalModel model;
  int m_stop = 0;
  double penalty = 0.0;
  std::vector<double> cv_curve;     // entry m-1 scores m steps
  std::vector<double> train_loss;   // loss after each step of the final run, entry 0 = before any step
  std::vector<Index> selection;     // feature chosen at each step of the final run
};

BoostingFit fit_glmboost_cox(const SurvivalDataset& data, const BoostingConfig& cfg);
BoostingFit fit_coxboost(const SurvivalDataset& data, const BoostingConfig& cfg);

// Score and information of the partial likelihood for every column of x at
// eta: g_j = x_j' u and h_j = sum over event times of d [S2/S0 - (S1/S0)^2].
void coxboost_score_information(const RiskSetIndex& risk, const Matrix& x, const Vector& eta, Vector& score,
                                Vector& information);

}  // namespace survbench
