#pragma once

#include <optional>
#include <span>
#include <vector>

#include "survbench/dataset.hpp"
#include "survbench/step_function.hpp"

namespace survbench {

// Kaplan-Meier of the censoring distribution (event indicator flipped).
StepFunction censoring_survival(std::span<const SurvivalOutcome> train);

struct IpcwTable {
  std::vector<double> times;
  std::vector<double> survival;  // G(t)
  std::vector<double> left;      // G(t-)
  std::vector<double> weight;    // 1 / G(t-), 0 where G(t-) = 0
};

IpcwTable ipcw_weights(std::span<const SurvivalOutcome> train, std::span<const double> times);

// 95th percentile (type-7 quantile) of the observed times.
double default_tau(std::span<const SurvivalOutcome> train);

// Uno's IPCW concordance truncated at tau; higher score = higher risk.
// std::nullopt when there is no comparable pair.
std::optional<double> uno_cindex(std::span<const SurvivalOutcome> train, std::span<const SurvivalOutcome> test,
                                 std::span<const double> risk_scores, double tau);

struct BrierResult {
  double value = 0.0;
  int dropped_terms = 0;  // terms skipped because the censoring survival hit 0
};

// Graf IPCW Brier score integrated by the trapezoid rule over
// {0, distinct test event times <= tau, tau} and divided by tau.
BrierResult integrated_brier(std::span<const SurvivalOutcome> train, std::span<const SurvivalOutcome> test,
                             std::span<const StepFunction> survival_curves, double tau);

// Brier score at a single time point.
BrierResult brier_score(std::span<const SurvivalOutcome> train, std::span<const SurvivalOutcome> test,
                        std::span<const StepFunction> survival_curves, double t);

}  // namespace survbench
