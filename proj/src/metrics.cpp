#include "survbench/metrics.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>

#include "survbench/cox.hpp"

namespace survbench {

StepFunction censoring_survival(std::span<const SurvivalOutcome> train) {
  Outcomes flipped(train.begin(), train.end());
  for (auto& o : flipped) o.event = 1 - o.event;
  return kaplan_meier(flipped);
}

IpcwTable ipcw_weights(std::span<const SurvivalOutcome> train, std::span<const double> times) {
  const StepFunction g = censoring_survival(train);
  IpcwTable table;
  for (double t : times) {
    const double left = g.left_limit(t);
    table.times.push_back(t);
    table.survival.push_back(g(t));
    table.left.push_back(left);
    table.weight.push_back(left > 0.0 ? 1.0 / left : 0.0);
  }
  return table;
}

double default_tau(std::span<const SurvivalOutcome> train) {
  if (train.empty()) throw std::invalid_argument("empty training outcomes");
  std::vector<double> t;
  for (const auto& o : train) t.push_back(o.time);
  std::sort(t.begin(), t.end());
  const double h = 0.95 * static_cast<double>(t.size() - 1);
  const auto lo = static_cast<std::size_t>(std::floor(h));
  const std::size_t hi = std::min(lo + 1, t.size() - 1);
  return t[lo] + (h - static_cast<double>(lo)) * (t[hi] - t[lo]);
}

std::optional<double> uno_cindex(std::span<const SurvivalOutcome> train, std::span<const SurvivalOutcome> test,
                                 std::span<const double> risk_scores, double tau) {
  if (risk_scores.size() != test.size()) throw std::invalid_argument("one risk score per test observation expected");
  for (double s : risk_scores)
    if (!std::isfinite(s)) throw std::invalid_argument("non-finite risk score");
  const StepFunction g = censoring_survival(train);
  double num = 0.0, den = 0.0;
  for (std::size_t i = 0; i < test.size(); ++i) {
    if (test[i].event != 1 || !(test[i].time < tau)) continue;
    const double gi = g.left_limit(test[i].time);
    if (!(gi > 0.0)) continue;
    const double w = 1.0 / (gi * gi);
    for (std::size_t j = 0; j < test.size(); ++j) {
      if (!(test[i].time < test[j].time)) continue;
      den += w;
      if (risk_scores[i] > risk_scores[j])
        num += w;
      else if (risk_scores[i] == risk_scores[j])
        num += 0.5 * w;
    }
  }
  if (!(den > 0.0)) return std::nullopt;
  return num / den;
}

namespace {

BrierResult brier_at(const StepFunction& g, std::span<const SurvivalOutcome> test, std::span<const StepFunction> curves,
                     double t) {
  const double g_t = g(t);
  BrierResult r;
  double sum = 0.0;
  for (std::size_t i = 0; i < test.size(); ++i) {
    const double s = curves[i](t);
    if (test[i].time <= t) {
      if (test[i].event != 1) continue;
      const double gi = g.left_limit(test[i].time);
      if (!(gi > 0.0)) {
        ++r.dropped_terms;
        continue;
      }
      sum += s * s / gi;
    } else {
      if (!(g_t > 0.0)) {
        ++r.dropped_terms;
        continue;
      }
      sum += (1.0 - s) * (1.0 - s) / g_t;
    }
  }
  r.value = test.empty() ? 0.0 : sum / static_cast<double>(test.size());
  return r;
}

}  // namespace

BrierResult brier_score(std::span<const SurvivalOutcome> train, std::span<const SurvivalOutcome> test,
                        std::span<const StepFunction> curves, double t) {
  if (curves.size() != test.size()) throw std::invalid_argument("one survival curve per test observation expected");
  return brier_at(censoring_survival(train), test, curves, t);
}

BrierResult integrated_brier(std::span<const SurvivalOutcome> train, std::span<const SurvivalOutcome> test,
                             std::span<const StepFunction> curves, double tau) {
  if (!(tau > 0.0)) throw std::invalid_argument("tau must be positive");
  if (curves.size() != test.size()) throw std::invalid_argument("one survival curve per test observation expected");
  const StepFunction g = censoring_survival(train);
  std::vector<double> grid{0.0};
  for (const auto& o : test)
    if (o.event == 1 && o.time <= tau && o.time > 0.0) grid.push_back(o.time);
  grid.push_back(tau);
  std::sort(grid.begin(), grid.end());
  grid.erase(std::unique(grid.begin(), grid.end()), grid.end());

  BrierResult out;
  double previous_t = 0.0, previous_bs = 0.0, area = 0.0;
  for (std::size_t k = 0; k < grid.size(); ++k) {
    const BrierResult bs = brier_at(g, test, curves, grid[k]);
    out.dropped_terms += bs.dropped_terms;
    if (k > 0) area += 0.5 * (bs.value + previous_bs) * (grid[k] - previous_t);
    previous_t = grid[k];
    previous_bs = bs.value;
  }
  out.value = area / tau;
  return out;
}

}  // namespace survbench
