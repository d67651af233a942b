#pragma once

#include <span>
#include <vector>

namespace survbench {

// Right-continuous step function: value(t) is the value at the largest jump
// time <= t, and `initial` before the first jump (0 for hazards, 1 for
// survival curves).
class StepFunction {
 public:
  StepFunction() = default;
  StepFunction(std::vector<double> jump_times, std::vector<double> values, double initial = 0.0);

  double operator()(double t) const;
  // Value just before t: the left limit f(t-).
  double left_limit(double t) const;
  std::vector<double> evaluate(std::span<const double> times) const;

  const std::vector<double>& jump_times() const { return times_; }
  const std::vector<double>& values() const { return values_; }
  double initial() const { return initial_; }
  bool empty() const { return times_.empty(); }

  bool non_decreasing() const;
  bool non_increasing() const;

 private:
  std::vector<double> times_;
  std::vector<double> values_;
  double initial_ = 0.0;
};

}  // namespace survbench
