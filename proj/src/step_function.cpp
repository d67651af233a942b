#include "survbench/step_function.hpp"

#include <algorithm>

#include "survbench/error.hpp"

namespace survbench {

StepFunction::StepFunction(std::vector<double> jump_times, std::vector<double> values, double initial)
    : times_(std::move(jump_times)), values_(std::move(values)), initial_(initial) {
  if (times_.size() != values_.size()) throw std::invalid_argument("step function: size mismatch");
  for (std::size_t i = 1; i < times_.size(); ++i) {
    if (!(times_[i] > times_[i - 1])) throw std::invalid_argument("step function: jump times must increase");
  }
}

double StepFunction::operator()(double t) const {
  auto it = std::upper_bound(times_.begin(), times_.end(), t);
  if (it == times_.begin()) return initial_;
  return values_[static_cast<std::size_t>(it - times_.begin()) - 1];
}

double StepFunction::left_limit(double t) const {
  auto it = std::lower_bound(times_.begin(), times_.end(), t);
  if (it == times_.begin()) return initial_;
  return values_[static_cast<std::size_t>(it - times_.begin()) - 1];
}

std::vector<double> StepFunction::evaluate(std::span<const double> times) const {
  std::vector<double> out;
  out.reserve(times.size());
  for (double t : times) out.push_back((*this)(t));
  return out;
}

bool StepFunction::non_decreasing() const {
  double prev = initial_;
  for (double v : values_) {
    if (v < prev) return false;
    prev = v;
  }
  return true;
}

bool StepFunction::non_increasing() const {
  double prev = initial_;
  for (double v : values_) {
    if (v > prev) return false;
    prev = v;
  }
  return true;
}

}  // namespace survbench
