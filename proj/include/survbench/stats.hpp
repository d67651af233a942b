#pragma once

#include <span>

namespace survbench {

double mean(std::span<const double> v);
// Sample standard deviation (n - 1 denominator); 0 for fewer than two values.
double sample_sd(std::span<const double> v);

struct ConfidenceInterval {
  double lower = 0.0;
  double upper = 0.0;
};

// mean +- t_{(1+level)/2, n-1} sd / sqrt(n); degenerate [mean, mean] when n < 2.
ConfidenceInterval t_interval(std::span<const double> v, double level = 0.95);

struct TTestResult {
  double t = 0.0;
  double p = 1.0;
  bool degenerate = false;  // zero variance with a nonzero mean difference
};

// Two-sided paired t-test on a - b. Needs at least three pairs.
TTestResult paired_t_test(std::span<const double> a, std::span<const double> b);

// One-sided Welch test of mean(a) > mean(b).
TTestResult welch_t_test_greater(std::span<const double> a, std::span<const double> b);

}  // namespace survbench
