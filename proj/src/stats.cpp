#include "survbench/stats.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <stdexcept>
#include <vector>

#include <boost/math/distributions/students_t.hpp>

namespace survbench {

double mean(std::span<const double> v) {
  if (v.empty()) throw std::invalid_argument("mean of an empty series");
  return std::accumulate(v.begin(), v.end(), 0.0) / static_cast<double>(v.size());
}

double sample_sd(std::span<const double> v) {
  if (v.size() < 2) return 0.0;
  const double m = mean(v);
  double ss = 0.0;
  for (double x : v) ss += (x - m) * (x - m);
  return std::sqrt(ss / static_cast<double>(v.size() - 1));
}

ConfidenceInterval t_interval(std::span<const double> v, double level) {
  const double m = mean(v);
  const double sd = sample_sd(v);
  if (v.size() < 2 || sd == 0.0) return {m, m};
  const auto n = static_cast<double>(v.size());
  boost::math::students_t dist(n - 1.0);
  const double q = boost::math::quantile(dist, 0.5 + 0.5 * level);
  const double half = q * sd / std::sqrt(n);
  return {m - half, m + half};
}

TTestResult paired_t_test(std::span<const double> a, std::span<const double> b) {
  if (a.size() != b.size()) throw std::invalid_argument("paired series differ in length");
  if (a.size() < 3) throw std::invalid_argument("paired t-test needs at least three pairs");
  std::vector<double> d(a.size());
  for (std::size_t i = 0; i < a.size(); ++i) d[i] = a[i] - b[i];
  const double m = mean(d);
  const double sd = sample_sd(d);
  double scale = 0.0;
  for (double v : d) scale = std::max(scale, std::abs(v));
  TTestResult r;
  // Constant differences such as 0.5 - 0.4 and 0.6 - 0.5 differ only by rounding.
  if (sd <= 1e-12 * scale) {
    r.t = 0.0;
    r.p = 1.0;
    r.degenerate = m != 0.0;
    return r;
  }
  const auto n = static_cast<double>(d.size());
  r.t = m / (sd / std::sqrt(n));
  boost::math::students_t dist(n - 1.0);
  r.p = 2.0 * boost::math::cdf(boost::math::complement(dist, std::abs(r.t)));
  return r;
}

TTestResult welch_t_test_greater(std::span<const double> a, std::span<const double> b) {
  if (a.size() < 2 || b.size() < 2) throw std::invalid_argument("Welch test needs two values per sample");
  const double va = std::pow(sample_sd(a), 2) / static_cast<double>(a.size());
  const double vb = std::pow(sample_sd(b), 2) / static_cast<double>(b.size());
  const double diff = mean(a) - mean(b);
  TTestResult r;
  if (va + vb == 0.0) {
    r.degenerate = diff != 0.0;
    r.t = 0.0;
    r.p = diff > 0.0 ? 0.0 : (diff < 0.0 ? 1.0 : 0.5);
    return r;
  }
  r.t = diff / std::sqrt(va + vb);
  const double df = (va + vb) * (va + vb) /
                    (va * va / static_cast<double>(a.size() - 1) + vb * vb / static_cast<double>(b.size() - 1));
  boost::math::students_t dist(df);
  r.p = boost::math::cdf(boost::math::complement(dist, r.t));
  return r;
}

}  // namespace survbench
