#include <algorithm>
#include <cmath>
#include <random>

#include "doctest.h"
#include "helpers.hpp"
#include "oracles.hpp"
#include "survbench/cox.hpp"
#include "survbench/metrics.hpp"

using namespace survbench;

namespace {

Outcomes uncensored(std::mt19937_64& gen, int n) {
  std::exponential_distribution<double> expo(1.0);
  Outcomes y;
  for (int i = 0; i < n; ++i) y.push_back({expo(gen) + 1e-3, 1});
  return y;
}

std::vector<double> noise(std::mt19937_64& gen, std::size_t n) {
  std::normal_distribution<double> normal;
  std::vector<double> s(n);
  for (auto& v : s) v = normal(gen);
  return s;
}

double max_time(const Outcomes& y) {
  double m = 0.0;
  for (const auto& o : y) m = std::max(m, o.time);
  return m;
}

std::vector<StepFunction> constant_curves(const std::vector<double>& values) {
  std::vector<StepFunction> out;
  for (double v : values) out.emplace_back(std::vector<double>{}, std::vector<double>{}, v);
  return out;
}

}  // namespace

TEST_CASE("Uno C equals Harrell C without censoring") {
  std::mt19937_64 gen(21);
  for (int rep = 0; rep < 50; ++rep) {
    const Outcomes y = uncensored(gen, 12);
    auto s = noise(gen, 12);
    if (rep % 3 == 0) s[4] = s[7];  // a tied pair
    const double c = uno_cindex(y, y, s, max_time(y) + 1.0).value();
    CHECK(c == oracle::harrell_c(y, s));
  }
}

TEST_CASE("Uno C special scores") {
  std::mt19937_64 gen(22);
  const Outcomes y = uncensored(gen, 15);
  const double tau = max_time(y) + 1.0;
  std::vector<double> ordered;
  for (const auto& o : y) ordered.push_back(-o.time);
  CHECK(uno_cindex(y, y, ordered, tau).value() == 1.0);
  const std::vector<double> flat(15, 0.3);
  CHECK(uno_cindex(y, y, flat, tau).value() == 0.5);
}

TEST_CASE("Uno C is rank based and flips under reversal") {
  std::mt19937_64 gen(23);
  for (int rep = 0; rep < 20; ++rep) {
    Matrix x;
    Outcomes y;
    oracle::random_survival(gen, 40, 1, 0.4, x, y);
    const Outcomes train(y.begin(), y.begin() + 25), test(y.begin() + 25, y.end());
    const auto s = noise(gen, test.size());
    const double tau = default_tau(train);
    const auto c = uno_cindex(train, test, s, tau);
    if (!c) continue;
    std::vector<double> warped, reversed;
    for (double v : s) {
      warped.push_back(std::exp(3.0 * v) + 7.0);
      reversed.push_back(-v);
    }
    CHECK(uno_cindex(train, test, warped, tau).value() == doctest::Approx(*c).epsilon(1e-14));
    CHECK(uno_cindex(train, test, reversed, tau).value() == doctest::Approx(1.0 - *c).epsilon(1e-12));
  }
}

TEST_CASE("Uno C without comparable pairs is undefined") {
  const auto train = testing::outcomes({{1, 1}, {2, 0}, {3, 1}});
  const auto test = testing::outcomes({{1, 0}, {2, 0}});
  const std::vector<double> s{0.1, 0.2};
  CHECK_FALSE(uno_cindex(train, test, s, 5.0).has_value());
}

TEST_CASE("IPCW weights") {
  SUBCASE("hand example") {
    const auto train = testing::outcomes({{1, 0}, {2, 1}, {3, 0}});
    const std::vector<double> times{1.0, 2.0, 3.0};
    const auto w = ipcw_weights(train, times);
    CHECK(w.survival[0] == doctest::Approx(2.0 / 3.0).epsilon(1e-15));
    CHECK(w.survival[1] == doctest::Approx(2.0 / 3.0).epsilon(1e-15));
    CHECK(w.survival[2] == 0.0);
    CHECK(w.left[0] == 1.0);
    CHECK(w.left[1] == doctest::Approx(2.0 / 3.0).epsilon(1e-15));
    CHECK(w.weight[1] == doctest::Approx(1.5).epsilon(1e-15));
  }
  SUBCASE("no censoring gives unit weights") {
    std::mt19937_64 gen(24);
    const Outcomes y = uncensored(gen, 20);
    std::vector<double> times;
    for (const auto& o : y) times.push_back(o.time);
    const auto w = ipcw_weights(y, times);
    for (double v : w.weight) CHECK(v == 1.0);
  }
  SUBCASE("weights are positive and finite where defined") {
    std::mt19937_64 gen(25);
    Matrix x;
    Outcomes y;
    oracle::random_survival(gen, 60, 1, 0.5, x, y);
    std::vector<double> times;
    for (const auto& o : y) times.push_back(o.time);
    const auto w = ipcw_weights(y, times);
    for (std::size_t i = 0; i < times.size(); ++i) {
      CHECK(std::isfinite(w.weight[i]));
      if (w.left[i] > 0.0) CHECK(w.weight[i] > 0.0);
    }
  }
}

TEST_CASE("Brier score special predictors") {
  std::mt19937_64 gen(26);
  const Outcomes y = uncensored(gen, 30);
  const double tau = default_tau(y);
  const auto half = constant_curves(std::vector<double>(30, 0.5));
  CHECK(integrated_brier(y, y, half, tau).value == doctest::Approx(0.25).epsilon(1e-12));
  std::vector<StepFunction> oracle_curves;
  for (const auto& o : y) oracle_curves.emplace_back(std::vector<double>{o.time}, std::vector<double>{0.0}, 1.0);
  CHECK(integrated_brier(y, y, oracle_curves, tau).value == doctest::Approx(0.0).epsilon(1e-15));
}

TEST_CASE("Brier score matches hand-weighted Graf sums") {
  // Censoring at 2 and 5: G = 1 on [0,2), 4/5 on [2,5), 2/5 from 5 on.
  const auto y = testing::outcomes({{1, 1}, {2, 0}, {3, 1}, {4, 1}, {5, 0}, {6, 1}});
  const std::vector<double> c{0.9, 0.8, 0.6, 0.5, 0.4, 0.2};
  const auto curves = constant_curves(c);
  const auto sq = [](double v) { return v * v; };

  // t = 3: deaths at 1 (w 1) and 3 (w 5/4); 4, 5, 6 still at risk (w 5/4).
  const double bs3 = (sq(c[0]) + 1.25 * sq(c[2]) + 1.25 * (sq(1 - c[3]) + sq(1 - c[4]) + sq(1 - c[5]))) / 6.0;
  CHECK(brier_score(y, y, curves, 3.0).value == doctest::Approx(bs3).epsilon(1e-14));

  // t = 5: deaths at 1, 3, 4; only 6 at risk with w = 5/2.
  const double bs5 = (sq(c[0]) + 1.25 * sq(c[2]) + 1.25 * sq(c[3]) + 2.5 * sq(1 - c[5])) / 6.0;
  CHECK(brier_score(y, y, curves, 5.0).value == doctest::Approx(bs5).epsilon(1e-14));
}

TEST_CASE("Kaplan-Meier ibrier equals the brute-force grid integral") {
  std::mt19937_64 gen(27);
  for (int rep = 0; rep < 10; ++rep) {
    const Outcomes train = uncensored(gen, 40);
    const Outcomes test = uncensored(gen, 25);
    const double tau = default_tau(train);
    const StepFunction km = kaplan_meier(train);
    const std::vector<StepFunction> curves(test.size(), km);
    const double value = integrated_brier(train, test, curves, tau).value;
    CHECK(std::isfinite(value));
    CHECK(value >= 0.0);

    // Independent KM: share of training times beyond t.
    const auto km_at = [&](double t) {
      double alive = 0.0;
      for (const auto& o : train) alive += o.time > t;
      return alive / static_cast<double>(train.size());
    };
    const auto bs = [&](double t) {
      double s = 0.0;
      for (const auto& o : test) {
        const double r = (o.time > t ? 1.0 : 0.0) - km_at(t);
        s += r * r;
      }
      return s / static_cast<double>(test.size());
    };
    std::vector<double> grid{0.0, tau};
    for (const auto& o : test)
      if (o.time <= tau) grid.push_back(o.time);
    std::sort(grid.begin(), grid.end());
    grid.erase(std::unique(grid.begin(), grid.end()), grid.end());
    double integral = 0.0;
    for (std::size_t k = 1; k < grid.size(); ++k)
      integral += 0.5 * (bs(grid[k - 1]) + bs(grid[k])) * (grid[k] - grid[k - 1]);
    CHECK(value == doctest::Approx(integral / tau).epsilon(1e-10));
  }
}

TEST_CASE("default tau is the type-7 95th percentile") {
  Outcomes y;
  for (int i = 1; i <= 21; ++i) y.push_back({static_cast<double>(i), 1});
  CHECK(default_tau(y) == doctest::Approx(20.0).epsilon(1e-15));
  y.pop_back();  // h = 0.95 * 19 = 18.05
  CHECK(default_tau(y) == doctest::Approx(19.05).epsilon(1e-12));
}
