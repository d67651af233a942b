#include <cmath>
#include <random>

#include "doctest.h"
#include "helpers.hpp"
#include "oracles.hpp"
#include "survbench/cox.hpp"
#include "survbench/error.hpp"

using namespace survbench;

TEST_CASE("partial likelihood examples") {
  const auto y = testing::outcomes({{1, 1}, {2, 1}, {3, 1}});
  Matrix x = Matrix::Zero(3, 1);
  Vector beta = Vector::Zero(1);
  CHECK(neg_partial_loglik(x, y, beta) == doctest::Approx(std::log(6.0)).epsilon(1e-12));

  const auto y2 = testing::outcomes({{1, 1}, {2, 1}});
  Matrix x2(2, 1);
  x2 << 1, 0;
  Vector b1 = Vector::Constant(1, 1.0);
  CHECK(neg_partial_loglik(x2, y2, b1) == doctest::Approx(std::log(1 + std::exp(1.0)) - 1).epsilon(1e-12));
  CHECK(std::abs(neg_partial_loglik(x2, y2, b1) - 0.313262) < 1e-6);
}

TEST_CASE("partial likelihood matches the quadratic oracle and ignores constant offsets") {
  std::mt19937_64 gen(11);
  std::normal_distribution<double> normal;
  for (int trial = 0; trial < 20; ++trial) {
    Matrix x;
    Outcomes y;
    oracle::random_survival(gen, 15, 4, 0.3, x, y);
    // Force some ties.
    y[3].time = y[7].time;
    Vector beta(4);
    for (Index j = 0; j < 4; ++j) beta(j) = normal(gen);
    const double f = neg_partial_loglik(x, y, beta);
    CHECK(f == doctest::Approx(oracle::cox_loss(x, y, beta)).epsilon(1e-10));
    CHECK(neg_partial_loglik(x, y, beta, Vector::Constant(15, 3.7)) == doctest::Approx(f).epsilon(1e-10));
    const Vector g = npl_gradient(x, y, beta);
    CHECK((g - oracle::cox_gradient(x, y, beta)).cwiseAbs().maxCoeff() < 1e-9);
    CHECK((npl_gradient(x, y, beta, Vector::Constant(15, -2.0)) - g).cwiseAbs().maxCoeff() < 1e-10);
  }
}

TEST_CASE("gradient matches central differences") {
  std::mt19937_64 gen(5);
  std::normal_distribution<double> normal;
  double worst = 0.0;
  for (int trial = 0; trial < 100; ++trial) {
    Matrix x;
    Outcomes y;
    oracle::random_survival(gen, 20, 5, 0.3, x, y);
    Vector beta(5);
    for (Index j = 0; j < 5; ++j) beta(j) = 0.5 * normal(gen);
    const Vector g = npl_gradient(x, y, beta);
    const Vector fd = oracle::central_difference([&](const Vector& b) { return neg_partial_loglik(x, y, b); }, beta,
                                                 1e-5);
    worst = std::max(worst, (g - fd).cwiseAbs().maxCoeff() / std::max(1.0, fd.cwiseAbs().maxCoeff()));
  }
  CHECK(worst < 1e-6);
}

TEST_CASE("gradient special cases") {
  const auto y = testing::outcomes({{1, 1}, {2, 0}, {3, 1}, {4, 1}});
  SUBCASE("constant features") {
    Matrix x = Matrix::Constant(4, 2, 2.5);
    CHECK(npl_gradient(x, y, Vector::Constant(2, 0.7)).cwiseAbs().maxCoeff() < 1e-12);
  }
  SUBCASE("hand expansion at zero") {
    Matrix x(4, 1);
    x << 1, 4, -2, 3;
    // Risk sets: {1..4} mean 1.5, {3,4} mean 0.5, {4} mean 3.
    const double expected = -((1 - 1.5) + (-2 - 0.5) + (3 - 3));
    CHECK(npl_gradient(x, y, Vector::Zero(1))(0) == doctest::Approx(expected).epsilon(1e-12));
  }
}

TEST_CASE("boosting residuals") {
  SUBCASE("single event") {
    const auto y = testing::outcomes({{2, 1}});
    CHECK(std::abs(boosting_residuals(y, Vector::Constant(1, 4.2))(0)) < 1e-15);
  }
  SUBCASE("sum to zero with all events at eta = 0") {
    const auto y = testing::outcomes({{1, 1}, {2, 1}, {2, 1}, {5, 1}, {7, 1}, {9, 1}});
    CHECK(std::abs(boosting_residuals(y, Vector::Zero(6)).sum()) < 1e-12);
  }
  SUBCASE("equal the offset derivative and relate to the beta gradient") {
    std::mt19937_64 gen(8);
    std::normal_distribution<double> normal;
    for (int trial = 0; trial < 10; ++trial) {
      Matrix x;
      Outcomes y;
      oracle::random_survival(gen, 15, 3, 0.3, x, y);
      Vector eta(15);
      for (Index i = 0; i < 15; ++i) eta(i) = normal(gen);
      const Vector u = boosting_residuals(y, eta);
      const Matrix none(15, 0);
      const Vector fd = oracle::central_difference(
          [&](const Vector& off) { return neg_partial_loglik(none, y, Vector(), off); }, eta, 1e-5);
      CHECK((u + fd).cwiseAbs().maxCoeff() < 1e-6);

      Vector beta(3);
      for (Index j = 0; j < 3; ++j) beta(j) = normal(gen);
      const Vector r = boosting_residuals(y, x * beta);
      CHECK((x.transpose() * r + npl_gradient(x, y, beta)).cwiseAbs().maxCoeff() < 1e-10);
    }
  }
}

TEST_CASE("Hessian pieces agree with differences of the residuals") {
  std::mt19937_64 gen(21);
  std::normal_distribution<double> normal;
  for (int trial = 0; trial < 10; ++trial) {
    Matrix x;
    Outcomes y;
    oracle::random_survival(gen, 12, 1, 0.3, x, y);
    y[2].time = y[5].time;
    Vector eta(12), v(12);
    for (Index i = 0; i < 12; ++i) {
      eta(i) = normal(gen);
      v(i) = normal(gen);
    }
    const RiskSetIndex risk(y);
    const auto ev = evaluate_cox(risk, eta, true);
    const double h = 1e-5;
    const Vector fd = (boosting_residuals(y, eta - h * v) - boosting_residuals(y, eta + h * v)) / (2 * h);
    CHECK((cox_hessian_product(risk, ev, v) - fd).cwiseAbs().maxCoeff() < 1e-6);
    for (Index i = 0; i < 12; ++i) {
      const Vector unit = Vector::Unit(12, i);
      CHECK(ev.hessian(i) == doctest::Approx(cox_hessian_product(risk, ev, unit)(i)).epsilon(1e-10));
      // The weight is a diagonal majorizer.
      CHECK(ev.weight(i) >= ev.hessian(i) - 1e-12);
    }
  }
}

TEST_CASE("partial likelihood is convex along random chords") {
  std::mt19937_64 gen(3);
  std::normal_distribution<double> normal;
  for (int trial = 0; trial < 50; ++trial) {
    Matrix x;
    Outcomes y;
    oracle::random_survival(gen, 20, 4, 0.4, x, y);
    Vector b1(4), b2(4);
    for (Index j = 0; j < 4; ++j) {
      b1(j) = 2 * normal(gen);
      b2(j) = 2 * normal(gen);
    }
    const double mid = neg_partial_loglik(x, y, 0.5 * (b1 + b2));
    CHECK(mid <= 0.5 * (neg_partial_loglik(x, y, b1) + neg_partial_loglik(x, y, b2)) + 1e-10);
  }
}

TEST_CASE("likelihood is stable for large linear predictors") {
  const auto y = testing::outcomes({{1, 1}, {2, 1}, {3, 0}});
  Matrix x(3, 1);
  x << 800, 0, -800;
  const double f = neg_partial_loglik(x, y, Vector::Constant(1, 1.0));
  CHECK(std::isfinite(f));
  CHECK(f == doctest::Approx(std::log1p(std::exp(-800.0)) + std::log1p(std::exp(-800.0))).epsilon(1e-12));
  x(0, 0) = std::numeric_limits<double>::infinity();
  CHECK_THROWS_AS(neg_partial_loglik(x, y, Vector::Constant(1, 1.0)), NumericalFailure);
}

TEST_CASE("Nelson-Aalen hand values") {
  const auto na = nelson_aalen(testing::outcomes({{1, 1}, {2, 0}, {3, 1}}));
  CHECK(std::abs(na(1) - 1.0 / 3.0) < 1e-12);
  CHECK(std::abs(na(2) - 1.0 / 3.0) < 1e-12);
  CHECK(std::abs(na(3) - 4.0 / 3.0) < 1e-12);
  CHECK(na(0.5) == 0.0);

  const auto one = nelson_aalen(testing::outcomes({{1, 1}, {2, 0}, {3, 0}, {4, 0}}));
  CHECK(one.jump_times().size() == 1);
  CHECK(std::abs(one(10) - 0.25) < 1e-12);

  const auto tied = nelson_aalen(testing::outcomes({{1, 1}, {1, 1}, {2, 1}}));
  CHECK(std::abs(tied(1) - 2.0 / 3.0) < 1e-12);
  CHECK(std::abs(tied(2) - 5.0 / 3.0) < 1e-12);
}

TEST_CASE("Kaplan-Meier hand values and relation to Nelson-Aalen") {
  const auto km = kaplan_meier(testing::outcomes({{1, 1}, {2, 0}, {3, 1}}));
  CHECK(std::abs(km(1) - 2.0 / 3.0) < 1e-12);
  CHECK(std::abs(km(2) - 2.0 / 3.0) < 1e-12);
  CHECK(std::abs(km(3)) < 1e-12);
  CHECK(km(0.1) == 1.0);

  const auto flat = kaplan_meier(testing::outcomes({{1, 0}, {2, 0}}));
  CHECK(flat(0.5) == 1.0);
  CHECK(flat(5) == 1.0);

  std::mt19937_64 gen(4);
  for (int trial = 0; trial < 50; ++trial) {
    Matrix x;
    Outcomes y;
    oracle::random_survival(gen, 25, 1, 0.4, x, y);
    const auto s = kaplan_meier(y);
    const auto h = nelson_aalen(y);
    CHECK(s.non_increasing());
    CHECK(h.non_decreasing());
    for (double t : h.jump_times()) CHECK(std::exp(-h(t)) >= s(t) - 1e-15);
  }
}

TEST_CASE("Breslow baseline") {
  const auto y = testing::outcomes({{1, 1}, {2, 0}, {3, 1}});
  Matrix x(3, 1);
  x << 0.3, -1, 2;
  const auto b0 = breslow_baseline(x, y, Vector::Zero(1));
  REQUIRE(b0.jump_times().size() == 2);
  CHECK(std::abs(b0.values()[0] - 1.0 / 3.0) < 1e-12);
  CHECK(std::abs(b0.values()[1] - 4.0 / 3.0) < 1e-12);

  std::mt19937_64 gen(6);
  for (int trial = 0; trial < 20; ++trial) {
    Matrix xr;
    Outcomes yr;
    oracle::random_survival(gen, 30, 2, 0.3, xr, yr);
    const auto base = breslow_baseline(xr, yr, Vector::Zero(2));
    const auto na = nelson_aalen(yr);
    REQUIRE(base.jump_times() == na.jump_times());
    for (std::size_t k = 0; k < na.values().size(); ++k) CHECK(std::abs(base.values()[k] - na.values()[k]) < 1e-12);
  }

  SUBCASE("shift along a constant column leaves survival curves unchanged") {
    Matrix xc(5, 2);
    xc << 1, 0.2, 1, -0.4, 1, 1.1, 1, 0.0, 1, -0.9;
    const auto yc = testing::outcomes({{1, 1}, {2, 1}, {2.5, 0}, {3, 1}, {4, 1}});
    Vector b(2), shifted(2);
    b << 0.0, 0.8;
    shifted << 1.7, 0.8;
    FeatureGroupMap g = FeatureGroupMap::single(2);
    const auto m1 = make_linear_model(xc, yc, b, g);
    const auto m2 = make_linear_model(xc, yc, shifted, g);
    const std::vector<double> times{0.5, 1, 1.5, 2, 3, 3.5, 4, 10};
    for (Index i = 0; i < 5; ++i) {
      const auto s1 = m1.predict_survival(xc.row(i).transpose(), times);
      const auto s2 = m2.predict_survival(xc.row(i).transpose(), times);
      for (std::size_t k = 0; k < times.size(); ++k) CHECK(s1[k] == doctest::Approx(s2[k]).epsilon(1e-12));
    }
  }
}

TEST_CASE("predict_survival") {
  std::mt19937_64 gen(12);
  Matrix x;
  Outcomes y;
  oracle::random_survival(gen, 40, 3, 0.3, x, y);
  const auto zero = make_linear_model(x, y, Vector::Zero(3), FeatureGroupMap::single(3));
  const auto na = nelson_aalen(y);
  const double first = *std::min_element(na.jump_times().begin(), na.jump_times().end());
  std::vector<double> grid;
  for (int k = 0; k < 100; ++k) grid.push_back(first * 0.5 + k * 0.05);
  const auto s0 = predict_survival(zero, x.row(7).transpose(), grid);
  for (std::size_t k = 0; k < grid.size(); ++k) CHECK(s0[k] == doctest::Approx(std::exp(-na(grid[k]))).epsilon(1e-12));
  CHECK(s0.front() == 1.0);

  const auto fit = fit_cox_newton(x, y);
  for (Index i = 0; i < 40; i += 5) {
    const auto s = fit.predict_survival(x.row(i).transpose(), grid);
    for (std::size_t k = 0; k < s.size(); ++k) {
      CHECK(s[k] >= 0.0);
      CHECK(s[k] <= 1.0);
      if (k > 0) CHECK(s[k] <= s[k - 1]);
    }
  }
}

TEST_CASE("Newton fit") {
  std::mt19937_64 gen(31);
  for (int trial = 0; trial < 10; ++trial) {
    Matrix x;
    Outcomes y;
    oracle::random_survival(gen, 50, 3, 0.3, x, y);
    const auto model = fit_cox_newton(x, y);
    CHECK(oracle::cox_gradient(x, y, model.coefficients).cwiseAbs().maxCoeff() < 1e-6);
    CHECK(model.baseline_cumhaz.non_decreasing());
  }
  SUBCASE("zero column gets a zero coefficient") {
    Matrix x;
    Outcomes y;
    oracle::random_survival(gen, 50, 3, 0.3, x, y);
    x.col(1).setZero();
    CHECK(fit_cox_newton(x, y).coefficients(1) == 0.0);
  }
  SUBCASE("monotone likelihood is reported as a failure") {
    // Every death has larger x than every later-failing or censored subject.
    Outcomes y;
    Matrix x(10, 1);
    for (int i = 0; i < 10; ++i) {
      y.push_back({static_cast<double>(i + 1), i < 6 ? 1 : 0});
      x(i, 0) = 10.0 - i;
    }
    CHECK_THROWS_AS(fit_cox_newton(x, y), NumericalFailure);
  }
}
