#include <cmath>
#include <random>
#include <set>

#include "doctest.h"
#include "helpers.hpp"
#include "oracles.hpp"
#include "survbench/boosting.hpp"
#include "survbench/cox.hpp"

using namespace survbench;

namespace {

BoostingConfig steps(int m) {
  BoostingConfig cfg;
  cfg.m_stop = m;
  return cfg;
}

std::size_t nonzeros(const Vector& b) { return static_cast<std::size_t>((b.array() != 0.0).count()); }

}  // namespace

TEST_CASE("glmboost null model") {
  const auto data = testing::two_group_data(1, 30, 2, 4);
  const auto fit = fit_glmboost_cox(data, steps(0));
  CHECK(nonzeros(fit.model.coefficients) == 0);
  const auto na = nelson_aalen(data.outcomes);
  for (double t : {0.1, 0.5, 1.0, 2.0, 5.0})
    CHECK(fit.model.predict_survival(data.features.row(3).transpose(), std::vector<double>{t})[0] ==
          doctest::Approx(std::exp(-na(t))).epsilon(1e-12));
}

TEST_CASE("glmboost first step picks the best univariate least-squares fit") {
  for (std::uint64_t seed = 0; seed < 10; ++seed) {
    auto data = testing::two_group_data(100 + seed, 30, 3, 7, 1.0);
    data.features.col(4) *= 5.0;  // scale must not matter
    const auto fit = fit_glmboost_cox(data, steps(1));
    CHECK(nonzeros(fit.model.coefficients) == 1);
    // Brute force: |corr(x_j, u0)| with u0 the residuals at eta = 0.
    const Vector u = boosting_residuals(data.outcomes, Vector::Zero(30));
    Index best = -1;
    double best_corr = -1.0;
    for (Index j = 0; j < data.p(); ++j) {
      const Vector xc = data.features.col(j).array() - data.features.col(j).mean();
      const double corr = std::abs(xc.dot(u)) / xc.norm();
      if (corr > best_corr) {
        best_corr = corr;
        best = j;
      }
    }
    CHECK(fit.selection.front() == best);
    CHECK(fit.model.coefficients(best) != 0.0);
  }
}

TEST_CASE("glmboost training loss decreases and selects at most m features") {
  for (std::uint64_t seed = 0; seed < 5; ++seed) {
    const auto data = testing::two_group_data(200 + seed, 60, 3, 20, 0.8);
    const auto fit = fit_glmboost_cox(data, steps(150));
    REQUIRE(fit.train_loss.size() == 151);
    for (std::size_t m = 1; m < fit.train_loss.size(); ++m) CHECK(fit.train_loss[m] <= fit.train_loss[m - 1] + 1e-12);
    for (int m : {1, 5, 20, 150}) {
      const std::set<Index> distinct(fit.selection.begin(), fit.selection.begin() + m);
      CHECK(distinct.size() <= static_cast<std::size_t>(m));
    }
    // Coefficients are the replayed sum of the steps on the original scale.
    CHECK(fit.train_loss.back() ==
          doctest::Approx(neg_partial_loglik(data.features, data.outcomes, fit.model.coefficients)).epsilon(1e-9));
  }
}

TEST_CASE("boosting tuning is deterministic and picks the curve minimum") {
  const auto data = testing::two_group_data(7, 60, 2, 10, 1.0);
  BoostingConfig cfg;
  cfg.m_grid_max = 200;
  cfg.seed = 3;
  const auto a = fit_glmboost_cox(data, cfg);
  const auto b = fit_glmboost_cox(data, cfg);
  CHECK(a.m_stop == b.m_stop);
  CHECK(a.cv_curve == b.cv_curve);
  CHECK((a.model.coefficients - b.model.coefficients).cwiseAbs().maxCoeff() == 0.0);
  REQUIRE(a.cv_curve.size() == 200);
  const auto best = std::min_element(a.cv_curve.begin(), a.cv_curve.end());
  CHECK(a.m_stop == static_cast<int>(best - a.cv_curve.begin()) + 1);
}

TEST_CASE("CoxBoost score and information match finite differences") {
  std::mt19937_64 gen(5);
  std::normal_distribution<double> normal;
  Matrix x;
  Outcomes y;
  oracle::random_survival(gen, 20, 4, 0.3, x, y);
  Vector beta(4);
  for (Index j = 0; j < 4; ++j) beta(j) = 0.3 * normal(gen);
  const RiskSetIndex risk(y);
  Vector score, info;
  coxboost_score_information(risk, x, x * beta, score, info);
  CHECK((score + oracle::cox_gradient(x, y, beta)).cwiseAbs().maxCoeff() < 1e-10);
  const double h = 1e-5;
  for (Index j = 0; j < 4; ++j) {
    Vector up = beta, down = beta;
    up(j) += h;
    down(j) -= h;
    const double second = (oracle::cox_loss(x, y, up) - 2 * oracle::cox_loss(x, y, beta) + oracle::cox_loss(x, y, down)) /
                          (h * h);
    CHECK(info(j) == doctest::Approx(second).epsilon(1e-4));
  }
}

TEST_CASE("CoxBoost first step maximizes the penalized score") {
  for (std::uint64_t seed = 0; seed < 10; ++seed) {
    const auto data = testing::two_group_data(300 + seed, 20, 2, 8, 1.0);
    BoostingConfig cfg = steps(1);
    cfg.penalty = 30.0;
    const auto fit = fit_coxboost(data, cfg);
    const auto st = standardize(data.features);
    const RiskSetIndex risk(data.outcomes);
    Vector g, h;
    coxboost_score_information(risk, st.x, Vector::Zero(20), g, h);
    Index best = 0;
    for (Index j = 1; j < 10; ++j)
      if (g(j) * g(j) / (h(j) + 30.0) > g(best) * g(best) / (h(best) + 30.0)) best = j;
    CHECK(fit.selection.front() == best);
    CHECK(fit.model.coefficients(best) * st.scale(best) == doctest::Approx(g(best) / (h(best) + 30.0)).epsilon(1e-10));
    CHECK(nonzeros(fit.model.coefficients) == 1);
  }
}

TEST_CASE("CoxBoost with a dominating penalty barely moves") {
  const auto data = testing::two_group_data(9, 20, 2, 4, 1.0);
  for (double lambda : {1e5, 1e7}) {
    BoostingConfig cfg = steps(10);
    cfg.penalty = lambda;
    const auto fit = fit_coxboost(data, cfg);
    const auto st = standardize(data.features);
    const Vector b_std = st.to_standardized(fit.model.coefficients);
    CHECK(b_std.cwiseAbs().maxCoeff() < 10.0 * 20.0 / lambda);
  }
}

TEST_CASE("CoxBoost mandatory features") {
  SUBCASE("clinical block is fitted at the first step") {
    auto data = testing::two_group_data(11, 80, 4, 40, 0.8);
    BoostingConfig cfg = steps(1);
    cfg.mandatory_features = {0, 1, 2, 3};
    const auto fit = fit_coxboost(data, cfg);
    CHECK(nonzeros(fit.model.coefficients.head(4)) == 4);
    CHECK(fit.selection.front() >= 4);
  }
  SUBCASE("mandatory coefficients are stationary after the refit") {
    auto data = testing::two_group_data(12, 60, 3, 2, 0.8);
    data.features.rightCols(2).setConstant(1.0);  // nothing else to boost
    BoostingConfig cfg = steps(3);
    cfg.mandatory_features = {0, 1, 2};
    const auto fit = fit_coxboost(data, cfg);
    const Vector g = npl_gradient(data.features, data.outcomes, fit.model.coefficients);
    CHECK(g.head(3).cwiseAbs().maxCoeff() < 1e-6);
  }
  SUBCASE("out-of-range index is a configuration error") {
    const auto data = testing::two_group_data(13, 20, 2, 2);
    BoostingConfig cfg = steps(1);
    cfg.mandatory_features = {7};
    CHECK_THROWS(fit_coxboost(data, cfg));
  }
}

TEST_CASE("CoxBoost default penalty is nine per event") {
  const auto data = testing::two_group_data(14, 40, 2, 4);
  const auto fit = fit_coxboost(data, steps(2));
  CHECK(fit.penalty == 9.0 * static_cast<double>(count_events(data.outcomes)));
}
