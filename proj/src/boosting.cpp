#include "survbench/boosting.hpp"

#include <algorithm>
#include <cassert>
#include <cmath>
#include <functional>
#include <limits>
#include <utility>

#include "survbench/error.hpp"
#include "survbench/rng.hpp"

namespace survbench {

namespace {

// Coefficient changes (standardized scale) made by one boosting iteration.
using StepUpdates = std::vector<std::pair<Index, double>>;

struct Trace {
  std::vector<StepUpdates> steps;
  std::vector<double> loss;  // loss[0] before any step
  std::vector<Index> selection;
};

void apply(const Matrix& x, Index j, double delta, Vector& eta) {
  eta.noalias() += delta * x.col(j);
  if (!eta.allFinite()) throw NumericalFailure("non-finite linear predictor in boosting");
}

Trace run_glmboost(const Standardization& st, const RiskSetIndex& risk, int steps, double nu) {
  const Matrix& x = st.x;
  const Index p = x.cols();
  Vector xx(p);
  for (Index j = 0; j < p; ++j) xx(j) = x.col(j).squaredNorm();
  Vector eta = Vector::Zero(x.rows());
  Trace trace;
  trace.loss.push_back(cox_loss(risk, eta));
  for (int m = 0; m < steps; ++m) {
    const CoxEvaluation ev = evaluate_cox(risk, eta, false);
    const Vector c = x.transpose() * ev.residual;
    Index best = -1;
    double best_gain = -1.0;
    for (Index j = 0; j < p; ++j) {
      if (st.constant[static_cast<std::size_t>(j)] || xx(j) <= 0.0) continue;
      // RSS reduction of the univariate least-squares fit of u on x_j.
      const double gain = c(j) * c(j) / xx(j);
      if (gain > best_gain) {
        best_gain = gain;
        best = j;
      }
    }
    if (best < 0) throw NumericalFailure("no usable feature for boosting");
    const double delta = nu * c(best) / xx(best);
    apply(x, best, delta, eta);
    trace.steps.push_back({{best, delta}});
    trace.selection.push_back(best);
    trace.loss.push_back(cox_loss(risk, eta));
  }
  return trace;
}

Matrix columns_of(const Matrix& x, const std::vector<Index>& cols) {
  Matrix out(x.rows(), static_cast<Index>(cols.size()));
  for (std::size_t k = 0; k < cols.size(); ++k) out.col(static_cast<Index>(k)) = x.col(cols[k]);
  return out;
}

// Unpenalized Newton refit of the mandatory block on the current offset,
// iterated until the score vanishes.
StepUpdates refit_mandatory(const RiskSetIndex& risk, const Matrix& xm, const std::vector<Index>& cols, Vector& eta) {
  StepUpdates updates;
  if (cols.empty()) return updates;
  Vector total = Vector::Zero(xm.cols());
  for (int it = 0; it < 20; ++it) {
    Vector grad;
    Matrix hess;
    cox_gradient_hessian(risk, xm, eta, grad, hess);
    if (grad.cwiseAbs().maxCoeff() < 1e-9) break;
    Eigen::LLT<Matrix> llt(hess);
    if (llt.info() != Eigen::Success) {
      llt.compute(hess + 1e-8 * Matrix::Identity(hess.rows(), hess.cols()));
      if (llt.info() != Eigen::Success) throw NumericalFailure("singular information for mandatory features");
    }
    const Vector step = llt.solve(-grad);
    const double base = cox_loss(risk, eta);
    double t = 1.0;
    Vector trial;
    for (int halving = 0;; ++halving, t *= 0.5) {
      if (halving > 30) throw NumericalFailure("mandatory refit failed to descend");
      trial = eta + t * (xm * step);
      if (!trial.allFinite()) continue;
      if (cox_loss(risk, trial) <= base + 1e-12 * std::abs(base)) break;
    }
    eta = std::move(trial);
    total += t * step;
    if ((t * step).cwiseAbs().maxCoeff() > 50.0 || total.cwiseAbs().maxCoeff() > 100.0)
      throw NumericalFailure("mandatory coefficients diverge");
  }
  for (std::size_t k = 0; k < cols.size(); ++k) updates.emplace_back(cols[k], total(static_cast<Index>(k)));
  return updates;
}

Trace run_coxboost(const Standardization& st, const RiskSetIndex& risk, int steps, double lambda,
                   const std::vector<Index>& mandatory) {
  const Matrix& x = st.x;
  const Index p = x.cols();
  std::vector<bool> candidate(static_cast<std::size_t>(p), true);
  std::vector<Index> mand;
  for (Index j : mandatory) {
    candidate[static_cast<std::size_t>(j)] = false;
    if (!st.constant[static_cast<std::size_t>(j)]) mand.push_back(j);
  }
  for (Index j = 0; j < p; ++j)
    if (st.constant[static_cast<std::size_t>(j)]) candidate[static_cast<std::size_t>(j)] = false;
  const Matrix xm = columns_of(x, mand);

  Vector eta = Vector::Zero(x.rows());
  Trace trace;
  trace.loss.push_back(cox_loss(risk, eta));
  Vector g, h;
  for (int m = 0; m < steps; ++m) {
    StepUpdates updates = refit_mandatory(risk, xm, mand, eta);
    coxboost_score_information(risk, x, eta, g, h);
    Index best = -1;
    double best_score = -1.0;
    for (Index j = 0; j < p; ++j) {
      if (!candidate[static_cast<std::size_t>(j)]) continue;
      assert(h(j) + lambda > 0.0);
      const double score = g(j) * g(j) / (h(j) + lambda);
      if (score > best_score) {
        best_score = score;
        best = j;
      }
    }
    if (best >= 0) {
      const double gamma = g(best) / (h(best) + lambda);
      apply(x, best, gamma, eta);
      updates.emplace_back(best, gamma);
    }
    trace.steps.push_back(std::move(updates));
    trace.selection.push_back(best);
    trace.loss.push_back(cox_loss(risk, eta));
  }
  return trace;
}

using Runner = std::function<Trace(const Standardization&, const RiskSetIndex&, int)>;

Matrix rows_of(const Matrix& x, const std::vector<std::size_t>& rows) {
  Matrix out(static_cast<Index>(rows.size()), x.cols());
  for (std::size_t r = 0; r < rows.size(); ++r) out.row(static_cast<Index>(r)) = x.row(static_cast<Index>(rows[r]));
  return out;
}

// Cross-validated partial-likelihood deviance per event for m = 1..max_m,
// one boosting run per fold scored at every step.
std::vector<double> cv_curve(const SurvivalDataset& data, int max_m, int k, std::uint64_t seed, const Runner& run) {
  const RiskSetIndex risk_full(data.outcomes);
  const std::vector<int> fold_of = inner_folds(data.outcomes, k, seed);
  const int n_folds = *std::max_element(fold_of.begin(), fold_of.end());
  std::vector<double> total(static_cast<std::size_t>(max_m), 0.0);
  for (int f = 1; f <= n_folds; ++f) {
    std::vector<std::size_t> train;
    for (std::size_t i = 0; i < fold_of.size(); ++i)
      if (fold_of[i] != f) train.push_back(i);
    Outcomes train_outcomes;
    for (auto i : train) train_outcomes.push_back(data.outcomes[i]);
    if (train.size() < 2 || count_events(train_outcomes) == 0) continue;
    const Matrix x_train = rows_of(data.features, train);
    const Standardization st = standardize(x_train);
    const RiskSetIndex risk_train(train_outcomes);
    const Trace trace = run(st, risk_train, max_m);
    // Replay on the original scale; constant shifts of eta do not change the loss.
    Vector eta_full = Vector::Zero(data.n());
    Vector eta_train = Vector::Zero(x_train.rows());
    for (int m = 0; m < max_m; ++m) {
      for (const auto& [j, delta] : trace.steps[static_cast<std::size_t>(m)]) {
        const double d = delta / st.scale(j);
        eta_full.noalias() += d * data.features.col(j);
        eta_train.noalias() += d * x_train.col(j);
      }
      total[static_cast<std::size_t>(m)] += 2.0 * (cox_loss(risk_full, eta_full) - cox_loss(risk_train, eta_train));
    }
  }
  const double events = std::max(1.0, risk_full.total_events());
  for (double& v : total) v /= events;
  return total;
}

BoostingFit fit_boosting(const SurvivalDataset& data, const BoostingConfig& cfg, int default_grid, const Runner& run) {
  BoostingFit fit;
  int m_stop = 0;
  if (cfg.m_stop) {
    m_stop = *cfg.m_stop;
    if (m_stop < 0) throw ConfigError("m_stop must be non-negative");
  } else {
    const int grid = cfg.m_grid_max > 0 ? cfg.m_grid_max : default_grid;
    fit.cv_curve = cv_curve(data, grid, cfg.inner_k, derive_seed(cfg.seed, {0}), run);
    std::size_t best = 0;
    for (std::size_t m = 1; m < fit.cv_curve.size(); ++m)
      if (fit.cv_curve[m] < fit.cv_curve[best]) best = m;
    m_stop = static_cast<int>(best) + 1;
  }
  const Standardization st = standardize(data.features);
  const RiskSetIndex risk(data.outcomes);
  const Trace trace = run(st, risk, m_stop);
  Vector beta = Vector::Zero(data.p());
  for (const auto& step : trace.steps)
    for (const auto& [j, delta] : step) beta(j) += delta;
  fit.model = make_linear_model(data.features, data.outcomes, st.to_original(beta), data.groups);
  fit.model.training_meta["m_stop"] = m_stop;
  fit.m_stop = m_stop;
  fit.train_loss = trace.loss;
  fit.selection = trace.selection;
  return fit;
}

}  // namespace

void coxboost_score_information(const RiskSetIndex& risk, const Matrix& x, const Vector& eta, Vector& score,
                                Vector& information) {
  const CoxEvaluation ev = evaluate_cox(risk, eta, false);
  score = x.transpose() * ev.residual;
  const Index p = x.cols();
  const auto& order = risk.order();
  const auto& groups = risk.groups();
  const double shift = eta.maxCoeff();
  std::vector<double> e(order.size());
  for (std::size_t pos = 0; pos < order.size(); ++pos) e[pos] = std::exp(eta(static_cast<Index>(order[pos])) - shift);
  information = Vector::Zero(p);
  for (Index j = 0; j < p; ++j) {
    const auto col = x.col(j);
    double s0 = 0.0, s1 = 0.0, s2 = 0.0, acc = 0.0;
    for (std::size_t g = groups.size(); g-- > 0;) {
      for (std::size_t pos = groups[g].begin; pos < groups[g].end; ++pos) {
        const double v = col(static_cast<Index>(order[pos]));
        s0 += e[pos];
        s1 += e[pos] * v;
        s2 += e[pos] * v * v;
      }
      if (groups[g].deaths <= 0) continue;
      const double mu = s1 / s0;
      acc += groups[g].deaths * std::max(0.0, s2 / s0 - mu * mu);
    }
    information(j) = acc;
  }
}

BoostingFit fit_glmboost_cox(const SurvivalDataset& data, const BoostingConfig& cfg) {
  if (!(cfg.nu > 0.0 && cfg.nu <= 1.0)) throw ConfigError("nu must lie in (0, 1]");
  const double nu = cfg.nu;
  return fit_boosting(data, cfg, 1000, [nu](const Standardization& st, const RiskSetIndex& risk, int steps) {
    return run_glmboost(st, risk, steps, nu);
  });
}

BoostingFit fit_coxboost(const SurvivalDataset& data, const BoostingConfig& cfg) {
  for (Index j : cfg.mandatory_features)
    if (j < 0 || j >= data.p()) throw ConfigError("mandatory feature index out of range");
  const double lambda = cfg.penalty ? *cfg.penalty : 9.0 * static_cast<double>(count_events(data.outcomes));
  if (!(lambda >= 0.0)) throw ConfigError("penalty must be non-negative");
  const auto mandatory = cfg.mandatory_features;
  BoostingFit fit = fit_boosting(data, cfg, 100, [lambda, mandatory](const Standardization& st,
                                                                      const RiskSetIndex& risk, int steps) {
    return run_coxboost(st, risk, steps, lambda, mandatory);
  });
  fit.penalty = lambda;
  fit.model.training_meta["penalty"] = lambda;
  return fit;
}

}  // namespace survbench
