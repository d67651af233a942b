#include "survbench/cox.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>

#include "survbench/error.hpp"

namespace survbench {

RiskSetIndex::RiskSetIndex(std::span<const SurvivalOutcome> outcomes) {
  const std::size_t n = outcomes.size();
  order_.resize(n);
  std::iota(order_.begin(), order_.end(), std::size_t{0});
  std::stable_sort(order_.begin(), order_.end(),
                   [&](std::size_t a, std::size_t b) { return outcomes[a].time < outcomes[b].time; });
  group_of_.resize(n);
  events_.resize(n);
  for (std::size_t pos = 0; pos < n;) {
    TimeGroup g;
    g.begin = pos;
    g.time = outcomes[order_[pos]].time;
    while (pos < n && outcomes[order_[pos]].time == g.time) {
      const std::size_t i = order_[pos];
      events_[i] = outcomes[i].event;
      g.deaths += outcomes[i].event;
      group_of_[i] = groups_.size();
      ++pos;
    }
    g.end = pos;
    total_events_ += g.deaths;
    groups_.push_back(g);
  }
}

namespace {

void check_finite(const Vector& eta) {
  if (!eta.allFinite()) throw NumericalFailure("non-finite linear predictor");
}

Vector make_eta(const Matrix& x, const Vector& beta, const Vector& offset) {
  if (x.cols() != beta.size()) throw std::invalid_argument("feature/coefficient dimension mismatch");
  Vector eta = x * beta;
  if (offset.size() != 0) {
    if (offset.size() != x.rows()) throw std::invalid_argument("offset length mismatch");
    eta += offset;
  }
  return eta;
}

}  // namespace

namespace {

// Log-domain evaluation for linear predictors spread so widely that a risk
// set sum underflows after the global max shift.
CoxEvaluation evaluate_cox_logspace(const RiskSetIndex& risk, const Vector& eta, bool with_weights) {
  const std::size_t n = risk.n();
  const auto& order = risk.order();
  const auto& groups = risk.groups();
  const double shift = eta.maxCoeff();
  const double neg_inf = -std::numeric_limits<double>::infinity();

  // log S_g via a running log-sum-exp from the latest time backwards.
  std::vector<double> log_risk(groups.size());
  double run_max = neg_inf, run_sum = 0.0;
  for (std::size_t g = groups.size(); g-- > 0;) {
    for (std::size_t pos = groups[g].begin; pos < groups[g].end; ++pos) {
      const double v = eta(static_cast<Index>(order[pos]));
      if (v > run_max) {
        run_sum = run_sum * std::exp(run_max - v) + 1.0;
        run_max = v;
      } else {
        run_sum += std::exp(v - run_max);
      }
    }
    log_risk[g] = run_max + std::log(run_sum);
  }

  auto log_add = [](double a, double b) {
    if (a == -std::numeric_limits<double>::infinity()) return b;
    if (b == -std::numeric_limits<double>::infinity()) return a;
    const double m = std::max(a, b);
    return m + std::log(std::exp(a - m) + std::exp(b - m));
  };

  CoxEvaluation out;
  const auto& ev = risk.events();
  double loss = 0.0;
  for (std::size_t g = 0; g < groups.size(); ++g)
    if (groups[g].deaths > 0) loss += groups[g].deaths * log_risk[g];
  for (std::size_t i = 0; i < n; ++i)
    if (ev[i]) loss -= eta(static_cast<Index>(i));
  out.loss = loss;

  std::vector<double> log_a(groups.size()), log_b(groups.size());
  double cum = neg_inf, cum2 = neg_inf;
  for (std::size_t g = 0; g < groups.size(); ++g) {
    if (groups[g].deaths > 0) {
      cum = log_add(cum, std::log(groups[g].deaths) - log_risk[g]);
      cum2 = log_add(cum2, std::log(groups[g].deaths) - 2.0 * log_risk[g]);
    }
    log_a[g] = cum;
    log_b[g] = cum2;
  }
  out.residual.resize(static_cast<Index>(n));
  if (with_weights) {
    out.weight.resize(static_cast<Index>(n));
    out.hessian.resize(static_cast<Index>(n));
    out.scaled_exp.resize(static_cast<Index>(n));
    out.group_curvature.resize(groups.size());
    for (std::size_t g = 0; g < groups.size(); ++g)
      out.group_curvature[g] =
          groups[g].deaths > 0 ? groups[g].deaths * std::exp(2.0 * (shift - log_risk[g])) : 0.0;
  }
  for (std::size_t i = 0; i < n; ++i) {
    const Index ii = static_cast<Index>(i);
    const std::size_t g = risk.group_of(i);
    const double mu = std::exp(eta(ii) + log_a[g]);
    out.residual(ii) = ev[i] - mu;
    if (with_weights) {
      out.weight(ii) = mu;
      out.hessian(ii) = std::max(0.0, mu - std::exp(2.0 * eta(ii) + log_b[g]));
      out.scaled_exp(ii) = std::exp(eta(ii) - shift);
    }
  }
  if (!std::isfinite(out.loss)) throw NumericalFailure("non-finite partial likelihood");
  return out;
}

// Below this a shifted risk-set sum has lost too much range to be trusted.
constexpr double kTinyRiskSum = 1e-290;

}  // namespace

CoxEvaluation evaluate_cox(const RiskSetIndex& risk, const Vector& eta, bool with_weights) {
  check_finite(eta);
  const std::size_t n = risk.n();
  const auto& order = risk.order();
  const auto& groups = risk.groups();
  const double shift = eta.maxCoeff();

  Vector e(static_cast<Index>(n));
  for (Index i = 0; i < e.size(); ++i) e(i) = std::exp(eta(i) - shift);

  // Risk-set sums per time group, accumulated from the latest time backwards.
  std::vector<double> risk_sum(groups.size());
  double acc = 0.0;
  for (std::size_t g = groups.size(); g-- > 0;) {
    for (std::size_t pos = groups[g].begin; pos < groups[g].end; ++pos) acc += e(static_cast<Index>(order[pos]));
    risk_sum[g] = acc;
  }

  for (std::size_t g = 0; g < groups.size(); ++g)
    if (groups[g].deaths > 0 && risk_sum[g] < kTinyRiskSum) return evaluate_cox_logspace(risk, eta, with_weights);

  CoxEvaluation out;
  double loss = 0.0;
  for (std::size_t g = 0; g < groups.size(); ++g) {
    if (groups[g].deaths > 0) loss += groups[g].deaths * std::log(risk_sum[g]);
  }
  const auto& ev = risk.events();
  for (std::size_t i = 0; i < n; ++i) {
    if (ev[i]) loss -= eta(static_cast<Index>(i)) - shift;
  }
  out.loss = loss;

  // A(t) = sum over event groups up to t of d / S.
  // B(t) = sum of d / S^2, for the exact Hessian diagonal.
  std::vector<double> hazard(groups.size()), hazard2(with_weights ? groups.size() : 0);
  double cum = 0.0, cum2 = 0.0;
  for (std::size_t g = 0; g < groups.size(); ++g) {
    if (groups[g].deaths > 0) {
      cum += groups[g].deaths / risk_sum[g];
      cum2 += groups[g].deaths / (risk_sum[g] * risk_sum[g]);
    }
    hazard[g] = cum;
    if (with_weights) hazard2[g] = cum2;
  }
  if (with_weights) {
    out.scaled_exp = e;
    out.group_curvature.resize(groups.size());
    for (std::size_t g = 0; g < groups.size(); ++g)
      out.group_curvature[g] = groups[g].deaths > 0 ? groups[g].deaths / (risk_sum[g] * risk_sum[g]) : 0.0;
  }
  out.residual.resize(static_cast<Index>(n));
  if (with_weights) {
    out.weight.resize(static_cast<Index>(n));
    out.hessian.resize(static_cast<Index>(n));
  }
  for (std::size_t i = 0; i < n; ++i) {
    const Index ii = static_cast<Index>(i);
    const double mu = e(ii) * hazard[risk.group_of(i)];
    out.residual(ii) = ev[i] - mu;
    if (with_weights) {
      out.weight(ii) = mu;
      out.hessian(ii) = std::max(0.0, mu - e(ii) * e(ii) * hazard2[risk.group_of(i)]);
    }
  }
  if (!std::isfinite(out.loss)) throw NumericalFailure("non-finite partial likelihood");
  return out;
}

Vector cox_hessian_product(const RiskSetIndex& risk, const CoxEvaluation& ev, const Vector& v) {
  const auto& order = risk.order();
  const auto& groups = risk.groups();
  const Vector& e = ev.scaled_exp;
  // tail[g] = sum of e*v over the risk set of group g.
  std::vector<double> tail(groups.size());
  double acc = 0.0;
  for (std::size_t g = groups.size(); g-- > 0;) {
    for (std::size_t pos = groups[g].begin; pos < groups[g].end; ++pos) {
      const Index i = static_cast<Index>(order[pos]);
      acc += e(i) * v(i);
    }
    tail[g] = acc;
  }
  Vector out(v.size());
  double cum = 0.0;
  for (std::size_t g = 0; g < groups.size(); ++g) {
    cum += ev.group_curvature[g] * tail[g];
    for (std::size_t pos = groups[g].begin; pos < groups[g].end; ++pos) {
      const Index i = static_cast<Index>(order[pos]);
      out(i) = ev.weight(i) * v(i) - e(i) * cum;
    }
  }
  return out;
}

double cox_loss(const RiskSetIndex& risk, const Vector& eta) {
  check_finite(eta);
  const auto& order = risk.order();
  const auto& groups = risk.groups();
  const double shift = eta.maxCoeff();
  double acc = 0.0;
  double loss = 0.0;
  for (std::size_t g = groups.size(); g-- > 0;) {
    for (std::size_t pos = groups[g].begin; pos < groups[g].end; ++pos) {
      const std::size_t i = order[pos];
      acc += std::exp(eta(static_cast<Index>(i)) - shift);
      if (risk.events()[i]) loss -= eta(static_cast<Index>(i)) - shift;
    }
    if (groups[g].deaths > 0) {
      if (acc < kTinyRiskSum) return evaluate_cox_logspace(risk, eta, false).loss;
      loss += groups[g].deaths * std::log(acc);
    }
  }
  if (!std::isfinite(loss)) throw NumericalFailure("non-finite partial likelihood");
  return loss;
}

double neg_partial_loglik(const Matrix& x, std::span<const SurvivalOutcome> outcomes, const Vector& beta,
                          const Vector& offset) {
  RiskSetIndex risk(outcomes);
  return cox_loss(risk, make_eta(x, beta, offset));
}

Vector npl_gradient(const Matrix& x, std::span<const SurvivalOutcome> outcomes, const Vector& beta,
                    const Vector& offset) {
  RiskSetIndex risk(outcomes);
  auto ev = evaluate_cox(risk, make_eta(x, beta, offset), false);
  return -(x.transpose() * ev.residual);
}

Vector boosting_residuals(std::span<const SurvivalOutcome> outcomes, const Vector& eta) {
  RiskSetIndex risk(outcomes);
  return evaluate_cox(risk, eta, false).residual;
}

StepFunction nelson_aalen(std::span<const SurvivalOutcome> outcomes) {
  RiskSetIndex risk(outcomes);
  std::vector<double> times, values;
  double cum = 0.0;
  for (const auto& g : risk.groups()) {
    if (g.deaths <= 0) continue;
    cum += g.deaths / static_cast<double>(risk.n() - g.begin);
    times.push_back(g.time);
    values.push_back(cum);
  }
  return StepFunction(std::move(times), std::move(values), 0.0);
}

StepFunction kaplan_meier(std::span<const SurvivalOutcome> outcomes) {
  RiskSetIndex risk(outcomes);
  std::vector<double> times, values;
  double surv = 1.0;
  for (const auto& g : risk.groups()) {
    if (g.deaths <= 0) continue;
    const double at_risk = static_cast<double>(risk.n() - g.begin);
    surv *= 1.0 - g.deaths / at_risk;
    times.push_back(g.time);
    values.push_back(surv);
  }
  return StepFunction(std::move(times), std::move(values), 1.0);
}

StepFunction breslow_baseline(const Matrix& x, std::span<const SurvivalOutcome> outcomes, const Vector& beta,
                              double center) {
  RiskSetIndex risk(outcomes);
  Vector lp = x * beta;
  lp.array() -= center;
  check_finite(lp);
  const double shift = lp.maxCoeff();
  const auto& order = risk.order();
  const auto& groups = risk.groups();
  std::vector<double> increment(groups.size(), 0.0);
  double acc = 0.0;
  for (std::size_t g = groups.size(); g-- > 0;) {
    for (std::size_t pos = groups[g].begin; pos < groups[g].end; ++pos) {
      acc += std::exp(lp(static_cast<Index>(order[pos])) - shift);
    }
    if (groups[g].deaths > 0) increment[g] = groups[g].deaths * std::exp(-shift) / acc;
  }
  std::vector<double> times, values;
  double cum = 0.0;
  for (std::size_t g = 0; g < groups.size(); ++g) {
    if (groups[g].deaths <= 0) continue;
    cum += increment[g];
    times.push_back(groups[g].time);
    values.push_back(cum);
  }
  return StepFunction(std::move(times), std::move(values), 0.0);
}

// ---------------------------------------------------------------------------
// LinearSurvivalModel

double LinearSurvivalModel::linear_predictor(const Eigen::Ref<const Vector>& x) const {
  return x.dot(coefficients);
}

StepFunction LinearSurvivalModel::survival_curve(const Eigen::Ref<const Vector>& x) const {
  const double risk = std::exp(linear_predictor(x) - lp_center);
  std::vector<double> values;
  values.reserve(baseline_cumhaz.values().size());
  for (double h : baseline_cumhaz.values()) values.push_back(std::exp(-h * risk));
  return StepFunction(baseline_cumhaz.jump_times(), std::move(values), 1.0);
}

std::vector<double> LinearSurvivalModel::predict_survival(const Eigen::Ref<const Vector>& x,
                                                          std::span<const double> times) const {
  const double risk = std::exp(linear_predictor(x) - lp_center);
  std::vector<double> out;
  out.reserve(times.size());
  for (double t : times) out.push_back(std::exp(-baseline_cumhaz(t) * risk));
  return out;
}

std::vector<double> predict_survival(const LinearSurvivalModel& model, const Eigen::Ref<const Vector>& x_new,
                                     std::span<const double> times) {
  return model.predict_survival(x_new, times);
}

LinearSurvivalModel make_linear_model(const Matrix& x, std::span<const SurvivalOutcome> outcomes, Vector beta,
                                      FeatureGroupMap groups) {
  if (!beta.allFinite()) throw NumericalFailure("non-finite coefficients");
  LinearSurvivalModel m;
  m.lp_center = x.rows() > 0 ? (x * beta).mean() : 0.0;
  m.baseline_cumhaz = breslow_baseline(x, outcomes, beta, m.lp_center);
  m.coefficients = std::move(beta);
  m.groups = std::move(groups);
  return m;
}

// ---------------------------------------------------------------------------
// Newton-Raphson

void cox_gradient_hessian(const RiskSetIndex& risk, const Matrix& x, const Vector& eta, Vector& gradient,
                          Matrix& hessian) {
  check_finite(eta);
  const Index p = x.cols();
  const auto& order = risk.order();
  const auto& groups = risk.groups();
  const double shift = eta.maxCoeff();
  gradient = Vector::Zero(p);
  hessian = Matrix::Zero(p, p);
  double s0 = 0.0;
  Vector s1 = Vector::Zero(p);
  Matrix s2 = Matrix::Zero(p, p);
  for (std::size_t g = groups.size(); g-- > 0;) {
    for (std::size_t pos = groups[g].begin; pos < groups[g].end; ++pos) {
      const Index i = static_cast<Index>(order[pos]);
      const double e = std::exp(eta(i) - shift);
      s0 += e;
      s1.noalias() += e * x.row(i).transpose();
      s2.selfadjointView<Eigen::Lower>().rankUpdate(x.row(i).transpose(), e);
      if (risk.events()[static_cast<std::size_t>(i)]) gradient -= x.row(i).transpose();
    }
    const double d = groups[g].deaths;
    if (d <= 0) continue;
    const Vector mean = s1 / s0;
    gradient.noalias() += d * mean;
    Matrix cov = s2.selfadjointView<Eigen::Lower>();
    cov /= s0;
    cov.noalias() -= mean * mean.transpose();
    hessian += d * cov;
  }
}

LinearSurvivalModel fit_cox_newton(const Matrix& x, std::span<const SurvivalOutcome> outcomes,
                                   const NewtonOptions& options) {
  const Index p = x.cols();
  Standardization st = standardize(x);
  std::vector<Index> active;
  for (Index j = 0; j < p; ++j)
    if (!st.constant[static_cast<std::size_t>(j)]) active.push_back(j);
  const Index q = static_cast<Index>(active.size());
  Matrix xa(x.rows(), q);
  for (Index k = 0; k < q; ++k) xa.col(k) = st.x.col(active[static_cast<std::size_t>(k)]);

  RiskSetIndex risk(outcomes);
  Vector beta = Vector::Zero(q);
  Vector eta = Vector::Zero(x.rows());
  double loss = cox_loss(risk, eta);
  int iterations = 0;
  bool converged = q == 0;
  for (; !converged && iterations < options.max_iter; ++iterations) {
    Vector grad;
    Matrix hess;
    cox_gradient_hessian(risk, xa, eta, grad, hess);
    Eigen::LLT<Matrix> llt(hess);
    if (llt.info() != Eigen::Success) {
      llt.compute(hess + 1e-8 * Matrix::Identity(q, q));
      if (llt.info() != Eigen::Success) throw NumericalFailure("singular Hessian in Cox Newton fit");
    }
    const Vector step = llt.solve(-grad);
    if (!step.allFinite()) throw NumericalFailure("non-finite Newton step");

    double t = 1.0;
    Vector trial_beta;
    Vector trial_eta;
    double trial_loss = std::numeric_limits<double>::infinity();
    for (int halving = 0; halving < 30; ++halving, t *= 0.5) {
      trial_beta = beta + t * step;
      trial_eta = xa * trial_beta;
      if (trial_eta.allFinite()) {
        try {
          trial_loss = cox_loss(risk, trial_eta);
        } catch (const NumericalFailure&) {
          trial_loss = std::numeric_limits<double>::infinity();
        }
        if (trial_loss <= loss) break;
      }
    }
    if (!(trial_loss <= loss)) {
      // No descent along the Newton direction: we are at the optimum to
      // machine precision.
      converged = true;
      break;
    }
    if (trial_beta.cwiseAbs().maxCoeff() > options.coefficient_cap) {
      throw NumericalFailure("coefficient cap reached (monotone likelihood)");
    }
    const double rel = (loss - trial_loss) / std::max(std::abs(trial_loss), 1e-12);
    beta = trial_beta;
    eta = trial_eta;
    loss = trial_loss;
    if (rel < options.tol) converged = true;
  }
  if (!converged) throw NumericalFailure("Cox Newton fit did not converge");

  Vector beta_std = Vector::Zero(p);
  for (Index k = 0; k < q; ++k) beta_std(active[static_cast<std::size_t>(k)]) = beta(k);
  LinearSurvivalModel m = make_linear_model(x, outcomes, st.to_original(beta_std), FeatureGroupMap::single(p));
  m.training_meta["iterations"] = iterations;
  m.training_meta["loss"] = loss;
  return m;
}

}  // namespace survbench
