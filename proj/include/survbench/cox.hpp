#pragma once

#include <map>
#include <span>
#include <string>
#include <vector>

#include "survbench/dataset.hpp"
#include "survbench/step_function.hpp"

namespace survbench {

// Observations sorted by time with ties grouped, built once per outcome
// vector and shared by every likelihood evaluation on it. Risk sets follow the
// Breslow convention R(t) = {l : t_l >= t}.
class RiskSetIndex {
 public:
  struct TimeGroup {
    std::size_t begin = 0;  // position range in order()
    std::size_t end = 0;
    double time = 0.0;
    double deaths = 0.0;
  };

  explicit RiskSetIndex(std::span<const SurvivalOutcome> outcomes);

  std::size_t n() const { return order_.size(); }
  const std::vector<std::size_t>& order() const { return order_; }
  const std::vector<TimeGroup>& groups() const { return groups_; }
  // Time group of each observation (by original index).
  std::size_t group_of(std::size_t obs) const { return group_of_[obs]; }
  const std::vector<int>& events() const { return events_; }
  double total_events() const { return total_events_; }

 private:
  std::vector<std::size_t> order_;
  std::vector<TimeGroup> groups_;
  std::vector<std::size_t> group_of_;
  std::vector<int> events_;
  double total_events_ = 0.0;
};

// Partial-likelihood quantities at a linear predictor eta (offset included).
struct CoxEvaluation {
  double loss = 0.0;  // negative partial log-likelihood
  Vector residual;    // -d loss / d eta (martingale-type residuals)
  Vector weight;      // e_i * A(t_i): a diagonal upper bound of the eta-Hessian
  Vector hessian;     // exact diagonal of the eta-Hessian
  // Pieces of the full Hessian: exp(eta - max eta) and d / S^2 per time group.
  Vector scaled_exp;
  std::vector<double> group_curvature;
};

// O(n) sweep; log-sum-exp stabilised by subtracting max(eta).
CoxEvaluation evaluate_cox(const RiskSetIndex& risk, const Vector& eta, bool with_weights = true);
double cox_loss(const RiskSetIndex& risk, const Vector& eta);
// H v for the full eta-Hessian in O(n); `ev` must carry weights.
Vector cox_hessian_product(const RiskSetIndex& risk, const CoxEvaluation& ev, const Vector& v);

// Convenience entry points on raw inputs. `offset` may be empty (all zero).
double neg_partial_loglik(const Matrix& x, std::span<const SurvivalOutcome> outcomes, const Vector& beta,
                          const Vector& offset = Vector());
Vector npl_gradient(const Matrix& x, std::span<const SurvivalOutcome> outcomes, const Vector& beta,
                    const Vector& offset = Vector());
// Negative gradient of the loss with respect to the linear predictor.
Vector boosting_residuals(std::span<const SurvivalOutcome> outcomes, const Vector& eta);

StepFunction nelson_aalen(std::span<const SurvivalOutcome> outcomes);
StepFunction kaplan_meier(std::span<const SurvivalOutcome> outcomes);

// Breslow cumulative baseline hazard for linear predictor x*beta - center.
StepFunction breslow_baseline(const Matrix& x, std::span<const SurvivalOutcome> outcomes, const Vector& beta,
                              double center = 0.0);

struct LinearSurvivalModel {
  Vector coefficients;          // original feature scale
  StepFunction baseline_cumhaz; // baseline for the centred predictor x*beta - lp_center
  double lp_center = 0.0;
  FeatureGroupMap groups;
  std::map<std::string, double> training_meta;

  double linear_predictor(const Eigen::Ref<const Vector>& x) const;
  // S(t|x) = exp(-Lambda0(t) exp(x'beta - center)) as a step function.
  StepFunction survival_curve(const Eigen::Ref<const Vector>& x) const;
  std::vector<double> predict_survival(const Eigen::Ref<const Vector>& x, std::span<const double> times) const;
};

// Wraps coefficients into a model with a Breslow baseline centred at the mean
// training linear predictor.
LinearSurvivalModel make_linear_model(const Matrix& x, std::span<const SurvivalOutcome> outcomes, Vector beta,
                                      FeatureGroupMap groups);

std::vector<double> predict_survival(const LinearSurvivalModel& model, const Eigen::Ref<const Vector>& x_new,
                                     std::span<const double> times);

struct NewtonOptions {
  int max_iter = 50;
  double tol = 1e-9;            // relative objective change
  double coefficient_cap = 50;  // |beta_j| on the standardized scale
};

// Unpenalized Cox fit by Newton-Raphson with step halving. Throws
// NumericalFailure on divergence (coefficient cap), non-convergence or a
// Hessian that stays singular after a ridge jitter.
LinearSurvivalModel fit_cox_newton(const Matrix& x, std::span<const SurvivalOutcome> outcomes,
                                   const NewtonOptions& options = {});

// Gradient (d loss / d beta) and Hessian of the loss for the columns of x at
// linear predictor eta.
void cox_gradient_hessian(const RiskSetIndex& risk, const Matrix& x, const Vector& eta, Vector& gradient,
                          Matrix& hessian);

}  // namespace survbench
