#pragma once

#include <cstdint>
#include <functional>
#include <optional>
#include <string>
#include <vector>

#include "survbench/cox.hpp"
#include "survbench/dataset.hpp"

namespace survbench {

struct PenaltyConfig {
  std::vector<double> lambda_path;      // strictly decreasing; empty = automatic
  std::vector<double> penalty_factors;  // one per feature, 0 = unpenalized; empty = all 1
  double alpha_elastic = 1.0;           // 1 = Lasso, 0 = ridge
  int max_iter = 10000;                 // coordinate sweeps per lambda
  double tol = 1e-7;                    // max coefficient change
  int n_lambda = 100;
  double lambda_min_ratio = 0.0;        // 0 = automatic
  // Stop the automatic path once the deviance ratio saturates.
  bool early_stop = true;
};

// Coefficients of one path, standardized scale, one entry per lambda.
struct PathSolution {
  std::vector<double> lambdas;
  std::vector<Vector> beta_std;
  std::vector<bool> failed;
  std::vector<double> loss;  // negative partial log-likelihood at each solution
};

// Elastic-net Cox path solver on standardized features: IRLS outer loop on the
// full partial-likelihood Hessian with step-halving, cyclic coordinate descent
// with soft-thresholding inside, warm starts and active-set cycling.
class CoxPathSolver {
 public:
  CoxPathSolver(const Matrix& x_std, const RiskSetIndex& risk, Vector offset, std::vector<double> penalty_factors,
                double alpha, int max_iter, double tol);

  // Minimizes loss/n + lambda * sum_j w_j [alpha |b_j| + (1-alpha) b_j^2 / 2]
  // starting from `beta`. Throws NumericalFailure on non-finite iterates.
  void solve(double lambda, Vector& beta) const;

  // Smallest lambda with every penalized coefficient at zero (alpha is floored
  // at 1e-3 so a ridge path gets a finite start).
  double lambda_max() const;

  // Objective value at beta for the given lambda.
  double objective(double lambda, const Vector& beta) const;

  PathSolution solve_path(const std::vector<double>& lambdas, bool early_stop) const;

  const Vector& offset() const { return offset_; }

 private:
  // Penalized columns that are not identically zero.
  std::size_t nonzero_columns() const;
  // sum_j x_j x_j' / w_j over penalized columns, cached.
  const Matrix& ridge_gram() const;

  const Matrix& x_;
  const RiskSetIndex& risk_;
  Vector offset_;
  std::vector<double> pf_;
  double alpha_;
  int max_iter_;
  double tol_;
  mutable std::optional<std::size_t> nonzero_columns_;
  mutable Matrix ridge_gram_;
};

std::vector<double> log_spaced_path(double lambda_max, double min_ratio, int count);
// 0.01 when n < p, 0.05 otherwise.
double default_lambda_min_ratio(Index n, Index p);

// Fits the full path; coefficients are returned on the original scale. Models
// whose lambda failed numerically carry training_meta["failed"] = 1.
std::vector<LinearSurvivalModel> fit_penalized_path(const SurvivalDataset& data, const PenaltyConfig& cfg,
                                                    const Vector& offset = Vector());

// Produces standardized-scale coefficient paths for one training set.
using PathFitter = std::function<PathSolution(const Standardization&, const RiskSetIndex&, const Vector& offset,
                                              const std::vector<double>& lambdas, bool early_stop)>;

struct CvResult {
  std::vector<double> lambdas;
  std::vector<double> curve;  // mean cross-validated deviance per event; NaN where every fold failed
  std::size_t best_index = 0;
  double best_lambda = 0.0;
  PathSolution full_path;     // on the complete data
  Standardization standardization;
};

// Inner k-fold CV with the cross-validated partial likelihood
// 2 * [loss_full(b_-k) - loss_train(b_-k)] summed over folds and divided by
// the event count. Ties go to the larger lambda. Throws NumericalFailure when
// every fold fails at every lambda.
CvResult cross_validate_path(const Matrix& x, std::span<const SurvivalOutcome> outcomes, const Vector& offset,
                             const std::vector<double>& lambdas, const PathFitter& fitter, int k, std::uint64_t seed);

// Lasso/elastic-net with lambda chosen by inner CV.
CvResult cv_select_lambda(const Matrix& x, std::span<const SurvivalOutcome> outcomes, const PenaltyConfig& cfg,
                          int k, std::uint64_t seed, const Vector& offset = Vector());
CvResult cv_select_lambda(const SurvivalDataset& data, const PenaltyConfig& cfg, int k, std::uint64_t seed);

// Coefficients (original scale) at the CV-selected lambda.
Vector selected_coefficients(const CvResult& cv);

struct GroupPenaltyReport {
  std::vector<std::string> group_names;
  std::vector<double> group_means;          // mean |b| per group from the preliminary ridge fits
  std::vector<double> multipliers;          // penalty factors (IPF) or lambda'_g (GRridge)
  std::vector<std::size_t> priority_order;  // group indices, fitted first to last
  std::vector<bool> skipped;                // degenerate groups
  std::vector<double> selected_lambdas;
  std::vector<double> cv_lambdas;
  std::vector<double> cv_curve;
};

struct GroupedFitOptions {
  int inner_k = 10;
  int preliminary_k = 5;
  std::uint64_t seed = 1;
};

struct GroupedFit {
  LinearSurvivalModel model;
  GroupPenaltyReport report;
};

// Per-group ridge fits (CV-tuned lambda); mean |coefficient| on the
// standardized scale for each listed group. Groups whose columns are all
// constant report 0.
std::vector<double> preliminary_group_means(const SurvivalDataset& data, const std::vector<std::size_t>& groups,
                                            int k, std::uint64_t seed);

// Inverse-mean penalty factors normalized so the smallest is 1; zero means get
// 1e6.
std::vector<double> ipf_penalty_factors(const std::vector<double>& group_means);

// Groups sorted by descending mean (ties keep the listed order).
std::vector<std::size_t> priority_order_from_means(const std::vector<std::size_t>& groups,
                                                   const std::vector<double>& means);

GroupedFit fit_cv_lasso(const SurvivalDataset& data, const GroupedFitOptions& options);
GroupedFit fit_ts_ipf_lasso(const SurvivalDataset& data, const GroupedFitOptions& options);
GroupedFit fit_priority_lasso(const SurvivalDataset& data, bool favor_clinical, const GroupedFitOptions& options);

struct GrridgeOptions {
  int inner_k = 10;
  int maxsel = 1000;
  int sweeps = 3;
  double multiplier_cap = 1e4;
  std::uint64_t seed = 1;
};

GroupedFit fit_grridge(const SurvivalDataset& data, const GrridgeOptions& options);

// Sparse group Lasso on standardized features:
// loss/n + (1-alpha) lambda sum_g sqrt(p_g) ||b_g||_2 + alpha lambda ||b||_1,
// by blockwise proximal gradient with backtracking.
class SglSolver {
 public:
  SglSolver(const Matrix& x_std, const RiskSetIndex& risk, Vector offset, const FeatureGroupMap& groups,
            double alpha, int max_iter = 10000, double tol = 1e-8);

  void solve(double lambda, Vector& beta) const;
  double lambda_max() const;
  double objective(double lambda, const Vector& beta) const;
  PathSolution solve_path(const std::vector<double>& lambdas) const;

 private:
  const Matrix& x_;
  const RiskSetIndex& risk_;
  Vector offset_;
  const FeatureGroupMap& groups_;
  double alpha_;
  int max_iter_;
  double tol_;
};

struct SglOptions {
  double alpha = 0.95;
  int n_lambda = 20;
  double lambda_min_ratio = 0.05;
  int inner_k = 10;
  std::uint64_t seed = 1;
  double tol = 1e-8;
};

GroupedFit fit_sgl(const SurvivalDataset& data, const SglOptions& options);

}  // namespace survbench
