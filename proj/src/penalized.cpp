#include "survbench/penalized.hpp"

#include <algorithm>
#include <cassert>
#include <cmath>
#include <limits>
#include <numeric>

#include "survbench/error.hpp"
#include "survbench/rng.hpp"

namespace survbench {

namespace {

constexpr double kHugeLambda = 1e300;
constexpr int kMaxOuter = 200;

double soft_threshold(double z, double t) {
  if (z > t) return z - t;
  if (z < -t) return z + t;
  return 0.0;
}

Vector sparse_product(const Matrix& x, const Vector& beta) {
  Vector eta = Vector::Zero(x.rows());
  for (Index j = 0; j < beta.size(); ++j)
    if (beta(j) != 0.0) eta.noalias() += beta(j) * x.col(j);
  return eta;
}

// Lowest attainable Breslow loss: every tied event group dominates its risk set.
double saturated_loss(const RiskSetIndex& risk) {
  double s = 0.0;
  for (const auto& g : risk.groups())
    if (g.deaths > 1) s += g.deaths * std::log(g.deaths);
  return s;
}

Matrix select_columns(const Matrix& x, const std::vector<Index>& cols) {
  Matrix out(x.rows(), static_cast<Index>(cols.size()));
  for (std::size_t k = 0; k < cols.size(); ++k) out.col(static_cast<Index>(k)) = x.col(cols[k]);
  return out;
}

Matrix select_rows(const Matrix& x, const std::vector<std::size_t>& rows) {
  Matrix out(static_cast<Index>(rows.size()), x.cols());
  for (std::size_t r = 0; r < rows.size(); ++r) out.row(static_cast<Index>(r)) = x.row(static_cast<Index>(rows[r]));
  return out;
}

Vector select_entries(const Vector& v, const std::vector<std::size_t>& rows) {
  Vector out(static_cast<Index>(rows.size()));
  for (std::size_t r = 0; r < rows.size(); ++r) out(static_cast<Index>(r)) = v(static_cast<Index>(rows[r]));
  return out;
}

Vector zero_if_empty(const Vector& offset, Index n) {
  if (offset.size() == 0) return Vector::Zero(n);
  if (offset.size() != n) throw std::invalid_argument("offset length mismatch");
  if (!offset.allFinite()) throw NumericalFailure("non-finite offset");
  return offset;
}

}  // namespace

// ---------------------------------------------------------------------------
// CoxPathSolver

CoxPathSolver::CoxPathSolver(const Matrix& x_std, const RiskSetIndex& risk, Vector offset,
                             std::vector<double> penalty_factors, double alpha, int max_iter, double tol)
    : x_(x_std),
      risk_(risk),
      offset_(zero_if_empty(offset, x_std.rows())),
      pf_(std::move(penalty_factors)),
      alpha_(alpha),
      max_iter_(max_iter),
      tol_(tol) {
  if (pf_.empty()) pf_.assign(static_cast<std::size_t>(x_.cols()), 1.0);
  if (pf_.size() != static_cast<std::size_t>(x_.cols())) throw std::invalid_argument("penalty factor count mismatch");
  for (double w : pf_)
    if (!(w >= 0.0) || !std::isfinite(w)) throw std::invalid_argument("penalty factors must be finite and >= 0");
  if (!(alpha_ >= 0.0 && alpha_ <= 1.0)) throw std::invalid_argument("alpha must lie in [0, 1]");
}

double CoxPathSolver::objective(double lambda, const Vector& beta) const {
  const double n = static_cast<double>(x_.rows());
  double pen = 0.0;
  for (Index j = 0; j < beta.size(); ++j) {
    const double w = pf_[static_cast<std::size_t>(j)];
    pen += w * (alpha_ * std::abs(beta(j)) + 0.5 * (1.0 - alpha_) * beta(j) * beta(j));
  }
  return cox_loss(risk_, offset_ + sparse_product(x_, beta)) / n + lambda * pen;
}

std::size_t CoxPathSolver::nonzero_columns() const {
  if (!nonzero_columns_) {
    std::size_t count = 0;
    for (Index j = 0; j < x_.cols(); ++j)
      if (pf_[static_cast<std::size_t>(j)] > 0.0 && x_.col(j).squaredNorm() > 0.0) ++count;
    nonzero_columns_ = count;
  }
  return *nonzero_columns_;
}

const Matrix& CoxPathSolver::ridge_gram() const {
  if (ridge_gram_.size() == 0) {
    ridge_gram_ = Matrix::Zero(x_.rows(), x_.rows());
    for (Index j = 0; j < x_.cols(); ++j) {
      const double w = pf_[static_cast<std::size_t>(j)];
      if (w > 0.0) ridge_gram_.selfadjointView<Eigen::Lower>().rankUpdate(x_.col(j), 1.0 / w);
    }
    ridge_gram_ = ridge_gram_.selfadjointView<Eigen::Lower>();
  }
  return ridge_gram_;
}

void CoxPathSolver::solve(double lambda, Vector& beta) const {
  const Index n = x_.rows();
  const Index p = x_.cols();
  const double inv_n = 1.0 / static_cast<double>(n);
  if (beta.size() != p) beta = Vector::Zero(p);

  Vector eta = offset_ + sparse_product(x_, beta);
  Vector curvature(p);
  std::vector<Index> active;
  double current = objective(lambda, beta);
  for (int outer = 0; outer < kMaxOuter; ++outer) {
    // Proximal Newton: the quadratic model uses the full Hessian, applied
    // column by column in O(n); step-halving below keeps the descent monotone.
    const CoxEvaluation ev = evaluate_cox(risk_, eta, true);
    Vector r = ev.residual;  // u - H X (beta - beta_start)
    std::vector<Vector> hx(static_cast<std::size_t>(p));
    auto hessian_column = [&](Index j) -> const Vector& {
      auto& c = hx[static_cast<std::size_t>(j)];
      if (c.size() == 0) c = cox_hessian_product(risk_, ev, x_.col(j));
      return c;
    };
    // x_j' H x_j for every column at once: sum_i mu_i x_ij^2 minus
    // sum_g c_g (sum over the risk set of e_i x_ij)^2.
    curvature.noalias() = x_.array().square().matrix().transpose() * ev.weight;
    {
      const auto& groups = risk_.groups();
      const auto& order = risk_.order();
      Eigen::RowVectorXd tail = Eigen::RowVectorXd::Zero(p);
      for (std::size_t g = groups.size(); g-- > 0;) {
        for (std::size_t pos = groups[g].begin; pos < groups[g].end; ++pos) {
          const Index i = static_cast<Index>(order[pos]);
          tail.noalias() += ev.scaled_exp(i) * x_.row(i);
        }
        if (ev.group_curvature[g] > 0.0) curvature -= ev.group_curvature[g] * tail.transpose().cwiseAbs2();
      }
      curvature = (inv_n * curvature).cwiseMax(0.0);
    }
    const Vector beta_start = beta;
    Matrix g_dense;  // H/n as a dense matrix, built on demand
    Matrix gram;     // X_A' H X_A / n for gram_columns
    std::vector<Index> gram_columns;

    auto update = [&](Index j) -> double {
      const double v = curvature(j);
      if (v <= 1e-14) return 0.0;
      const double old = beta(j);
      const double wj = pf_[static_cast<std::size_t>(j)];
      const double z = v * old + inv_n * x_.col(j).dot(r);
      const double fresh = soft_threshold(z, lambda * alpha_ * wj) / (v + lambda * (1.0 - alpha_) * wj);
      const double delta = fresh - old;
      if (delta != 0.0) {
        r.noalias() -= delta * hessian_column(j);
        beta(j) = fresh;
      }
      return std::abs(delta);
    };

    // Step toward the exact minimizer of the model on the active set's sign
    // pattern, cut at the first sign change. Cyclic descent alone crawls when
    // the active columns are nearly collinear.
    auto newton_on_active = [&]() {
      std::vector<Index> nz;
      for (Index j : active)
        if (beta(j) != 0.0) nz.push_back(j);
      const Index k = static_cast<Index>(nz.size());
      if (k < 2) return;
      Vector grad(k), ridge(k);
      Matrix xa(n, k);
      for (Index a = 0; a < k; ++a) {
        const Index j = nz[static_cast<std::size_t>(a)];
        const double wj = pf_[static_cast<std::size_t>(j)];
        xa.col(a) = x_.col(j);
        const double sign = beta(j) > 0.0 ? 1.0 : -1.0;
        grad(a) = -inv_n * x_.col(j).dot(r) + lambda * wj * ((1.0 - alpha_) * beta(j) + alpha_ * sign);
        ridge(a) = lambda * (1.0 - alpha_) * wj;
      }
      Vector delta;
      double model_change = 0.0;
      if (k > n && ridge.minCoeff() > 0.0) {
        // More columns than rows: push-through identity with K = X D^-1 X',
        // (D + X'GX)^-1 = D^-1 - D^-1 X'G (I + K G)^-1 X D^-1, G = H/n.
        if (g_dense.size() == 0) {
          g_dense.resize(n, n);
          for (Index i = 0; i < n; ++i) g_dense.col(i) = inv_n * cox_hessian_product(risk_, ev, Vector::Unit(n, i));
        }
        const Vector dinv = ridge.cwiseInverse();
        Matrix kmat;
        if (static_cast<std::size_t>(k) == nonzero_columns()) {
          kmat = ridge_gram() / (lambda * (1.0 - alpha_));
        } else {
          kmat = xa * dinv.asDiagonal() * xa.transpose();
        }
        Matrix system = kmat * g_dense;
        system.diagonal().array() += 1.0;
        const Vector dg = dinv.cwiseProduct(grad);
        const Vector inner = system.partialPivLu().solve(xa * dg);
        delta = -(dg - dinv.cwiseProduct(xa.transpose() * (g_dense * inner)));
        if (!delta.allFinite()) return;
        const Vector xd = xa * delta;
        model_change = grad.dot(delta) + 0.5 * (delta.dot(ridge.cwiseProduct(delta)) + xd.dot(g_dense * xd));
      } else {
        if (nz != gram_columns) {
          Matrix hxa(n, k);
          for (Index a = 0; a < k; ++a) hxa.col(a) = hessian_column(nz[static_cast<std::size_t>(a)]);
          gram = inv_n * xa.transpose() * hxa;
          gram = 0.5 * (gram + gram.transpose()).eval();
          gram_columns = nz;
        }
        Matrix m = gram;
        m.diagonal() += ridge;
        const Eigen::LDLT<Matrix> ldlt(m);
        if (ldlt.info() != Eigen::Success) return;
        delta = -ldlt.solve(grad);
        if (!delta.allFinite()) return;
        model_change = grad.dot(delta) + 0.5 * delta.dot(m * delta);
      }
      if (!(model_change < 0.0)) return;
      // Stop at the first sign change; the model is convex along the step.
      double theta = 1.0;
      Index blocking = -1;
      for (Index a = 0; a < k; ++a) {
        const Index j = nz[static_cast<std::size_t>(a)];
        if (pf_[static_cast<std::size_t>(j)] == 0.0 || alpha_ == 0.0) continue;
        const double old = beta(j);
        if ((old + delta(a)) * old < 0.0 && -old / delta(a) < theta) {
          theta = -old / delta(a);
          blocking = a;
        }
      }
      Vector change = theta * delta;
      if (blocking >= 0) change(blocking) = -beta(nz[static_cast<std::size_t>(blocking)]);
      for (Index a = 0; a < k; ++a) beta(nz[static_cast<std::size_t>(a)]) += change(a);
      r.noalias() -= cox_hessian_product(risk_, ev, xa * change);
    };

    int sweeps = 0;
    bool inner_converged = false;
    while (sweeps < max_iter_) {
      double dmax = 0.0;
      for (Index j = 0; j < p; ++j) dmax = std::max(dmax, update(j));
      ++sweeps;
      if (dmax < tol_) {
        inner_converged = true;
        break;
      }
      active.clear();
      for (Index j = 0; j < p; ++j)
        if (beta(j) != 0.0) active.push_back(j);
      for (int cycle = 0; sweeps < max_iter_; ++cycle) {
        if (cycle % 20 == 0) newton_on_active();
        double amax = 0.0;
        for (Index j : active) amax = std::max(amax, update(j));
        ++sweeps;
        if (amax < tol_) break;
      }
    }
    // A truncated inner solve still decreases the model, so the outer loop
    // carries on from it.
    if (!beta.allFinite()) throw NumericalFailure("non-finite coefficients in coordinate descent");

    const Vector step = beta - beta_start;
    const double slack = 1e-13 * std::max(1.0, std::abs(current));
    double t = 1.0;
    double next = std::numeric_limits<double>::infinity();
    for (int halving = 0; halving < 40; ++halving, t *= 0.5) {
      beta = beta_start + t * step;
      try {
        next = objective(lambda, beta);
      } catch (const NumericalFailure&) {
        next = std::numeric_limits<double>::infinity();
      }
      if (next <= current + slack) break;
    }
    if (!(next <= current + slack)) {
      // No representable descent along the step: beta_start is stationary.
      beta = beta_start;
      return;
    }
    eta = offset_ + sparse_product(x_, beta);
    if (!eta.allFinite()) throw NumericalFailure("non-finite working response");
    assert(next <= current + slack);
    const double decrease = current - next;
    current = next;
    if (!inner_converged) continue;
    if (t * step.cwiseAbs().maxCoeff() < tol_) return;
    // Nearly flat directions late in an n < p path can keep moving
    // coefficients long after the objective has settled.
    if (decrease <= 1e-11 * std::max(1.0, std::abs(current))) return;
  }
  throw NumericalFailure("IRLS outer loop did not converge");
}

double CoxPathSolver::lambda_max() const {
  const Index p = x_.cols();
  Vector beta = Vector::Zero(p);
  if (std::any_of(pf_.begin(), pf_.end(), [](double w) { return w == 0.0; })) solve(kHugeLambda, beta);
  const CoxEvaluation ev = evaluate_cox(risk_, offset_ + sparse_product(x_, beta), false);
  const Vector g = x_.transpose() * ev.residual;
  const double a = std::max(alpha_, 1e-3);
  const double n = static_cast<double>(x_.rows());
  double lmax = 0.0;
  for (Index j = 0; j < p; ++j) {
    const double w = pf_[static_cast<std::size_t>(j)];
    if (w > 0.0) lmax = std::max(lmax, std::abs(g(j)) / (n * w * a));
  }
  if (!(lmax > 0.0)) return 1.0;
  // Nudge above the KKT boundary so rounding never leaves a 1-ulp coefficient.
  return lmax * (1.0 + 1e-10);
}

PathSolution CoxPathSolver::solve_path(const std::vector<double>& lambdas, bool early_stop) const {
  const Index p = x_.cols();
  PathSolution out;
  Vector beta = Vector::Zero(p);
  double null_loss = 0.0;
  const double sat = saturated_loss(risk_);
  if (early_stop) {
    Vector b0 = Vector::Zero(p);
    if (std::any_of(pf_.begin(), pf_.end(), [](double w) { return w == 0.0; })) solve(kHugeLambda, b0);
    null_loss = cox_loss(risk_, offset_ + sparse_product(x_, b0));
  }
  double previous_ratio = 0.0;
  for (std::size_t k = 0; k < lambdas.size(); ++k) {
    const Vector warm = beta;
    bool failed = false;
    double loss = std::numeric_limits<double>::quiet_NaN();
    try {
      solve(lambdas[k], beta);
      loss = cox_loss(risk_, offset_ + sparse_product(x_, beta));
    } catch (const NumericalFailure&) {
      failed = true;
      beta = warm;
    }
    out.lambdas.push_back(lambdas[k]);
    out.beta_std.push_back(beta);
    out.failed.push_back(failed);
    out.loss.push_back(loss);
    if (early_stop && !failed && null_loss - sat > 0.0) {
      const double ratio = (null_loss - loss) / (null_loss - sat);
      if (k >= 4 && (ratio > 0.999 || ratio - previous_ratio < 1e-5 * ratio)) break;
      previous_ratio = ratio;
    }
  }
  return out;
}

std::vector<double> log_spaced_path(double lambda_max, double min_ratio, int count) {
  std::vector<double> out;
  if (count <= 1) return {lambda_max};
  for (int k = 0; k < count; ++k) {
    out.push_back(lambda_max * std::pow(min_ratio, static_cast<double>(k) / (count - 1)));
  }
  return out;
}

double default_lambda_min_ratio(Index n, Index p) { return n < p ? 0.01 : 0.05; }

std::vector<LinearSurvivalModel> fit_penalized_path(const SurvivalDataset& data, const PenaltyConfig& cfg,
                                                    const Vector& offset) {
  const Standardization st = standardize(data.features);
  const RiskSetIndex risk(data.outcomes);
  CoxPathSolver solver(st.x, risk, offset, cfg.penalty_factors, cfg.alpha_elastic, cfg.max_iter, cfg.tol);
  std::vector<double> lambdas = cfg.lambda_path;
  const bool automatic = lambdas.empty();
  if (automatic) {
    const double ratio = cfg.lambda_min_ratio > 0 ? cfg.lambda_min_ratio : default_lambda_min_ratio(data.n(), data.p());
    lambdas = log_spaced_path(solver.lambda_max(), ratio, cfg.n_lambda);
  }
  const PathSolution path = solver.solve_path(lambdas, automatic && cfg.early_stop);
  std::vector<LinearSurvivalModel> models;
  for (std::size_t k = 0; k < path.lambdas.size(); ++k) {
    LinearSurvivalModel m = make_linear_model(data.features, data.outcomes, st.to_original(path.beta_std[k]), data.groups);
    m.training_meta["lambda"] = path.lambdas[k];
    m.training_meta["failed"] = path.failed[k] ? 1.0 : 0.0;
    models.push_back(std::move(m));
  }
  return models;
}

// ---------------------------------------------------------------------------
// Cross-validation

CvResult cross_validate_path(const Matrix& x, std::span<const SurvivalOutcome> outcomes, const Vector& offset_in,
                             const std::vector<double>& lambdas, const PathFitter& fitter, int k, std::uint64_t seed) {
  const Index n = x.rows();
  const Vector offset = zero_if_empty(offset_in, n);
  CvResult cv;
  cv.standardization = standardize(x);
  const RiskSetIndex risk(outcomes);
  cv.full_path = fitter(cv.standardization, risk, offset, lambdas, true);
  cv.lambdas = cv.full_path.lambdas;
  const std::size_t L = cv.lambdas.size();

  const std::vector<int> fold_of = inner_folds(outcomes, k, seed);
  const int n_folds = *std::max_element(fold_of.begin(), fold_of.end());
  std::vector<double> total(L, 0.0);
  std::vector<bool> any_fail(L, false);
  for (int f = 1; f <= n_folds; ++f) {
    std::vector<std::size_t> train;
    for (std::size_t i = 0; i < fold_of.size(); ++i)
      if (fold_of[i] != f) train.push_back(i);
    if (train.size() < 2) continue;
    Outcomes train_outcomes;
    for (auto i : train) train_outcomes.push_back(outcomes[i]);
    if (count_events(train_outcomes) == 0) continue;
    const Matrix x_train = select_rows(x, train);
    const Vector off_train = select_entries(offset, train);
    const Standardization st = standardize(x_train);
    const RiskSetIndex risk_train(train_outcomes);
    PathSolution path;
    try {
      path = fitter(st, risk_train, off_train, cv.lambdas, false);
    } catch (const NumericalFailure&) {
      std::fill(any_fail.begin(), any_fail.end(), true);
      continue;
    }
    for (std::size_t l = 0; l < L; ++l) {
      if (l >= path.failed.size() || path.failed[l]) {
        any_fail[l] = true;
        continue;
      }
      const Vector beta = st.to_original(path.beta_std[l]);
      try {
        const double full = cox_loss(risk, offset + sparse_product(x, beta));
        const double part = cox_loss(risk_train, off_train + sparse_product(x_train, beta));
        total[l] += 2.0 * (full - part);
      } catch (const NumericalFailure&) {
        any_fail[l] = true;
      }
    }
  }
  const double events = std::max(1.0, risk.total_events());
  cv.curve.assign(L, std::numeric_limits<double>::quiet_NaN());
  bool found = false;
  for (std::size_t l = 0; l < L; ++l) {
    if (any_fail[l] || cv.full_path.failed[l]) continue;
    cv.curve[l] = total[l] / events;
    // Strict comparison scanning from the largest lambda keeps ties sparse.
    if (!found || cv.curve[l] < cv.curve[cv.best_index]) {
      cv.best_index = l;
      found = true;
    }
  }
  if (!found) throw NumericalFailure("every lambda failed in cross-validation");
  cv.best_lambda = cv.lambdas[cv.best_index];
  return cv;
}

CvResult cv_select_lambda(const Matrix& x, std::span<const SurvivalOutcome> outcomes, const PenaltyConfig& cfg, int k,
                          std::uint64_t seed, const Vector& offset) {
  std::vector<double> lambdas = cfg.lambda_path;
  if (lambdas.empty()) {
    const Standardization st = standardize(x);
    const RiskSetIndex risk(outcomes);
    CoxPathSolver solver(st.x, risk, offset, cfg.penalty_factors, cfg.alpha_elastic, cfg.max_iter, cfg.tol);
    const double ratio = cfg.lambda_min_ratio > 0 ? cfg.lambda_min_ratio : default_lambda_min_ratio(x.rows(), x.cols());
    lambdas = log_spaced_path(solver.lambda_max(), ratio, cfg.n_lambda);
  }
  const bool early = cfg.early_stop && cfg.lambda_path.empty();
  PathFitter fitter = [&cfg, early](const Standardization& st, const RiskSetIndex& risk, const Vector& off,
                                    const std::vector<double>& path, bool full) {
    CoxPathSolver solver(st.x, risk, off, cfg.penalty_factors, cfg.alpha_elastic, cfg.max_iter, cfg.tol);
    return solver.solve_path(path, full && early);
  };
  return cross_validate_path(x, outcomes, offset, lambdas, fitter, k, seed);
}

CvResult cv_select_lambda(const SurvivalDataset& data, const PenaltyConfig& cfg, int k, std::uint64_t seed) {
  return cv_select_lambda(data.features, data.outcomes, cfg, k, seed);
}

Vector selected_coefficients(const CvResult& cv) {
  return cv.standardization.to_original(cv.full_path.beta_std[cv.best_index]);
}

// ---------------------------------------------------------------------------
// Group-structured learners

namespace {

std::vector<Index> non_constant(const Standardization& st) {
  std::vector<Index> out;
  for (std::size_t j = 0; j < st.constant.size(); ++j)
    if (!st.constant[j]) out.push_back(static_cast<Index>(j));
  return out;
}

void require_groups(const SurvivalDataset& data, std::size_t min_groups, const char* learner) {
  if (data.groups.size() < min_groups) {
    throw ConfigError(std::string(learner) + " needs at least " + std::to_string(min_groups) + " feature groups");
  }
}

void fill_cv_report(GroupPenaltyReport& r, const CvResult& cv) {
  r.selected_lambdas.push_back(cv.best_lambda);
  r.cv_lambdas = cv.lambdas;
  r.cv_curve = cv.curve;
}

}  // namespace

std::vector<double> preliminary_group_means(const SurvivalDataset& data, const std::vector<std::size_t>& groups, int k,
                                            std::uint64_t seed) {
  std::vector<double> means;
  for (std::size_t g : groups) {
    const auto& cols = data.groups.columns(g);
    const Matrix xg = select_columns(data.features, cols);
    const Standardization st = standardize(xg);
    if (non_constant(st).empty()) {
      means.push_back(0.0);
      continue;
    }
    PenaltyConfig cfg;
    cfg.alpha_elastic = 0.0;
    const CvResult cv = cv_select_lambda(xg, data.outcomes, cfg, k, derive_seed(seed, {static_cast<std::uint64_t>(g)}));
    means.push_back(cv.full_path.beta_std[cv.best_index].cwiseAbs().mean());
  }
  return means;
}

std::vector<double> ipf_penalty_factors(const std::vector<double>& group_means) {
  double largest = 0.0;
  for (double m : group_means) largest = std::max(largest, m);
  std::vector<double> out;
  for (double m : group_means) out.push_back(m > 0.0 && largest > 0.0 ? largest / m : 1e6);
  return out;
}

std::vector<std::size_t> priority_order_from_means(const std::vector<std::size_t>& groups,
                                                   const std::vector<double>& means) {
  std::vector<std::size_t> idx(groups.size());
  std::iota(idx.begin(), idx.end(), std::size_t{0});
  std::stable_sort(idx.begin(), idx.end(), [&](std::size_t a, std::size_t b) { return means[a] > means[b]; });
  std::vector<std::size_t> out;
  for (auto i : idx) out.push_back(groups[i]);
  return out;
}

GroupedFit fit_cv_lasso(const SurvivalDataset& data, const GroupedFitOptions& options) {
  PenaltyConfig cfg;
  const CvResult cv = cv_select_lambda(data.features, data.outcomes, cfg, options.inner_k, derive_seed(options.seed, {0}));
  GroupedFit fit;
  fit.model = make_linear_model(data.features, data.outcomes, selected_coefficients(cv), data.groups);
  fit.model.training_meta["lambda"] = cv.best_lambda;
  fit.report.group_names = data.groups.names();
  fill_cv_report(fit.report, cv);
  return fit;
}

GroupedFit fit_ts_ipf_lasso(const SurvivalDataset& data, const GroupedFitOptions& options) {
  require_groups(data, 2, "TS IPF-Lasso");
  std::vector<std::size_t> all(data.groups.size());
  std::iota(all.begin(), all.end(), std::size_t{0});
  GroupedFit fit;
  auto& report = fit.report;
  report.group_names = data.groups.names();
  report.group_means = preliminary_group_means(data, all, options.preliminary_k, derive_seed(options.seed, {1}));
  report.multipliers = ipf_penalty_factors(report.group_means);
  for (double m : report.group_means) report.skipped.push_back(!(m > 0.0));

  PenaltyConfig cfg;
  cfg.penalty_factors.resize(static_cast<std::size_t>(data.p()));
  for (Index j = 0; j < data.p(); ++j) {
    cfg.penalty_factors[static_cast<std::size_t>(j)] = report.multipliers[data.groups.group_of(j)];
  }
  const CvResult cv = cv_select_lambda(data.features, data.outcomes, cfg, options.inner_k, derive_seed(options.seed, {2}));
  fit.model = make_linear_model(data.features, data.outcomes, selected_coefficients(cv), data.groups);
  fit.model.training_meta["lambda"] = cv.best_lambda;
  fill_cv_report(report, cv);
  return fit;
}

GroupedFit fit_priority_lasso(const SurvivalDataset& data, bool favor_clinical, const GroupedFitOptions& options) {
  const Index n = data.n();
  const Index p = data.p();
  GroupedFit fit;
  auto& report = fit.report;
  report.group_names = data.groups.names();
  report.group_means.assign(data.groups.size(), std::numeric_limits<double>::quiet_NaN());
  report.skipped.assign(data.groups.size(), false);

  Vector beta = Vector::Zero(p);
  Vector offset = Vector::Zero(n);
  std::vector<std::size_t> remaining(data.groups.size());
  std::iota(remaining.begin(), remaining.end(), std::size_t{0});

  if (favor_clinical) {
    const auto clin = data.groups.clinical_index();
    if (!clin) throw ConfigError("priority-Lasso favoring needs a clinical group");
    const auto& cols = data.groups.columns(*clin);
    const Matrix xc = select_columns(data.features, cols);
    const LinearSurvivalModel cox = fit_cox_newton(xc, data.outcomes);
    for (std::size_t k = 0; k < cols.size(); ++k) beta(cols[k]) = cox.coefficients(static_cast<Index>(k));
    offset += xc * cox.coefficients;
    remaining.erase(std::find(remaining.begin(), remaining.end(), *clin));
    report.priority_order.push_back(*clin);
  }

  std::vector<std::size_t> order = remaining;
  if (remaining.size() >= 2) {
    const auto means = preliminary_group_means(data, remaining, options.preliminary_k, derive_seed(options.seed, {1}));
    for (std::size_t i = 0; i < remaining.size(); ++i) {
      report.group_means[remaining[i]] = means[i];
      report.skipped[remaining[i]] = !(means[i] > 0.0);
    }
    order = priority_order_from_means(remaining, means);
  }

  PenaltyConfig cfg;
  for (std::size_t step = 0; step < order.size(); ++step) {
    const std::size_t g = order[step];
    const auto& cols = data.groups.columns(g);
    const Matrix xg = select_columns(data.features, cols);
    const std::uint64_t seed = step == 0 && !favor_clinical ? derive_seed(options.seed, {0})
                                                            : derive_seed(options.seed, {0, static_cast<std::uint64_t>(step)});
    const CvResult cv = cv_select_lambda(xg, data.outcomes, cfg, options.inner_k, seed, offset);
    const Vector bg = selected_coefficients(cv);
    for (std::size_t k = 0; k < cols.size(); ++k) beta(cols[k]) = bg(static_cast<Index>(k));
    offset += xg * bg;
    report.priority_order.push_back(g);
    fill_cv_report(report, cv);
  }
  fit.model = make_linear_model(data.features, data.outcomes, beta, data.groups);
  return fit;
}

GroupedFit fit_grridge(const SurvivalDataset& data, const GrridgeOptions& options) {
  require_groups(data, 2, "GRridge");
  const Index n = data.n();
  const Index p = data.p();
  const std::size_t G = data.groups.size();

  PenaltyConfig cfg;
  cfg.alpha_elastic = 0.0;
  const CvResult cv = cv_select_lambda(data.features, data.outcomes, cfg, options.inner_k, derive_seed(options.seed, {0}));
  const double lambda = cv.best_lambda;
  const Standardization& st = cv.standardization;
  const RiskSetIndex risk(data.outcomes);
  Vector beta = cv.full_path.beta_std[cv.best_index];

  GroupedFit fit;
  auto& report = fit.report;
  report.group_names = data.groups.names();
  report.multipliers.assign(G, 1.0);
  report.skipped.assign(G, false);
  for (std::size_t g = 0; g < G; ++g) {
    const auto& cols = data.groups.columns(g);
    report.skipped[g] = std::all_of(cols.begin(), cols.end(), [&](Index j) { return st.constant[static_cast<std::size_t>(j)]; });
  }

  auto penalty_factors = [&]() {
    std::vector<double> pf(static_cast<std::size_t>(p));
    for (Index j = 0; j < p; ++j) pf[static_cast<std::size_t>(j)] = report.multipliers[data.groups.group_of(j)];
    return pf;
  };

  const double nd = static_cast<double>(n);
  for (int sweep = 0; sweep < options.sweeps; ++sweep) {
    const CoxEvaluation ev = evaluate_cox(risk, sparse_product(st.x, beta), true);
    std::vector<double> tau2(G, 0.0);
    double log_sum = 0.0;
    std::size_t active_groups = 0;
    for (std::size_t g = 0; g < G; ++g) {
      if (report.skipped[g]) continue;
      double acc = 0.0;
      std::size_t count = 0;
      for (Index j : data.groups.columns(g)) {
        if (st.constant[static_cast<std::size_t>(j)]) continue;
        const double h = ev.weight.dot(st.x.col(j).cwiseAbs2());
        acc += beta(j) * beta(j) + 1.0 / (h + nd * lambda * report.multipliers[g]);
        ++count;
      }
      tau2[g] = acc / static_cast<double>(count);
      log_sum += std::log(1.0 / tau2[g]);
      ++active_groups;
    }
    if (active_groups == 0) break;
    const double geo = std::exp(log_sum / static_cast<double>(active_groups));
    for (std::size_t g = 0; g < G; ++g) {
      if (report.skipped[g]) {
        report.multipliers[g] = options.multiplier_cap;
        continue;
      }
      report.multipliers[g] = std::clamp((1.0 / tau2[g]) / geo, 1.0 / options.multiplier_cap, options.multiplier_cap);
    }
    CoxPathSolver solver(st.x, risk, Vector(), penalty_factors(), 0.0, 10000, 1e-7);
    solver.solve(lambda, beta);
  }

  // Post-hoc selection: keep the maxsel largest standardized coefficients.
  std::vector<Index> candidates = non_constant(st);
  if (static_cast<int>(candidates.size()) > options.maxsel) {
    std::stable_sort(candidates.begin(), candidates.end(),
                     [&](Index a, Index b) { return std::abs(beta(a)) > std::abs(beta(b)); });
    candidates.resize(static_cast<std::size_t>(options.maxsel));
    std::sort(candidates.begin(), candidates.end());
    const Matrix xk = select_columns(st.x, candidates);
    std::vector<double> pf;
    Vector bk(static_cast<Index>(candidates.size()));
    for (std::size_t k = 0; k < candidates.size(); ++k) {
      pf.push_back(report.multipliers[data.groups.group_of(candidates[k])]);
      bk(static_cast<Index>(k)) = beta(candidates[k]);
    }
    CoxPathSolver solver(xk, risk, Vector(), pf, 0.0, 10000, 1e-7);
    solver.solve(lambda, bk);
    beta.setZero();
    for (std::size_t k = 0; k < candidates.size(); ++k) beta(candidates[k]) = bk(static_cast<Index>(k));
  }

  fit.model = make_linear_model(data.features, data.outcomes, st.to_original(beta), data.groups);
  fit.model.training_meta["lambda"] = lambda;
  fill_cv_report(report, cv);
  return fit;
}

}  // namespace survbench
