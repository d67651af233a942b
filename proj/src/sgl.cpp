#include <algorithm>
#include <cmath>
#include <limits>

#include "survbench/error.hpp"
#include "survbench/penalized.hpp"
#include "survbench/rng.hpp"

namespace survbench {

namespace {

constexpr int kMaxBlockSteps = 200;
constexpr int kMaxHalvings = 60;

Vector soft(const Vector& v, double t) {
  return v.unaryExpr([t](double z) { return z > t ? z - t : (z < -t ? z + t : 0.0); });
}

// prox of t * [a ||b||_1 + c ||b||_2]
Vector sgl_prox(const Vector& v, double t, double a, double c) {
  Vector u = soft(v, t * a);
  const double norm = u.norm();
  if (norm <= t * c) return Vector::Zero(v.size());
  return u * (1.0 - t * c / norm);
}

Vector block_times(const Matrix& x, const std::vector<Index>& cols, const Vector& b) {
  Vector out = Vector::Zero(x.rows());
  for (std::size_t k = 0; k < cols.size(); ++k)
    if (b(static_cast<Index>(k)) != 0.0) out.noalias() += b(static_cast<Index>(k)) * x.col(cols[k]);
  return out;
}

Vector block_gradient(const Matrix& x, const std::vector<Index>& cols, const Vector& residual, double inv_n) {
  Vector g(static_cast<Index>(cols.size()));
  for (std::size_t k = 0; k < cols.size(); ++k) g(static_cast<Index>(k)) = -inv_n * x.col(cols[k]).dot(residual);
  return g;
}

}  // namespace

SglSolver::SglSolver(const Matrix& x_std, const RiskSetIndex& risk, Vector offset, const FeatureGroupMap& groups,
                     double alpha, int max_iter, double tol)
    : x_(x_std),
      risk_(risk),
      offset_(offset.size() == 0 ? Vector::Zero(x_std.rows()) : std::move(offset)),
      groups_(groups),
      alpha_(alpha),
      max_iter_(max_iter),
      tol_(tol) {
  if (groups_.n_features() != x_.cols()) throw std::invalid_argument("group map does not match the feature count");
  if (!(alpha_ >= 0.0 && alpha_ <= 1.0)) throw std::invalid_argument("alpha must lie in [0, 1]");
}

double SglSolver::objective(double lambda, const Vector& beta) const {
  const double n = static_cast<double>(x_.rows());
  double pen = 0.0;
  for (std::size_t g = 0; g < groups_.size(); ++g) {
    const auto& cols = groups_.columns(g);
    double l1 = 0.0, l2 = 0.0;
    for (Index j : cols) {
      l1 += std::abs(beta(j));
      l2 += beta(j) * beta(j);
    }
    pen += alpha_ * l1 + (1.0 - alpha_) * std::sqrt(static_cast<double>(cols.size())) * std::sqrt(l2);
  }
  return cox_loss(risk_, offset_ + x_ * beta) / n + lambda * pen;
}

void SglSolver::solve(double lambda, Vector& beta) const {
  const double inv_n = 1.0 / static_cast<double>(x_.rows());
  if (beta.size() != x_.cols()) beta = Vector::Zero(x_.cols());
  const double a = alpha_ * lambda;
  Vector eta = offset_ + x_ * beta;
  std::vector<double> step(groups_.size(), 1.0);

  for (int sweep = 0; sweep < max_iter_; ++sweep) {
    double max_change = 0.0;
    for (std::size_t g = 0; g < groups_.size(); ++g) {
      const auto& cols = groups_.columns(g);
      const double c = (1.0 - alpha_) * lambda * std::sqrt(static_cast<double>(cols.size()));
      Vector bg(static_cast<Index>(cols.size()));
      for (std::size_t k = 0; k < cols.size(); ++k) bg(static_cast<Index>(k)) = beta(cols[k]);
      const Vector before = bg;

      // Group-zero check with the block removed.
      Vector eta_without = bg.isZero(0.0) ? eta : Vector(eta - block_times(x_, cols, bg));
      const CoxEvaluation ev0 = evaluate_cox(risk_, eta_without, false);
      const Vector g0 = block_gradient(x_, cols, ev0.residual, inv_n);
      if (soft(g0, a).norm() <= c) {
        bg.setZero();
        eta = std::move(eta_without);
      } else {
        double t = step[g];
        for (int it = 0; it < kMaxBlockSteps; ++it) {
          const CoxEvaluation ev = evaluate_cox(risk_, eta, false);
          const double f = ev.loss * inv_n;
          const Vector grad = block_gradient(x_, cols, ev.residual, inv_n);
          Vector candidate, delta, eta_c;
          int halvings = 0;
          for (;; ++halvings) {
            if (halvings > kMaxHalvings) throw NumericalFailure("sparse group lasso backtracking failed");
            candidate = sgl_prox(bg - t * grad, t, a, c);
            delta = candidate - bg;
            eta_c = eta + block_times(x_, cols, delta);
            const double fc = cox_loss(risk_, eta_c) * inv_n;
            if (std::isfinite(fc) && fc <= f + grad.dot(delta) + delta.squaredNorm() / (2.0 * t) + 1e-15 * std::abs(f))
              break;
            t *= 0.5;
          }
          bg = candidate;
          eta = std::move(eta_c);
          if (halvings == 0) t *= 1.25;
          if (delta.cwiseAbs().maxCoeff() < 0.1 * tol_) break;
        }
        step[g] = t;
      }
      if (!bg.allFinite()) throw NumericalFailure("non-finite sparse group lasso iterate");
      for (std::size_t k = 0; k < cols.size(); ++k) beta(cols[k]) = bg(static_cast<Index>(k));
      if (bg.size() > 0) max_change = std::max(max_change, (bg - before).cwiseAbs().maxCoeff());
    }
    if (max_change < tol_) return;
  }
  throw NumericalFailure("sparse group lasso did not converge");
}

double SglSolver::lambda_max() const {
  const double inv_n = 1.0 / static_cast<double>(x_.rows());
  const CoxEvaluation ev = evaluate_cox(risk_, offset_, false);
  double lmax = 0.0;
  for (std::size_t g = 0; g < groups_.size(); ++g) {
    const auto& cols = groups_.columns(g);
    const Vector grad = block_gradient(x_, cols, ev.residual, inv_n);
    const double root = std::sqrt(static_cast<double>(cols.size()));
    if (grad.isZero(0.0)) continue;
    // Smallest lambda with ||S(grad, alpha*lambda)|| <= (1-alpha)*lambda*sqrt(p_g).
    double hi = std::numeric_limits<double>::infinity();
    if (alpha_ > 0.0) hi = grad.cwiseAbs().maxCoeff() / alpha_;
    if (alpha_ < 1.0) hi = std::min(hi, grad.norm() / ((1.0 - alpha_) * root));
    double lo = 0.0;
    for (int it = 0; it < 200 && hi - lo > 1e-15 * hi; ++it) {
      const double mid = 0.5 * (lo + hi);
      if (soft(grad, alpha_ * mid).norm() <= (1.0 - alpha_) * mid * root)
        hi = mid;
      else
        lo = mid;
    }
    lmax = std::max(lmax, hi);
  }
  if (!(lmax > 0.0)) return 1.0;
  return lmax * (1.0 + 1e-9);
}

PathSolution SglSolver::solve_path(const std::vector<double>& lambdas) const {
  PathSolution out;
  Vector beta = Vector::Zero(x_.cols());
  for (double lambda : lambdas) {
    const Vector warm = beta;
    bool failed = false;
    double loss = std::numeric_limits<double>::quiet_NaN();
    try {
      solve(lambda, beta);
      loss = cox_loss(risk_, offset_ + x_ * beta);
    } catch (const NumericalFailure&) {
      failed = true;
      beta = warm;
    }
    out.lambdas.push_back(lambda);
    out.beta_std.push_back(beta);
    out.failed.push_back(failed);
    out.loss.push_back(loss);
  }
  return out;
}

GroupedFit fit_sgl(const SurvivalDataset& data, const SglOptions& options) {
  const Standardization st = standardize(data.features);
  const RiskSetIndex risk(data.outcomes);
  const FeatureGroupMap& groups = data.groups;
  SglSolver solver(st.x, risk, Vector(), groups, options.alpha, 10000, options.tol);
  const std::vector<double> lambdas = log_spaced_path(solver.lambda_max(), options.lambda_min_ratio, options.n_lambda);
  const double alpha = options.alpha;
  const double tol = options.tol;
  PathFitter fitter = [&groups, alpha, tol](const Standardization& s, const RiskSetIndex& r, const Vector& off,
                                            const std::vector<double>& path, bool) {
    SglSolver fold_solver(s.x, r, off, groups, alpha, 10000, tol);
    return fold_solver.solve_path(path);
  };
  const CvResult cv = cross_validate_path(data.features, data.outcomes, Vector(), lambdas, fitter, options.inner_k,
                                          derive_seed(options.seed, {0}));
  GroupedFit fit;
  fit.model = make_linear_model(data.features, data.outcomes, selected_coefficients(cv), data.groups);
  fit.model.training_meta["lambda"] = cv.best_lambda;
  fit.report.group_names = data.groups.names();
  fit.report.selected_lambdas.push_back(cv.best_lambda);
  fit.report.cv_lambdas = cv.lambdas;
  fit.report.cv_curve = cv.curve;
  return fit;
}

}  // namespace survbench
