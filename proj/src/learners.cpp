#include "survbench/learners.hpp"

#include <algorithm>
#include <cmath>
#include <map>
#include <set>

#include "survbench/boosting.hpp"
#include "survbench/cox.hpp"
#include "survbench/error.hpp"
#include "survbench/forest.hpp"
#include "survbench/penalized.hpp"
#include "survbench/rng.hpp"

namespace survbench {

namespace {

const std::vector<std::pair<Method, std::string>>& method_table() {
  static const std::vector<std::pair<Method, std::string>> table{
      {Method::kaplan_meier, "kaplan_meier"},
      {Method::clinical_cox, "clinical_cox"},
      {Method::lasso, "lasso"},
      {Method::ipflasso, "ipflasso"},
      {Method::prioritylasso, "prioritylasso"},
      {Method::prioritylasso_favoring, "prioritylasso_favoring"},
      {Method::grridge, "grridge"},
      {Method::sgl, "sgl"},
      {Method::glmboost, "glmboost"},
      {Method::coxboost, "coxboost"},
      {Method::coxboost_favoring, "coxboost_favoring"},
      {Method::rsf, "rsf"},
      {Method::block_forest, "block_forest"},
  };
  return table;
}

std::set<std::string> allowed_overrides(Method m) {
  switch (m) {
    case Method::kaplan_meier:
    case Method::clinical_cox:
      return {};
    case Method::lasso:
      return {"inner_k"};
    case Method::ipflasso:
    case Method::prioritylasso:
    case Method::prioritylasso_favoring:
      return {"inner_k", "preliminary_k"};
    case Method::grridge:
      return {"inner_k", "maxsel", "sweeps"};
    case Method::sgl:
      return {"inner_k", "alpha", "n_lambda", "lambda_min_ratio"};
    case Method::glmboost:
      return {"inner_k", "m_stop", "m_grid_max", "nu"};
    case Method::coxboost:
    case Method::coxboost_favoring:
      return {"inner_k", "m_stop", "m_grid_max", "penalty"};
    case Method::rsf:
      return {"n_trees", "mtry", "min_node_size", "min_node_deaths"};
    case Method::block_forest:
      return {"n_trees", "weight_trials", "pilot_trees", "min_node_size", "min_node_deaths", "block_weights"};
  }
  return {};
}

template <class T>
T get_or(const nlohmann::json& j, const char* key, T fallback) {
  if (!j.contains(key)) return fallback;
  try {
    return j.at(key).get<T>();
  } catch (const nlohmann::json::exception& e) {
    throw ConfigError(std::string("bad value for override '") + key + "': " + e.what());
  }
}

std::optional<std::size_t> clinical_group(const SurvivalDataset& data) {
  return data.groups.clinical_index();
}

class KaplanMeierLearner final : public FittedLearner {
 public:
  explicit KaplanMeierLearner(const SurvivalDataset& train) : curve_(kaplan_meier(train.outcomes)) {}
  std::vector<double> risk_scores(const Matrix& x) const override {
    return std::vector<double>(static_cast<std::size_t>(x.rows()), 0.0);
  }
  std::vector<StepFunction> survival_curves(const Matrix& x) const override {
    return std::vector<StepFunction>(static_cast<std::size_t>(x.rows()), curve_);
  }

 private:
  StepFunction curve_;
};

class LinearLearner final : public FittedLearner {
 public:
  explicit LinearLearner(LinearSurvivalModel model) : model_(std::move(model)) {}
  std::vector<double> risk_scores(const Matrix& x) const override {
    const Vector lp = x * model_.coefficients;
    return std::vector<double>(lp.data(), lp.data() + lp.size());
  }
  std::vector<StepFunction> survival_curves(const Matrix& x) const override {
    std::vector<StepFunction> out;
    for (Index i = 0; i < x.rows(); ++i) out.push_back(model_.survival_curve(x.row(i).transpose()));
    return out;
  }
  std::optional<Vector> coefficients() const override { return model_.coefficients; }

 private:
  LinearSurvivalModel model_;
};

class ForestLearner final : public FittedLearner {
 public:
  explicit ForestLearner(ForestModel forest) : forest_(std::move(forest)) {}
  std::vector<double> risk_scores(const Matrix& x) const override {
    std::vector<double> out;
    for (Index i = 0; i < x.rows(); ++i) out.push_back(forest_.risk_score(x.row(i).transpose()));
    return out;
  }
  std::vector<StepFunction> survival_curves(const Matrix& x) const override {
    std::vector<StepFunction> out;
    for (Index i = 0; i < x.rows(); ++i) out.push_back(forest_.predict_survival(x.row(i).transpose()));
    return out;
  }

 private:
  ForestModel forest_;
};

std::unique_ptr<FittedLearner> linear(LinearSurvivalModel m) { return std::make_unique<LinearLearner>(std::move(m)); }

LinearSurvivalModel fit_clinical_cox(const SurvivalDataset& train) {
  const auto clin = clinical_group(train);
  if (!clin) throw ConfigError("clinical_cox needs a clinical group");
  const auto& cols = train.groups.columns(*clin);
  Matrix xc(train.n(), static_cast<Index>(cols.size()));
  for (std::size_t k = 0; k < cols.size(); ++k) xc.col(static_cast<Index>(k)) = train.features.col(cols[k]);
  const LinearSurvivalModel sub = fit_cox_newton(xc, train.outcomes);
  Vector beta = Vector::Zero(train.p());
  for (std::size_t k = 0; k < cols.size(); ++k) beta(cols[k]) = sub.coefficients(static_cast<Index>(k));
  return make_linear_model(train.features, train.outcomes, beta, train.groups);
}

}  // namespace

const std::vector<std::string>& method_ids() {
  static const std::vector<std::string> ids = [] {
    std::vector<std::string> v;
    for (const auto& [m, id] : method_table()) v.push_back(id);
    return v;
  }();
  return ids;
}

std::optional<Method> parse_method(const std::string& id) {
  for (const auto& [m, name] : method_table())
    if (name == id) return m;
  return std::nullopt;
}

std::string method_id(Method m) {
  for (const auto& [method, name] : method_table())
    if (method == m) return name;
  return "unknown";
}

std::string structure_class_name(StructureClass c) {
  switch (c) {
    case StructureClass::reference:
      return "reference";
    case StructureClass::naive:
      return "naive";
    case StructureClass::structured:
      return "structured";
    case StructureClass::structured_favoring:
      return "structured_favoring";
  }
  return "unknown";
}

StructureClass LearnerSpec::structure_class() const {
  if (method == Method::kaplan_meier || method == Method::clinical_cox) return StructureClass::reference;
  if (!uses_group_structure) return StructureClass::naive;
  return favors_clinical ? StructureClass::structured_favoring : StructureClass::structured;
}

LearnerSpec make_learner(std::string name, Method method, nlohmann::json overrides) {
  if (overrides.is_null()) overrides = nlohmann::json::object();
  if (!overrides.is_object()) throw ConfigError("learner overrides must be an object");
  const auto allowed = allowed_overrides(method);
  for (const auto& [key, value] : overrides.items()) {
    if (!allowed.count(key)) {
      std::string msg = "unknown override '" + key + "' for " + method_id(method);
      if (!allowed.empty()) {
        msg += " (allowed:";
        for (const auto& a : allowed) msg += " " + a;
        msg += ")";
      }
      throw ConfigError(msg);
    }
  }
  LearnerSpec spec;
  spec.name = std::move(name);
  spec.method = method;
  spec.overrides = std::move(overrides);
  switch (method) {
    case Method::ipflasso:
    case Method::prioritylasso:
    case Method::grridge:
    case Method::sgl:
    case Method::block_forest:
      spec.uses_group_structure = true;
      break;
    case Method::prioritylasso_favoring:
    case Method::coxboost_favoring:
      spec.uses_group_structure = true;
      spec.favors_clinical = true;
      break;
    default:
      break;
  }
  return spec;
}

std::unique_ptr<FittedLearner> fit_learner(const LearnerSpec& spec, const SurvivalDataset& train, std::uint64_t seed,
                                           const LearnerDefaults& defaults) {
  const auto& o = spec.overrides;
  const int inner_k = get_or(o, "inner_k", defaults.inner_k);
  switch (spec.method) {
    case Method::kaplan_meier:
      return std::make_unique<KaplanMeierLearner>(train);
    case Method::clinical_cox:
      return linear(fit_clinical_cox(train));
    case Method::lasso:
    case Method::ipflasso:
    case Method::prioritylasso:
    case Method::prioritylasso_favoring: {
      GroupedFitOptions opts;
      opts.inner_k = inner_k;
      opts.preliminary_k = get_or(o, "preliminary_k", opts.preliminary_k);
      opts.seed = seed;
      if (spec.method == Method::lasso) return linear(fit_cv_lasso(train, opts).model);
      if (spec.method == Method::ipflasso) return linear(fit_ts_ipf_lasso(train, opts).model);
      return linear(fit_priority_lasso(train, spec.method == Method::prioritylasso_favoring, opts).model);
    }
    case Method::grridge: {
      GrridgeOptions opts;
      opts.inner_k = inner_k;
      opts.maxsel = get_or(o, "maxsel", opts.maxsel);
      opts.sweeps = get_or(o, "sweeps", opts.sweeps);
      opts.seed = seed;
      return linear(fit_grridge(train, opts).model);
    }
    case Method::sgl: {
      SglOptions opts;
      opts.inner_k = inner_k;
      opts.alpha = get_or(o, "alpha", opts.alpha);
      opts.n_lambda = get_or(o, "n_lambda", opts.n_lambda);
      opts.lambda_min_ratio = get_or(o, "lambda_min_ratio", opts.lambda_min_ratio);
      opts.seed = seed;
      return linear(fit_sgl(train, opts).model);
    }
    case Method::glmboost:
    case Method::coxboost:
    case Method::coxboost_favoring: {
      BoostingConfig cfg;
      cfg.inner_k = inner_k;
      cfg.seed = seed;
      if (o.contains("m_stop")) cfg.m_stop = get_or(o, "m_stop", 0);
      cfg.m_grid_max = get_or(o, "m_grid_max", 0);
      if (spec.method == Method::glmboost) {
        cfg.nu = get_or(o, "nu", cfg.nu);
        return linear(fit_glmboost_cox(train, cfg).model);
      }
      if (o.contains("penalty")) cfg.penalty = get_or(o, "penalty", 0.0);
      if (spec.method == Method::coxboost_favoring) {
        const auto clin = clinical_group(train);
        if (!clin) throw ConfigError("coxboost_favoring needs a clinical group");
        cfg.mandatory_features = train.groups.columns(*clin);
      }
      return linear(fit_coxboost(train, cfg).model);
    }
    case Method::rsf:
    case Method::block_forest: {
      ForestConfig cfg;
      cfg.n_trees = get_or(o, "n_trees", defaults.n_trees);
      cfg.min_node_size = get_or(o, "min_node_size", cfg.min_node_size);
      cfg.min_node_deaths = get_or(o, "min_node_deaths", cfg.min_node_deaths);
      cfg.seed = seed;
      cfg.threads = defaults.threads;
      if (spec.method == Method::rsf) {
        if (o.contains("mtry")) cfg.mtry = get_or(o, "mtry", 1);
        return std::make_unique<ForestLearner>(fit_rsf(train, cfg));
      }
      cfg.weight_trials = get_or(o, "weight_trials", cfg.weight_trials);
      cfg.pilot_trees = get_or(o, "pilot_trees", cfg.pilot_trees);
      if (o.contains("block_weights")) cfg.block_weights = get_or(o, "block_weights", std::vector<double>{});
      return std::make_unique<ForestLearner>(fit_block_forest(train, cfg).forest);
    }
  }
  throw ConfigError("unhandled learner method");
}

}  // namespace survbench
