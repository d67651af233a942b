#pragma once

#include <cstdint>
#include <memory>
#include <optional>
#include <string>
#include <vector>

#include <json.hpp>

#include "survbench/dataset.hpp"
#include "survbench/step_function.hpp"

namespace survbench {

enum class Method {
  kaplan_meier,
  clinical_cox,
  lasso,
  ipflasso,
  prioritylasso,
  prioritylasso_favoring,
  grridge,
  sgl,
  glmboost,
  coxboost,
  coxboost_favoring,
  rsf,
  block_forest,
};

const std::vector<std::string>& method_ids();
std::optional<Method> parse_method(const std::string& id);
std::string method_id(Method m);

enum class StructureClass { reference, naive, structured, structured_favoring };
std::string structure_class_name(StructureClass c);

struct LearnerSpec {
  std::string name;
  Method method = Method::kaplan_meier;
  nlohmann::json overrides = nlohmann::json::object();
  bool uses_group_structure = false;
  bool favors_clinical = false;

  StructureClass structure_class() const;
};

// Fills the flags from the method; throws ConfigError on unknown override keys.
LearnerSpec make_learner(std::string name, Method method, nlohmann::json overrides = nlohmann::json::object());

// Experiment-wide defaults that learner overrides refine.
struct LearnerDefaults {
  int inner_k = 10;
  int n_trees = 500;
  int threads = 1;
};

class FittedLearner {
 public:
  virtual ~FittedLearner() = default;
  // Higher score = higher predicted risk.
  virtual std::vector<double> risk_scores(const Matrix& x) const = 0;
  virtual std::vector<StepFunction> survival_curves(const Matrix& x) const = 0;
  // Original-scale coefficients for linear models.
  virtual std::optional<Vector> coefficients() const { return std::nullopt; }
};

std::unique_ptr<FittedLearner> fit_learner(const LearnerSpec& spec, const SurvivalDataset& train, std::uint64_t seed,
                                           const LearnerDefaults& defaults = {});

}  // namespace survbench
