#pragma once

#include <cstdint>
#include <filesystem>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include <json.hpp>

#include "survbench/dataset.hpp"
#include "survbench/learners.hpp"

namespace survbench {

struct FoldOutcome {
  std::string learner;
  std::string dataset;
  int repetition = 0;  // 1-based
  int fold = 0;        // 1-based
  std::optional<double> cindex;
  std::optional<double> ibrier;
  double train_seconds = 0.0;
  std::optional<double> selected_total;           // n/a for non-linear learners
  std::vector<std::string> group_names;
  std::vector<double> selected_per_group;         // empty when n/a
  std::optional<std::string> failure_reason;
  // Set when the metric was unavailable in this iteration; kept after imputation.
  bool cindex_failed = false;
  bool ibrier_failed = false;
  bool imputed = false;
  int brier_dropped_terms = 0;
};

struct EvaluationOptions {
  std::optional<double> tau;  // default: 95th percentile of training times
  LearnerDefaults defaults;
};

// Fits, times and scores one learner on one split. Never throws: errors end up
// in failure_reason.
FoldOutcome evaluate_fold(const LearnerSpec& learner, const SurvivalDataset& train, const SurvivalDataset& test,
                          std::uint64_t seed, const EvaluationOptions& options = {});

struct CvScheme {
  int repetitions = 10;
  int folds = 5;
  bool warning = false;  // size fell in the undocumented 92-112 MB band
};

// Sizes in bytes, 1 MB = 10^6 bytes.
CvScheme choose_cv_scheme(std::uintmax_t dataset_bytes);

struct PolicyResult {
  std::vector<FoldOutcome> outcomes;
  double cindex_failure_fraction = 0.0;
  double ibrier_failure_fraction = 0.0;
  bool unusable = false;  // every iteration failed
};

// Imputation for one learner x dataset series. Idempotent.
PolicyResult apply_failure_policy(std::vector<FoldOutcome> outcomes);

struct MetricSummary {
  double mean = 0.0;
  double sd = 0.0;
  double ci_lower = 0.0;
  double ci_upper = 0.0;
  int n = 0;
};

struct AggregatedRow {
  std::string learner;
  std::string method;
  std::string structure_class;
  MetricSummary cindex;
  MetricSummary ibrier;
  double mean_train_seconds = 0.0;
  std::optional<double> mean_selected;
  std::map<std::string, double> mean_selected_per_group;
};

struct DatasetComparison {
  std::string dataset;
  std::map<std::string, double> learner_cindex;  // per-learner dataset means
  std::map<std::string, double> learner_ibrier;
  std::string best_cindex_learner;
  std::string best_ibrier_learner;
  std::optional<double> reference_cindex;  // clinical-only Cox
  std::optional<double> reference_ibrier;
  bool structured_beats_reference = false;  // some structured learner wins on both metrics
  std::map<std::string, double> class_cindex;  // structure class -> mean of learner means
  std::map<std::string, double> class_ibrier;
};

struct StructureComparison {
  std::vector<std::string> naive_learners;
  std::vector<std::string> structured_learners;
  std::vector<double> naive_cindex;       // learner means over datasets
  std::vector<double> structured_cindex;
  std::vector<double> naive_ibrier;
  std::vector<double> structured_ibrier;
  double naive_mean_cindex = 0.0;
  double structured_mean_cindex = 0.0;
  double naive_mean_ibrier = 0.0;
  double structured_mean_ibrier = 0.0;
  std::optional<double> welch_p_cindex;   // one-sided: structured > naive
  std::optional<double> welch_p_ibrier;   // one-sided: structured < naive
  std::optional<double> paired_p_cindex;  // across datasets, needs >= 3
  std::optional<double> paired_p_ibrier;
};

struct AggregateTables {
  std::vector<AggregatedRow> rows;  // ordered by descending mean cindex
  std::vector<DatasetComparison> datasets;
  StructureComparison structure;
};

AggregateTables aggregate(const std::vector<FoldOutcome>& outcomes, const std::vector<LearnerSpec>& learners);

nlohmann::json tables_to_json(const AggregateTables& tables);
AggregateTables tables_from_json(const nlohmann::json& j);

struct BenchmarkSettings {
  std::vector<LearnerSpec> learners;
  std::uint64_t master_seed = 1;
  int workers = 1;
  std::optional<double> tau;
  LearnerDefaults defaults;
  std::optional<CvScheme> cv_override;
};

struct BenchmarkResult {
  std::vector<FoldOutcome> outcomes;  // raw, one per (dataset, learner, repetition, fold)
  std::vector<FoldOutcome> imputed;   // after the failure policy
  AggregateTables tables;
  std::vector<std::string> log;
  std::size_t datasets_attempted = 0;
  std::size_t datasets_aborted = 0;
};

// Seed stream for one evaluation; independent of every other tuple.
std::uint64_t evaluation_seed(std::uint64_t master, const std::string& dataset, int repetition, int fold,
                              const std::string& learner);
std::uint64_t fold_seed(std::uint64_t master, const std::string& dataset);

BenchmarkResult run_benchmark(const std::vector<SurvivalDataset>& datasets, const BenchmarkSettings& settings);
// Loads the manifests first; a manifest that fails to load is logged and skipped.
BenchmarkResult run_benchmark(const std::vector<std::filesystem::path>& manifests, const BenchmarkSettings& settings);

// results.csv, summary.json and run.log in `directory`.
void write_results(const BenchmarkResult& result, const std::filesystem::path& directory);
std::string outcomes_to_csv(const std::vector<FoldOutcome>& outcomes, bool include_timing = true);

}  // namespace survbench
