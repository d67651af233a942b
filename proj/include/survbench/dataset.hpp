#pragma once

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include <Eigen/Dense>

namespace survbench {

using Matrix = Eigen::MatrixXd;
using Vector = Eigen::VectorXd;
using Index = Eigen::Index;

struct SurvivalOutcome {
  double time = 0.0;  // > 0
  int event = 0;      // 1 = death observed, 0 = censored
};

using Outcomes = std::vector<SurvivalOutcome>;

std::size_t count_events(std::span<const SurvivalOutcome> outcomes);

// Disjoint, exhaustive partition of the feature columns into named groups.
class FeatureGroupMap {
 public:
  FeatureGroupMap() = default;
  FeatureGroupMap(std::vector<std::string> names, std::vector<std::vector<Index>> columns,
                  std::optional<std::string> clinical_group = std::nullopt);

  // Single group holding columns 0..p-1.
  static FeatureGroupMap single(Index p, std::string name = "all");

  std::size_t size() const { return names_.size(); }
  Index n_features() const { return n_features_; }
  const std::vector<std::string>& names() const { return names_; }
  const std::string& name(std::size_t g) const { return names_[g]; }
  const std::vector<Index>& columns(std::size_t g) const { return columns_[g]; }
  std::size_t group_of(Index column) const { return group_of_[static_cast<std::size_t>(column)]; }
  std::optional<std::size_t> index_of(const std::string& name) const;

  const std::optional<std::string>& clinical_group() const { return clinical_; }
  std::optional<std::size_t> clinical_index() const;

 private:
  std::vector<std::string> names_;
  std::vector<std::vector<Index>> columns_;
  std::vector<std::size_t> group_of_;
  std::optional<std::string> clinical_;
  Index n_features_ = 0;
};

struct SurvivalDataset {
  std::string name;
  Matrix features;  // n x p
  Outcomes outcomes;
  FeatureGroupMap groups;
  std::vector<std::string> observation_ids;
  std::vector<std::string> feature_names;
  std::uintmax_t source_bytes = 0;  // total size of the files it was read from

  Index n() const { return features.rows(); }
  Index p() const { return features.cols(); }

  // Throws DataError when any dataset invariant is violated.
  void validate() const;

  SurvivalDataset subset(std::span<const std::size_t> rows) const;
  // Keeps only the listed groups (in the given order); columns are renumbered.
  SurvivalDataset select_groups(std::span<const std::size_t> group_indices) const;
};

// Reads a JSON manifest (see README) and the CSV files it references.
SurvivalDataset load_dataset(const std::filesystem::path& manifest_path);

// Writes `data` as a manifest plus one CSV per group and an outcome CSV.
void write_dataset(const SurvivalDataset& data, const std::filesystem::path& directory);

struct FoldAssignment {
  std::size_t repetition = 0;
  std::vector<int> fold_of;  // labels in 1..k

  std::vector<std::size_t> test_rows(int fold) const;
  std::vector<std::size_t> train_rows(int fold) const;
};

// Events and censored observations are shuffled separately and dealt
// round-robin (one running counter) into k folds, once per repetition.
std::vector<FoldAssignment> stratified_folds(std::span<const SurvivalOutcome> outcomes, int k,
                                             int repetitions, std::uint64_t seed);

// Same dealing scheme without the event-count precondition; used for inner
// tuning folds where a fold without events is harmless.
std::vector<int> inner_folds(std::span<const SurvivalOutcome> outcomes, int k, std::uint64_t seed);

struct Standardization {
  Matrix x;                   // centred, unit population sd, constant columns zeroed
  Vector mean;
  Vector scale;               // 1 for constant columns
  std::vector<bool> constant;

  // Coefficients fitted on `x` mapped to the original feature scale.
  Vector to_original(const Vector& beta_std) const;
  Vector to_standardized(const Vector& beta) const;
};

Standardization standardize(const Matrix& features);

}  // namespace survbench
