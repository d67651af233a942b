#include "survbench/dataset.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <fstream>
#include <iomanip>
#include <numeric>
#include <sstream>
#include <unordered_map>
#include <unordered_set>

#include <json.hpp>

#include "survbench/error.hpp"
#include "survbench/rng.hpp"

namespace survbench {

namespace fs = std::filesystem;
using json = nlohmann::json;

std::size_t count_events(std::span<const SurvivalOutcome> outcomes) {
  return static_cast<std::size_t>(
      std::count_if(outcomes.begin(), outcomes.end(), [](const SurvivalOutcome& o) { return o.event == 1; }));
}

// ---------------------------------------------------------------------------
// FeatureGroupMap

FeatureGroupMap::FeatureGroupMap(std::vector<std::string> names, std::vector<std::vector<Index>> columns,
                                 std::optional<std::string> clinical_group)
    : names_(std::move(names)), columns_(std::move(columns)), clinical_(std::move(clinical_group)) {
  if (names_.size() != columns_.size()) throw DataError("group names and column lists differ in length");
  if (names_.empty()) throw DataError("at least one feature group is required");
  std::unordered_set<std::string> seen;
  for (std::size_t g = 0; g < names_.size(); ++g) {
    if (!seen.insert(names_[g]).second) throw DataError("duplicate group name '" + names_[g] + "'");
    if (columns_[g].empty()) throw DataError("group '" + names_[g] + "' is empty");
    n_features_ += static_cast<Index>(columns_[g].size());
  }
  group_of_.assign(static_cast<std::size_t>(n_features_), names_.size());
  for (std::size_t g = 0; g < columns_.size(); ++g) {
    for (Index c : columns_[g]) {
      if (c < 0 || c >= n_features_) throw DataError("group column index out of range");
      auto& slot = group_of_[static_cast<std::size_t>(c)];
      if (slot != names_.size()) throw DataError("feature groups overlap");
      slot = g;
    }
  }
  if (clinical_ && !index_of(*clinical_)) {
    throw DataError("clinical group '" + *clinical_ + "' is not a group of the dataset");
  }
}

FeatureGroupMap FeatureGroupMap::single(Index p, std::string name) {
  std::vector<Index> cols(static_cast<std::size_t>(p));
  std::iota(cols.begin(), cols.end(), Index{0});
  return FeatureGroupMap({std::move(name)}, {std::move(cols)});
}

std::optional<std::size_t> FeatureGroupMap::index_of(const std::string& name) const {
  auto it = std::find(names_.begin(), names_.end(), name);
  if (it == names_.end()) return std::nullopt;
  return static_cast<std::size_t>(it - names_.begin());
}

std::optional<std::size_t> FeatureGroupMap::clinical_index() const {
  if (!clinical_) return std::nullopt;
  return index_of(*clinical_);
}

// ---------------------------------------------------------------------------
// SurvivalDataset

void SurvivalDataset::validate() const {
  const auto n_rows = static_cast<std::size_t>(n());
  if (n_rows < 2) throw DataError("dataset needs at least 2 observations");
  if (outcomes.size() != n_rows) throw DataError("outcome count does not match feature rows");
  if (!observation_ids.empty() && observation_ids.size() != n_rows) {
    throw DataError("observation id count does not match feature rows");
  }
  if (groups.n_features() != p()) throw DataError("feature groups do not cover all columns");
  for (const auto& o : outcomes) {
    if (!(o.time > 0.0) || !std::isfinite(o.time)) throw DataError("non-positive time");
    if (o.event != 0 && o.event != 1) throw DataError("event indicator must be 0 or 1");
  }
  if (count_events(outcomes) == 0) throw DataError("zero events");
  if (!features.allFinite()) throw DataError("missing values in features");
}

SurvivalDataset SurvivalDataset::subset(std::span<const std::size_t> rows) const {
  SurvivalDataset out;
  out.name = name;
  out.groups = groups;
  out.feature_names = feature_names;
  out.features.resize(static_cast<Index>(rows.size()), p());
  out.outcomes.reserve(rows.size());
  for (std::size_t r = 0; r < rows.size(); ++r) {
    out.features.row(static_cast<Index>(r)) = features.row(static_cast<Index>(rows[r]));
    out.outcomes.push_back(outcomes[rows[r]]);
    if (!observation_ids.empty()) out.observation_ids.push_back(observation_ids[rows[r]]);
  }
  return out;
}

SurvivalDataset SurvivalDataset::select_groups(std::span<const std::size_t> group_indices) const {
  std::vector<std::string> names;
  std::vector<std::vector<Index>> cols;
  std::vector<Index> source;
  for (std::size_t g : group_indices) {
    names.push_back(groups.name(g));
    std::vector<Index> c;
    for (Index j : groups.columns(g)) {
      c.push_back(static_cast<Index>(source.size()));
      source.push_back(j);
    }
    cols.push_back(std::move(c));
  }
  std::optional<std::string> clin;
  if (groups.clinical_group() && std::find(names.begin(), names.end(), *groups.clinical_group()) != names.end()) {
    clin = groups.clinical_group();
  }
  SurvivalDataset out;
  out.name = name;
  out.outcomes = outcomes;
  out.observation_ids = observation_ids;
  out.groups = FeatureGroupMap(std::move(names), std::move(cols), clin);
  out.features.resize(n(), static_cast<Index>(source.size()));
  for (std::size_t j = 0; j < source.size(); ++j) {
    out.features.col(static_cast<Index>(j)) = features.col(source[j]);
    if (!feature_names.empty()) out.feature_names.push_back(feature_names[static_cast<std::size_t>(source[j])]);
  }
  return out;
}

// ---------------------------------------------------------------------------
// CSV ingestion

namespace {

struct CsvTable {
  std::vector<std::string> header;
  std::vector<std::vector<std::string>> rows;
};

std::string trim(std::string_view s) {
  auto b = s.find_first_not_of(" \t\r\"");
  if (b == std::string_view::npos) return {};
  auto e = s.find_last_not_of(" \t\r\"");
  return std::string(s.substr(b, e - b + 1));
}

std::vector<std::string> split_line(const std::string& line) {
  std::vector<std::string> out;
  std::size_t start = 0;
  while (true) {
    auto pos = line.find(',', start);
    out.push_back(trim(std::string_view(line).substr(start, pos == std::string::npos ? std::string::npos : pos - start)));
    if (pos == std::string::npos) break;
    start = pos + 1;
  }
  return out;
}

CsvTable read_csv(const fs::path& path) {
  std::ifstream in(path);
  if (!in) throw DataError("missing file: " + path.string());
  CsvTable t;
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (trim(line).empty()) continue;
    auto fields = split_line(line);
    if (t.header.empty()) {
      t.header = std::move(fields);
      continue;
    }
    if (fields.size() != t.header.size()) {
      throw DataError(path.string() + ":" + std::to_string(line_no) + ": expected " +
                      std::to_string(t.header.size()) + " fields, got " + std::to_string(fields.size()));
    }
    t.rows.push_back(std::move(fields));
  }
  if (t.header.empty()) throw DataError("empty file: " + path.string());
  return t;
}

double parse_number(const std::string& s, const fs::path& path) {
  if (s.empty() || s == "NA" || s == "NaN" || s == "nan" || s == "null") {
    throw DataError("missing values in " + path.string());
  }
  double v = 0.0;
  auto [ptr, ec] = std::from_chars(s.data(), s.data() + s.size(), v);
  if (ec != std::errc() || ptr != s.data() + s.size()) {
    throw DataError("cannot parse number '" + s + "' in " + path.string());
  }
  if (!std::isfinite(v)) throw DataError("missing values in " + path.string());
  return v;
}

std::size_t column_index(const CsvTable& t, const std::string& name, const fs::path& path) {
  auto it = std::find(t.header.begin(), t.header.end(), name);
  if (it == t.header.end()) throw DataError(path.string() + " has no column '" + name + "'");
  return static_cast<std::size_t>(it - t.header.begin());
}

std::uintmax_t file_size_or_zero(const fs::path& p) {
  std::error_code ec;
  auto s = fs::file_size(p, ec);
  return ec ? 0 : s;
}

}  // namespace

SurvivalDataset load_dataset(const fs::path& manifest_path) {
  std::ifstream in(manifest_path);
  if (!in) throw DataError("missing file: " + manifest_path.string());
  json manifest;
  try {
    in >> manifest;
  } catch (const json::exception& e) {
    throw DataError("malformed manifest " + manifest_path.string() + ": " + e.what());
  }
  const fs::path base = manifest_path.parent_path();
  auto resolve = [&](const std::string& f) { return fs::path(f).is_absolute() ? fs::path(f) : base / f; };

  if (!manifest.contains("outcome_file") || !manifest.contains("groups") || !manifest["groups"].is_array() ||
      manifest["groups"].empty()) {
    throw DataError("manifest needs 'outcome_file' and a non-empty 'groups' list");
  }

  SurvivalDataset data;
  data.name = manifest.value("name", manifest_path.stem().string());

  const fs::path outcome_path = resolve(manifest["outcome_file"].get<std::string>());
  CsvTable outcome = read_csv(outcome_path);
  data.source_bytes += file_size_or_zero(outcome_path);
  const auto id_col = column_index(outcome, "id", outcome_path);
  const auto time_col = column_index(outcome, "time", outcome_path);
  const auto event_col = column_index(outcome, "event", outcome_path);

  std::unordered_map<std::string, std::size_t> row_of;
  for (const auto& row : outcome.rows) {
    const std::string& id = row[id_col];
    if (!row_of.emplace(id, data.observation_ids.size()).second) throw DataError("duplicate observation id '" + id + "'");
    data.observation_ids.push_back(id);
    SurvivalOutcome o;
    o.time = parse_number(row[time_col], outcome_path);
    const double ev = parse_number(row[event_col], outcome_path);
    if (ev != 0.0 && ev != 1.0) throw DataError("event indicator must be 0 or 1");
    o.event = static_cast<int>(ev);
    if (!(o.time > 0.0)) throw DataError("non-positive time for observation '" + id + "'");
    data.outcomes.push_back(o);
  }
  const std::size_t n = data.outcomes.size();

  std::vector<std::string> group_names;
  std::vector<std::vector<Index>> group_cols;
  std::vector<std::vector<double>> columns;  // column-major staging
  std::unordered_set<std::string> seen_columns;
  for (const auto& g : manifest["groups"]) {
    if (!g.contains("name") || !g.contains("file")) throw DataError("each group needs 'name' and 'file'");
    const fs::path path = resolve(g["file"].get<std::string>());
    CsvTable t = read_csv(path);
    data.source_bytes += file_size_or_zero(path);
    const auto gid = column_index(t, "id", path);
    if (t.rows.size() != n) {
      // Extra or missing rows both break the one-to-one id alignment.
      std::unordered_set<std::string> ids;
      for (const auto& row : t.rows) ids.insert(row[gid]);
      for (const auto& id : data.observation_ids) {
        if (!ids.count(id)) throw DataError("id '" + id + "' missing from " + path.string());
      }
      throw DataError(path.string() + " has ids not present in the outcome file");
    }
    std::vector<Index> cols;
    const std::size_t first_new = columns.size();
    for (std::size_t c = 0; c < t.header.size(); ++c) {
      if (c == gid) continue;
      if (!seen_columns.insert(t.header[c]).second) throw DataError("duplicate column name '" + t.header[c] + "'");
      cols.push_back(static_cast<Index>(columns.size()));
      data.feature_names.push_back(t.header[c]);
      columns.emplace_back(n, 0.0);
    }
    std::vector<bool> filled(n, false);
    for (const auto& row : t.rows) {
      auto it = row_of.find(row[gid]);
      if (it == row_of.end()) throw DataError("id '" + row[gid] + "' in " + path.string() + " missing from outcome file");
      if (filled[it->second]) throw DataError("duplicate observation id '" + row[gid] + "' in " + path.string());
      filled[it->second] = true;
      std::size_t k = first_new;
      for (std::size_t c = 0; c < row.size(); ++c) {
        if (c == gid) continue;
        columns[k++][it->second] = parse_number(row[c], path);
      }
    }
    group_names.push_back(g["name"].get<std::string>());
    group_cols.push_back(std::move(cols));
  }

  std::optional<std::string> clinical;
  if (manifest.contains("clinical_group") && !manifest["clinical_group"].is_null()) {
    clinical = manifest["clinical_group"].get<std::string>();
  }
  data.groups = FeatureGroupMap(std::move(group_names), std::move(group_cols), clinical);
  data.features.resize(static_cast<Index>(n), static_cast<Index>(columns.size()));
  for (std::size_t j = 0; j < columns.size(); ++j) {
    data.features.col(static_cast<Index>(j)) = Eigen::Map<const Vector>(columns[j].data(), static_cast<Index>(n));
  }
  data.validate();
  return data;
}

void write_dataset(const SurvivalDataset& data, const fs::path& directory) {
  fs::create_directories(directory);
  auto id_of = [&](std::size_t i) {
    return data.observation_ids.empty() ? "obs" + std::to_string(i + 1) : data.observation_ids[i];
  };
  auto fname = [&](Index j) {
    return data.feature_names.empty() ? "x" + std::to_string(j + 1) : data.feature_names[static_cast<std::size_t>(j)];
  };
  {
    std::ofstream out(directory / "outcome.csv");
    out << "id,time,event\n" << std::setprecision(17);
    for (std::size_t i = 0; i < data.outcomes.size(); ++i) {
      out << id_of(i) << ',' << data.outcomes[i].time << ',' << data.outcomes[i].event << '\n';
    }
  }
  json manifest;
  manifest["name"] = data.name;
  manifest["outcome_file"] = "outcome.csv";
  manifest["groups"] = json::array();
  for (std::size_t g = 0; g < data.groups.size(); ++g) {
    const std::string file = data.groups.name(g) + ".csv";
    std::ofstream out(directory / file);
    out << "id";
    for (Index j : data.groups.columns(g)) out << ',' << fname(j);
    out << '\n' << std::setprecision(17);
    for (Index i = 0; i < data.n(); ++i) {
      out << id_of(static_cast<std::size_t>(i));
      for (Index j : data.groups.columns(g)) out << ',' << data.features(i, j);
      out << '\n';
    }
    manifest["groups"].push_back({{"name", data.groups.name(g)}, {"file", file}});
  }
  if (data.groups.clinical_group()) manifest["clinical_group"] = *data.groups.clinical_group();
  std::ofstream(directory / "manifest.json") << manifest.dump(2) << '\n';
}

// ---------------------------------------------------------------------------
// Folds

std::vector<std::size_t> FoldAssignment::test_rows(int fold) const {
  std::vector<std::size_t> rows;
  for (std::size_t i = 0; i < fold_of.size(); ++i)
    if (fold_of[i] == fold) rows.push_back(i);
  return rows;
}

std::vector<std::size_t> FoldAssignment::train_rows(int fold) const {
  std::vector<std::size_t> rows;
  for (std::size_t i = 0; i < fold_of.size(); ++i)
    if (fold_of[i] != fold) rows.push_back(i);
  return rows;
}

namespace {

std::vector<int> deal_folds(std::span<const SurvivalOutcome> outcomes, int k, Rng& rng) {
  std::vector<std::size_t> events, censored;
  for (std::size_t i = 0; i < outcomes.size(); ++i) (outcomes[i].event ? events : censored).push_back(i);
  rng.shuffle(events);
  rng.shuffle(censored);
  std::vector<int> fold_of(outcomes.size(), 0);
  std::size_t counter = 0;
  for (auto i : events) fold_of[i] = static_cast<int>(counter++ % static_cast<std::size_t>(k)) + 1;
  for (auto i : censored) fold_of[i] = static_cast<int>(counter++ % static_cast<std::size_t>(k)) + 1;
  return fold_of;
}

}  // namespace

std::vector<FoldAssignment> stratified_folds(std::span<const SurvivalOutcome> outcomes, int k, int repetitions,
                                             std::uint64_t seed) {
  if (k < 2) throw DataError("fold count must be at least 2");
  if (repetitions < 1) throw DataError("repetition count must be at least 1");
  const std::size_t events = count_events(outcomes);
  if (outcomes.size() < static_cast<std::size_t>(k)) throw DataError("fewer observations than folds");
  // At most one fold may be left without an event.
  if (events + 1 < static_cast<std::size_t>(k)) {
    throw DataError("too few events (" + std::to_string(events) + ") for " + std::to_string(k) + " folds");
  }
  std::vector<FoldAssignment> out;
  for (int r = 0; r < repetitions; ++r) {
    Rng rng(derive_seed(seed, {static_cast<std::uint64_t>(r)}));
    out.push_back({static_cast<std::size_t>(r), deal_folds(outcomes, k, rng)});
  }
  return out;
}

std::vector<int> inner_folds(std::span<const SurvivalOutcome> outcomes, int k, std::uint64_t seed) {
  if (k < 2) throw DataError("fold count must be at least 2");
  k = std::min<int>(k, static_cast<int>(outcomes.size()));
  Rng rng(seed);
  return deal_folds(outcomes, k, rng);
}

// ---------------------------------------------------------------------------
// Standardization

Standardization standardize(const Matrix& features) {
  const Index n = features.rows();
  const Index p = features.cols();
  Standardization s;
  s.x = features;
  s.mean = Vector::Zero(p);
  s.scale = Vector::Ones(p);
  s.constant.assign(static_cast<std::size_t>(p), false);
  for (Index j = 0; j < p; ++j) {
    auto col = s.x.col(j);
    const double m = col.mean();
    col.array() -= m;
    const double sd = std::sqrt(col.squaredNorm() / static_cast<double>(n));
    s.mean(j) = m;
    if (!(sd > 1e-12 * std::max(1.0, std::abs(m)))) {
      col.setZero();
      s.constant[static_cast<std::size_t>(j)] = true;
    } else {
      col /= sd;
      s.scale(j) = sd;
    }
  }
  return s;
}

Vector Standardization::to_original(const Vector& beta_std) const {
  Vector b = beta_std.cwiseQuotient(scale);
  for (std::size_t j = 0; j < constant.size(); ++j)
    if (constant[j]) b(static_cast<Index>(j)) = 0.0;
  return b;
}

Vector Standardization::to_standardized(const Vector& beta) const {
  Vector b = beta.cwiseProduct(scale);
  for (std::size_t j = 0; j < constant.size(); ++j)
    if (constant[j]) b(static_cast<Index>(j)) = 0.0;
  return b;
}

}  // namespace survbench
