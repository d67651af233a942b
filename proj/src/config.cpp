#include "survbench/config.hpp"

#include <fstream>
#include <set>

#include "survbench/error.hpp"

namespace survbench {

namespace {

void reject_unknown(const nlohmann::json& j, const std::set<std::string>& allowed, const std::string& where) {
  if (!j.is_object()) throw ConfigError(where + " must be a JSON object");
  for (const auto& [key, value] : j.items())
    if (!allowed.count(key)) throw ConfigError("unknown key '" + key + "' in " + where);
}

template <class T>
T read(const nlohmann::json& j, const char* key, const std::string& where) {
  try {
    return j.at(key).get<T>();
  } catch (const nlohmann::json::exception&) {
    throw ConfigError(std::string("missing or invalid '") + key + "' in " + where);
  }
}

std::string valid_ids() {
  std::string out;
  for (const auto& id : method_ids()) out += (out.empty() ? "" : ", ") + id;
  return out;
}

}  // namespace

BenchmarkSettings ExperimentConfig::settings() const {
  BenchmarkSettings s;
  s.learners = learners;
  s.master_seed = master_seed;
  s.workers = workers;
  s.tau = tau;
  if (n_trees) s.defaults.n_trees = *n_trees;
  if (inner_k) s.defaults.inner_k = *inner_k;
  s.cv_override = cv;
  return s;
}

ExperimentConfig parse_config(const nlohmann::json& j, const std::filesystem::path& base_dir, bool check_paths) {
  reject_unknown(j, {"schema_version", "datasets", "learners", "master_seed", "workers", "output_dir", "overrides", "cv"},
                 "config");
  const int version = read<int>(j, "schema_version", "config");
  if (version != kConfigSchemaVersion)
    throw ConfigError("unsupported schema_version " + std::to_string(version) + " (expected " +
                      std::to_string(kConfigSchemaVersion) + ")");
  ExperimentConfig cfg;

  const auto datasets = read<std::vector<std::string>>(j, "datasets", "config");
  if (datasets.empty()) throw ConfigError("config lists no datasets");
  for (const auto& d : datasets) {
    std::filesystem::path p(d);
    if (p.is_relative()) p = base_dir / p;
    if (check_paths && !std::filesystem::exists(p)) throw ConfigError("dataset manifest not found: " + p.string());
    cfg.datasets.push_back(p);
  }

  if (!j.contains("learners") || !j.at("learners").is_array() || j.at("learners").empty())
    throw ConfigError("config lists no learners");
  std::set<std::string> names;
  for (const auto& l : j.at("learners")) {
    if (l.is_string()) {
      const auto id = l.get<std::string>();
      const auto method = parse_method(id);
      if (!method) throw ConfigError("unknown learner '" + id + "'; valid ids: " + valid_ids());
      if (!names.insert(id).second) throw ConfigError("duplicate learner name '" + id + "'");
      cfg.learners.push_back(make_learner(id, *method));
      continue;
    }
    reject_unknown(l, {"name", "method", "overrides"}, "learner entry");
    const auto id = read<std::string>(l, "method", "learner entry");
    const auto method = parse_method(id);
    if (!method) throw ConfigError("unknown learner '" + id + "'; valid ids: " + valid_ids());
    const std::string name = l.contains("name") ? read<std::string>(l, "name", "learner entry") : id;
    if (!names.insert(name).second) throw ConfigError("duplicate learner name '" + name + "'");
    cfg.learners.push_back(make_learner(name, *method, l.value("overrides", nlohmann::json::object())));
  }

  if (j.contains("master_seed")) cfg.master_seed = read<std::uint64_t>(j, "master_seed", "config");
  if (j.contains("workers")) {
    cfg.workers = read<int>(j, "workers", "config");
    if (cfg.workers < 1) throw ConfigError("workers must be at least 1");
  }
  if (j.contains("output_dir")) {
    std::filesystem::path out(read<std::string>(j, "output_dir", "config"));
    cfg.output_dir = out.is_relative() ? base_dir / out : out;
  } else {
    cfg.output_dir = base_dir / "results";
  }
  if (j.contains("overrides")) {
    const auto& o = j.at("overrides");
    reject_unknown(o, {"tau", "n_trees", "inner_k"}, "overrides");
    if (o.contains("tau")) {
      cfg.tau = read<double>(o, "tau", "overrides");
      if (!(*cfg.tau > 0.0)) throw ConfigError("tau must be positive");
    }
    if (o.contains("n_trees")) {
      cfg.n_trees = read<int>(o, "n_trees", "overrides");
      if (*cfg.n_trees < 1) throw ConfigError("n_trees must be positive");
    }
    if (o.contains("inner_k")) {
      cfg.inner_k = read<int>(o, "inner_k", "overrides");
      if (*cfg.inner_k < 2) throw ConfigError("inner_k must be at least 2");
    }
  }
  if (j.contains("cv")) {
    const auto& c = j.at("cv");
    reject_unknown(c, {"repetitions", "folds"}, "cv");
    CvScheme scheme;
    scheme.repetitions = read<int>(c, "repetitions", "cv");
    scheme.folds = read<int>(c, "folds", "cv");
    if (scheme.repetitions < 1 || scheme.folds < 2) throw ConfigError("cv needs repetitions >= 1 and folds >= 2");
    cfg.cv = scheme;
  }
  return cfg;
}

ExperimentConfig load_config(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot open config " + path.string());
  nlohmann::json j;
  try {
    in >> j;
  } catch (const nlohmann::json::exception& e) {
    throw ConfigError("config is not valid JSON: " + std::string(e.what()));
  }
  return parse_config(j, path.has_parent_path() ? path.parent_path() : std::filesystem::path("."));
}

}  // namespace survbench
