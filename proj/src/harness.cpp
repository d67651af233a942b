#include "survbench/harness.hpp"

#include <algorithm>
#include <atomic>
#include <charconv>
#include <chrono>
#include <cmath>
#include <fstream>
#include <mutex>
#include <set>
#include <sstream>
#include <thread>

#include "survbench/error.hpp"
#include "survbench/metrics.hpp"
#include "survbench/rng.hpp"
#include "survbench/stats.hpp"

namespace survbench {

namespace {

constexpr double kImputedCindex = 0.5;
constexpr double kImputedIbrier = 0.25;

std::string format_double(double v) {
  char buf[64];
  auto [ptr, ec] = std::to_chars(buf, buf + sizeof buf, v);
  return ec == std::errc() ? std::string(buf, ptr) : std::string("nan");
}

std::string csv_escape(const std::string& s) {
  if (s.find_first_of(",\"\n") == std::string::npos) return s;
  std::string out = "\"";
  for (char c : s) {
    if (c == '"') out += '"';
    out += c == '\n' ? ' ' : c;
  }
  return out + "\"";
}

double mean_of(const std::vector<double>& v) { return v.empty() ? 0.0 : mean(v); }

MetricSummary summarize(const std::vector<double>& v) {
  MetricSummary s;
  s.n = static_cast<int>(v.size());
  if (v.empty()) return s;
  s.mean = mean(v);
  s.sd = sample_sd(v);
  const auto ci = t_interval(v);
  s.ci_lower = ci.lower;
  s.ci_upper = ci.upper;
  return s;
}

}  // namespace

// ---------------------------------------------------------------------------

FoldOutcome evaluate_fold(const LearnerSpec& learner, const SurvivalDataset& train, const SurvivalDataset& test,
                          std::uint64_t seed, const EvaluationOptions& options) {
  FoldOutcome out;
  out.learner = learner.name;
  out.dataset = train.name;
  try {
    if (train.p() != test.p()) throw DataError("train and test feature schemas differ");
    const auto start = std::chrono::steady_clock::now();
    const auto fitted = fit_learner(learner, train, seed, options.defaults);
    out.train_seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();

    const std::vector<double> risk = fitted->risk_scores(test.features);
    const std::vector<StepFunction> curves = fitted->survival_curves(test.features);
    const double tau = options.tau ? *options.tau : default_tau(train.outcomes);

    out.cindex = uno_cindex(train.outcomes, test.outcomes, risk, tau);
    out.cindex_failed = !out.cindex.has_value();
    const BrierResult brier = integrated_brier(train.outcomes, test.outcomes, curves, tau);
    if (std::isfinite(brier.value)) {
      out.ibrier = brier.value;
    } else {
      out.ibrier_failed = true;
    }
    out.brier_dropped_terms = brier.dropped_terms;

    if (const auto beta = fitted->coefficients()) {
      out.group_names = train.groups.names();
      out.selected_per_group.assign(train.groups.size(), 0.0);
      double total = 0.0;
      for (Index j = 0; j < beta->size(); ++j) {
        if ((*beta)(j) != 0.0) {
          out.selected_per_group[train.groups.group_of(j)] += 1.0;
          total += 1.0;
        }
      }
      out.selected_total = total;
    }
  } catch (const std::exception& e) {
    out.failure_reason = e.what();
    out.cindex.reset();
    out.ibrier.reset();
    out.cindex_failed = true;
    out.ibrier_failed = true;
  }
  return out;
}

CvScheme choose_cv_scheme(std::uintmax_t dataset_bytes) {
  constexpr std::uintmax_t lower = 92'000'000;
  constexpr std::uintmax_t upper = 112'000'000;
  if (dataset_bytes < lower) return {10, 5, false};
  return {5, 5, dataset_bytes <= upper};
}

PolicyResult apply_failure_policy(std::vector<FoldOutcome> outcomes) {
  PolicyResult result;
  if (outcomes.empty()) throw std::invalid_argument("failure policy needs at least one outcome");
  const double n = static_cast<double>(outcomes.size());

  auto impute = [&](bool FoldOutcome::*failed, std::optional<double> FoldOutcome::*value, double fallback) {
    std::vector<double> ok;
    for (const auto& o : outcomes)
      if (!(o.*failed) && (o.*value)) ok.push_back(*(o.*value));
    const double fraction = 1.0 - static_cast<double>(ok.size()) / n;
    if (ok.empty()) {
      for (auto& o : outcomes) (o.*value).reset();
      return fraction;
    }
    if (fraction > 0.2) {
      for (auto& o : outcomes)
        if (o.*failed || !(o.*value)) {
          o.*value = fallback;
          o.imputed = true;
        }
    } else if (fraction > 0.0) {
      // Equal values short-circuit so a second pass reproduces the first exactly.
      const double m = std::all_of(ok.begin(), ok.end(), [&](double v) { return v == ok.front(); }) ? ok.front()
                                                                                                    : mean(ok);
      for (auto& o : outcomes) {
        o.*value = m;
        o.imputed = true;
      }
    }
    return fraction;
  };
  result.cindex_failure_fraction = impute(&FoldOutcome::cindex_failed, &FoldOutcome::cindex, kImputedCindex);
  result.ibrier_failure_fraction = impute(&FoldOutcome::ibrier_failed, &FoldOutcome::ibrier, kImputedIbrier);

  // Time and sparsity of failed fits come from the successful fits.
  std::vector<double> times, selected;
  std::vector<const FoldOutcome*> donors;
  for (const auto& o : outcomes) {
    if (o.failure_reason) continue;
    times.push_back(o.train_seconds);
    if (o.selected_total) selected.push_back(*o.selected_total);
    donors.push_back(&o);
  }
  if (!donors.empty()) {
    const double mean_time = mean(times);
    std::vector<double> group_means;
    std::vector<std::string> names;
    if (!selected.empty()) {
      for (const auto* d : donors) {
        if (d->selected_per_group.empty()) continue;
        if (group_means.empty()) {
          group_means.assign(d->selected_per_group.size(), 0.0);
          names = d->group_names;
        }
        for (std::size_t g = 0; g < group_means.size(); ++g) group_means[g] += d->selected_per_group[g];
      }
      for (double& v : group_means) v /= static_cast<double>(selected.size());
    }
    for (auto& o : outcomes) {
      if (!o.failure_reason) continue;
      o.train_seconds = mean_time;
      if (!selected.empty()) {
        o.selected_total = mean(selected);
        o.selected_per_group = group_means;
        o.group_names = names;
      }
    }
  }
  result.unusable = donors.empty() && result.cindex_failure_fraction >= 1.0 && result.ibrier_failure_fraction >= 1.0;
  result.outcomes = std::move(outcomes);
  return result;
}

// ---------------------------------------------------------------------------
// Aggregation

AggregateTables aggregate(const std::vector<FoldOutcome>& outcomes, const std::vector<LearnerSpec>& learners) {
  AggregateTables tables;
  std::vector<std::string> datasets;
  for (const auto& o : outcomes)
    if (std::find(datasets.begin(), datasets.end(), o.dataset) == datasets.end()) datasets.push_back(o.dataset);

  struct Cell {
    std::optional<double> cindex, ibrier, time, selected;
    std::map<std::string, double> per_group;
  };
  // learner -> dataset -> iteration means
  std::map<std::string, std::map<std::string, Cell>> cells;
  for (const auto& spec : learners) {
    for (const auto& ds : datasets) {
      std::vector<double> c, b, t, s;
      std::map<std::string, std::vector<double>> g;
      for (const auto& o : outcomes) {
        if (o.learner != spec.name || o.dataset != ds) continue;
        if (o.cindex) c.push_back(*o.cindex);
        if (o.ibrier) b.push_back(*o.ibrier);
        t.push_back(o.train_seconds);
        if (o.selected_total) s.push_back(*o.selected_total);
        for (std::size_t k = 0; k < o.selected_per_group.size() && k < o.group_names.size(); ++k)
          g[o.group_names[k]].push_back(o.selected_per_group[k]);
      }
      Cell cell;
      if (!c.empty()) cell.cindex = mean(c);
      if (!b.empty()) cell.ibrier = mean(b);
      if (!t.empty()) cell.time = mean(t);
      if (!s.empty()) cell.selected = mean(s);
      for (const auto& [name, v] : g) cell.per_group[name] = mean(v);
      cells[spec.name][ds] = cell;
    }
  }

  for (const auto& spec : learners) {
    AggregatedRow row;
    row.learner = spec.name;
    row.method = method_id(spec.method);
    row.structure_class = structure_class_name(spec.structure_class());
    std::vector<double> c, b, t, s;
    std::map<std::string, std::vector<double>> g;
    for (const auto& ds : datasets) {
      const Cell& cell = cells[spec.name][ds];
      if (cell.cindex) c.push_back(*cell.cindex);
      if (cell.ibrier) b.push_back(*cell.ibrier);
      if (cell.time) t.push_back(*cell.time);
      if (cell.selected) s.push_back(*cell.selected);
      for (const auto& [name, v] : cell.per_group) g[name].push_back(v);
    }
    row.cindex = summarize(c);
    row.ibrier = summarize(b);
    row.mean_train_seconds = mean_of(t);
    if (!s.empty()) row.mean_selected = mean(s);
    for (const auto& [name, v] : g) row.mean_selected_per_group[name] = mean(v);
    tables.rows.push_back(std::move(row));
  }
  std::stable_sort(tables.rows.begin(), tables.rows.end(),
                   [](const AggregatedRow& a, const AggregatedRow& b) { return a.cindex.mean > b.cindex.mean; });

  // Per-dataset comparison and structure classes.
  const LearnerSpec* reference = nullptr;
  for (const auto& spec : learners)
    if (spec.method == Method::clinical_cox) {
      reference = &spec;
      break;
    }
  std::vector<double> paired_naive_c, paired_struct_c, paired_naive_b, paired_struct_b;
  for (const auto& ds : datasets) {
    DatasetComparison cmp;
    cmp.dataset = ds;
    double best_c = -1.0, best_b = std::numeric_limits<double>::infinity();
    std::map<std::string, std::vector<double>> class_c, class_b;
    for (const auto& spec : learners) {
      const Cell& cell = cells[spec.name][ds];
      if (cell.cindex) {
        cmp.learner_cindex[spec.name] = *cell.cindex;
        if (*cell.cindex > best_c) {
          best_c = *cell.cindex;
          cmp.best_cindex_learner = spec.name;
        }
      }
      if (cell.ibrier) {
        cmp.learner_ibrier[spec.name] = *cell.ibrier;
        if (*cell.ibrier < best_b) {
          best_b = *cell.ibrier;
          cmp.best_ibrier_learner = spec.name;
        }
      }
      const std::string cls = structure_class_name(spec.structure_class());
      if (cell.cindex) class_c[cls].push_back(*cell.cindex);
      if (cell.ibrier) class_b[cls].push_back(*cell.ibrier);
    }
    for (const auto& [cls, v] : class_c) cmp.class_cindex[cls] = mean(v);
    for (const auto& [cls, v] : class_b) cmp.class_ibrier[cls] = mean(v);
    if (reference) {
      const Cell& ref = cells[reference->name][ds];
      cmp.reference_cindex = ref.cindex;
      cmp.reference_ibrier = ref.ibrier;
      if (ref.cindex && ref.ibrier) {
        for (const auto& spec : learners) {
          if (!spec.uses_group_structure) continue;
          const Cell& cell = cells[spec.name][ds];
          if (cell.cindex && cell.ibrier && *cell.cindex > *ref.cindex && *cell.ibrier < *ref.ibrier)
            cmp.structured_beats_reference = true;
        }
      }
    }
    // Naive versus all structured learners, per dataset.
    std::vector<double> nc, sc, nb, sb;
    for (const auto& spec : learners) {
      const Cell& cell = cells[spec.name][ds];
      const auto cls = spec.structure_class();
      if (cls == StructureClass::reference) continue;
      auto& vc = cls == StructureClass::naive ? nc : sc;
      auto& vb = cls == StructureClass::naive ? nb : sb;
      if (cell.cindex) vc.push_back(*cell.cindex);
      if (cell.ibrier) vb.push_back(*cell.ibrier);
    }
    if (!nc.empty() && !sc.empty()) {
      cmp.class_cindex["naive_all"] = mean(nc);
      cmp.class_cindex["structured_all"] = mean(sc);
      paired_naive_c.push_back(mean(nc));
      paired_struct_c.push_back(mean(sc));
    }
    if (!nb.empty() && !sb.empty()) {
      cmp.class_ibrier["naive_all"] = mean(nb);
      cmp.class_ibrier["structured_all"] = mean(sb);
      paired_naive_b.push_back(mean(nb));
      paired_struct_b.push_back(mean(sb));
    }
    tables.datasets.push_back(std::move(cmp));
  }

  auto& st = tables.structure;
  for (const auto& row : tables.rows) {
    if (row.structure_class == "reference") continue;
    const bool naive = row.structure_class == "naive";
    (naive ? st.naive_learners : st.structured_learners).push_back(row.learner);
    if (row.cindex.n > 0) (naive ? st.naive_cindex : st.structured_cindex).push_back(row.cindex.mean);
    if (row.ibrier.n > 0) (naive ? st.naive_ibrier : st.structured_ibrier).push_back(row.ibrier.mean);
  }
  st.naive_mean_cindex = mean_of(st.naive_cindex);
  st.structured_mean_cindex = mean_of(st.structured_cindex);
  st.naive_mean_ibrier = mean_of(st.naive_ibrier);
  st.structured_mean_ibrier = mean_of(st.structured_ibrier);
  if (st.naive_cindex.size() >= 2 && st.structured_cindex.size() >= 2)
    st.welch_p_cindex = welch_t_test_greater(st.structured_cindex, st.naive_cindex).p;
  if (st.naive_ibrier.size() >= 2 && st.structured_ibrier.size() >= 2)
    st.welch_p_ibrier = welch_t_test_greater(st.naive_ibrier, st.structured_ibrier).p;
  if (paired_naive_c.size() >= 3) st.paired_p_cindex = paired_t_test(paired_struct_c, paired_naive_c).p;
  if (paired_naive_b.size() >= 3) st.paired_p_ibrier = paired_t_test(paired_struct_b, paired_naive_b).p;
  return tables;
}

// ---------------------------------------------------------------------------
// JSON

namespace {

nlohmann::json metric_json(const MetricSummary& m) {
  return {{"mean", m.mean}, {"sd", m.sd}, {"ci_lower", m.ci_lower}, {"ci_upper", m.ci_upper}, {"n", m.n}};
}

MetricSummary metric_from(const nlohmann::json& j) {
  MetricSummary m;
  m.mean = j.at("mean").get<double>();
  m.sd = j.at("sd").get<double>();
  m.ci_lower = j.at("ci_lower").get<double>();
  m.ci_upper = j.at("ci_upper").get<double>();
  m.n = j.at("n").get<int>();
  return m;
}

template <class T>
nlohmann::json optional_json(const std::optional<T>& v) {
  return v ? nlohmann::json(*v) : nlohmann::json(nullptr);
}

template <class T>
std::optional<T> optional_from(const nlohmann::json& j, const char* key) {
  if (!j.contains(key) || j.at(key).is_null()) return std::nullopt;
  return j.at(key).get<T>();
}

}  // namespace

nlohmann::json tables_to_json(const AggregateTables& t) {
  nlohmann::json rows = nlohmann::json::array();
  for (const auto& r : t.rows) {
    rows.push_back({{"learner", r.learner},
                    {"method", r.method},
                    {"structure_class", r.structure_class},
                    {"cindex", metric_json(r.cindex)},
                    {"ibrier", metric_json(r.ibrier)},
                    {"mean_train_seconds", r.mean_train_seconds},
                    {"mean_selected", optional_json(r.mean_selected)},
                    {"mean_selected_per_group", r.mean_selected_per_group}});
  }
  nlohmann::json ds = nlohmann::json::array();
  for (const auto& d : t.datasets) {
    ds.push_back({{"dataset", d.dataset},
                  {"learner_cindex", d.learner_cindex},
                  {"learner_ibrier", d.learner_ibrier},
                  {"best_cindex_learner", d.best_cindex_learner},
                  {"best_ibrier_learner", d.best_ibrier_learner},
                  {"reference_cindex", optional_json(d.reference_cindex)},
                  {"reference_ibrier", optional_json(d.reference_ibrier)},
                  {"structured_beats_reference", d.structured_beats_reference},
                  {"class_cindex", d.class_cindex},
                  {"class_ibrier", d.class_ibrier}});
  }
  const auto& s = t.structure;
  nlohmann::json structure = {{"naive_learners", s.naive_learners},
                              {"structured_learners", s.structured_learners},
                              {"naive_cindex", s.naive_cindex},
                              {"structured_cindex", s.structured_cindex},
                              {"naive_ibrier", s.naive_ibrier},
                              {"structured_ibrier", s.structured_ibrier},
                              {"naive_mean_cindex", s.naive_mean_cindex},
                              {"structured_mean_cindex", s.structured_mean_cindex},
                              {"naive_mean_ibrier", s.naive_mean_ibrier},
                              {"structured_mean_ibrier", s.structured_mean_ibrier},
                              {"welch_p_cindex", optional_json(s.welch_p_cindex)},
                              {"welch_p_ibrier", optional_json(s.welch_p_ibrier)},
                              {"paired_p_cindex", optional_json(s.paired_p_cindex)},
                              {"paired_p_ibrier", optional_json(s.paired_p_ibrier)}};
  return {{"schema_version", 1}, {"average", rows}, {"per_dataset", ds}, {"structure", structure}};
}

AggregateTables tables_from_json(const nlohmann::json& j) {
  AggregateTables t;
  try {
    if (j.at("schema_version").get<int>() != 1) throw DataError("unsupported summary schema_version");
    for (const auto& r : j.at("average")) {
      AggregatedRow row;
      row.learner = r.at("learner").get<std::string>();
      row.method = r.at("method").get<std::string>();
      row.structure_class = r.at("structure_class").get<std::string>();
      row.cindex = metric_from(r.at("cindex"));
      row.ibrier = metric_from(r.at("ibrier"));
      row.mean_train_seconds = r.at("mean_train_seconds").get<double>();
      row.mean_selected = optional_from<double>(r, "mean_selected");
      row.mean_selected_per_group = r.at("mean_selected_per_group").get<std::map<std::string, double>>();
      t.rows.push_back(std::move(row));
    }
    for (const auto& d : j.at("per_dataset")) {
      DatasetComparison c;
      c.dataset = d.at("dataset").get<std::string>();
      c.learner_cindex = d.at("learner_cindex").get<std::map<std::string, double>>();
      c.learner_ibrier = d.at("learner_ibrier").get<std::map<std::string, double>>();
      c.best_cindex_learner = d.at("best_cindex_learner").get<std::string>();
      c.best_ibrier_learner = d.at("best_ibrier_learner").get<std::string>();
      c.reference_cindex = optional_from<double>(d, "reference_cindex");
      c.reference_ibrier = optional_from<double>(d, "reference_ibrier");
      c.structured_beats_reference = d.at("structured_beats_reference").get<bool>();
      c.class_cindex = d.at("class_cindex").get<std::map<std::string, double>>();
      c.class_ibrier = d.at("class_ibrier").get<std::map<std::string, double>>();
      t.datasets.push_back(std::move(c));
    }
    const auto& s = j.at("structure");
    auto& st = t.structure;
    st.naive_learners = s.at("naive_learners").get<std::vector<std::string>>();
    st.structured_learners = s.at("structured_learners").get<std::vector<std::string>>();
    st.naive_cindex = s.at("naive_cindex").get<std::vector<double>>();
    st.structured_cindex = s.at("structured_cindex").get<std::vector<double>>();
    st.naive_ibrier = s.at("naive_ibrier").get<std::vector<double>>();
    st.structured_ibrier = s.at("structured_ibrier").get<std::vector<double>>();
    st.naive_mean_cindex = s.at("naive_mean_cindex").get<double>();
    st.structured_mean_cindex = s.at("structured_mean_cindex").get<double>();
    st.naive_mean_ibrier = s.at("naive_mean_ibrier").get<double>();
    st.structured_mean_ibrier = s.at("structured_mean_ibrier").get<double>();
    st.welch_p_cindex = optional_from<double>(s, "welch_p_cindex");
    st.welch_p_ibrier = optional_from<double>(s, "welch_p_ibrier");
    st.paired_p_cindex = optional_from<double>(s, "paired_p_cindex");
    st.paired_p_ibrier = optional_from<double>(s, "paired_p_ibrier");
  } catch (const nlohmann::json::exception& e) {
    throw DataError(std::string("malformed summary: ") + e.what());
  }
  return t;
}

// ---------------------------------------------------------------------------
// Benchmark driver

std::uint64_t fold_seed(std::uint64_t master, const std::string& dataset) {
  return derive_seed(master, {hash_name(dataset), hash_name("folds")});
}

std::uint64_t evaluation_seed(std::uint64_t master, const std::string& dataset, int repetition, int fold,
                              const std::string& learner) {
  return derive_seed(master, {hash_name(dataset), static_cast<std::uint64_t>(repetition),
                              static_cast<std::uint64_t>(fold), hash_name(learner)});
}

BenchmarkResult run_benchmark(const std::vector<SurvivalDataset>& datasets, const BenchmarkSettings& settings) {
  if (settings.learners.empty()) throw ConfigError("no learners configured");
  BenchmarkResult result;
  result.datasets_attempted = datasets.size();

  struct Task {
    std::size_t dataset;
    std::size_t learner;
    int repetition;
    int fold;
    const FoldAssignment* assignment;
  };
  std::vector<std::vector<FoldAssignment>> folds(datasets.size());
  std::vector<bool> usable(datasets.size(), false);
  std::vector<Task> tasks;
  for (std::size_t d = 0; d < datasets.size(); ++d) {
    const auto& data = datasets[d];
    try {
      data.validate();
      CvScheme scheme = choose_cv_scheme(data.source_bytes);
      if (settings.cv_override) {
        scheme = *settings.cv_override;
      } else if (scheme.warning) {
        result.log.push_back("warning: dataset " + data.name +
                             " is between 92 and 112 MB; using 5 x 5-fold CV");
      }
      folds[d] = stratified_folds(data.outcomes, scheme.folds, scheme.repetitions, fold_seed(settings.master_seed, data.name));
      usable[d] = true;
      result.log.push_back("dataset " + data.name + ": n=" + std::to_string(data.n()) + " p=" +
                           std::to_string(data.p()) + " cv=" + std::to_string(scheme.repetitions) + "x" +
                           std::to_string(scheme.folds));
    } catch (const std::exception& e) {
      result.log.push_back("error: dataset " + data.name + " aborted: " + e.what());
      ++result.datasets_aborted;
      continue;
    }
  }
  for (std::size_t d = 0; d < datasets.size(); ++d) {
    if (!usable[d]) continue;
    const int k = *std::max_element(folds[d].front().fold_of.begin(), folds[d].front().fold_of.end());
    for (std::size_t l = 0; l < settings.learners.size(); ++l)
      for (const auto& fa : folds[d])
        for (int f = 1; f <= k; ++f)
          tasks.push_back({d, l, static_cast<int>(fa.repetition) + 1, f, &fa});
  }

  std::vector<FoldOutcome> outcomes(tasks.size());
  std::atomic<std::size_t> next{0};
  EvaluationOptions options;
  options.tau = settings.tau;
  options.defaults = settings.defaults;
  auto worker = [&]() {
    for (;;) {
      const std::size_t t = next.fetch_add(1);
      if (t >= tasks.size()) return;
      const Task& task = tasks[t];
      const auto& data = datasets[task.dataset];
      const auto& spec = settings.learners[task.learner];
      const auto train_rows = task.assignment->train_rows(task.fold);
      const auto test_rows = task.assignment->test_rows(task.fold);
      FoldOutcome o = evaluate_fold(spec, data.subset(train_rows), data.subset(test_rows),
                                    evaluation_seed(settings.master_seed, data.name, task.repetition, task.fold,
                                                    spec.name),
                                    options);
      o.dataset = data.name;
      o.repetition = task.repetition;
      o.fold = task.fold;
      outcomes[t] = std::move(o);
    }
  };
  const int workers = std::max(1, settings.workers);
  if (workers == 1) {
    worker();
  } else {
    std::vector<std::thread> pool;
    for (int w = 0; w < workers; ++w) pool.emplace_back(worker);
    for (auto& th : pool) th.join();
  }

  for (const auto& o : outcomes) {
    if (o.failure_reason) {
      result.log.push_back("failure: " + o.learner + " on " + o.dataset + " rep " + std::to_string(o.repetition) +
                           " fold " + std::to_string(o.fold) + ": " + *o.failure_reason);
    } else if (o.cindex_failed) {
      result.log.push_back("warning: " + o.learner + " on " + o.dataset + " rep " + std::to_string(o.repetition) +
                           " fold " + std::to_string(o.fold) + ": no comparable pairs for the C-index");
    }
    if (o.brier_dropped_terms > 0) {
      result.log.push_back("warning: " + o.learner + " on " + o.dataset + " rep " + std::to_string(o.repetition) +
                           " fold " + std::to_string(o.fold) + ": " + std::to_string(o.brier_dropped_terms) +
                           " Brier terms dropped (censoring survival reached 0)");
    }
  }

  // Failure policy per learner x dataset, then aggregation.
  for (std::size_t d = 0; d < datasets.size(); ++d) {
    if (!usable[d]) continue;
    for (const auto& spec : settings.learners) {
      std::vector<FoldOutcome> series;
      for (const auto& o : outcomes)
        if (o.dataset == datasets[d].name && o.learner == spec.name) series.push_back(o);
      if (series.empty()) continue;
      PolicyResult policy = apply_failure_policy(std::move(series));
      if (policy.unusable) {
        result.log.push_back("warning: " + spec.name + " failed on every iteration of " + datasets[d].name);
      } else if (policy.cindex_failure_fraction > 0.0 || policy.ibrier_failure_fraction > 0.0) {
        result.log.push_back("policy: " + spec.name + " on " + datasets[d].name + " cindex failures " +
                             format_double(policy.cindex_failure_fraction) + ", ibrier failures " +
                             format_double(policy.ibrier_failure_fraction));
      }
      for (auto& o : policy.outcomes) result.imputed.push_back(std::move(o));
    }
  }
  result.outcomes = std::move(outcomes);
  result.tables = aggregate(result.imputed, settings.learners);
  return result;
}

BenchmarkResult run_benchmark(const std::vector<std::filesystem::path>& manifests, const BenchmarkSettings& settings) {
  std::vector<SurvivalDataset> datasets;
  std::vector<std::string> load_log;
  std::size_t failed = 0;
  for (const auto& path : manifests) {
    try {
      datasets.push_back(load_dataset(path));
    } catch (const std::exception& e) {
      load_log.push_back("error: could not load " + path.string() + ": " + e.what());
      ++failed;
    }
  }
  BenchmarkResult result = datasets.empty() ? BenchmarkResult{} : run_benchmark(datasets, settings);
  result.log.insert(result.log.begin(), load_log.begin(), load_log.end());
  result.datasets_attempted += failed;
  result.datasets_aborted += failed;
  return result;
}

// ---------------------------------------------------------------------------
// Output

std::string outcomes_to_csv(const std::vector<FoldOutcome>& outcomes, bool include_timing) {
  std::ostringstream out;
  out << "learner,dataset,repetition,fold,cindex,ibrier";
  if (include_timing) out << ",train_seconds";
  out << ",selected_total,selected_per_group,failure_reason\n";
  auto opt = [](const std::optional<double>& v) { return v ? format_double(*v) : std::string("NA"); };
  for (const auto& o : outcomes) {
    out << csv_escape(o.learner) << ',' << csv_escape(o.dataset) << ',' << o.repetition << ',' << o.fold << ','
        << opt(o.cindex) << ',' << opt(o.ibrier);
    if (include_timing) out << ',' << format_double(o.train_seconds);
    out << ',' << opt(o.selected_total) << ',';
    std::string groups;
    for (std::size_t g = 0; g < o.selected_per_group.size() && g < o.group_names.size(); ++g) {
      if (g) groups += ';';
      groups += o.group_names[g] + "=" + format_double(o.selected_per_group[g]);
    }
    out << csv_escape(groups.empty() ? "NA" : groups) << ',' << csv_escape(o.failure_reason.value_or("")) << '\n';
  }
  return out.str();
}

void write_results(const BenchmarkResult& result, const std::filesystem::path& directory) {
  std::filesystem::create_directories(directory);
  {
    std::ofstream f(directory / "results.csv");
    if (!f) throw DataError("cannot write " + (directory / "results.csv").string());
    f << outcomes_to_csv(result.outcomes);
  }
  {
    std::ofstream f(directory / "summary.json");
    if (!f) throw DataError("cannot write " + (directory / "summary.json").string());
    f << tables_to_json(result.tables).dump(2) << '\n';
  }
  {
    std::ofstream f(directory / "run.log");
    if (!f) throw DataError("cannot write " + (directory / "run.log").string());
    for (const auto& line : result.log) f << line << '\n';
  }
}

}  // namespace survbench
