#include "survbench/cli.hpp"

#include <algorithm>
#include <cstdio>
#include <fstream>
#include <iomanip>
#include <set>
#include <sstream>

#include <CLI11.hpp>

#include "survbench/config.hpp"
#include "survbench/error.hpp"

namespace survbench {

namespace {

std::string fixed(double v, int digits = 3) {
  std::ostringstream s;
  s << std::fixed << std::setprecision(digits) << v;
  return s.str();
}

std::string fixed(const std::optional<double>& v, int digits = 3) { return v ? fixed(*v, digits) : "NA"; }

// Left-aligned first column, right-aligned others.
std::string render_text_table(const std::vector<std::string>& header, const std::vector<std::vector<std::string>>& rows) {
  std::vector<std::size_t> width(header.size(), 0);
  for (std::size_t c = 0; c < header.size(); ++c) width[c] = header[c].size();
  for (const auto& r : rows)
    for (std::size_t c = 0; c < r.size() && c < width.size(); ++c) width[c] = std::max(width[c], r[c].size());
  std::ostringstream out;
  auto line = [&](const std::vector<std::string>& r) {
    for (std::size_t c = 0; c < header.size(); ++c) {
      const std::string cell = c < r.size() ? r[c] : "";
      if (c) out << "  ";
      if (c == 0)
        out << std::left << std::setw(static_cast<int>(width[c])) << cell;
      else
        out << std::right << std::setw(static_cast<int>(width[c])) << cell;
    }
    out << '\n';
  };
  line(header);
  std::size_t total = 0;
  for (auto w : width) total += w + 2;
  out << std::string(total > 2 ? total - 2 : 0, '-') << '\n';
  for (const auto& r : rows) line(r);
  return out.str();
}

std::string csv_cell(const std::string& s) {
  if (s.find_first_of(",\"") == std::string::npos) return s;
  std::string out = "\"";
  for (char c : s) out += c == '"' ? std::string("\"\"") : std::string(1, c);
  return out + "\"";
}

std::string render_csv_table(const std::string& title, const std::vector<std::string>& header,
                             const std::vector<std::vector<std::string>>& rows) {
  std::ostringstream out;
  out << "# " << title << '\n';
  for (std::size_t c = 0; c < header.size(); ++c) out << (c ? "," : "") << csv_cell(header[c]);
  out << '\n';
  for (const auto& r : rows) {
    for (std::size_t c = 0; c < r.size(); ++c) out << (c ? "," : "") << csv_cell(r[c]);
    out << '\n';
  }
  return out.str();
}

SurvivalDataset load_or_report(const std::filesystem::path& manifest, std::ostream& err, int& code) {
  try {
    auto data = load_dataset(manifest);
    data.validate();
    code = kExitOk;
    return data;
  } catch (const std::exception& e) {
    err << "error: " << e.what() << '\n';
    code = kExitData;
    return {};
  }
}

}  // namespace

int cmd_validate(const std::filesystem::path& manifest, std::ostream& out, std::ostream& err) {
  if (!std::filesystem::exists(manifest)) {
    err << "error: manifest not found: " << manifest.string() << '\n';
    return kExitData;
  }
  int code = kExitOk;
  const SurvivalDataset data = load_or_report(manifest, err, code);
  if (code != kExitOk) return code;
  const double events = static_cast<double>(count_events(data.outcomes));
  const double ratio = events / static_cast<double>(data.n());
  std::vector<std::string> header{"dataset", "n", "p"};
  std::vector<std::string> row{data.name, std::to_string(data.n()), std::to_string(data.p())};
  for (std::size_t g = 0; g < data.groups.size(); ++g) {
    header.push_back("p_" + data.groups.name(g));
    row.push_back(std::to_string(data.groups.columns(g).size()));
  }
  header.insert(header.end(), {"n_e", "r_e"});
  row.push_back(std::to_string(static_cast<long long>(events)));
  row.push_back(fixed(ratio, 3));
  out << render_text_table(header, {row});
  if (data.groups.clinical_group()) out << "clinical group: " << *data.groups.clinical_group() << '\n';
  if (ratio < 0.05) err << "warning: event ratio " << fixed(ratio, 3) << " is below 5% effective cases\n";
  return kExitOk;
}

int cmd_run(const std::filesystem::path& config_path, const RunOptions& options, std::ostream& out,
            std::ostream& err) {
  ExperimentConfig cfg;
  try {
    cfg = load_config(config_path);
  } catch (const std::exception& e) {
    err << "error: " << e.what() << '\n';
    return kExitUsage;
  }
  if (options.workers) {
    if (*options.workers < 1) {
      err << "error: --workers must be at least 1\n";
      return kExitUsage;
    }
    cfg.workers = *options.workers;
  }
  if (options.seed) cfg.master_seed = *options.seed;
  if (options.output_dir) cfg.output_dir = *options.output_dir;
  const BenchmarkSettings settings = cfg.settings();

  if (options.dry_run) {
    std::size_t total = 0;
    std::vector<std::vector<std::string>> rows;
    for (const auto& path : cfg.datasets) {
      int code = kExitOk;
      const SurvivalDataset data = load_or_report(path, err, code);
      if (code != kExitOk) {
        rows.push_back({path.string(), "error", "", ""});
        continue;
      }
      const CvScheme scheme = cfg.cv ? *cfg.cv : choose_cv_scheme(data.source_bytes);
      const std::size_t tuples =
          static_cast<std::size_t>(scheme.repetitions) * static_cast<std::size_t>(scheme.folds) * cfg.learners.size();
      total += tuples;
      rows.push_back({data.name, std::to_string(scheme.repetitions) + "x" + std::to_string(scheme.folds),
                      std::to_string(cfg.learners.size()), std::to_string(tuples)});
    }
    out << render_text_table({"dataset", "cv", "learners", "evaluations"}, rows);
    out << "total evaluations: " << total << '\n';
    return kExitOk;
  }

  BenchmarkResult result;
  try {
    result = run_benchmark(cfg.datasets, settings);
    write_results(result, cfg.output_dir);
  } catch (const ConfigError& e) {
    err << "error: " << e.what() << '\n';
    return kExitUsage;
  } catch (const std::exception& e) {
    err << "error: " << e.what() << '\n';
    return kExitData;
  }
  for (const auto& line : result.log)
    if (line.rfind("error", 0) == 0 || line.rfind("warning", 0) == 0) err << line << '\n';
  out << "wrote " << result.outcomes.size() << " fold outcomes to " << cfg.output_dir.string() << '\n';
  if (result.datasets_attempted > 0 && result.datasets_aborted == result.datasets_attempted) {
    err << "error: every dataset aborted\n";
    return kExitRunFailed;
  }
  return kExitOk;
}

std::string render_report(const AggregateTables& t, const std::string& format) {
  const bool csv = format == "csv";
  std::ostringstream out;

  // Average performance.
  std::set<std::string> group_names;
  for (const auto& r : t.rows)
    for (const auto& [g, v] : r.mean_selected_per_group) group_names.insert(g);
  std::vector<std::string> header{"learner", "cindex", "cindex_ci", "ibrier", "ibrier_ci", "time_min", "selected"};
  for (const auto& g : group_names) header.push_back("sel_" + g);
  std::vector<std::vector<std::string>> rows;
  for (const auto& r : t.rows) {
    std::vector<std::string> row{r.learner,
                                 fixed(r.cindex.mean),
                                 "[" + fixed(r.cindex.ci_lower) + ", " + fixed(r.cindex.ci_upper) + "]",
                                 fixed(r.ibrier.mean),
                                 "[" + fixed(r.ibrier.ci_lower) + ", " + fixed(r.ibrier.ci_upper) + "]",
                                 fixed(r.mean_train_seconds / 60.0, 4),
                                 fixed(r.mean_selected, 1)};
    for (const auto& g : group_names) {
      const auto it = r.mean_selected_per_group.find(g);
      row.push_back(it == r.mean_selected_per_group.end() ? "NA" : fixed(it->second, 1));
    }
    rows.push_back(std::move(row));
  }
  if (csv) {
    out << render_csv_table("average", header, rows) << '\n';
  } else {
    out << "Average learner performance (ordered by cindex)\n" << render_text_table(header, rows) << '\n';
  }

  // Per-dataset best learners against the clinical reference.
  rows.clear();
  for (const auto& d : t.datasets) {
    const auto bc = d.learner_cindex.find(d.best_cindex_learner);
    const auto bb = d.learner_ibrier.find(d.best_ibrier_learner);
    rows.push_back({(d.structured_beats_reference && !csv ? "*" : "") + d.dataset, d.best_cindex_learner,
                    bc == d.learner_cindex.end() ? "NA" : fixed(bc->second), d.best_ibrier_learner,
                    bb == d.learner_ibrier.end() ? "NA" : fixed(bb->second), fixed(d.reference_cindex),
                    fixed(d.reference_ibrier), d.structured_beats_reference ? "yes" : "no"});
  }
  header = {"dataset", "best_cindex_learner", "best_cindex", "best_ibrier_learner", "best_ibrier",
            "clinical_cindex", "clinical_ibrier", "structured_beats_clinical"};
  if (csv) {
    out << render_csv_table("per_dataset", header, rows) << '\n';
  } else {
    out << "Best learner per dataset (* = a structured learner beats clinical-only Cox on both metrics)\n"
        << render_text_table(header, rows) << '\n';
  }

  // Naive versus structured.
  rows.clear();
  auto lookup = [](const std::map<std::string, double>& m, const char* key) -> std::optional<double> {
    const auto it = m.find(key);
    if (it == m.end()) return std::nullopt;
    return it->second;
  };
  auto mark = [csv](const std::optional<double>& v, bool better) {
    return (better && !csv ? "*" : "") + fixed(v);
  };
  for (const auto& d : t.datasets) {
    const auto nc = lookup(d.class_cindex, "naive_all"), sc = lookup(d.class_cindex, "structured_all");
    const auto nb = lookup(d.class_ibrier, "naive_all"), sb = lookup(d.class_ibrier, "structured_all");
    rows.push_back({d.dataset, mark(nc, nc && sc && *nc > *sc), mark(sc, nc && sc && *sc > *nc),
                    mark(nb, nb && sb && *nb < *sb), mark(sb, nb && sb && *sb < *nb)});
  }
  const auto& s = t.structure;
  rows.push_back({"mean over learners", fixed(s.naive_mean_cindex), fixed(s.structured_mean_cindex),
                  fixed(s.naive_mean_ibrier), fixed(s.structured_mean_ibrier)});
  header = {"dataset", "naive_cindex", "structured_cindex", "naive_ibrier", "structured_ibrier"};
  if (csv) {
    out << render_csv_table("naive_vs_structured", header, rows);
    out << "# tests\nwelch_p_cindex,welch_p_ibrier,paired_p_cindex,paired_p_ibrier\n"
        << fixed(s.welch_p_cindex, 4) << ',' << fixed(s.welch_p_ibrier, 4) << ',' << fixed(s.paired_p_cindex, 4)
        << ',' << fixed(s.paired_p_ibrier, 4) << '\n';
  } else {
    out << "Naive versus structured learners (* = better value)\n" << render_text_table(header, rows);
    out << "one-sided Welch p (learner means): cindex " << fixed(s.welch_p_cindex, 4) << ", ibrier "
        << fixed(s.welch_p_ibrier, 4) << '\n';
    out << "paired t-test p (datasets): cindex " << fixed(s.paired_p_cindex, 4) << ", ibrier "
        << fixed(s.paired_p_ibrier, 4) << '\n';
  }
  return out.str();
}

int cmd_report(const std::filesystem::path& results, const std::string& format, std::ostream& out,
               std::ostream& err) {
  if (format != "text" && format != "csv") {
    err << "error: --format must be text or csv\n";
    return kExitUsage;
  }
  std::filesystem::path path = results;
  if (std::filesystem::is_directory(path)) path /= "summary.json";
  std::ifstream in(path);
  if (!in) {
    err << "error: cannot open " << path.string() << '\n';
    return kExitData;
  }
  try {
    nlohmann::json j;
    in >> j;
    out << render_report(tables_from_json(j), format);
  } catch (const std::exception& e) {
    err << "error: malformed results file: " << e.what() << '\n';
    return kExitData;
  }
  return kExitOk;
}

int cmd_simulate(const std::filesystem::path& directory, const SimulationSpec& spec, std::ostream& out,
                 std::ostream& err) {
  try {
    const SurvivalDataset data = simulate_dataset(spec);
    write_dataset(data, directory);
    out << "wrote " << data.name << " (n=" << data.n() << ", p=" << data.p() << ") to " << directory.string() << '\n';
  } catch (const std::exception& e) {
    err << "error: " << e.what() << '\n';
    return kExitData;
  }
  return kExitOk;
}

int run_cli(int argc, const char* const* argv, std::ostream& out, std::ostream& err) {
  CLI::App app{"Benchmark of survival prediction methods for multi-omics data"};
  app.require_subcommand(1);

  std::string manifest;
  auto* validate = app.add_subcommand("validate", "Check a dataset manifest and print its summary");
  validate->add_option("manifest", manifest, "Dataset manifest (JSON)")->required();

  std::string config;
  RunOptions run_opts;
  int workers = 0;
  std::uint64_t seed = 0;
  std::string output_dir;
  auto* run = app.add_subcommand("run", "Run a benchmark from a config file");
  run->add_option("config", config, "Experiment config (JSON)")->required();
  auto* workers_opt = run->add_option("--workers", workers, "Concurrent fold evaluations");
  auto* seed_opt = run->add_option("--seed", seed, "Master seed (overrides the config)");
  auto* out_opt = run->add_option("--output", output_dir, "Output directory (overrides the config)");
  run->add_flag("--dry-run", run_opts.dry_run, "Print the evaluation plan without fitting");

  std::string results;
  std::string format = "text";
  auto* report = app.add_subcommand("report", "Render result tables");
  report->add_option("results", results, "summary.json or an output directory")->required();
  report->add_option("--format", format, "text or csv")->check(CLI::IsMember({"text", "csv"}));

  std::string sim_dir;
  SimulationSpec spec;
  double clinical_scale = 1.0;
  auto* simulate = app.add_subcommand("simulate", "Write a synthetic multi-block dataset");
  simulate->add_option("directory", sim_dir, "Output directory")->required();
  simulate->add_option("--n", spec.n, "Observations");
  simulate->add_option("--seed", spec.seed, "Random seed");
  simulate->add_option("--name", spec.name, "Dataset name");
  simulate->add_option("--omics", spec.omics_sizes, "Omics group sizes");
  simulate->add_option("--censoring", spec.censoring_fraction, "Target censoring fraction");
  simulate->add_option("--clinical-scale", clinical_scale, "Multiplier for the clinical effects");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e, out, err);
    return code == 0 ? kExitOk : kExitUsage;
  }

  if (*validate) return cmd_validate(manifest, out, err);
  if (*run) {
    if (*workers_opt) run_opts.workers = workers;
    if (*seed_opt) run_opts.seed = seed;
    if (*out_opt) run_opts.output_dir = output_dir;
    return cmd_run(config, run_opts, out, err);
  }
  if (*report) return cmd_report(results, format, out, err);
  if (*simulate) {
    for (double& b : spec.clinical_effects) b *= clinical_scale;
    return cmd_simulate(sim_dir, spec, out, err);
  }
  return kExitUsage;
}

}  // namespace survbench
