#include <sstream>

#include <pybind11/eigen.h>
#include <pybind11/pybind11.h>
#include <pybind11/stl.h>
#include <pybind11/stl/filesystem.h>

#include "survbench/cli.hpp"
#include "survbench/cox.hpp"
#include "survbench/error.hpp"
#include "survbench/harness.hpp"
#include "survbench/metrics.hpp"
#include "survbench/simulate.hpp"

namespace py = pybind11;
using namespace survbench;

namespace {

Outcomes to_outcomes(const std::vector<double>& time, const std::vector<int>& event) {
  if (time.size() != event.size()) throw std::invalid_argument("time and event differ in length");
  Outcomes y(time.size());
  for (std::size_t i = 0; i < time.size(); ++i) y[i] = {time[i], event[i]};
  return y;
}

py::tuple step_tuple(const StepFunction& f) { return py::make_tuple(f.jump_times(), f.values()); }

std::vector<double> times_of(const Outcomes& y) {
  std::vector<double> t;
  for (const auto& o : y) t.push_back(o.time);
  return t;
}

std::vector<int> events_of(const Outcomes& y) {
  std::vector<int> e;
  for (const auto& o : y) e.push_back(o.event);
  return e;
}

class PyLearner {
 public:
  PyLearner(std::unique_ptr<FittedLearner> fitted) : fitted_(std::move(fitted)) {}
  std::vector<double> risk_scores(const Matrix& x) const { return fitted_->risk_scores(x); }
  std::vector<py::tuple> survival_curves(const Matrix& x) const {
    std::vector<py::tuple> out;
    for (const auto& c : fitted_->survival_curves(x)) out.push_back(step_tuple(c));
    return out;
  }
  std::optional<Vector> coefficients() const { return fitted_->coefficients(); }

 private:
  std::unique_ptr<FittedLearner> fitted_;
};

}  // namespace

PYBIND11_MODULE(_core, m) {
  m.doc() = "Survival prediction benchmark for multi-omics data";

  py::register_exception<DataError>(m, "DataError", PyExc_ValueError);
  py::register_exception<ConfigError>(m, "ConfigError", PyExc_ValueError);

  py::class_<SurvivalDataset>(m, "Dataset")
      .def_readonly("name", &SurvivalDataset::name)
      .def_readonly("features", &SurvivalDataset::features)
      .def_property_readonly("n", &SurvivalDataset::n)
      .def_property_readonly("p", &SurvivalDataset::p)
      .def_property_readonly("time", [](const SurvivalDataset& d) { return times_of(d.outcomes); })
      .def_property_readonly("event", [](const SurvivalDataset& d) { return events_of(d.outcomes); })
      .def_property_readonly("group_names", [](const SurvivalDataset& d) { return d.groups.names(); })
      .def_property_readonly("group_columns",
                             [](const SurvivalDataset& d) {
                               std::vector<std::vector<Index>> cols;
                               for (std::size_t g = 0; g < d.groups.size(); ++g) cols.push_back(d.groups.columns(g));
                               return cols;
                             })
      .def_property_readonly("clinical_group", [](const SurvivalDataset& d) { return d.groups.clinical_group(); })
      .def("subset", [](const SurvivalDataset& d, const std::vector<std::size_t>& rows) { return d.subset(rows); });

  m.def("load_dataset", &load_dataset, py::arg("manifest"));
  m.def("write_dataset", &write_dataset, py::arg("dataset"), py::arg("directory"));
  m.def(
      "simulate",
      [](Index n, std::vector<Index> omics_sizes, double censoring, double clinical_scale, std::uint64_t seed,
         std::string name) {
        SimulationSpec spec;
        spec.n = n;
        spec.omics_sizes = std::move(omics_sizes);
        spec.censoring_fraction = censoring;
        spec.seed = seed;
        spec.name = std::move(name);
        for (double& b : spec.clinical_effects) b *= clinical_scale;
        return simulate_dataset(spec);
      },
      py::arg("n") = 150, py::arg("omics_sizes") = std::vector<Index>{300, 500, 1000}, py::arg("censoring") = 0.3,
      py::arg("clinical_scale") = 1.0, py::arg("seed") = 1, py::arg("name") = "synthetic");

  m.def(
      "stratified_folds",
      [](const std::vector<double>& time, const std::vector<int>& event, int k, int repetitions, std::uint64_t seed) {
        std::vector<std::vector<int>> out;
        for (const auto& f : stratified_folds(to_outcomes(time, event), k, repetitions, seed)) out.push_back(f.fold_of);
        return out;
      },
      py::arg("time"), py::arg("event"), py::arg("k") = 5, py::arg("repetitions") = 1, py::arg("seed") = 1);

  m.def(
      "cox_loss",
      [](const Matrix& x, const std::vector<double>& time, const std::vector<int>& event, const Vector& beta) {
        return neg_partial_loglik(x, to_outcomes(time, event), beta);
      },
      py::arg("x"), py::arg("time"), py::arg("event"), py::arg("beta"));
  m.def(
      "cox_gradient",
      [](const Matrix& x, const std::vector<double>& time, const std::vector<int>& event, const Vector& beta) {
        return npl_gradient(x, to_outcomes(time, event), beta);
      },
      py::arg("x"), py::arg("time"), py::arg("event"), py::arg("beta"));
  m.def(
      "nelson_aalen",
      [](const std::vector<double>& time, const std::vector<int>& event) {
        return step_tuple(nelson_aalen(to_outcomes(time, event)));
      },
      py::arg("time"), py::arg("event"));
  m.def(
      "kaplan_meier",
      [](const std::vector<double>& time, const std::vector<int>& event) {
        return step_tuple(kaplan_meier(to_outcomes(time, event)));
      },
      py::arg("time"), py::arg("event"));

  m.def(
      "uno_cindex",
      [](const std::vector<double>& train_time, const std::vector<int>& train_event,
         const std::vector<double>& test_time, const std::vector<int>& test_event, const std::vector<double>& scores,
         std::optional<double> tau) {
        const auto train = to_outcomes(train_time, train_event);
        return uno_cindex(train, to_outcomes(test_time, test_event), scores, tau ? *tau : default_tau(train));
      },
      py::arg("train_time"), py::arg("train_event"), py::arg("test_time"), py::arg("test_event"), py::arg("scores"),
      py::arg("tau") = py::none());

  py::class_<PyLearner>(m, "FittedLearner")
      .def("risk_scores", &PyLearner::risk_scores, py::arg("x"))
      .def("survival_curves", &PyLearner::survival_curves, py::arg("x"))
      .def_property_readonly("coefficients", &PyLearner::coefficients);

  m.def("method_ids", &method_ids);
  m.def(
      "_fit_learner",
      [](const std::string& method, const SurvivalDataset& train, std::uint64_t seed, const std::string& overrides) {
        const auto id = parse_method(method);
        if (!id) throw ConfigError("unknown learner '" + method + "'");
        const auto spec = make_learner(method, *id, nlohmann::json::parse(overrides));
        return PyLearner(fit_learner(spec, train, seed));
      },
      py::arg("method"), py::arg("train"), py::arg("seed"), py::arg("overrides"));

  m.def(
      "_evaluate_fold",
      [](const std::string& method, const SurvivalDataset& train, const SurvivalDataset& test, std::uint64_t seed,
         const std::string& overrides) {
        const auto id = parse_method(method);
        if (!id) throw ConfigError("unknown learner '" + method + "'");
        const auto o = evaluate_fold(make_learner(method, *id, nlohmann::json::parse(overrides)), train, test, seed);
        py::dict d;
        d["cindex"] = o.cindex;
        d["ibrier"] = o.ibrier;
        d["train_seconds"] = o.train_seconds;
        d["selected_total"] = o.selected_total;
        py::dict groups;
        for (std::size_t g = 0; g < o.selected_per_group.size() && g < o.group_names.size(); ++g)
          groups[py::str(o.group_names[g])] = o.selected_per_group[g];
        d["selected_per_group"] = groups;
        d["failure_reason"] = o.failure_reason;
        return d;
      },
      py::arg("method"), py::arg("train"), py::arg("test"), py::arg("seed"), py::arg("overrides"));

  m.def(
      "choose_cv_scheme",
      [](std::uintmax_t bytes) {
        const auto s = choose_cv_scheme(bytes);
        return py::make_tuple(s.repetitions, s.folds, s.warning);
      },
      py::arg("dataset_bytes"));

  m.def(
      "run_cli",
      [](const std::vector<std::string>& args) {
        std::vector<std::string> full{"survbench"};
        full.insert(full.end(), args.begin(), args.end());
        std::vector<const char*> argv;
        for (const auto& a : full) argv.push_back(a.c_str());
        std::ostringstream out, err;
        int code;
        {
          py::gil_scoped_release release;
          code = run_cli(static_cast<int>(argv.size()), argv.data(), out, err);
        }
        return py::make_tuple(code, out.str(), err.str());
      },
      py::arg("args"));
}
