// Acceptance gate: one PASS/FAIL line per criterion, exit code 1 if any fails.
#include <chrono>
#include <cmath>
#include <cstdio>
#include <functional>
#include <map>
#include <random>
#include <string>

#include "oracles.hpp"
#include "survbench/cox.hpp"
#include "survbench/forest.hpp"
#include "survbench/harness.hpp"
#include "survbench/metrics.hpp"
#include "survbench/penalized.hpp"
#include "survbench/simulate.hpp"

using namespace survbench;

namespace {

// Pinned tolerances and budgets.
constexpr double kGradientRelTol = 1e-6;
constexpr double kGradientSeconds = 5.0;
constexpr double kEstimatorTol = 1e-12;
constexpr double kLassoOracleTol = 1e-4;
constexpr double kKktTol = 1e-6;
constexpr double kLassoSeconds = 30.0;
constexpr double kSglReductionTol = 1e-4;
constexpr double kBrierHalfTol = 1e-12;
constexpr double kBreslowTol = 1e-12;
constexpr double kNaiveZeroClinicalShare = 0.70;
constexpr double kSparsitySeconds = 600.0;
constexpr double kStructuredWelchP = 0.1;

using Clock = std::chrono::steady_clock;

double seconds_since(Clock::time_point start) {
  return std::chrono::duration<double>(Clock::now() - start).count();
}

int failures = 0;

void report(int id, const std::string& name, bool pass, const std::string& detail) {
  std::printf("criterion %2d  %-4s  %s: %s\n", id, pass ? "PASS" : "FAIL", name.c_str(), detail.c_str());
  std::fflush(stdout);
  if (!pass) ++failures;
}

std::string fmt(const char* f, double a, double b = 0.0, double c = 0.0) {
  char buf[256];
  std::snprintf(buf, sizeof buf, f, a, b, c);
  return buf;
}

Outcomes make(std::initializer_list<std::pair<double, int>> pairs) {
  Outcomes y;
  for (const auto& [t, e] : pairs) y.push_back({t, e});
  return y;
}

double lasso_kkt(const Matrix& x, const Outcomes& y, const Vector& beta, double lambda) {
  const Vector g = npl_gradient(x, y, beta) / static_cast<double>(x.rows());
  double worst = 0.0;
  for (Index j = 0; j < beta.size(); ++j)
    worst = std::max(worst, beta(j) == 0.0 ? std::abs(g(j)) - lambda
                                           : std::abs(g(j) + lambda * (beta(j) > 0 ? 1.0 : -1.0)));
  return worst;
}

void criterion_1() {
  const auto start = Clock::now();
  std::mt19937_64 gen(101);
  std::normal_distribution<double> normal;
  double worst = 0.0;
  for (int trial = 0; trial < 100; ++trial) {
    Matrix x;
    Outcomes y;
    oracle::random_survival(gen, 20, 5, 0.3, x, y);
    Vector beta(5);
    for (Index j = 0; j < 5; ++j) beta(j) = 0.5 * normal(gen);
    const Vector g = npl_gradient(x, y, beta);
    const Vector fd =
        oracle::central_difference([&](const Vector& b) { return neg_partial_loglik(x, y, b); }, beta, 1e-5);
    worst = std::max(worst, (g - fd).cwiseAbs().maxCoeff() / std::max(1.0, fd.cwiseAbs().maxCoeff()));
  }
  const double secs = seconds_since(start);
  report(1, "gradient vs central differences", worst <= kGradientRelTol && secs < kGradientSeconds,
         fmt("worst relative error %.2e over 100 instances, %.2f s", worst, secs));
}

void criterion_2() {
  double worst = 0.0;
  auto check = [&](double got, double want) { worst = std::max(worst, std::abs(got - want)); };
  const auto y = make({{1, 1}, {2, 0}, {3, 1}});
  const auto na = nelson_aalen(y);
  check(na(1), 1.0 / 3.0);
  check(na(2), 1.0 / 3.0);
  check(na(3), 4.0 / 3.0);
  const auto tied = nelson_aalen(make({{1, 1}, {1, 1}, {2, 1}}));
  check(tied(1), 2.0 / 3.0);
  check(tied(2), 5.0 / 3.0);
  const auto km = kaplan_meier(y);
  check(km(1), 2.0 / 3.0);
  check(km(2), 2.0 / 3.0);
  check(km(3), 0.0);
  Matrix x(3, 1);
  x << 0.3, -1, 2;
  const auto b0 = breslow_baseline(x, y, Vector::Zero(1));
  check(b0(1), 1.0 / 3.0);
  check(b0(3), 4.0 / 3.0);
  // Breslow with beta = 1 on x = (0, 1, 0): jumps 1/(1 + e + 1) at t=1, 1/1 at t=3.
  Matrix x1(3, 1);
  x1 << 0, 1, 0;
  const auto b1 = breslow_baseline(x1, y, Vector::Constant(1, 1.0));
  check(b1(1), 1.0 / (2.0 + std::exp(1.0)));
  check(b1(3), 1.0 / (2.0 + std::exp(1.0)) + 1.0);
  report(2, "Nelson-Aalen, Kaplan-Meier, Breslow hand values", worst <= kEstimatorTol,
         fmt("largest deviation %.1e", worst));
}

void criterion_3() {
  const auto start = Clock::now();
  std::mt19937_64 gen(103);
  std::uniform_real_distribution<double> frac(0.05, 0.7);
  double worst_gap = 0.0, worst_kkt = 0.0;
  for (int trial = 0; trial < 25; ++trial) {
    Matrix raw;
    Outcomes y;
    oracle::random_survival(gen, 10, 3, 0.2, raw, y, 1.0);
    const auto st = standardize(raw);
    const RiskSetIndex risk(y);
    const CoxPathSolver solver(st.x, risk, Vector(), {}, 1.0, 10000, 1e-10);
    const double lambda = frac(gen) * solver.lambda_max();
    Vector beta = Vector::Zero(3);
    solver.solve(lambda, beta);
    const Vector reference = oracle::proximal_lasso(st.x, y, lambda, {1, 1, 1});
    worst_gap = std::max(worst_gap, (beta - reference).cwiseAbs().maxCoeff());
    worst_kkt = std::max(worst_kkt, lasso_kkt(st.x, y, beta, lambda));
  }
  const double secs = seconds_since(start);
  report(3, "Lasso vs proximal-gradient oracle",
         worst_gap <= kLassoOracleTol && worst_kkt <= kKktTol && secs < kLassoSeconds,
         fmt("max coefficient gap %.2e, max KKT violation %.2e, %.2f s", worst_gap, worst_kkt, secs));
}

void criterion_4() {
  std::mt19937_64 gen(104);
  int nonzero = 0;
  for (int trial = 0; trial < 25; ++trial) {
    Matrix raw;
    Outcomes y;
    oracle::random_survival(gen, 20, 6, 0.3, raw, y, 1.0);
    const auto st = standardize(raw);
    const RiskSetIndex risk(y);
    const CoxPathSolver solver(st.x, risk, Vector(), {}, 1.0, 10000, 1e-9);
    for (double scale : {1.0, 1.01, 2.0, 100.0}) {
      Vector beta = Vector::Zero(6);
      solver.solve(scale * solver.lambda_max(), beta);
      nonzero += static_cast<int>((beta.array() != 0.0).count());
    }
  }
  report(4, "lambda >= lambda_max gives the zero model", nonzero == 0,
         fmt("%.0f nonzero coefficients over 25 instances x 4 lambdas", nonzero));
}

void criterion_5() {
  std::mt19937_64 gen(105);
  std::exponential_distribution<double> expo(1.0);
  std::normal_distribution<double> normal;
  int mismatches = 0;
  for (int trial = 0; trial < 50; ++trial) {
    Outcomes y;
    std::vector<double> s;
    double tmax = 0.0;
    for (int i = 0; i < 12; ++i) {
      y.push_back({expo(gen) + 1e-3, 1});
      tmax = std::max(tmax, y.back().time);
      s.push_back(normal(gen));
    }
    if (trial % 5 == 0) s[2] = s[9];
    const auto c = uno_cindex(y, y, s, tmax + 1.0);
    if (!c || *c != oracle::harrell_c(y, s)) ++mismatches;
  }
  Outcomes y;
  double tmax = 0.0;
  for (int i = 0; i < 40; ++i) {
    y.push_back({expo(gen) + 1e-3, 1});
    tmax = std::max(tmax, y.back().time);
  }
  const std::vector<StepFunction> half(y.size(), StepFunction({}, {}, 0.5));
  const double ib = integrated_brier(y, y, half, default_tau(y)).value;
  report(5, "metric oracles", mismatches == 0 && std::abs(ib - 0.25) <= kBrierHalfTol,
         fmt("Uno vs Harrell mismatches %.0f/50, constant-1/2 ibrier %.15f", mismatches, ib));
}

void criterion_6() {
  std::mt19937_64 gen(106);
  // SGL with alpha = 1 against the Lasso.
  double sgl_gap = 0.0;
  for (int trial = 0; trial < 10; ++trial) {
    Matrix raw;
    Outcomes y;
    oracle::random_survival(gen, 10, 4, 0.2, raw, y, 1.0);
    const auto st = standardize(raw);
    const RiskSetIndex risk(y);
    const FeatureGroupMap groups({"a", "b"}, {{0, 1}, {2, 3}});
    const SglSolver sgl(st.x, risk, Vector(), groups, 1.0, 100000, 1e-10);
    const CoxPathSolver cd(st.x, risk, Vector(), {}, 1.0, 10000, 1e-10);
    const double lambda = 0.3 * cd.lambda_max();
    Vector a = Vector::Zero(4), b = Vector::Zero(4);
    sgl.solve(lambda, a);
    cd.solve(lambda, b);
    sgl_gap = std::max(sgl_gap, (a - b).cwiseAbs().maxCoeff());
  }

  // Priority-Lasso with a single group against the CV Lasso.
  SimulationSpec spec;
  spec.n = 60;
  spec.omics_sizes = {12};
  spec.seed = 61;
  auto data = simulate_dataset(spec);
  data.groups = FeatureGroupMap::single(data.p());
  const GroupedFitOptions opts{10, 5, 4};
  const double pl_gap =
      (fit_priority_lasso(data, false, opts).model.coefficients - fit_cv_lasso(data, opts).model.coefficients)
          .cwiseAbs()
          .maxCoeff();

  // Block forest with one block and weight 1 against RSF.
  ForestConfig cfg;
  cfg.n_trees = 25;
  cfg.seed = 62;
  cfg.block_weights = std::vector<double>{1.0};
  const auto block = fit_block_forest(data, cfg).forest;
  ForestConfig rsf_cfg;
  rsf_cfg.n_trees = 25;
  rsf_cfg.seed = 62;
  rsf_cfg.mtry = static_cast<int>(std::ceil(std::sqrt(static_cast<double>(data.p()))));
  const auto rsf = fit_rsf(data, rsf_cfg);
  bool same = block.trees.size() == rsf.trees.size();
  for (std::size_t k = 0; same && k < rsf.trees.size(); ++k) {
    const auto& a = block.trees[k];
    const auto& b = rsf.trees[k];
    same = a.nodes.size() == b.nodes.size() && a.leaf_chf == b.leaf_chf && a.out_of_bag == b.out_of_bag;
    for (std::size_t i = 0; same && i < a.nodes.size(); ++i)
      same = a.nodes[i].feature == b.nodes[i].feature && a.nodes[i].threshold == b.nodes[i].threshold &&
             a.nodes[i].left == b.nodes[i].left && a.nodes[i].right == b.nodes[i].right;
  }

  // Breslow at beta = 0 against Nelson-Aalen.
  double breslow_gap = 0.0;
  bool same_grid = true;
  for (int trial = 0; trial < 20; ++trial) {
    Matrix x;
    Outcomes y;
    oracle::random_survival(gen, 30, 2, 0.3, x, y);
    const auto base = breslow_baseline(x, y, Vector::Zero(2));
    const auto na = nelson_aalen(y);
    same_grid = same_grid && base.jump_times() == na.jump_times();
    for (std::size_t k = 0; same_grid && k < na.values().size(); ++k)
      breslow_gap = std::max(breslow_gap, std::abs(base.values()[k] - na.values()[k]));
  }

  const bool pass = sgl_gap <= kSglReductionTol && pl_gap == 0.0 && same && same_grid && breslow_gap <= kBreslowTol;
  report(6, "reductions", pass,
         fmt("SGL(1) vs Lasso %.1e, priority(G=1) vs Lasso %.1e, Breslow(0) vs NA %.1e", sgl_gap, pl_gap,
             breslow_gap) +
             (same ? ", block forest == RSF bit-for-bit" : ", block forest differs from RSF"));
}

FoldOutcome policy_outcome(std::optional<double> c, std::optional<double> b) {
  FoldOutcome o;
  o.cindex = c;
  o.ibrier = b;
  o.cindex_failed = !c;
  o.ibrier_failed = !b;
  if (!c && !b) o.failure_reason = "fit failed";
  return o;
}

void criterion_7() {
  bool pass = true;
  // 3 of 10 fail.
  std::vector<FoldOutcome> major;
  for (int i = 0; i < 10; ++i)
    major.push_back(i < 3 ? policy_outcome(std::nullopt, std::nullopt) : policy_outcome(0.6 + 0.01 * i, 0.2));
  const auto m = apply_failure_policy(major).outcomes;
  for (int i = 0; i < 10; ++i) {
    const double want_c = i < 3 ? 0.5 : 0.6 + 0.01 * i;
    const double want_b = i < 3 ? 0.25 : 0.2;
    pass = pass && *m[i].cindex == want_c && *m[i].ibrier == want_b;
  }
  // 1 of 10 fails.
  std::vector<FoldOutcome> minor;
  double sum_c = 0.0, sum_b = 0.0;
  for (int i = 0; i < 10; ++i) {
    if (i == 7) {
      minor.push_back(policy_outcome(std::nullopt, std::nullopt));
      continue;
    }
    const double c = 0.55 + 0.02 * i, b = 0.22 - 0.004 * i;
    sum_c += c;
    sum_b += b;
    minor.push_back(policy_outcome(c, b));
  }
  for (const auto& o : apply_failure_policy(minor).outcomes)
    pass = pass && std::abs(*o.cindex - sum_c / 9.0) < 1e-15 && std::abs(*o.ibrier - sum_b / 9.0) < 1e-15;
  // No failures.
  std::vector<FoldOutcome> clean{policy_outcome(0.61, 0.2), policy_outcome(0.7, 0.1), policy_outcome(0.64, 0.3)};
  const auto c = apply_failure_policy(clean).outcomes;
  for (std::size_t i = 0; i < clean.size(); ++i)
    pass = pass && *c[i].cindex == *clean[i].cindex && *c[i].ibrier == *clean[i].ibrier;
  report(7, "failure policy", pass, ">20% imputed with (0.5, 0.25); <=20% replaced by success means; 0% identity");
}

SurvivalDataset suite_dataset(std::uint64_t seed) {
  SimulationSpec spec;  // n = 150, 8 clinical (5 informative), omics 300/500/1000, 30% censoring
  spec.seed = seed;
  spec.name = "suite" + std::to_string(seed);
  return simulate_dataset(spec);
}

void criterion_8() {
  const auto start = Clock::now();
  const std::vector<std::string> ids{"lasso", "glmboost", "coxboost_favoring", "prioritylasso_favoring"};
  std::map<std::string, int> zero_clinical, all_clinical, fits;
  for (std::uint64_t seed = 1; seed <= 10; ++seed) {
    const auto data = suite_dataset(seed);
    const auto folds = stratified_folds(data.outcomes, 5, 1, 100 + seed);
    const auto train = data.subset(folds[0].train_rows(1));
    const auto test = data.subset(folds[0].test_rows(1));
    const std::size_t clin = *data.groups.clinical_index();
    for (const auto& id : ids) {
      const auto o = evaluate_fold(make_learner(id, *parse_method(id)), train, test, seed);
      if (o.failure_reason || o.selected_per_group.empty()) continue;
      ++fits[id];
      zero_clinical[id] += o.selected_per_group[clin] == 0.0;
      all_clinical[id] += o.selected_per_group[clin] == 8.0;
    }
  }
  const double secs = seconds_since(start);
  const bool naive_ok = zero_clinical["lasso"] >= kNaiveZeroClinicalShare * 10 &&
                        zero_clinical["glmboost"] >= kNaiveZeroClinicalShare * 10;
  const bool favoring_ok = all_clinical["coxboost_favoring"] == 10 && all_clinical["prioritylasso_favoring"] == 10;
  char detail[256];
  std::snprintf(detail, sizeof detail,
                "no clinical: lasso %d/10, glmboost %d/10; all 8 clinical: coxboost_favoring %d/10, "
                "prioritylasso_favoring %d/10; %.0f s",
                zero_clinical["lasso"], zero_clinical["glmboost"], all_clinical["coxboost_favoring"],
                all_clinical["prioritylasso_favoring"], secs);
  report(8, "group sparsity", naive_ok && favoring_ok && secs < kSparsitySeconds, detail);
}

// Criterion 9 evaluates every learner on all 25 folds, so its run doubles as
// the fold source for criterion 11.
BenchmarkResult structured_run;

void criterion_9() {
  const auto start = Clock::now();
  BenchmarkSettings s;
  s.master_seed = 2024;
  s.cv_override = CvScheme{5, 5, false};
  s.defaults.inner_k = 5;
  s.learners.push_back(make_learner("kaplan_meier", Method::kaplan_meier));
  for (const char* id : {"lasso", "glmboost", "coxboost", "rsf", "ipflasso", "prioritylasso", "prioritylasso_favoring",
                         "grridge", "coxboost_favoring", "block_forest"}) {
    nlohmann::json o = nlohmann::json::object();
    if (std::string(id) == "rsf") o = {{"n_trees", 100}};
    if (std::string(id) == "block_forest") o = {{"n_trees", 100}, {"weight_trials", 20}, {"pilot_trees", 30}};
    s.learners.push_back(make_learner(id, *parse_method(id), o));
  }
  structured_run = run_benchmark(std::vector<SurvivalDataset>{suite_dataset(1)}, s);
  const auto& st = structured_run.tables.structure;
  const double p = st.welch_p_cindex.value_or(1.0);
  report(9, "structured vs naive learners",
         st.structured_mean_cindex > st.naive_mean_cindex && p < kStructuredWelchP,
         fmt("mean cindex structured %.4f vs naive %.4f, one-sided Welch p = %.4f", st.structured_mean_cindex,
             st.naive_mean_cindex, p) +
             fmt(", %.0f s", seconds_since(start)));
}

void criterion_10() {
  SimulationSpec spec;
  spec.n = 90;
  spec.omics_sizes = {20, 30};
  spec.seed = 77;
  const auto data = simulate_dataset(spec);
  BenchmarkSettings s;
  s.master_seed = 31;
  s.cv_override = CvScheme{2, 5, false};
  s.defaults.inner_k = 3;
  s.learners = {make_learner("kaplan_meier", Method::kaplan_meier), make_learner("clinical_cox", Method::clinical_cox),
                make_learner("lasso", Method::lasso), make_learner("coxboost", Method::coxboost),
                make_learner("rsf", Method::rsf, {{"n_trees", 30}})};
  const auto a = run_benchmark(std::vector<SurvivalDataset>{data}, s);
  s.workers = 2;  // scheduling must not matter either
  const auto b = run_benchmark(std::vector<SurvivalDataset>{data}, s);
  const std::string csv_a = outcomes_to_csv(a.outcomes, false);
  const std::string csv_b = outcomes_to_csv(b.outcomes, false);
  report(10, "harness determinism", csv_a == csv_b && a.outcomes.size() == 50,
         fmt("%.0f rows, CSVs without timing ", static_cast<double>(a.outcomes.size())) +
             (csv_a == csv_b ? "byte-identical" : "differ"));
}

void criterion_11() {
  int folds = 0, exact = 0;
  for (const auto& o : structured_run.outcomes) {
    if (o.learner != "kaplan_meier") continue;
    ++folds;
    exact += o.cindex && *o.cindex == 0.5;
  }
  report(11, "Kaplan-Meier reference", folds == 25 && exact == folds,
         fmt("cindex exactly 0.5 on %.0f/%.0f folds", exact, folds));
}

}  // namespace

int main() {
  const std::vector<std::function<void()>> criteria{criterion_1, criterion_2, criterion_3,  criterion_4,
                                                    criterion_5, criterion_6, criterion_7,  criterion_8,
                                                    criterion_9, criterion_10, criterion_11};
  for (const auto& c : criteria) c();
  std::printf("%d of 11 criteria failed\n", failures);
  return failures == 0 ? 0 : 1;
}
