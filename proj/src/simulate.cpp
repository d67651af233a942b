#include "survbench/simulate.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <stdexcept>

#include "survbench/rng.hpp"

namespace survbench {

namespace {

// Exponential censoring rate mu with mean_i mu / (mu + rate_i) = target.
double censoring_rate(const Vector& rate, double target) {
  auto fraction = [&](double mu) { return (mu / (mu + rate.array())).mean(); };
  double lo = 0.0, hi = rate.maxCoeff();
  while (fraction(hi) < target) hi *= 2.0;
  for (int it = 0; it < 200; ++it) {
    const double mid = 0.5 * (lo + hi);
    (fraction(mid) < target ? lo : hi) = mid;
  }
  return 0.5 * (lo + hi);
}

}  // namespace

SurvivalDataset simulate_dataset(const SimulationSpec& spec) {
  if (spec.n < 2) throw std::invalid_argument("need at least two observations");
  if (static_cast<Index>(spec.clinical_effects.size()) > spec.clinical_features)
    throw std::invalid_argument("more clinical effects than clinical features");
  if (!(spec.censoring_fraction >= 0.0 && spec.censoring_fraction < 1.0))
    throw std::invalid_argument("censoring fraction must lie in [0, 1)");
  Rng rng(spec.seed);
  Index p = spec.clinical_features;
  for (Index s : spec.omics_sizes) p += s;

  SurvivalDataset data;
  data.name = spec.name;
  data.features.resize(spec.n, p);
  std::vector<std::string> names;
  std::vector<std::vector<Index>> columns;
  Index col = 0;
  if (spec.clinical_features > 0) {
    names.push_back("clinical");
    columns.emplace_back();
    for (Index j = 0; j < spec.clinical_features; ++j, ++col) {
      columns.back().push_back(col);
      data.feature_names.push_back("clin_" + std::to_string(j + 1));
      for (Index i = 0; i < spec.n; ++i)
        data.features(i, col) = j < spec.binary_clinical ? (rng.bernoulli(0.5) ? 1.0 : 0.0) : rng.normal();
    }
  }
  for (std::size_t g = 0; g < spec.omics_sizes.size(); ++g) {
    names.push_back("omics" + std::to_string(g + 1));
    columns.emplace_back();
    for (Index j = 0; j < spec.omics_sizes[g]; ++j, ++col) {
      columns.back().push_back(col);
      data.feature_names.push_back(names.back() + "_" + std::to_string(j + 1));
      for (Index i = 0; i < spec.n; ++i) data.features(i, col) = rng.normal();
    }
  }
  data.groups = FeatureGroupMap(names, columns,
                                spec.clinical_features > 0 ? std::optional<std::string>("clinical") : std::nullopt);

  Vector eta = Vector::Zero(spec.n);
  for (std::size_t k = 0; k < spec.clinical_effects.size(); ++k)
    eta += spec.clinical_effects[k] * data.features.col(static_cast<Index>(k));
  const std::size_t omics_offset = spec.clinical_features > 0 ? 1 : 0;
  for (std::size_t g = 0; g < spec.omics_effects.size() && g < spec.omics_sizes.size(); ++g) {
    const auto& cols = columns[g + omics_offset];
    for (std::size_t k = 0; k < spec.omics_effects[g].size() && k < cols.size(); ++k)
      eta += spec.omics_effects[g][k] * data.features.col(cols[k]);
  }

  const Vector rate = spec.baseline_hazard * eta.array().exp();
  const double mu = spec.censoring_fraction > 0.0 ? censoring_rate(rate, spec.censoring_fraction) : 0.0;
  for (Index i = 0; i < spec.n; ++i) {
    const double t = -std::log(1.0 - rng.uniform()) / rate(i);
    const double c = mu > 0.0 ? -std::log(1.0 - rng.uniform()) / mu : std::numeric_limits<double>::infinity();
    SurvivalOutcome o;
    o.time = std::max(std::min(t, c), 1e-8);
    o.event = t <= c ? 1 : 0;
    data.outcomes.push_back(o);
    data.observation_ids.push_back("obs" + std::to_string(i + 1));
  }
  return data;
}

}  // namespace survbench
