#include "survbench/forest.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>
#include <stdexcept>
#include <thread>

#include "survbench/error.hpp"
#include "survbench/metrics.hpp"
#include "survbench/rng.hpp"

namespace survbench {

namespace {

// Counts and B-values of the left-child samples indexed by event-time rank.
class Fenwick {
 public:
  explicit Fenwick(std::size_t n) : count_(n + 1, 0.0), sum_(n + 1, 0.0) {}
  void reset(std::size_t n) {
    count_.assign(n + 1, 0.0);
    sum_.assign(n + 1, 0.0);
  }
  void add(std::size_t k, double value) {
    for (std::size_t i = k + 1; i < count_.size(); i += i & (~i + 1)) {
      count_[i] += 1.0;
      sum_[i] += value;
    }
  }
  // Totals over ranks < k.
  void prefix(std::size_t k, double& count, double& sum) const {
    count = 0.0;
    sum = 0.0;
    for (std::size_t i = k; i > 0; i -= i & (~i + 1)) {
      count += count_[i];
      sum += sum_[i];
    }
  }

 private:
  std::vector<double> count_;
  std::vector<double> sum_;
};

// Event-time structure of one node. rank[s] is the number of node event times
// <= the time of sample s, so sample s is at risk at event ranks 1..rank[s].
struct NodeTimes {
  std::vector<double> event_times;
  std::vector<std::size_t> rank;
  std::vector<double> A;   // prefix sums of d/Y
  std::vector<double> Ac;  // prefix sums of c/Y
  std::vector<double> B;   // prefix sums of c/Y^2
  std::vector<double> d;
  std::vector<double> y;
  double deaths = 0.0;
};

void build_node_times(std::span<const SurvivalOutcome> outcomes, std::span<const std::uint32_t> samples,
                      NodeTimes& nt) {
  nt.event_times.clear();
  for (auto s : samples)
    if (outcomes[s].event) nt.event_times.push_back(outcomes[s].time);
  std::sort(nt.event_times.begin(), nt.event_times.end());
  nt.event_times.erase(std::unique(nt.event_times.begin(), nt.event_times.end()), nt.event_times.end());
  const std::size_t T = nt.event_times.size();
  nt.d.assign(T + 1, 0.0);
  nt.y.assign(T + 2, 0.0);
  nt.rank.resize(samples.size());
  nt.deaths = 0.0;
  for (std::size_t k = 0; k < samples.size(); ++k) {
    const auto& o = outcomes[samples[k]];
    const auto r = static_cast<std::size_t>(
        std::upper_bound(nt.event_times.begin(), nt.event_times.end(), o.time) - nt.event_times.begin());
    nt.rank[k] = r;
    nt.y[r] += 1.0;  // at risk at ranks 1..r; accumulated from the top below
    if (o.event) {
      nt.d[r] += 1.0;
      nt.deaths += 1.0;
    }
  }
  for (std::size_t r = T; r >= 1; --r) nt.y[r] += nt.y[r + 1];
  nt.A.assign(T + 1, 0.0);
  nt.Ac.assign(T + 1, 0.0);
  nt.B.assign(T + 1, 0.0);
  for (std::size_t r = 1; r <= T; ++r) {
    const double Y = nt.y[r];
    const double D = nt.d[r];
    const double c = Y > 1.0 ? D * (Y - D) / (Y - 1.0) : 0.0;
    nt.A[r] = nt.A[r - 1] + D / Y;
    nt.Ac[r] = nt.Ac[r - 1] + c / Y;
    nt.B[r] = nt.B[r - 1] + c / (Y * Y);
  }
}

struct SplitCandidate {
  double score = 0.0;
  int feature = -1;
  double threshold = 0.0;
};

// Best admissible split of one feature by an incremental log-rank sweep.
double best_split_for_feature(const Matrix& x, Index j, std::span<const std::uint32_t> samples,
                              std::span<const SurvivalOutcome> outcomes, const NodeTimes& nt, int min_size,
                              int min_deaths, std::vector<std::pair<double, std::uint32_t>>& buffer, Fenwick& fenwick,
                              double& threshold) {
  const std::size_t m = samples.size();
  buffer.resize(m);
  for (std::size_t k = 0; k < m; ++k) buffer[k] = {x(samples[k], j), static_cast<std::uint32_t>(k)};
  std::sort(buffer.begin(), buffer.end());
  if (buffer.front().first == buffer.back().first) return 0.0;
  fenwick.reset(nt.event_times.size() + 1);
  double U = 0.0, Sa = 0.0, Q = 0.0, nL = 0.0, dL = 0.0;
  double best = 0.0;
  for (std::size_t pos = 0; pos + 1 < m; ++pos) {
    const std::uint32_t k = buffer[pos].second;
    const std::size_t r = nt.rank[k];
    const int delta = outcomes[samples[k]].event;
    double below_count, below_sum;
    fenwick.prefix(r, below_count, below_sum);
    const double sum_bY = nt.B[r] * (nL - below_count) + below_sum;
    Q += 2.0 * sum_bY + nt.B[r];
    fenwick.add(r, nt.B[r]);
    U += delta - nt.A[r];
    Sa += nt.Ac[r];
    nL += 1.0;
    dL += delta;
    if (buffer[pos].first == buffer[pos + 1].first) continue;
    if (nL < min_size || static_cast<double>(m) - nL < min_size) continue;
    if (dL < min_deaths || nt.deaths - dL < min_deaths) continue;
    const double V = Sa - Q;
    if (!(V > 1e-12)) continue;
    const double stat = std::abs(U) / std::sqrt(V);
    if (stat > best) {
      best = stat;
      const double lo = buffer[pos].first, hi = buffer[pos + 1].first;
      double mid = 0.5 * (lo + hi);
      if (!(mid < hi)) mid = lo;
      threshold = mid;
    }
  }
  return best;
}

std::vector<double> leaf_curve(std::span<const SurvivalOutcome> outcomes, std::span<const std::uint32_t> samples,
                               const std::vector<double>& grid, NodeTimes& nt) {
  build_node_times(outcomes, samples, nt);
  std::vector<double> out(grid.size(), 0.0);
  std::size_t r = 0;
  for (std::size_t g = 0; g < grid.size(); ++g) {
    while (r < nt.event_times.size() && nt.event_times[r] <= grid[g]) ++r;
    out[g] = nt.A[r];
  }
  return out;
}

struct TreeWork {
  NodeTimes nt;
  std::vector<std::pair<double, std::uint32_t>> buffer;
  Fenwick fenwick{1};
};

SurvivalTree grow_tree(const SurvivalDataset& data, const BlockSampling& sampling, const ForestConfig& cfg,
                       const std::vector<double>& grid, std::size_t tree_index) {
  const std::size_t n = static_cast<std::size_t>(data.n());
  const std::span<const SurvivalOutcome> outcomes(data.outcomes);
  SurvivalTree tree;
  std::vector<std::uint32_t> samples;
  if (cfg.bootstrap) {
    Rng boot(derive_seed(cfg.seed, {tree_index}));
    std::vector<char> drawn(n, 0);
    samples.resize(n);
    for (auto& s : samples) {
      s = static_cast<std::uint32_t>(boot.index(n));
      drawn[s] = 1;
    }
    for (std::size_t i = 0; i < n; ++i)
      if (!drawn[i]) tree.out_of_bag.push_back(i);
  } else {
    samples.resize(n);
    std::iota(samples.begin(), samples.end(), 0u);
  }

  TreeWork work;
  const std::size_t G = sampling.blocks.size();
  struct Pending {
    int node;
    std::size_t begin, end;
  };
  std::vector<Pending> stack{{0, 0, samples.size()}};
  tree.nodes.emplace_back();
  while (!stack.empty()) {
    const Pending cur = stack.back();
    stack.pop_back();
    const std::span<std::uint32_t> node_samples(samples.data() + cur.begin, cur.end - cur.begin);
    build_node_times(outcomes, node_samples, work.nt);
    const double m = static_cast<double>(node_samples.size());

    SplitCandidate best;
    if (m >= 2.0 * cfg.min_node_size && work.nt.deaths >= 2.0 * cfg.min_node_deaths) {
      Rng rng(derive_seed(cfg.seed, {tree_index, static_cast<std::uint64_t>(cur.node)}));
      std::vector<char> included(G, 1);
      if (G > 1) {
        bool any = false;
        for (std::size_t g = 0; g < G; ++g) {
          included[g] = rng.bernoulli(0.5) ? 1 : 0;
          any = any || included[g];
        }
        if (!any) included[rng.index(G)] = 1;
      }
      for (std::size_t g = 0; g < G; ++g) {
        if (!included[g]) continue;
        const auto& cols = sampling.blocks[g];
        std::vector<std::size_t> pool(cols.size());
        std::iota(pool.begin(), pool.end(), std::size_t{0});
        const auto k = std::min<std::size_t>(static_cast<std::size_t>(std::max(sampling.mtry[g], 1)), cols.size());
        const double w = sampling.weights[g];
        for (std::size_t pick : rng.sample_without_replacement(std::move(pool), k)) {
          const Index j = cols[pick];
          double threshold = 0.0;
          const double stat = best_split_for_feature(data.features, j, node_samples, outcomes, work.nt,
                                                     cfg.min_node_size, cfg.min_node_deaths, work.buffer,
                                                     work.fenwick, threshold);
          const double score = w * stat;
          if (score > best.score) {
            best.score = score;
            best.feature = static_cast<int>(j);
            best.threshold = threshold;
          }
        }
      }
    }

    if (best.feature < 0) {
      tree.nodes[static_cast<std::size_t>(cur.node)].leaf = static_cast<int>(tree.leaf_chf.size());
      tree.leaf_chf.push_back(leaf_curve(outcomes, node_samples, grid, work.nt));
      continue;
    }
    const auto mid = std::stable_partition(node_samples.begin(), node_samples.end(), [&](std::uint32_t s) {
      return data.features(s, best.feature) <= best.threshold;
    });
    const std::size_t split = cur.begin + static_cast<std::size_t>(mid - node_samples.begin());
    const int left = static_cast<int>(tree.nodes.size());
    const int right = left + 1;
    tree.nodes.emplace_back();
    tree.nodes.emplace_back();
    auto& node = tree.nodes[static_cast<std::size_t>(cur.node)];
    node.feature = best.feature;
    node.threshold = best.threshold;
    node.left = left;
    node.right = right;
    stack.push_back({right, split, cur.end});
    stack.push_back({left, cur.begin, split});
  }
  return tree;
}

std::vector<double> event_grid(std::span<const SurvivalOutcome> outcomes) {
  std::vector<double> grid;
  for (const auto& o : outcomes)
    if (o.event) grid.push_back(o.time);
  std::sort(grid.begin(), grid.end());
  grid.erase(std::unique(grid.begin(), grid.end()), grid.end());
  return grid;
}

// Expected number of events under a leaf CHF: its sum over the event grid.
double mortality(const std::vector<double>& chf) { return std::accumulate(chf.begin(), chf.end(), 0.0); }

void check_config(const ForestConfig& cfg) {
  if (cfg.n_trees < 1) throw ConfigError("n_trees must be positive");
  if (cfg.min_node_deaths < 1) throw ConfigError("min_node_deaths must be at least 1");
  if (cfg.min_node_size < 1) throw ConfigError("min_node_size must be at least 1");
}

}  // namespace

int SurvivalTree::leaf_of(const Eigen::Ref<const Vector>& x) const {
  std::size_t k = 0;
  while (nodes[k].feature >= 0) {
    k = static_cast<std::size_t>(x(nodes[k].feature) <= nodes[k].threshold ? nodes[k].left : nodes[k].right);
  }
  return nodes[k].leaf;
}

StepFunction ForestModel::leaf_chf(std::size_t tree, int leaf) const {
  return StepFunction(unique_event_times, trees[tree].leaf_chf[static_cast<std::size_t>(leaf)], 0.0);
}

StepFunction ForestModel::predict_chf(const Eigen::Ref<const Vector>& x) const {
  std::vector<double> acc(unique_event_times.size(), 0.0);
  for (const auto& tree : trees) {
    const auto& leaf = tree.leaf_chf[static_cast<std::size_t>(tree.leaf_of(x))];
    for (std::size_t g = 0; g < acc.size(); ++g) acc[g] += leaf[g];
  }
  for (double& v : acc) v /= static_cast<double>(trees.size());
  return StepFunction(unique_event_times, std::move(acc), 0.0);
}

StepFunction ForestModel::predict_survival(const Eigen::Ref<const Vector>& x) const {
  const StepFunction chf = predict_chf(x);
  std::vector<double> s;
  for (double v : chf.values()) s.push_back(std::exp(-v));
  return StepFunction(unique_event_times, std::move(s), 1.0);
}

double ForestModel::risk_score(const Eigen::Ref<const Vector>& x) const {
  if (unique_event_times.empty()) return 0.0;
  double acc = 0.0;
  for (const auto& tree : trees) acc += mortality(tree.leaf_chf[static_cast<std::size_t>(tree.leaf_of(x))]);
  return acc / static_cast<double>(trees.size());
}

double logrank_split_statistic(std::span<const SurvivalOutcome> node, std::span<const double> feature,
                               double split_point) {
  if (node.size() != feature.size()) throw std::invalid_argument("feature length mismatch");
  std::vector<double> times;
  for (const auto& o : node)
    if (o.event) times.push_back(o.time);
  std::sort(times.begin(), times.end());
  times.erase(std::unique(times.begin(), times.end()), times.end());
  double num = 0.0, var = 0.0;
  for (double t : times) {
    double y = 0, yl = 0, d = 0, dl = 0;
    for (std::size_t i = 0; i < node.size(); ++i) {
      if (node[i].time < t) continue;
      const bool left = feature[i] <= split_point;
      y += 1;
      yl += left;
      if (node[i].time == t && node[i].event) {
        d += 1;
        dl += left;
      }
    }
    num += dl - yl * d / y;
    if (y > 1) var += (yl / y) * (1.0 - yl / y) * d * (y - d) / (y - 1.0);
  }
  if (!(var > 1e-12)) return 0.0;
  return std::abs(num) / std::sqrt(var);
}

ForestModel grow_forest(const SurvivalDataset& data, const BlockSampling& sampling, const ForestConfig& cfg) {
  check_config(cfg);
  if (sampling.blocks.empty() || sampling.blocks.size() != sampling.mtry.size() ||
      sampling.blocks.size() != sampling.weights.size())
    throw ConfigError("inconsistent block sampling scheme");
  for (double w : sampling.weights)
    if (!(w >= 0.0 && w <= 1.0)) throw ConfigError("block weights must lie in [0, 1]");
  ForestModel forest;
  forest.unique_event_times = event_grid(data.outcomes);
  forest.block_weights = sampling.weights;
  forest.mtry = sampling.mtry;
  forest.trees.resize(static_cast<std::size_t>(cfg.n_trees));
  const int threads = std::max(1, std::min(cfg.threads, cfg.n_trees));
  auto work = [&](int offset) {
    for (int t = offset; t < cfg.n_trees; t += threads)
      forest.trees[static_cast<std::size_t>(t)] =
          grow_tree(data, sampling, cfg, forest.unique_event_times, static_cast<std::size_t>(t));
  };
  if (threads == 1) {
    work(0);
  } else {
    std::vector<std::thread> pool;
    for (int k = 0; k < threads; ++k) pool.emplace_back(work, k);
    for (auto& th : pool) th.join();
  }
  return forest;
}

double oob_error(const ForestModel& forest, const SurvivalDataset& data, std::optional<double> tau) {
  const std::size_t n = static_cast<std::size_t>(data.n());
  std::vector<double> sum(n, 0.0);
  std::vector<int> count(n, 0);
  for (const auto& tree : forest.trees) {
    for (std::size_t i : tree.out_of_bag) {
      const int leaf = tree.leaf_of(data.features.row(static_cast<Index>(i)).transpose());
      sum[i] += mortality(tree.leaf_chf[static_cast<std::size_t>(leaf)]);
      ++count[i];
    }
  }
  Outcomes test;
  std::vector<double> scores;
  for (std::size_t i = 0; i < n; ++i) {
    if (count[i] == 0) continue;
    test.push_back(data.outcomes[i]);
    scores.push_back(sum[i] / count[i]);
  }
  const double t = tau ? *tau : default_tau(data.outcomes);
  const auto c = uno_cindex(data.outcomes, test, scores, t);
  return c ? 1.0 - *c : 0.5;
}

std::vector<int> mtry_grid(Index p) {
  if (p <= 1) return {1};
  const double r = std::sqrt(static_cast<double>(p));
  std::vector<int> grid;
  for (double v : {r / 2.0, r, 2.0 * r}) {
    grid.push_back(static_cast<int>(std::clamp<double>(std::ceil(v), 1.0, static_cast<double>(p))));
  }
  std::sort(grid.begin(), grid.end());
  grid.erase(std::unique(grid.begin(), grid.end()), grid.end());
  return grid;
}

MtryTuning tune_mtry(const SurvivalDataset& data, const ForestConfig& cfg) {
  if (!cfg.bootstrap) throw ConfigError("mtry tuning needs out-of-bag samples");
  MtryTuning out;
  out.grid = mtry_grid(data.p());
  std::vector<Index> all(static_cast<std::size_t>(data.p()));
  std::iota(all.begin(), all.end(), Index{0});
  double best_error = std::numeric_limits<double>::infinity();
  for (int m : out.grid) {
    BlockSampling s{{all}, {m}, {1.0}};
    ForestModel forest = grow_forest(data, s, cfg);
    const double err = out.grid.size() > 1 ? oob_error(forest, data) : 0.0;
    out.errors.push_back(err);
    if (err < best_error) {
      best_error = err;
      out.best = m;
      out.forest = std::move(forest);
    }
  }
  return out;
}

int tune_mtry_oob(const SurvivalDataset& data, const ForestConfig& cfg) {
  if (data.p() <= 1) return 1;
  return tune_mtry(data, cfg).best;
}

ForestModel fit_rsf(const SurvivalDataset& data, const ForestConfig& cfg) {
  if (!cfg.mtry) return tune_mtry(data, cfg).forest;
  if (*cfg.mtry < 1 || *cfg.mtry > data.p()) throw ConfigError("mtry must lie in [1, p]");
  std::vector<Index> all(static_cast<std::size_t>(data.p()));
  std::iota(all.begin(), all.end(), Index{0});
  return grow_forest(data, BlockSampling{{all}, {*cfg.mtry}, {1.0}}, cfg);
}

BlockForestFit fit_block_forest(const SurvivalDataset& data, const ForestConfig& cfg) {
  const std::size_t G = data.groups.size();
  if (G == 0) throw ConfigError("block forest needs feature groups");
  BlockSampling sampling;
  for (std::size_t g = 0; g < G; ++g) {
    sampling.blocks.push_back(data.groups.columns(g));
    sampling.mtry.push_back(static_cast<int>(std::ceil(std::sqrt(static_cast<double>(data.groups.columns(g).size())))));
  }
  BlockForestFit fit;
  if (cfg.block_weights) {
    if (cfg.block_weights->size() != G) throw ConfigError("one block weight per group expected");
    sampling.weights = *cfg.block_weights;
  } else if (G == 1) {
    sampling.weights = {1.0};
  } else {
    if (!cfg.bootstrap) throw ConfigError("block weight tuning needs out-of-bag samples");
    ForestConfig pilot = cfg;
    pilot.n_trees = cfg.pilot_trees;
    pilot.seed = derive_seed(cfg.seed, {hash_name("pilot")});
    Rng rng(derive_seed(cfg.seed, {hash_name("block-weights")}));
    double best_error = std::numeric_limits<double>::infinity();
    for (int trial = 0; trial < cfg.weight_trials; ++trial) {
      std::vector<double> w(G);
      for (double& v : w) v = rng.uniform();
      BlockSampling s = sampling;
      s.weights = w;
      const double err = oob_error(grow_forest(data, s, pilot), data);
      fit.trial_errors.push_back(err);
      if (err < best_error) {
        best_error = err;
        sampling.weights = w;
      }
    }
  }
  fit.weights = sampling.weights;
  fit.forest = grow_forest(data, sampling, cfg);
  return fit;
}

}  // namespace survbench
