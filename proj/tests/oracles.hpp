#pragma once

// Slow, direct implementations used as references in the tests. None of them
// touch the library's numerical code: they only share the plain data types.

#include <algorithm>
#include <cmath>
#include <functional>
#include <limits>
#include <numeric>
#include <random>
#include <vector>

#include "survbench/dataset.hpp"

namespace oracle {

using survbench::Index;
using survbench::Matrix;
using survbench::Outcomes;
using survbench::SurvivalOutcome;
using survbench::Vector;

// Negative Breslow partial log-likelihood by explicit O(n^2) risk-set sums.
inline double cox_loss(const Matrix& x, const Outcomes& y, const Vector& beta, const Vector& offset = Vector()) {
  const Index n = x.rows();
  Vector eta = x * beta;
  if (offset.size() == n) eta += offset;
  double loss = 0.0;
  for (Index i = 0; i < n; ++i) {
    if (!y[static_cast<std::size_t>(i)].event) continue;
    double top = -std::numeric_limits<double>::infinity();
    for (Index l = 0; l < n; ++l)
      if (y[static_cast<std::size_t>(l)].time >= y[static_cast<std::size_t>(i)].time) top = std::max(top, eta(l));
    double s = 0.0;
    for (Index l = 0; l < n; ++l)
      if (y[static_cast<std::size_t>(l)].time >= y[static_cast<std::size_t>(i)].time) s += std::exp(eta(l) - top);
    loss -= eta(i) - top - std::log(s);
  }
  return loss;
}

// d loss / d beta: -sum_i delta_i (x_i - risk-set weighted mean of x).
inline Vector cox_gradient(const Matrix& x, const Outcomes& y, const Vector& beta, const Vector& offset = Vector()) {
  const Index n = x.rows();
  Vector eta = x * beta;
  if (offset.size() == n) eta += offset;
  Vector g = Vector::Zero(x.cols());
  for (Index i = 0; i < n; ++i) {
    if (!y[static_cast<std::size_t>(i)].event) continue;
    double s = 0.0;
    Vector m = Vector::Zero(x.cols());
    for (Index l = 0; l < n; ++l) {
      if (y[static_cast<std::size_t>(l)].time < y[static_cast<std::size_t>(i)].time) continue;
      const double w = std::exp(eta(l));
      s += w;
      m += w * x.row(l).transpose();
    }
    g -= x.row(i).transpose() - m / s;
  }
  return g;
}

inline Vector central_difference(const std::function<double(const Vector&)>& f, const Vector& at, double h) {
  Vector g(at.size());
  for (Index j = 0; j < at.size(); ++j) {
    Vector up = at, down = at;
    up(j) += h;
    down(j) -= h;
    g(j) = (f(up) - f(down)) / (2.0 * h);
  }
  return g;
}

// FISTA with backtracking on loss/n + lambda * sum_j w_j |b_j|, run until the
// iterates stop moving. x is used as given (no standardization).
inline Vector proximal_lasso(const Matrix& x, const Outcomes& y, double lambda, const std::vector<double>& w,
                             int iterations = 200000, double tol = 1e-12) {
  const double n = static_cast<double>(x.rows());
  const Index p = x.cols();
  auto smooth = [&](const Vector& b) { return cox_loss(x, y, b) / n; };
  auto prox = [&](const Vector& v, double step) {
    Vector out(p);
    for (Index j = 0; j < p; ++j) {
      const double t = step * lambda * w[static_cast<std::size_t>(j)];
      out(j) = v(j) > t ? v(j) - t : (v(j) < -t ? v(j) + t : 0.0);
    }
    return out;
  };
  Vector b = Vector::Zero(p), z = b;
  double momentum = 1.0, step = 1.0;
  for (int it = 0; it < iterations; ++it) {
    const Vector g = cox_gradient(x, y, z) / n;
    const double fz = smooth(z);
    Vector next;
    for (;;) {
      next = prox(z - step * g, step);
      const Vector d = next - z;
      if (smooth(next) <= fz + g.dot(d) + d.squaredNorm() / (2.0 * step) + 1e-15) break;
      step *= 0.5;
    }
    const double m_next = 0.5 * (1.0 + std::sqrt(1.0 + 4.0 * momentum * momentum));
    const double change = (next - b).cwiseAbs().maxCoeff();
    z = next + ((momentum - 1.0) / m_next) * (next - b);
    b = next;
    momentum = m_next;
    if (change < tol && it > 10) break;
  }
  return b;
}

// Harrell's C over all pairs with t_i < t_j and delta_i = 1; score ties 1/2.
inline double harrell_c(const Outcomes& y, const std::vector<double>& score) {
  double num = 0.0, den = 0.0;
  for (std::size_t i = 0; i < y.size(); ++i) {
    if (!y[i].event) continue;
    for (std::size_t j = 0; j < y.size(); ++j) {
      if (!(y[i].time < y[j].time)) continue;
      den += 1.0;
      if (score[i] > score[j]) num += 1.0;
      else if (score[i] == score[j]) num += 0.5;
    }
  }
  return num / den;
}

// Textbook two-sample log-rank |O - E| / sqrt(V) for membership `left`.
inline double logrank(const Outcomes& y, const std::vector<bool>& left) {
  std::vector<double> times;
  for (const auto& o : y)
    if (o.event) times.push_back(o.time);
  std::sort(times.begin(), times.end());
  times.erase(std::unique(times.begin(), times.end()), times.end());
  double o_minus_e = 0.0, v = 0.0;
  for (double t : times) {
    double n_t = 0, n_l = 0, d_t = 0, d_l = 0;
    for (std::size_t i = 0; i < y.size(); ++i) {
      if (y[i].time < t) continue;
      n_t += 1;
      n_l += left[i];
      if (y[i].time == t && y[i].event) {
        d_t += 1;
        d_l += left[i];
      }
    }
    o_minus_e += d_l - n_l * d_t / n_t;
    if (n_t > 1) v += d_t * (n_l / n_t) * (1 - n_l / n_t) * (n_t - d_t) / (n_t - 1);
  }
  return v > 1e-12 ? std::abs(o_minus_e) / std::sqrt(v) : 0.0;
}

// Nelson-Aalen of `rows` evaluated on `grid`.
inline std::vector<double> nelson_aalen_on(const Outcomes& y, const std::vector<std::size_t>& rows,
                                           const std::vector<double>& grid) {
  std::vector<double> out;
  for (double g : grid) {
    std::vector<double> times;
    for (auto r : rows)
      if (y[r].event && y[r].time <= g) times.push_back(y[r].time);
    std::sort(times.begin(), times.end());
    times.erase(std::unique(times.begin(), times.end()), times.end());
    double h = 0.0;
    for (double t : times) {
      double at_risk = 0, deaths = 0;
      for (auto r : rows) {
        if (y[r].time >= t) at_risk += 1;
        if (y[r].time == t && y[r].event) deaths += 1;
      }
      h += deaths / at_risk;
    }
    out.push_back(h);
  }
  return out;
}

struct SplitChoice {
  double statistic = 0.0;
  int feature = -1;
  double threshold = 0.0;
};

inline Outcomes rows_of(const Outcomes& y, const std::vector<std::size_t>& rows) {
  Outcomes out;
  for (auto r : rows) out.push_back(y[r]);
  return out;
}

// Log-rank statistic of x_j <= t within `rows`, or -1 when a child would hold
// fewer than min_size rows or min_deaths deaths.
inline double admissible_statistic(const Matrix& x, const Outcomes& y, const std::vector<std::size_t>& rows, Index j,
                                   double t, int min_size, int min_deaths) {
  const Outcomes node = rows_of(y, rows);
  std::vector<bool> left;
  int n_left = 0, d_left = 0, deaths = 0;
  for (std::size_t i = 0; i < rows.size(); ++i) {
    const bool l = x(static_cast<Index>(rows[i]), j) <= t;
    left.push_back(l);
    n_left += l;
    d_left += l && node[i].event;
    deaths += node[i].event;
  }
  if (n_left < min_size || static_cast<int>(rows.size()) - n_left < min_size) return -1.0;
  if (d_left < min_deaths || deaths - d_left < min_deaths) return -1.0;
  return logrank(node, left);
}

// Exhaustive search over every feature and every midpoint of adjacent unique
// values; a node needs 2*min_size rows and 2*min_deaths deaths to be split.
inline SplitChoice best_split(const Matrix& x, const Outcomes& y, const std::vector<std::size_t>& rows, int min_size,
                              int min_deaths) {
  SplitChoice best;
  int deaths = 0;
  for (auto r : rows) deaths += y[r].event;
  if (static_cast<int>(rows.size()) < 2 * min_size || deaths < 2 * min_deaths) return best;
  for (Index j = 0; j < x.cols(); ++j) {
    std::vector<double> u;
    for (auto r : rows) u.push_back(x(static_cast<Index>(r), j));
    std::sort(u.begin(), u.end());
    u.erase(std::unique(u.begin(), u.end()), u.end());
    for (std::size_t k = 0; k + 1 < u.size(); ++k) {
      const double t = 0.5 * (u[k] + u[k + 1]);
      const double s = admissible_statistic(x, y, rows, j, t, min_size, min_deaths);
      if (s > best.statistic) best = {s, static_cast<int>(j), t};
    }
  }
  return best;
}

// Two-sided sign-flip permutation p-value of the mean paired difference,
// exact over all 2^n sign patterns.
inline double sign_flip_p(const std::vector<double>& a, const std::vector<double>& b) {
  const std::size_t n = a.size();
  std::vector<double> d(n);
  for (std::size_t i = 0; i < n; ++i) d[i] = a[i] - b[i];
  const double observed = std::abs(std::accumulate(d.begin(), d.end(), 0.0));
  std::size_t extreme = 0, total = 0;
  for (std::size_t mask = 0; mask < (std::size_t{1} << n); ++mask) {
    double s = 0.0;
    for (std::size_t i = 0; i < n; ++i) s += (mask >> i & 1U) ? -d[i] : d[i];
    extreme += std::abs(s) >= observed - 1e-12;
    ++total;
  }
  return static_cast<double>(extreme) / static_cast<double>(total);
}

// Random survival data with exponential times and roughly `censor` censoring.
inline void random_survival(std::mt19937_64& gen, Index n, Index p, double censor, Matrix& x, Outcomes& y,
                            double signal = 0.5) {
  std::normal_distribution<double> normal;
  std::uniform_real_distribution<double> unif(0.0, 1.0);
  x.resize(n, p);
  for (Index i = 0; i < n; ++i)
    for (Index j = 0; j < p; ++j) x(i, j) = normal(gen);
  y.clear();
  for (Index i = 0; i < n; ++i) {
    const double rate = std::exp(signal * x(i, 0));
    const double t = -std::log(1.0 - unif(gen)) / rate;
    const bool censored = unif(gen) < censor;
    SurvivalOutcome o;
    o.time = censored ? t * unif(gen) + 1e-6 : t + 1e-6;
    o.event = censored ? 0 : 1;
    y.push_back(o);
  }
  // At least one event so every likelihood is defined.
  if (std::none_of(y.begin(), y.end(), [](const SurvivalOutcome& o) { return o.event == 1; })) y[0].event = 1;
}

}  // namespace oracle
