#pragma once

// Test-only brute-force recomputation of the entropy-weight pipeline.
// Deliberately independent of mcpsec/scoring.hpp: plain nested vectors,
// column-at-a-time loops, no shared helpers. Used as the oracle the
// production pipeline is checked against.

#include <algorithm>
#include <cmath>
#include <stdexcept>
#include <vector>

namespace oracle {

struct Result {
  std::vector<std::vector<double>> normalized;
  std::vector<double> entropy;
  std::vector<double> weights;
  std::vector<double> raw;
  std::vector<double> display;
};

// rows: n x 4 matrix of (S, L, I, D); D is the cost column.
inline Result entropy_weight_scores(const std::vector<std::vector<double>>& rows) {
  const std::size_t n = rows.size();
  const std::size_t m = 4;
  if (n < 2) throw std::invalid_argument("need at least two rows");
  Result r;
  r.normalized.assign(n, std::vector<double>(m, 0.0));
  r.entropy.assign(m, 1.0);
  r.weights.assign(m, 0.0);

  for (std::size_t j = 0; j < m; ++j) {
    double lo = rows[0][j], hi = rows[0][j];
    for (std::size_t i = 1; i < n; ++i) {
      if (rows[i][j] < lo) lo = rows[i][j];
      if (rows[i][j] > hi) hi = rows[i][j];
    }
    if (hi == lo) continue;  // degenerate: stays all-zero with entropy 1
    for (std::size_t i = 0; i < n; ++i) {
      double x = rows[i][j];
      r.normalized[i][j] = (j == 3) ? (hi - x) / (hi - lo) : (x - lo) / (hi - lo);
    }
    double colsum = 0.0;
    for (std::size_t i = 0; i < n; ++i) colsum += r.normalized[i][j];
    double acc = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
      double p = r.normalized[i][j] / colsum;
      if (p > 0.0) acc += p * std::log(p);
    }
    r.entropy[j] = -acc / std::log(static_cast<double>(n));
  }

  double total = 0.0;
  for (std::size_t j = 0; j < m; ++j) total += 1.0 - r.entropy[j];
  if (total <= 0.0) throw std::invalid_argument("all columns uninformative");
  for (std::size_t j = 0; j < m; ++j) r.weights[j] = (1.0 - r.entropy[j]) / total;

  r.raw.assign(n, 0.0);
  for (std::size_t i = 0; i < n; ++i)
    for (std::size_t j = 0; j < m; ++j) r.raw[i] += r.weights[j] * r.normalized[i][j];

  double max_raw = r.raw[0];
  for (double v : r.raw)
    if (v > max_raw) max_raw = v;
  r.display.assign(n, 0.0);
  for (std::size_t i = 0; i < n; ++i)
    r.display[i] = (r.raw[i] == max_raw) ? 10.0 : 10.0 * r.raw[i] / max_raw;
  return r;
}

// Spearman rank correlation with average ranks for ties.
inline double spearman(const std::vector<double>& a, const std::vector<double>& b) {
  auto ranks = [](const std::vector<double>& v) {
    const std::size_t n = v.size();
    std::vector<std::size_t> order(n);
    for (std::size_t i = 0; i < n; ++i) order[i] = i;
    std::sort(order.begin(), order.end(),
              [&](std::size_t x, std::size_t y) { return v[x] < v[y]; });
    std::vector<double> r(n, 0.0);
    std::size_t i = 0;
    while (i < n) {
      std::size_t j = i;
      while (j + 1 < n && v[order[j + 1]] == v[order[i]]) ++j;
      double avg = (static_cast<double>(i) + static_cast<double>(j)) / 2.0 + 1.0;
      for (std::size_t k = i; k <= j; ++k) r[order[k]] = avg;
      i = j + 1;
    }
    return r;
  };
  auto ra = ranks(a);
  auto rb = ranks(b);
  const std::size_t n = a.size();
  double ma = 0.0, mb = 0.0;
  for (std::size_t i = 0; i < n; ++i) {
    ma += ra[i];
    mb += rb[i];
  }
  ma /= static_cast<double>(n);
  mb /= static_cast<double>(n);
  double cov = 0.0, va = 0.0, vb = 0.0;
  for (std::size_t i = 0; i < n; ++i) {
    cov += (ra[i] - ma) * (rb[i] - mb);
    va += (ra[i] - ma) * (ra[i] - ma);
    vb += (rb[i] - mb) * (rb[i] - mb);
  }
  return cov / std::sqrt(va * vb);
}

}  // namespace oracle
