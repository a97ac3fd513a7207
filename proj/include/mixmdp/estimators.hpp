#pragma once

#include <Eigen/Dense>

#include <algorithm>
#include <array>
#include <span>
#include <utility>
#include <vector>

#include "mixmdp/core.hpp"
#include "mixmdp/parallel.hpp"

namespace mixmdp {

/// Empirical next-state distribution for one observed (s,a) pair.
struct EstimateRow {
  int pair = 0;
  int count = 0;
  std::vector<std::pair<int, double>> probs;
};

/// Per-window transition estimates and occupancy of one trajectory. Pairs
/// with no observation are absent, which stands for the zero vector.
struct SegmentEstimate {
  int num_states = 0;
  int num_actions = 0;
  int blocks = 1;
  std::vector<EstimateRow> rows;

  const EstimateRow* find(int pair) const {
    auto it = std::lower_bound(rows.begin(), rows.end(), pair,
                               [](const EstimateRow& r, int p) { return r.pair < p; });
    return (it != rows.end() && it->pair == pair) ? &*it : nullptr;
  }

  bool observed(int pair) const { return find(pair) != nullptr; }

  /// Dense next-state vector; zero when the pair is unobserved.
  Eigen::VectorXd transition(int pair) const {
    Eigen::VectorXd v = Eigen::VectorXd::Zero(num_states);
    if (const auto* r = find(pair))
      for (auto [s, p] : r->probs) v(s) = p;
    return v;
  }

  /// Occupancy entry N(n,i,s,a) / G.
  double occupancy(int pair) const {
    const auto* r = find(pair);
    return r ? static_cast<double>(r->count) / blocks : 0.0;
  }

  Eigen::VectorXd occupancy_dense() const {
    Eigen::VectorXd d = Eigen::VectorXd::Zero(num_states * num_actions);
    for (const auto& r : rows) d(r.pair) = static_cast<double>(r.count) / blocks;
    return d;
  }
};

/// Both estimation windows of one trajectory.
using WindowEstimates = std::array<SegmentEstimate, 2>;

/// Maximum-likelihood ratios N(n,i,s,a,.) / N(n,i,s,a) for window i (0 or 1).
inline SegmentEstimate segment_estimates(const CountTable& table, int window) {
  require(window == 0 || window == 1, "segment_estimates: window must be 0 or 1");
  SegmentEstimate est;
  est.num_states = table.num_states;
  est.num_actions = table.num_actions;
  est.blocks = table.blocks;
  const auto& rows = table.windows[window].rows();
  est.rows.reserve(rows.size());
  for (const auto& r : rows) {
    EstimateRow e{r.pair, r.total, {}};
    e.probs.reserve(r.next.size());
    const double total = r.total;
    for (auto [s, c] : r.next) e.probs.emplace_back(s, c / total);
    est.rows.push_back(std::move(e));
  }
  return est;
}

inline WindowEstimates window_estimates(const CountTable& table) {
  return {segment_estimates(table, 0), segment_estimates(table, 1)};
}

inline std::vector<WindowEstimates> window_estimates(std::span<const CountTable> tables,
                                                     int threads = 1) {
  std::vector<WindowEstimates> out(tables.size());
  parallel_for(tables.size(), threads, [&](std::size_t i) { out[i] = window_estimates(tables[i]); });
  return out;
}

}  // namespace mixmdp
