#pragma once

#include <Eigen/Dense>

#include <algorithm>
#include <array>
#include <cmath>
#include <cstdint>
#include <map>
#include <optional>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include "mixmdp/error.hpp"
#include "mixmdp/rng.hpp"

namespace mixmdp {

inline constexpr double kSimplexTol = 1e-12;

/// Ground-truth mixture of K MDPs over a tabular state/action space. A
/// Markov chain is the special case num_actions == 1.
///
/// kernels[k] is (S*A) x S with row index s*A + a, policies[k] is S x A.
struct MarkovMixture {
  int num_states = 0;
  int num_actions = 0;
  std::vector<Eigen::MatrixXd> kernels;
  std::vector<Eigen::MatrixXd> policies;
  std::vector<Eigen::VectorXd> start_dists;
  Eigen::VectorXd weights;

  int num_components() const { return static_cast<int>(kernels.size()); }
  int pair_index(int s, int a) const { return s * num_actions + a; }
  int num_pairs() const { return num_states * num_actions; }

  void validate() const;
};

namespace detail {

inline bool is_distribution(const Eigen::Ref<const Eigen::VectorXd>& v,
                            double tol = kSimplexTol) {
  if ((v.array() < 0.0).any()) return false;
  return std::abs(v.sum() - 1.0) <= tol;
}

}  // namespace detail

inline void MarkovMixture::validate() const {
  const int K = num_components();
  require(num_states >= 1 && num_actions >= 1, "mixture: S and A must be >= 1");
  require(K >= 1, "mixture: at least one component required");
  require(static_cast<int>(policies.size()) == K &&
              static_cast<int>(start_dists.size()) == K && weights.size() == K,
          "mixture: component arrays have inconsistent lengths");
  require(detail::is_distribution(weights), "mixture: weights are not a distribution");
  for (int k = 0; k < K; ++k) {
    const auto tag = "mixture component " + std::to_string(k);
    require(kernels[k].rows() == num_pairs() && kernels[k].cols() == num_states,
            tag + ": kernel has wrong shape");
    require(policies[k].rows() == num_states && policies[k].cols() == num_actions,
            tag + ": policy has wrong shape");
    require(start_dists[k].size() == num_states, tag + ": start distribution has wrong size");
    require(detail::is_distribution(start_dists[k]), tag + ": start distribution invalid");
    for (int r = 0; r < num_pairs(); ++r)
      require(detail::is_distribution(kernels[k].row(r).transpose()),
              tag + ": kernel row " + std::to_string(r) + " is not a distribution");
    for (int s = 0; s < num_states; ++s)
      require(detail::is_distribution(policies[k].row(s).transpose()),
              tag + ": policy row " + std::to_string(s) + " is not a distribution");
  }
}

/// One sampled episode. Rewards are carried through I/O but never read by
/// any learning stage.
struct Trajectory {
  int id = 0;
  std::vector<int> states;
  std::vector<int> actions;
  std::optional<int> true_label;
  std::optional<std::vector<double>> rewards;

  int length() const { return static_cast<int>(actions.size()); }

  void validate(int num_states, int num_actions) const {
    require(states.size() == actions.size() + 1,
            "trajectory " + std::to_string(id) + ": len(states) != len(actions) + 1");
    for (int s : states)
      require(s >= 0 && s < num_states,
              "trajectory " + std::to_string(id) + ": state index out of range");
    for (int a : actions)
      require(a >= 0 && a < num_actions,
              "trajectory " + std::to_string(id) + ": action index out of range");
  }
};

enum class CountMode { discard, full };
enum class Anchor { first_in_subblock, last_in_block };

/// Four equal segments of length T = floor(T_n / 4); the second and fourth
/// are the two time-separated windows used by the double estimators. Each
/// window is split into `blocks` sub-blocks of length floor(T / blocks).
struct SegmentScheme {
  int length = 0;
  int blocks = 1;
  CountMode mode = CountMode::full;
  Anchor segment_anchor = Anchor::first_in_subblock;
  Anchor whole_anchor = Anchor::last_in_block;

  int segment_length() const { return length / 4; }
  int subblock_length() const { return segment_length() / blocks; }
  int whole_block_length() const { return length / blocks; }

  /// First timestep of segment i (1-based, 1..4).
  int segment_begin(int i) const { return (i - 1) * segment_length(); }

  void validate() const {
    require(blocks >= 1, "segment scheme: G must be >= 1");
    require(length >= 4 * blocks, "segment scheme: T_n = " + std::to_string(length) +
                                      " < 4*G = " + std::to_string(4 * blocks) +
                                      " (segment underflow)");
  }
};

/// Observation counts for one (s,a) pair: total and next-state histogram
/// (sorted by next state).
struct CountRow {
  int pair = 0;
  int total = 0;
  std::vector<std::pair<int, int>> next;
};

/// Sparse (s,a) -> counts map, rows sorted by pair index.
class SparseCounts {
 public:
  SparseCounts() = default;

  static SparseCounts from_transitions(std::span<const std::pair<int, int>> pair_next) {
    std::map<int, std::map<int, int>> acc;
    for (auto [pair, next] : pair_next) ++acc[pair][next];
    SparseCounts out;
    out.rows_.reserve(acc.size());
    for (auto& [pair, hist] : acc) {
      CountRow row{pair, 0, {}};
      row.next.reserve(hist.size());
      for (auto [s, c] : hist) {
        row.next.emplace_back(s, c);
        row.total += c;
      }
      out.total_ += row.total;
      out.rows_.push_back(std::move(row));
    }
    return out;
  }

  const std::vector<CountRow>& rows() const { return rows_; }
  int total() const { return total_; }

  const CountRow* find(int pair) const {
    auto it = std::lower_bound(rows_.begin(), rows_.end(), pair,
                               [](const CountRow& r, int p) { return r.pair < p; });
    return (it != rows_.end() && it->pair == pair) ? &*it : nullptr;
  }

  int count(int pair) const {
    const CountRow* r = find(pair);
    return r ? r->total : 0;
  }

  bool operator==(const SparseCounts& o) const {
    if (rows_.size() != o.rows_.size() || total_ != o.total_) return false;
    for (std::size_t i = 0; i < rows_.size(); ++i) {
      const auto& a = rows_[i];
      const auto& b = o.rows_[i];
      if (a.pair != b.pair || a.total != b.total || a.next != b.next) return false;
    }
    return true;
  }

 private:
  std::vector<CountRow> rows_;
  int total_ = 0;
};

/// Counts extracted from one trajectory. The hidden label is deliberately
/// absent so no learning stage can read it.
struct CountTable {
  int id = 0;
  int num_states = 0;
  int num_actions = 0;
  int blocks = 1;
  int first_state = 0;
  /// Counts for the two estimation windows (segments 2 and 4).
  std::array<SparseCounts, 2> windows;
  /// Whole-trajectory counts N(n,s,a) and N(n,s,a,s').
  SparseCounts whole;

  int num_pairs() const { return num_states * num_actions; }
};

namespace detail {

inline int anchor_step(int begin, int len, Anchor anchor) {
  return anchor == Anchor::first_in_subblock ? begin : begin + len - 1;
}

}  // namespace detail

/// Slice a trajectory into the two estimation windows plus whole-trajectory
/// counts. Transition t belongs to the window containing t.
inline CountTable segment_trajectory(const Trajectory& traj, const SegmentScheme& scheme,
                                     int num_states, int num_actions) {
  scheme.validate();
  require(traj.length() == scheme.length,
          "trajectory " + std::to_string(traj.id) + " has length " +
              std::to_string(traj.length()) + ", scheme expects " +
              std::to_string(scheme.length));
  traj.validate(num_states, num_actions);

  auto transition = [&](int t) {
    return std::pair<int, int>{traj.states[t] * num_actions + traj.actions[t],
                               traj.states[t + 1]};
  };

  CountTable table;
  table.id = traj.id;
  table.num_states = num_states;
  table.num_actions = num_actions;
  table.blocks = scheme.blocks;
  table.first_state = traj.states.front();

  const int seg_len = scheme.segment_length();
  const int sub_len = scheme.subblock_length();
  std::vector<std::pair<int, int>> buf;
  for (int w = 0; w < 2; ++w) {
    const int begin = scheme.segment_begin(w == 0 ? 2 : 4);
    buf.clear();
    if (scheme.mode == CountMode::full) {
      for (int t = begin; t < begin + seg_len; ++t) buf.push_back(transition(t));
    } else {
      for (int b = 0; b < scheme.blocks; ++b)
        buf.push_back(
            transition(detail::anchor_step(begin + b * sub_len, sub_len, scheme.segment_anchor)));
    }
    table.windows[w] = SparseCounts::from_transitions(buf);
  }

  buf.clear();
  if (scheme.mode == CountMode::full) {
    for (int t = 0; t < traj.length(); ++t) buf.push_back(transition(t));
  } else {
    const int block_len = scheme.whole_block_length();
    for (int b = 0; b < scheme.blocks; ++b)
      buf.push_back(transition(detail::anchor_step(b * block_len, block_len, scheme.whole_anchor)));
  }
  table.whole = SparseCounts::from_transitions(buf);
  return table;
}

inline std::vector<CountTable> segment_dataset(std::span<const Trajectory> data,
                                               const SegmentScheme& scheme, int num_states,
                                               int num_actions) {
  std::vector<CountTable> out;
  out.reserve(data.size());
  for (const auto& t : data) out.push_back(segment_trajectory(t, scheme, num_states, num_actions));
  return out;
}

/// Rejects datasets with mixed lengths; returns the common length.
inline int common_length(std::span<const Trajectory> data) {
  require(!data.empty(), "dataset is empty");
  const int len = data.front().length();
  for (const auto& t : data)
    require(t.length() == len, "dataset mixes trajectory lengths (" + std::to_string(len) +
                                   " and " + std::to_string(t.length()) + ")");
  return len;
}

/// Indices (into the dataset) of the subspace-estimation and clustering
/// subsets. Both lists are in ascending dataset order.
struct DatasetSplit {
  std::vector<int> sub;
  std::vector<int> clust;
};

/// Deterministic split: |sub| = floor(fraction * N). Assignment depends only
/// on the id list and the seed.
inline DatasetSplit split_dataset(std::span<const int> ids, double sub_fraction,
                                  std::uint64_t seed) {
  require(!ids.empty(), "split_dataset: dataset is empty");
  require(sub_fraction > 0.0 && sub_fraction < 1.0,
          "split_dataset: fraction must lie in (0,1)");
  const int n = static_cast<int>(ids.size());
  const int n_sub = static_cast<int>(std::floor(sub_fraction * n + 1e-9));

  // Rank by a keyed hash of the id so the split does not depend on the
  // order in which trajectories are listed.
  const std::uint64_t key = derive_seed(seed, stream::split);
  std::vector<int> order(n);
  for (int i = 0; i < n; ++i) order[i] = i;
  std::stable_sort(order.begin(), order.end(), [&](int a, int b) {
    const auto ha = mix64(key ^ static_cast<std::uint64_t>(ids[a]));
    const auto hb = mix64(key ^ static_cast<std::uint64_t>(ids[b]));
    return ha != hb ? ha < hb : ids[a] < ids[b];
  });
  DatasetSplit split;
  std::vector<char> in_sub(n, 0);
  for (int i = 0; i < n_sub; ++i) in_sub[order[i]] = 1;
  for (int i = 0; i < n; ++i) (in_sub[i] ? split.sub : split.clust).push_back(i);
  return split;
}

inline DatasetSplit split_dataset(std::span<const Trajectory> data, double sub_fraction,
                                  std::uint64_t seed) {
  std::vector<int> ids;
  ids.reserve(data.size());
  for (const auto& t : data) ids.push_back(t.id);
  return split_dataset(std::span<const int>(ids), sub_fraction, seed);
}

template <class T>
std::vector<T> select(std::span<const T> items, std::span<const int> index) {
  std::vector<T> out;
  out.reserve(index.size());
  for (int i : index) out.push_back(items[i]);
  return out;
}

}  // namespace mixmdp
