#pragma once

#include <Eigen/Dense>

#include <cstdint>
#include <vector>

#include "mixmdp.hpp"

namespace testing_support {

using namespace mixmdp;

/// Row-stochastic (S*A) x S kernel with strictly positive entries.
inline Eigen::MatrixXd random_kernel(int S, int A, std::uint64_t seed) {
  Rng rng(seed);
  Eigen::MatrixXd P(S * A, S);
  for (int r = 0; r < S * A; ++r) {
    for (int j = 0; j < S; ++j) P(r, j) = 0.05 + rng.uniform();
    P.row(r) /= P.row(r).sum();
  }
  return P;
}

/// Mixture with the given kernels, uniform policies and starts, equal
/// weights.
inline MarkovMixture mixture_of(const std::vector<Eigen::MatrixXd>& kernels, int S, int A) {
  MarkovMixture m;
  m.num_states = S;
  m.num_actions = A;
  m.kernels = kernels;
  const int K = static_cast<int>(kernels.size());
  m.policies.assign(K, Eigen::MatrixXd::Constant(S, A, 1.0 / A));
  m.start_dists.assign(K, Eigen::VectorXd::Constant(S, 1.0 / S));
  m.weights = Eigen::VectorXd::Constant(K, 1.0 / K);
  m.validate();
  return m;
}

inline Trajectory make_trajectory(int id, std::vector<int> states, std::vector<int> actions) {
  Trajectory t;
  t.id = id;
  t.states = std::move(states);
  t.actions = std::move(actions);
  return t;
}

/// Dense N(s,a,s') tensor flattened to (S*A) x S.
inline Eigen::MatrixXd dense_counts(const SparseCounts& c, int S, int A) {
  Eigen::MatrixXd out = Eigen::MatrixXd::Zero(S * A, S);
  for (const auto& row : c.rows())
    for (auto [s2, n] : row.next) out(row.pair, s2) += n;
  return out;
}

inline std::vector<CountTable> tables_for(const std::vector<Trajectory>& data, int S, int A,
                                          int blocks = 0, CountMode mode = CountMode::full) {
  SegmentScheme scheme;
  scheme.length = common_length(data);
  scheme.blocks = blocks > 0 ? blocks : std::max(1, scheme.length / 4);
  scheme.mode = mode;
  return segment_dataset(data, scheme, S, A);
}

}  // namespace testing_support
