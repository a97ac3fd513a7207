#pragma once

#include <Eigen/Dense>

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "mixmdp/core.hpp"
#include "mixmdp/error.hpp"
#include "mixmdp/parallel.hpp"
#include "mixmdp/rng.hpp"

namespace mixmdp {

/// Tabular gridworld with four compass actions. The intended move succeeds
/// with probability 1 - slip; the remainder is split evenly over the two
/// perpendicular moves. Moves into a wall leave the agent in place.
struct GridworldSpec {
  int width = 8;
  int height = 8;
  double slip = 0.1;
  /// Per-state reward, row-major; empty selects the default map.
  std::vector<double> reward;
  double discount = 0.9;
  /// Fraction of each row of the second component moved onto the
  /// lowest-value neighbour.
  double adversarial_strength = 0.5;
  int value_iteration_cap = 100000;

  int num_states() const { return width * height; }
  static constexpr int num_actions = 4;
};

enum class Compass { north = 0, east = 1, south = 2, west = 3 };

namespace gridworld {

/// Default reward: +1 in the last cell, 0 elsewhere.
inline std::vector<double> default_reward(const GridworldSpec& spec) {
  std::vector<double> r(spec.num_states(), 0.0);
  r.back() = 1.0;
  return r;
}

inline std::vector<double> reward_map(const GridworldSpec& spec) {
  return spec.reward.empty() ? default_reward(spec) : spec.reward;
}

/// Cell reached by moving from s in direction dir (0..3 = N, E, S, W).
inline int move(const GridworldSpec& spec, int s, int dir) {
  int row = s / spec.width;
  int col = s % spec.width;
  switch (dir) {
    case 0: row = std::max(row - 1, 0); break;
    case 1: col = std::min(col + 1, spec.width - 1); break;
    case 2: row = std::min(row + 1, spec.height - 1); break;
    default: col = std::max(col - 1, 0); break;
  }
  return row * spec.width + col;
}

/// States reachable from s in one step (self included when s touches a
/// wall), ascending and deduplicated.
inline std::vector<int> neighbours(const GridworldSpec& spec, int s) {
  std::vector<int> out;
  for (int d = 0; d < 4; ++d) out.push_back(move(spec, s, d));
  std::sort(out.begin(), out.end());
  out.erase(std::unique(out.begin(), out.end()), out.end());
  return out;
}

/// The unperturbed kernel, (S*4) x S.
inline Eigen::MatrixXd normal_kernel(const GridworldSpec& spec) {
  const int S = spec.num_states();
  Eigen::MatrixXd P = Eigen::MatrixXd::Zero(S * 4, S);
  for (int s = 0; s < S; ++s)
    for (int a = 0; a < 4; ++a) {
      auto row = P.row(s * 4 + a);
      row(move(spec, s, a)) += 1.0 - spec.slip;
      row(move(spec, s, (a + 1) % 4)) += spec.slip / 2;
      row(move(spec, s, (a + 3) % 4)) += spec.slip / 2;
    }
  return P;
}

/// Optimal state values of `kernel` under the spec's reward and discount.
inline Eigen::VectorXd state_values(const GridworldSpec& spec, const Eigen::MatrixXd& kernel) {
  const int S = spec.num_states();
  const auto reward = reward_map(spec);
  Eigen::VectorXd v = Eigen::VectorXd::Zero(S);
  for (int it = 0; it < spec.value_iteration_cap; ++it) {
    const Eigen::VectorXd q = kernel * v;
    Eigen::VectorXd next(S);
    for (int s = 0; s < S; ++s)
      next(s) = reward[s] + spec.discount * q.segment(s * 4, 4).maxCoeff();
    const double change = (next - v).cwiseAbs().maxCoeff();
    v = next;
    if (change < 1e-13) return v;
  }
  throw Error("gridworld: value iteration did not converge within " +
              std::to_string(spec.value_iteration_cap) + " iterations");
}

/// Lowest-value neighbour of each state; ties go to the lowest index.
inline std::vector<int> lowest_value_neighbour(const GridworldSpec& spec,
                                               const Eigen::VectorXd& values) {
  std::vector<int> out(spec.num_states());
  for (int s = 0; s < spec.num_states(); ++s) {
    int best = -1;
    for (int nb : neighbours(spec, s))
      if (best < 0 || values(nb) < values(best) - 1e-12) best = nb;
    out[s] = best;
  }
  return out;
}

}  // namespace gridworld

/// Two-component gridworld mixture: the normal kernel and an adversarial
/// copy pulled toward low-value cells. Both share the uniform behaviour
/// policy, uniform start distribution, and equal weights.
inline MarkovMixture build_gridworld_mixture(const GridworldSpec& spec) {
  require(spec.width >= 1 && spec.height >= 1, "gridworld: width and height must be >= 1");
  require(spec.slip >= 0.0 && spec.slip <= 1.0, "gridworld: slip must lie in [0,1]");
  require(spec.adversarial_strength >= 0.0 && spec.adversarial_strength <= 1.0,
          "gridworld: adversarial strength must lie in [0,1]");
  require(spec.discount >= 0.0 && spec.discount < 1.0, "gridworld: discount must lie in [0,1)");
  require(spec.reward.empty() || static_cast<int>(spec.reward.size()) == spec.num_states(),
          "gridworld: reward map size must equal width*height");

  const int S = spec.num_states();
  const Eigen::MatrixXd normal = gridworld::normal_kernel(spec);
  const Eigen::VectorXd values = gridworld::state_values(spec, normal);
  const auto target = gridworld::lowest_value_neighbour(spec, values);

  const double eta = spec.adversarial_strength;
  Eigen::MatrixXd adversarial = normal;
  for (int s = 0; s < S; ++s)
    for (int a = 0; a < 4; ++a) {
      auto row = adversarial.row(s * 4 + a);
      row *= (1.0 - eta);
      row(target[s]) += eta;
    }

  MarkovMixture m;
  m.num_states = S;
  m.num_actions = 4;
  m.kernels = {normal, adversarial};
  const Eigen::MatrixXd policy = Eigen::MatrixXd::Constant(S, 4, 0.25);
  m.policies = {policy, policy};
  const Eigen::VectorXd start = Eigen::VectorXd::Constant(S, 1.0 / S);
  m.start_dists = {start, start};
  m.weights = Eigen::VectorXd::Constant(2, 0.5);
  return m;
}

/// A label pair and the (s,a) row where their kernels differ most.
struct SeparatingPair {
  int label_a = 0;
  int label_b = 0;
  int pair = 0;
  double separation = 0.0;
};

struct RandomMixture {
  MarkovMixture mixture;
  /// Rows that were perturbed to enforce separation.
  std::vector<int> planted_pairs;
  /// One entry per label pair (a < b), realised by an exhaustive row scan.
  std::vector<SeparatingPair> separations;
};

/// For every label pair, the (s,a) row maximising the l2 kernel gap.
inline std::vector<SeparatingPair> separating_pairs(const MarkovMixture& m) {
  std::vector<SeparatingPair> out;
  for (int a = 0; a < m.num_components(); ++a)
    for (int b = a + 1; b < m.num_components(); ++b) {
      SeparatingPair best{a, b, 0, -1.0};
      for (int r = 0; r < m.num_pairs(); ++r) {
        const double gap = (m.kernels[a].row(r) - m.kernels[b].row(r)).norm();
        if (gap > best.separation) best = {a, b, r, gap};
      }
      out.push_back(best);
    }
  return out;
}

/// K kernels sharing a Dirichlet(1) base. Label k is assigned a target state
/// per planted row from its base-S digits, and each planted row is pulled
/// toward that target with weight w = delta / sqrt(2), so any two labels
/// differ by at least delta on some planted row. Uniform policies, uniform
/// starts, equal weights.
inline RandomMixture build_random_mixture(int S, int A, int K, double delta_target,
                                          std::uint64_t seed) {
  require(S >= 1 && A >= 1 && K >= 1, "random mixture: S, A, K must be >= 1");
  require(delta_target > 0.0 && delta_target <= std::sqrt(2.0) + 1e-15,
          "random mixture: target separation must lie in (0, sqrt(2)]");
  Rng rng(derive_seed(seed, stream::mixture));

  Eigen::MatrixXd base(S * A, S);
  for (int r = 0; r < S * A; ++r) {
    for (int j = 0; j < S; ++j) base(r, j) = rng.exponential();
    base.row(r) /= base.row(r).sum();
  }

  RandomMixture out;
  MarkovMixture& m = out.mixture;
  m.num_states = S;
  m.num_actions = A;
  m.kernels.assign(K, base);
  m.policies.assign(K, Eigen::MatrixXd::Constant(S, A, 1.0 / A));
  m.start_dists.assign(K, Eigen::VectorXd::Constant(S, 1.0 / S));
  m.weights = Eigen::VectorXd::Constant(K, 1.0 / K);

  if (K > 1) {
    require(S >= 2, "random mixture: separation unreachable with a single state");
    int digits = 0;
    for (long long cap = 1; cap < K; cap *= S) ++digits;
    require(digits <= S * A, "random mixture: not enough (s,a) rows to separate K labels");

    // Choose distinct rows to plant.
    std::vector<int> rows(S * A);
    for (int r = 0; r < S * A; ++r) rows[r] = r;
    for (int i = 0; i < digits; ++i) std::swap(rows[i], rows[i + rng.below(S * A - i)]);
    out.planted_pairs.assign(rows.begin(), rows.begin() + digits);

    constexpr int kMaxAttempts = 8;
    double weight = std::min(1.0, delta_target / std::sqrt(2.0));
    for (int attempt = 0;; ++attempt) {
      for (int k = 0; k < K; ++k) {
        int code = k;
        for (int d = 0; d < digits; ++d) {
          const int r = out.planted_pairs[d];
          Eigen::RowVectorXd row = (1.0 - weight) * base.row(r);
          row(code % S) += weight;
          m.kernels[k].row(r) = row;
          code /= S;
        }
      }
      out.separations = separating_pairs(m);
      double worst = INFINITY;
      for (const auto& sp : out.separations) worst = std::min(worst, sp.separation);
      if (worst >= delta_target) break;
      require(attempt + 1 < kMaxAttempts && weight < 1.0,
              "random mixture: target separation " + std::to_string(delta_target) +
                  " unreachable on the simplex (best " + std::to_string(worst) + ")");
      weight = std::min(1.0, weight * (1.0 + 1e-9) + 1e-12);
    }
  }
  m.validate();
  return out;
}

namespace detail {

inline int sample_categorical(const Eigen::Ref<const Eigen::RowVectorXd>& p, Rng& rng) {
  const double u = rng.uniform();
  double acc = 0.0;
  int last = -1;
  for (int i = 0; i < p.size(); ++i) {
    if (p(i) <= 0.0) continue;
    acc += p(i);
    last = i;
    if (u < acc) return i;
  }
  return last;
}

}  // namespace detail

/// Draw one trajectory of T_n transitions. The label is drawn from the
/// mixture weights unless forced.
inline Trajectory sample_trajectory(const MarkovMixture& m, int length, std::optional<int> label,
                                    std::uint64_t seed) {
  require(length >= 1, "sample_trajectory: T_n must be >= 1");
  Rng rng(seed);
  const int k = label ? *label : detail::sample_categorical(m.weights.transpose(), rng);
  require(k >= 0 && k < m.num_components(), "sample_trajectory: label out of range");

  Trajectory t;
  t.true_label = k;
  t.states.reserve(length + 1);
  t.actions.reserve(length);
  int s = detail::sample_categorical(m.start_dists[k].transpose(), rng);
  t.states.push_back(s);
  for (int step = 0; step < length; ++step) {
    const int a = detail::sample_categorical(m.policies[k].row(s), rng);
    s = detail::sample_categorical(m.kernels[k].row(s * m.num_actions + a), rng);
    t.actions.push_back(a);
    t.states.push_back(s);
  }
  return t;
}

/// N trajectories with ids 0..N-1; trajectory i uses a seed derived from
/// (seed, i) so the result does not depend on thread count.
inline std::vector<Trajectory> sample_dataset(const MarkovMixture& m, int count, int length,
                                              std::uint64_t seed, int threads = 1) {
  require(count >= 1, "sample_dataset: N must be >= 1");
  std::vector<Trajectory> out(count);
  parallel_for(count, threads, [&](std::size_t i) {
    out[i] = sample_trajectory(m, length, std::nullopt, derive_seed(seed, stream::trajectory, i));
    out[i].id = static_cast<int>(i);
  });
  return out;
}

/// Mixing diagnostics of one component's induced chain on S x A.
struct ComponentMixing {
  int label = 0;
  /// First t with worst-start TV distance below tol; empty when the cap was
  /// reached (periodic or reducible chain).
  std::optional<int> t_mix;
  std::vector<double> tv_curve;
  Eigen::VectorXd stationary;
};

struct MixingReport {
  std::optional<int> t_mix;
  std::vector<ComponentMixing> components;
};

/// (S*A) x (S*A) transition matrix of the chain (s,a) -> (s',a').
inline Eigen::MatrixXd induced_chain(const MarkovMixture& m, int label) {
  const int S = m.num_states, A = m.num_actions;
  Eigen::MatrixXd Q(S * A, S * A);
  for (int r = 0; r < S * A; ++r)
    for (int s2 = 0; s2 < S; ++s2)
      for (int a2 = 0; a2 < A; ++a2)
        Q(r, s2 * A + a2) = m.kernels[label](r, s2) * m.policies[label](s2, a2);
  return Q;
}

/// Stationary distribution by power iteration of the lazy chain to a
/// horizon of 2^60 steps (repeated squaring).
inline Eigen::VectorXd stationary_distribution(const Eigen::MatrixXd& Q) {
  const int n = static_cast<int>(Q.rows());
  Eigen::MatrixXd W = 0.5 * (Eigen::MatrixXd::Identity(n, n) + Q);
  for (int i = 0; i < 60; ++i) {
    Eigen::MatrixXd next = W * W;
    const double change = (next - W).cwiseAbs().maxCoeff();
    W.swap(next);
    if (change < 1e-16) break;
  }
  Eigen::VectorXd d = W.transpose() * Eigen::VectorXd::Constant(n, 1.0 / n);
  return d / d.sum();
}

inline ComponentMixing estimate_mixing_time(const MarkovMixture& m, int label, double tol = 0.25,
                                            int horizon_cap = 2000) {
  require(label >= 0 && label < m.num_components(), "mixing time: label out of range");
  const Eigen::MatrixXd Q = induced_chain(m, label);
  const int n = static_cast<int>(Q.rows());

  ComponentMixing out;
  out.label = label;
  out.stationary = stationary_distribution(Q);
  const Eigen::RowVectorXd d = out.stationary.transpose();

  Eigen::MatrixXd dist = Eigen::MatrixXd::Identity(n, n);
  for (int t = 0; t <= horizon_cap; ++t) {
    double worst = 0.0;
    for (int r = 0; r < n; ++r) worst = std::max(worst, 0.5 * (dist.row(r) - d).cwiseAbs().sum());
    out.tv_curve.push_back(worst);
    if (worst < tol) {
      out.t_mix = t;
      break;
    }
    dist = dist * Q;
  }
  return out;
}

inline MixingReport mixing_report(const MarkovMixture& m, double tol = 0.25,
                                  int horizon_cap = 2000) {
  MixingReport report;
  bool ok = true;
  int worst = 0;
  for (int k = 0; k < m.num_components(); ++k) {
    report.components.push_back(estimate_mixing_time(m, k, tol, horizon_cap));
    if (report.components.back().t_mix)
      worst = std::max(worst, *report.components.back().t_mix);
    else
      ok = false;
  }
  if (ok) report.t_mix = worst;
  return report;
}

}  // namespace mixmdp
