#pragma once

#include <Eigen/Dense>

#include <cmath>
#include <limits>
#include <span>
#include <string>
#include <vector>

#include "mixmdp/core.hpp"
#include "mixmdp/em.hpp"
#include "mixmdp/error.hpp"
#include "mixmdp/estimators.hpp"
#include "mixmdp/parallel.hpp"
#include "mixmdp/subspace.hpp"

namespace mixmdp {

/// Pooled per-cluster transition estimates and cluster weights.
struct ClusterModels {
  int num_states = 0;
  int num_actions = 0;
  std::vector<Eigen::MatrixXd> transitions;  // (S*A) x S per label
  std::vector<std::vector<char>> defined;
  Eigen::VectorXd weights;
  std::vector<int> sizes;

  int num_components() const { return static_cast<int>(weights.size()); }
  /// Labels with no member trajectory.
  std::vector<int> empty_clusters() const {
    std::vector<int> out;
    for (int k = 0; k < num_components(); ++k)
      if (sizes[k] == 0) out.push_back(k);
    return out;
  }
};

namespace detail {

inline void check_labels(std::span<const int> labels, std::size_t n, int K, const char* who) {
  require(K >= 1, std::string(who) + ": K must be >= 1");
  require(labels.size() == n, std::string(who) + ": label count does not match the dataset");
  for (int l : labels)
    require(l >= 0 && l < K, std::string(who) + ": label " + std::to_string(l) + " out of range");
}

}  // namespace detail

/// P_k(s'|s,a) = sum_{n in C_k} N(n,s,a,s') / sum_{n in C_k} N(n,s,a) and
/// f_k = |C_k| / N, from whole-trajectory counts.
inline ClusterModels estimate_models(std::span<const int> labels,
                                     std::span<const CountTable> tables, int K) {
  detail::check_labels(labels, tables.size(), K, "estimate_models");
  require(!tables.empty(), "estimate_models: no trajectories");
  const int S = tables.front().num_states, A = tables.front().num_actions, SA = S * A;
  const int N = static_cast<int>(tables.size());

  ClusterModels out;
  out.num_states = S;
  out.num_actions = A;
  out.weights = Eigen::VectorXd::Zero(K);
  out.sizes.assign(K, 0);
  std::vector<Eigen::MatrixXd> num(K, Eigen::MatrixXd::Zero(SA, S));
  std::vector<Eigen::VectorXd> den(K, Eigen::VectorXd::Zero(SA));
  std::vector<double> members(K, 0.0);
  for (int n = 0; n < N; ++n) {
    const int k = labels[n];
    members[k] += 1.0;
    ++out.sizes[k];
    for (const auto& row : tables[n].whole.rows()) {
      den[k](row.pair) += row.total;
      for (auto [s2, c] : row.next) num[k](row.pair, s2) += c;
    }
  }
  for (int k = 0; k < K; ++k) {
    out.weights(k) = members[k] / N;
    std::vector<char> def(SA, 0);
    for (int r = 0; r < SA; ++r)
      if (den[k](r) > 0.0) {
        num[k].row(r) /= den[k](r);
        def[r] = 1;
      }
    out.transitions.push_back(std::move(num[k]));
    out.defined.push_back(std::move(def));
  }
  return out;
}

/// Share of the trajectories observing (s,a) that carry label k; K x SA,
/// with observed[p] false (and a zero column) for pairs nobody observed.
struct ConditionalPrevalence {
  Eigen::MatrixXd share;
  std::vector<char> observed;
};

inline ConditionalPrevalence conditional_prevalence(std::span<const int> labels,
                                                    std::span<const CountTable> tables, int K) {
  detail::check_labels(labels, tables.size(), K, "conditional_prevalence");
  require(!tables.empty(), "conditional_prevalence: no trajectories");
  const int SA = tables.front().num_pairs();
  Eigen::MatrixXd hits = Eigen::MatrixXd::Zero(K, SA);
  for (std::size_t n = 0; n < tables.size(); ++n)
    for (const auto& row : tables[n].whole.rows()) hits(labels[n], row.pair) += 1.0;
  ConditionalPrevalence out;
  out.share = Eigen::MatrixXd::Zero(K, SA);
  out.observed.assign(SA, 0);
  for (int p = 0; p < SA; ++p) {
    const double total = hits.col(p).sum();
    if (total <= 0.0) continue;
    out.observed[p] = 1;
    out.share.col(p) = hits.col(p) / total;
  }
  return out;
}

/// Everything needed to classify new trajectories.
struct MixtureEstimate {
  ClusterModels models;
  ConditionalPrevalence prevalence;
  /// Per-label mean occupancy N(n,s,a)/G over cluster members (length SA).
  std::vector<Eigen::VectorXd> occupancy;
  /// Per-(s,a) projectors built from the estimated models, and the
  /// occupancy projector from the d_k.
  std::vector<Eigen::MatrixXd> projectors;
  Eigen::MatrixXd occupancy_projector;

  int num_components() const { return models.num_components(); }
  int num_states() const { return models.num_states; }
  int num_actions() const { return models.num_actions; }
};

/// Fills projectors from M~ = sum_k f_{k,s,a} P_k P_k^T and D~ = sum_k d_k d_k^T.
inline void build_class_projectors(MixtureEstimate& est, int threads = 1) {
  const int K = est.num_components();
  const int S = est.num_states(), SA = S * est.num_actions();
  const int r = std::min(K, S);
  est.projectors.assign(SA, Eigen::MatrixXd::Zero(r, S));
  parallel_for(SA, threads, [&](std::size_t pp) {
    const int p = static_cast<int>(pp);
    if (!est.prevalence.observed[p]) return;
    Eigen::MatrixXd M = Eigen::MatrixXd::Zero(S, S);
    for (int k = 0; k < K; ++k) {
      if (!est.models.defined[k][p]) continue;
      const Eigen::VectorXd v = est.models.transitions[k].row(p).transpose();
      M += est.prevalence.share(k, p) * v * v.transpose();
    }
    est.projectors[p] =
        top_k_eigenspace(M + M.transpose(), r, "class moment of pair " + std::to_string(p))
            .projector;
  });
  Eigen::MatrixXd D = Eigen::MatrixXd::Zero(SA, SA);
  for (const auto& d : est.occupancy) D += d * d.transpose();
  est.occupancy_projector =
      top_k_eigenspace(D + D.transpose(), std::min(K, SA), "class occupancy moment").projector;
}

inline MixtureEstimate estimate_mixture(std::span<const int> labels,
                                        std::span<const CountTable> tables, int K,
                                        int threads = 1) {
  MixtureEstimate est;
  est.models = estimate_models(labels, tables, K);
  est.prevalence = conditional_prevalence(labels, tables, K);
  const int SA = tables.front().num_pairs();
  est.occupancy.assign(K, Eigen::VectorXd::Zero(SA));
  for (std::size_t n = 0; n < tables.size(); ++n)
    for (const auto& row : tables[n].whole.rows())
      est.occupancy[labels[n]](row.pair) +=
          static_cast<double>(row.total) / tables[n].blocks;
  for (int k = 0; k < K; ++k)
    if (est.models.sizes[k] > 0) est.occupancy[k] /= est.models.sizes[k];
  build_class_projectors(est, threads);
  return est;
}

struct Classification {
  /// argmin label, or -1 when the trajectory cannot be classified.
  int label = -1;
  bool unclassifiable = false;
  Eigen::VectorXd dist1;
  Eigen::VectorXd dist2;
  Eigen::VectorXd dist;
};

/// Distance of one trajectory to every estimated label, using the window
/// estimates of the trajectory against each model's transition rows.
inline Classification classify(const WindowEstimates& w, const MixtureEstimate& est,
                               std::span<const int> freq, double lambda) {
  require(lambda >= 0.0 && lambda <= 1.0, "classify: lambda must lie in [0,1]");
  const int K = est.num_components();
  const int S = est.num_states();
  Classification out;
  out.dist1 = Eigen::VectorXd::Zero(K);
  out.dist2 = Eigen::VectorXd::Zero(K);
  out.dist = Eigen::VectorXd::Zero(K);

  bool observes_any = false;
  for (int p : freq)
    if (w[0].observed(p) || w[1].observed(p)) observes_any = true;

  std::array<Eigen::VectorXd, 2> occ;
  for (int i = 0; i < 2; ++i) occ[i] = est.occupancy_projector * w[i].occupancy_dense();

  for (int k = 0; k < K; ++k) {
    double best = -std::numeric_limits<double>::infinity();
    for (int p : freq) {
      const auto& V = est.projectors[p];
      const Eigen::VectorXd pk = est.models.defined[k][p]
                                     ? Eigen::VectorXd(est.models.transitions[k].row(p).transpose())
                                     : Eigen::VectorXd::Zero(S);
      const Eigen::VectorXd d1 = V * (w[0].transition(p) - pk);
      const Eigen::VectorXd d2 = V * (w[1].transition(p) - pk);
      best = std::max(best, d1.dot(d2));
    }
    out.dist1(k) = freq.empty() ? 0.0 : best;
    const Eigen::VectorXd dk = est.occupancy_projector * est.occupancy[k];
    out.dist2(k) = (occ[0] - dk).dot(occ[1] - dk);
    out.dist(k) = lambda * out.dist1(k) + (1.0 - lambda) * out.dist2(k);
  }

  if (!observes_any && lambda == 1.0) {
    out.unclassifiable = true;
    return out;
  }
  int arg = 0;
  for (int k = 1; k < K; ++k)
    if (out.dist(k) < out.dist(arg)) arg = k;
  out.label = arg;
  return out;
}

inline std::vector<Classification> classify(std::span<const WindowEstimates> data,
                                            const MixtureEstimate& est,
                                            std::span<const int> freq, double lambda,
                                            int threads = 1) {
  std::vector<Classification> out(data.size());
  parallel_for(data.size(), threads,
               [&](std::size_t i) { out[i] = classify(data[i], est, freq, lambda); });
  return out;
}

/// Likelihood-ratio classification against pooled cluster models over the
/// whole-trajectory transitions of every pair: argmax_k log f_k +
/// sum N(n,s,a,s') log P_k(s'|s,a), skipping undefined rows; ties to the
/// lowest label, -1 if every label has zero likelihood.
inline std::vector<int> classify_by_likelihood(const ClusterModels& models,
                                               std::span<const CountTable> tables) {
  const int K = models.num_components();
  std::vector<int> out(tables.size(), -1);
  for (std::size_t n = 0; n < tables.size(); ++n) {
    double best = -std::numeric_limits<double>::infinity();
    for (int k = 0; k < K; ++k) {
      if (models.weights(k) <= 0.0) continue;
      double ll = std::log(models.weights(k));
      bool possible = true;
      for (const auto& row : tables[n].whole.rows()) {
        if (!models.defined[k][row.pair]) continue;
        for (auto [s2, c] : row.next) {
          const double prob = models.transitions[k](row.pair, s2);
          if (prob <= 0.0) {
            possible = false;
            break;
          }
          ll += c * std::log(prob);
        }
        if (!possible) break;
      }
      if (possible && ll > best) {
        best = ll;
        out[n] = k;
      }
    }
  }
  return out;
}

}  // namespace mixmdp
