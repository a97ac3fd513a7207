#pragma once

#include <Eigen/Dense>

#include <algorithm>
#include <chrono>
#include <cstdint>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "mixmdp/clustering.hpp"
#include "mixmdp/core.hpp"
#include "mixmdp/em.hpp"
#include "mixmdp/error.hpp"
#include "mixmdp/estimators.hpp"
#include "mixmdp/inference.hpp"
#include "mixmdp/metrics.hpp"
#include "mixmdp/parallel.hpp"
#include "mixmdp/rng.hpp"
#include "mixmdp/simulator.hpp"
#include "mixmdp/subspace.hpp"

namespace mixmdp {

// ---------------------------------------------------------------------------
// Variants

enum class ProjectorKind { learned, identity, random };

struct ProjectorVariant {
  ProjectorKind kind = ProjectorKind::learned;
  int dim = 0;  // random only

  std::string name() const {
    switch (kind) {
      case ProjectorKind::learned: return "learned";
      case ProjectorKind::identity: return "identity";
      case ProjectorKind::random: return "random" + std::to_string(dim);
    }
    return "unknown";
  }

  /// Accepts "learned", "identity", "random:<dim>" or "random<dim>".
  static ProjectorVariant parse(const std::string& text) {
    if (text == "learned") return {ProjectorKind::learned, 0};
    if (text == "identity") return {ProjectorKind::identity, 0};
    if (text.rfind("random", 0) == 0) {
      std::string rest = text.substr(6);
      if (!rest.empty() && rest.front() == ':') rest.erase(0, 1);
      try {
        std::size_t used = 0;
        const int dim = std::stoi(rest, &used);
        if (used == rest.size() && dim >= 1) return {ProjectorKind::random, dim};
      } catch (const std::exception&) {
      }
    }
    throw Error("unknown projector variant '" + text + "' (learned, identity, random:<dim>)");
  }
};

enum class EmInit { random, models_from_clusters, labels_from_clusters_and_classification };

inline std::string em_init_name(EmInit init) {
  switch (init) {
    case EmInit::random: return "em_random";
    case EmInit::models_from_clusters: return "em_models_from_clusters";
    case EmInit::labels_from_clusters_and_classification: return "em_labels_from_clusters";
  }
  return "unknown";
}

inline EmInit parse_em_init(const std::string& text) {
  if (text == "random" || text == "em_random") return EmInit::random;
  if (text == "models_from_clusters" || text == "em_models_from_clusters")
    return EmInit::models_from_clusters;
  if (text == "labels_from_clusters_and_classification" || text == "em_labels_from_clusters")
    return EmInit::labels_from_clusters_and_classification;
  throw Error("unknown EM initialisation '" + text +
              "' (random, models_from_clusters, labels_from_clusters_and_classification)");
}

/// Replaces every V_{s,a} with the identity or a seeded random projector.
inline SubspaceBank apply_projector_variant(const SubspaceBank& bank, const ProjectorVariant& v,
                                            std::uint64_t seed) {
  SubspaceBank out = bank;
  const int S = bank.num_states;
  for (int p = 0; p < bank.num_pairs(); ++p) {
    switch (v.kind) {
      case ProjectorKind::learned: break;
      case ProjectorKind::identity: out.projectors[p] = Eigen::MatrixXd::Identity(S, S); break;
      case ProjectorKind::random:
        require(v.dim <= S, "random projector dimension exceeds S");
        out.projectors[p] = random_projector(S, v.dim, derive_seed(seed, stream::projector, p));
        break;
    }
  }
  return out;
}

// ---------------------------------------------------------------------------
// Pipeline

struct PipelineConfig {
  int num_components = 2;
  /// Sub-blocks per window; 0 selects floor(T_n / 4).
  int blocks = 0;
  CountMode mode = CountMode::full;
  double sub_fraction = 0.5;
  /// Empty selects the separation-scatter heuristic.
  std::optional<double> beta = 0.02;
  double beta_quantile = 0.75;
  /// Count Freq_beta over every trajectory instead of N_clust only.
  bool freq_all_data = false;
  long long scatter_pairs = 20000;
  /// Empty selects the density-valley heuristic.
  std::optional<double> tau;
  double lambda = 1.0;
  GraphBackend backend = GraphBackend::spectral;
  ProjectorVariant projector;
  int threads = 1;

  SegmentScheme scheme(int length) const {
    SegmentScheme s;
    s.length = length;
    s.blocks = blocks > 0 ? blocks : std::max(1, length / 4);
    s.mode = mode;
    return s;
  }
};

/// Everything produced by subspace estimation and clustering of one dataset.
struct ClusteringOutcome {
  SegmentScheme scheme;
  std::vector<CountTable> tables;  // dataset order
  DatasetSplit split;
  std::vector<WindowEstimates> sub_estimates;
  std::vector<WindowEstimates> clust_estimates;
  SubspaceBank learned_bank;
  SubspaceBank bank;  // after the projector variant
  double beta = 0.0;
  std::vector<int> freq;
  DistanceMatrix distances;
  std::optional<ThresholdSuggestion> threshold;
  double tau = 0.0;
  std::vector<int> clust_labels;  // aligned with split.clust
};

inline std::vector<CountTable> subset(const std::vector<CountTable>& tables,
                                      std::span<const int> idx) {
  return select(std::span<const CountTable>(tables), idx);
}

inline ClusteringOutcome cluster_dataset(std::span<const Trajectory> data, int num_states,
                                         int num_actions, const PipelineConfig& cfg,
                                         std::uint64_t seed) {
  require(data.size() >= 2, "pipeline: need at least two trajectories");
  ClusteringOutcome out;
  out.scheme = cfg.scheme(common_length(data));
  out.tables = segment_dataset(data, out.scheme, num_states, num_actions);
  out.split = split_dataset(data, cfg.sub_fraction, derive_seed(seed, stream::split));
  require(!out.split.sub.empty() && out.split.clust.size() >= 2,
          "pipeline: split leaves too few trajectories in a subset");
  const auto sub = subset(out.tables, out.split.sub);
  const auto clust = subset(out.tables, out.split.clust);
  out.sub_estimates = window_estimates(sub, cfg.threads);
  out.clust_estimates = window_estimates(clust, cfg.threads);

  out.learned_bank = estimate_subspaces(out.sub_estimates, cfg.num_components, cfg.threads);
  out.bank = apply_projector_variant(out.learned_bank, cfg.projector, seed);

  if (cfg.beta) {
    out.beta = *cfg.beta;
  } else {
    const int n = static_cast<int>(clust.size());
    const auto pairs = sample_pairs(n, cfg.scatter_pairs, seed);
    out.beta = suggest_beta(
        separation_scatter(out.learned_bank, out.clust_estimates, clust, pairs),
        cfg.beta_quantile);
  }
  const std::span<const CountTable> freq_source =
      cfg.freq_all_data ? std::span<const CountTable>(out.tables) : std::span<const CountTable>(clust);
  out.freq = frequent_pairs(freq_source, out.beta);
  out.distances = distance_matrix(out.clust_estimates, out.bank, out.freq, cfg.lambda, cfg.threads);

  if (cfg.tau) {
    out.tau = *cfg.tau;
  } else {
    const auto values = off_diagonal(out.distances.dist);
    out.threshold = suggest_threshold(values);
    out.tau = out.threshold->tau;
  }
  out.clust_labels =
      cluster_graph(threshold_graph(out.distances.dist, out.tau), cfg.num_components, cfg.backend,
                    &out.distances.dist, derive_seed(seed, stream::kmeans));
  return out;
}

/// Model estimate from the clusters and classification of N_sub.
struct InferenceOutcome {
  MixtureEstimate estimate;
  std::vector<Classification> sub_classes;  // aligned with split.sub
  /// Labels in dataset order: cluster labels on N_clust, classified labels on
  /// N_sub (-1 where unclassifiable).
  std::vector<int> labels;
  int unclassifiable = 0;
};

inline InferenceOutcome infer_labels(const ClusteringOutcome& c, const PipelineConfig& cfg) {
  InferenceOutcome out;
  const auto clust = subset(c.tables, c.split.clust);
  out.estimate = estimate_mixture(c.clust_labels, clust, cfg.num_components, cfg.threads);
  out.sub_classes = classify(c.sub_estimates, out.estimate, c.freq, cfg.lambda, cfg.threads);
  out.labels.assign(c.tables.size(), -1);
  for (std::size_t i = 0; i < c.split.clust.size(); ++i)
    out.labels[c.split.clust[i]] = c.clust_labels[i];
  for (std::size_t i = 0; i < c.split.sub.size(); ++i) {
    out.labels[c.split.sub[i]] = out.sub_classes[i].label;
    if (out.sub_classes[i].unclassifiable) ++out.unclassifiable;
  }
  return out;
}

struct EmRunSummary {
  std::vector<int> labels;  // dataset order
  double loglik = 0.0;
  int iterations = 0;
  bool converged = false;
};

struct EmRestart {
  int restart = 0;
  EmRunSummary run;
};

struct EmConfig {
  EmVariant variant = EmVariant::full;
  EmOptions options;
  double softening = 0.2;
  int restarts = 30;
};

inline EmScope make_scope(const EmConfig& em, int S, int A, std::span<const int> freq) {
  return em.variant == EmVariant::full ? EmScope::full(S, A) : EmScope::restricted(S, A, freq);
}

inline EmRunSummary summarize(const EmState& s) {
  return {s.labels(), s.loglik_trace.empty() ? 0.0 : s.loglik_trace.back(), s.iterations,
          s.converged};
}

/// Soft EM over the whole dataset from one of the initialisations. For the
/// random initialisation every restart is returned and the first entry of
/// the result is the restart with the highest final log-likelihood.
inline std::vector<EmRestart> refine_with_em(const ClusteringOutcome& c,
                                             const InferenceOutcome& inf, EmInit init,
                                             const EmConfig& em, int K, std::uint64_t seed) {
  const int S = c.tables.front().num_states, A = c.tables.front().num_actions;
  const auto scope = make_scope(em, S, A, c.freq);
  const std::span<const CountTable> all(c.tables);
  const int N = static_cast<int>(c.tables.size());
  std::vector<EmRestart> out;
  switch (init) {
    case EmInit::random: {
      for (int r = 0; r < em.restarts; ++r) {
        const auto resp =
            em_init_random(N, K, em.softening, derive_seed(seed, stream::em_restart, r));
        out.push_back({r, summarize(run_em(resp, all, scope, em.options))});
      }
      auto best = std::max_element(out.begin(), out.end(), [](const auto& a, const auto& b) {
        return a.run.loglik < b.run.loglik;
      });
      std::rotate(out.begin(), best, best + 1);
      break;
    }
    case EmInit::models_from_clusters: {
      const auto clust = subset(c.tables, c.split.clust);
      const auto onehot = em_init_from_labels(c.clust_labels, K, 0.0);
      const auto params = m_step(onehot, clust, scope);
      out.push_back({0, summarize(run_em_from_params(params, all, scope, em.options))});
      break;
    }
    case EmInit::labels_from_clusters_and_classification: {
      const auto resp = em_init_from_labels(inf.labels, K, em.softening);
      out.push_back({0, summarize(run_em(resp, all, scope, em.options))});
      break;
    }
  }
  return out;
}

}  // namespace mixmdp
