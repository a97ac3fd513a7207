#pragma once

#include <Eigen/Dense>

#include <algorithm>
#include <array>
#include <cmath>
#include <cstdint>
#include <limits>
#include <numeric>
#include <span>
#include <string>
#include <unordered_set>
#include <utility>
#include <vector>

#include "mixmdp/core.hpp"
#include "mixmdp/error.hpp"
#include "mixmdp/estimators.hpp"
#include "mixmdp/parallel.hpp"
#include "mixmdp/rng.hpp"
#include "mixmdp/subspace.hpp"

namespace mixmdp {

// ---------------------------------------------------------------------------
// Frequent pairs

/// Share of recorded window observations falling on each (s,a) pair.
inline Eigen::VectorXd pair_frequencies(std::span<const CountTable> tables) {
  require(!tables.empty(), "pair_frequencies: no trajectories");
  Eigen::VectorXd freq = Eigen::VectorXd::Zero(tables.front().num_pairs());
  double total = 0.0;
  for (const auto& t : tables)
    for (const auto& w : t.windows)
      for (const auto& r : w.rows()) {
        freq(r.pair) += r.total;
        total += r.total;
      }
  if (total > 0.0) freq /= total;
  return freq;
}

/// Pairs whose observation frequency strictly exceeds beta, ascending.
inline std::vector<int> frequent_pairs(std::span<const CountTable> tables, double beta) {
  require(beta >= 0.0 && beta < 1.0, "frequent_pairs: beta must lie in [0,1)");
  const Eigen::VectorXd freq = pair_frequencies(tables);
  std::vector<int> out;
  for (int p = 0; p < freq.size(); ++p)
    if (freq(p) > beta) out.push_back(p);
  if (out.empty())
    throw Error("frequent_pairs: no (s,a) pair has frequency above beta = " +
                std::to_string(beta) + " (maximum observed frequency " +
                std::to_string(freq.maxCoeff()) + ")");
  return out;
}

// ---------------------------------------------------------------------------
// Pairwise distances

/// Offsets of each frequent pair's projected block inside an embedding.
struct EmbeddingLayout {
  std::vector<int> pairs;
  std::vector<int> offsets;  // size pairs.size() + 1

  int width() const { return offsets.back(); }
};

inline EmbeddingLayout make_layout(const SubspaceBank& bank, std::span<const int> pairs) {
  EmbeddingLayout layout;
  layout.pairs.assign(pairs.begin(), pairs.end());
  layout.offsets.push_back(0);
  for (int p : pairs) {
    require(p >= 0 && p < bank.num_pairs(), "embedding: pair index out of range");
    layout.offsets.push_back(layout.offsets.back() +
                             static_cast<int>(bank.projectors[p].rows()));
  }
  return layout;
}

/// One trajectory's window estimates mapped through the projectors:
/// projected[i] stacks V_{s,a} P_{n,i}(.|s,a) over the layout's pairs and
/// occupancy[i] = U d_{n,i}.
struct Embedding {
  std::array<Eigen::VectorXd, 2> projected;
  std::array<Eigen::VectorXd, 2> occupancy;
  bool observes_any = false;
};

inline Embedding embed(const WindowEstimates& est, const SubspaceBank& bank,
                       const EmbeddingLayout& layout) {
  Embedding e;
  for (int i = 0; i < 2; ++i) {
    e.projected[i] = Eigen::VectorXd::Zero(layout.width());
    for (std::size_t f = 0; f < layout.pairs.size(); ++f) {
      const auto* row = est[i].find(layout.pairs[f]);
      if (!row) continue;
      e.observes_any = true;
      const auto& V = bank.projectors[layout.pairs[f]];
      auto block = e.projected[i].segment(layout.offsets[f], V.rows());
      for (auto [s, p] : row->probs) block += p * V.col(s);
    }
    Eigen::VectorXd occ = Eigen::VectorXd::Zero(bank.occupancy_projector.rows());
    for (const auto& r : est[i].rows)
      occ += (static_cast<double>(r.count) / est[i].blocks) * bank.occupancy_projector.col(r.pair);
    e.occupancy[i] = std::move(occ);
  }
  return e;
}

struct PairDistance {
  double dist1 = 0.0;
  double dist2 = 0.0;
  double dist = 0.0;
};

/// Per-pair double-estimator inner products Delta_1^T Delta_2.
inline void pair_products(const Embedding& n, const Embedding& m, const EmbeddingLayout& layout,
                          std::vector<double>& out) {
  out.resize(layout.pairs.size());
  const double* a1 = n.projected[0].data();
  const double* a2 = n.projected[1].data();
  const double* b1 = m.projected[0].data();
  const double* b2 = m.projected[1].data();
  for (std::size_t f = 0; f < layout.pairs.size(); ++f) {
    double acc = 0.0;
    for (int j = layout.offsets[f]; j < layout.offsets[f + 1]; ++j)
      acc += (a1[j] - b1[j]) * (a2[j] - b2[j]);
    out[f] = acc;
  }
}

inline PairDistance pairwise_distance(const Embedding& n, const Embedding& m,
                                      const EmbeddingLayout& layout, double lambda) {
  PairDistance d;
  const double* a1 = n.projected[0].data();
  const double* a2 = n.projected[1].data();
  const double* b1 = m.projected[0].data();
  const double* b2 = m.projected[1].data();
  double best = -std::numeric_limits<double>::infinity();
  for (std::size_t f = 0; f < layout.pairs.size(); ++f) {
    double acc = 0.0;
    for (int j = layout.offsets[f]; j < layout.offsets[f + 1]; ++j)
      acc += (a1[j] - b1[j]) * (a2[j] - b2[j]);
    best = std::max(best, acc);
  }
  d.dist1 = layout.pairs.empty() ? 0.0 : best;
  double occ = 0.0;
  for (int j = 0; j < n.occupancy[0].size(); ++j)
    occ += (n.occupancy[0](j) - m.occupancy[0](j)) * (n.occupancy[1](j) - m.occupancy[1](j));
  d.dist2 = occ;
  d.dist = lambda * d.dist1 + (1.0 - lambda) * d.dist2;
  return d;
}

inline PairDistance pairwise_distance(const WindowEstimates& n, const WindowEstimates& m,
                                      const SubspaceBank& bank, std::span<const int> freq,
                                      double lambda) {
  const auto layout = make_layout(bank, freq);
  return pairwise_distance(embed(n, bank, layout), embed(m, bank, layout), layout, lambda);
}

/// Symmetric N x N matrices of dist1, dist2 and their lambda-combination.
struct DistanceMatrix {
  Eigen::MatrixXd dist1;
  Eigen::MatrixXd dist2;
  Eigen::MatrixXd dist;
  double lambda = 1.0;
  std::vector<int> freq;
  /// Pairs where neither trajectory observed any frequent pair, so dist1 is
  /// computed from zero vectors only.
  long long empty_intersections = 0;
};

inline DistanceMatrix distance_matrix(std::span<const WindowEstimates> estimates,
                                      const SubspaceBank& bank, std::span<const int> freq,
                                      double lambda, int threads = 1) {
  require(lambda >= 0.0 && lambda <= 1.0, "distance_matrix: lambda must lie in [0,1]");
  const int n = static_cast<int>(estimates.size());
  const auto layout = make_layout(bank, freq);
  std::vector<Embedding> emb(n);
  parallel_for(n, threads, [&](std::size_t i) { emb[i] = embed(estimates[i], bank, layout); });

  DistanceMatrix out;
  out.lambda = lambda;
  out.freq.assign(freq.begin(), freq.end());
  out.dist1 = Eigen::MatrixXd::Zero(n, n);
  out.dist2 = Eigen::MatrixXd::Zero(n, n);
  out.dist = Eigen::MatrixXd::Zero(n, n);
  // Row i owns entries (i, j > i); mirroring afterwards keeps writes disjoint.
  parallel_for(n, threads, [&](std::size_t ii) {
    const int i = static_cast<int>(ii);
    for (int j = i + 1; j < n; ++j) {
      const auto d = pairwise_distance(emb[i], emb[j], layout, lambda);
      out.dist1(i, j) = d.dist1;
      out.dist2(i, j) = d.dist2;
      out.dist(i, j) = d.dist;
    }
  });
  for (int i = 0; i < n; ++i)
    for (int j = i + 1; j < n; ++j) {
      out.dist1(j, i) = out.dist1(i, j);
      out.dist2(j, i) = out.dist2(i, j);
      out.dist(j, i) = out.dist(i, j);
      if (!emb[i].observes_any && !emb[j].observes_any) ++out.empty_intersections;
    }
  return out;
}

inline std::vector<double> off_diagonal(const Eigen::MatrixXd& m) {
  std::vector<double> out;
  out.reserve(m.rows() * (m.rows() - 1) / 2);
  for (int i = 0; i < m.rows(); ++i)
    for (int j = i + 1; j < m.cols(); ++j) out.push_back(m(i, j));
  return out;
}

// ---------------------------------------------------------------------------
// Threshold selection

struct ThresholdSuggestion {
  double tau = 0.0;
  double bandwidth = 0.0;
  std::vector<double> grid;
  std::vector<double> density;
};

namespace detail {

inline double quantile_sorted(const std::vector<double>& sorted, double q) {
  const double pos = q * (sorted.size() - 1);
  const auto lo = static_cast<std::size_t>(std::floor(pos));
  const auto hi = std::min(lo + 1, sorted.size() - 1);
  return sorted[lo] + (pos - lo) * (sorted[hi] - sorted[lo]);
}

}  // namespace detail

/// Gaussian KDE (Silverman bandwidth, linear binning) over the values; tau is
/// the bottom of the first valley to the right of the mode nearest zero.
inline ThresholdSuggestion suggest_threshold(std::span<const double> values) {
  require(values.size() >= 2, "suggest_threshold: need at least two values");
  std::vector<double> sorted(values.begin(), values.end());
  std::sort(sorted.begin(), sorted.end());
  require(sorted.front() < sorted.back(), "suggest_threshold: need at least two distinct values");

  const double n = static_cast<double>(sorted.size());
  const double mean = std::accumulate(sorted.begin(), sorted.end(), 0.0) / n;
  double var = 0.0;
  for (double v : sorted) var += (v - mean) * (v - mean);
  const double sd = std::sqrt(var / (n - 1));
  const double iqr = detail::quantile_sorted(sorted, 0.75) - detail::quantile_sorted(sorted, 0.25);
  const double spread = iqr > 0.0 ? std::min(sd, iqr / 1.34) : sd;
  const double h = 0.9 * spread * std::pow(n, -0.2);
  require(h > 0.0, "suggest_threshold: degenerate bandwidth");

  const double lo = sorted.front() - 3.0 * h;
  const double hi = sorted.back() + 3.0 * h;
  const int points = static_cast<int>(std::clamp((hi - lo) / h * 8.0, 512.0, 65536.0));
  const double step = (hi - lo) / (points - 1);

  std::vector<double> bins(points, 0.0);
  for (double v : sorted) {
    const double pos = (v - lo) / step;
    const int i = std::min(static_cast<int>(pos), points - 2);
    const double frac = pos - i;
    bins[i] += 1.0 - frac;
    bins[i + 1] += frac;
  }
  const int half = static_cast<int>(std::ceil(5.0 * h / step));
  std::vector<double> kernel(2 * half + 1);
  for (int j = -half; j <= half; ++j) {
    const double x = j * step / h;
    kernel[j + half] = std::exp(-0.5 * x * x) / (n * h * std::sqrt(2.0 * M_PI));
  }

  ThresholdSuggestion out;
  out.bandwidth = h;
  out.grid.resize(points);
  out.density.assign(points, 0.0);
  for (int i = 0; i < points; ++i) {
    out.grid[i] = lo + i * step;
    if (bins[i] == 0.0) continue;
    for (int j = std::max(0, i - half); j <= std::min(points - 1, i + half); ++j)
      out.density[j] += bins[i] * kernel[j - i + half];
  }

  const auto& f = out.density;
  std::vector<int> modes;
  for (int i = 1; i + 1 < points; ++i)
    if (f[i] > f[i - 1] && f[i] >= f[i + 1]) modes.push_back(i);
  require(!modes.empty(), "suggest_threshold: density has no interior mode");
  int first = modes.front();
  for (int m : modes)
    if (std::abs(out.grid[m]) < std::abs(out.grid[first])) first = m;

  // Walk right until the density starts rising again.
  int j = first + 1;
  while (j + 1 < points && f[j + 1] <= f[j]) ++j;
  if (j + 1 >= points)
    throw Error("suggest_threshold: density is unimodal beyond the mode nearest 0; "
                "set the threshold manually");
  int left = j;
  while (left - 1 > first && f[left - 1] == f[j]) --left;
  out.tau = out.grid[(left + j) / 2];
  return out;
}

// ---------------------------------------------------------------------------
// Graph clustering

using Adjacency = Eigen::Matrix<bool, Eigen::Dynamic, Eigen::Dynamic>;

inline Adjacency threshold_graph(const Eigen::MatrixXd& dist, double tau) {
  Adjacency a = (dist.array() <= tau).matrix();
  a.diagonal().setConstant(true);
  return a;
}

enum class GraphBackend { spectral, components, agglomerative };

/// Relabel so labels appear in order of first occurrence.
inline std::vector<int> canonical_labels(std::span<const int> labels) {
  std::vector<int> map;
  std::vector<int> out(labels.size());
  for (std::size_t i = 0; i < labels.size(); ++i) {
    const int l = labels[i];
    if (l >= static_cast<int>(map.size())) map.resize(l + 1, -1);
    if (map[l] < 0) map[l] = *std::max_element(map.begin(), map.end()) + 1;
    out[i] = map[l];
  }
  return out;
}

struct KMeansResult {
  std::vector<int> labels;
  Eigen::MatrixXd centers;
  double inertia = 0.0;
};

/// Lloyd's algorithm with k-means++ seeding; keeps the lowest-inertia run.
inline KMeansResult kmeans(const Eigen::MatrixXd& points, int K, int restarts,
                           std::uint64_t seed, int max_iter = 300) {
  const int n = static_cast<int>(points.rows());
  require(K >= 1 && K <= n, "kmeans: K must lie in [1, N]");
  KMeansResult best;
  best.inertia = std::numeric_limits<double>::infinity();
  for (int run = 0; run < restarts; ++run) {
    Rng rng(derive_seed(seed, stream::kmeans, run));
    Eigen::MatrixXd centers(K, points.cols());
    centers.row(0) = points.row(rng.below(n));
    Eigen::VectorXd d2(n);
    for (int i = 0; i < n; ++i) d2(i) = (points.row(i) - centers.row(0)).squaredNorm();
    for (int c = 1; c < K; ++c) {
      const double total = d2.sum();
      int pick = static_cast<int>(rng.below(n));
      if (total > 0.0) {
        const double u = rng.uniform() * total;
        double acc = 0.0;
        for (int i = 0; i < n; ++i) {
          acc += d2(i);
          if (u < acc) {
            pick = i;
            break;
          }
        }
      }
      centers.row(c) = points.row(pick);
      for (int i = 0; i < n; ++i)
        d2(i) = std::min(d2(i), (points.row(i) - centers.row(c)).squaredNorm());
    }

    std::vector<int> labels(n, -1);
    double inertia = 0.0;
    for (int it = 0; it < max_iter; ++it) {
      bool changed = false;
      inertia = 0.0;
      for (int i = 0; i < n; ++i) {
        int arg = 0;
        double bestd = (points.row(i) - centers.row(0)).squaredNorm();
        for (int c = 1; c < K; ++c) {
          const double d = (points.row(i) - centers.row(c)).squaredNorm();
          if (d < bestd) {
            bestd = d;
            arg = c;
          }
        }
        inertia += bestd;
        if (labels[i] != arg) {
          labels[i] = arg;
          changed = true;
        }
      }
      if (!changed) break;
      Eigen::MatrixXd sums = Eigen::MatrixXd::Zero(K, points.cols());
      std::vector<int> sizes(K, 0);
      for (int i = 0; i < n; ++i) {
        sums.row(labels[i]) += points.row(i);
        ++sizes[labels[i]];
      }
      for (int c = 0; c < K; ++c) {
        if (sizes[c] > 0) {
          centers.row(c) = sums.row(c) / sizes[c];
          continue;
        }
        // Empty cluster: reseed at the point farthest from its centre.
        int far = 0;
        double fard = -1.0;
        for (int i = 0; i < n; ++i) {
          const double d = (points.row(i) - centers.row(labels[i])).squaredNorm();
          if (d > fard) {
            fard = d;
            far = i;
          }
        }
        centers.row(c) = points.row(far);
      }
    }
    if (inertia < best.inertia) {
      best.labels = labels;
      best.centers = centers;
      best.inertia = inertia;
    }
  }
  return best;
}

/// Normalised symmetric Laplacian, bottom-K eigenvectors, row normalisation,
/// then k-means (50 seeded k-means++ restarts).
inline std::vector<int> spectral_clustering(const Adjacency& simil, int K, std::uint64_t seed) {
  const int n = static_cast<int>(simil.rows());
  const Eigen::MatrixXd A = simil.cast<double>();
  const Eigen::VectorXd inv_sqrt = A.rowwise().sum().cwiseMax(1e-300).cwiseSqrt().cwiseInverse();
  Eigen::MatrixXd L = -(inv_sqrt.asDiagonal() * A * inv_sqrt.asDiagonal());
  L.diagonal().array() += 1.0;
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> solver(L);
  if (solver.info() != Eigen::Success) throw Error("spectral clustering: eigensolver failed");
  Eigen::MatrixXd emb = solver.eigenvectors().leftCols(K);
  for (int i = 0; i < n; ++i) {
    const double norm = emb.row(i).norm();
    if (norm > 0.0) emb.row(i) /= norm;
  }
  return canonical_labels(kmeans(emb, K, 50, seed).labels);
}

namespace detail {

inline int find_root(std::vector<int>& parent, int x) {
  while (parent[x] != x) x = parent[x] = parent[parent[x]];
  return x;
}

/// Split `members` in two by the sign of the Fiedler vector of their
/// induced subgraph.
inline std::pair<std::vector<int>, std::vector<int>> fiedler_split(const Adjacency& simil,
                                                                   const std::vector<int>& members) {
  const int m = static_cast<int>(members.size());
  Eigen::MatrixXd L = Eigen::MatrixXd::Zero(m, m);
  for (int a = 0; a < m; ++a)
    for (int b = 0; b < m; ++b)
      if (a != b && simil(members[a], members[b])) {
        L(a, b) = -1.0;
        L(a, a) += 1.0;
      }
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> solver(L);
  const Eigen::VectorXd v = solver.eigenvectors().col(1);
  std::vector<int> order(m);
  std::iota(order.begin(), order.end(), 0);
  std::stable_sort(order.begin(), order.end(), [&](int a, int b) { return v(a) < v(b); });
  std::pair<std::vector<int>, std::vector<int>> out;
  int negatives = 0;
  for (int i = 0; i < m; ++i) negatives += v(i) < 0.0;
  const int cut = (negatives == 0 || negatives == m) ? m / 2 : negatives;
  for (int i = 0; i < m; ++i) (i < cut ? out.first : out.second).push_back(members[order[i]]);
  std::sort(out.first.begin(), out.first.end());
  std::sort(out.second.begin(), out.second.end());
  return out;
}

}  // namespace detail

/// Connected components; the K-1 largest keep their own label and the rest
/// are merged into one, or the largest is bisected until K exist.
inline std::vector<int> component_clustering(const Adjacency& simil, int K) {
  const int n = static_cast<int>(simil.rows());
  std::vector<int> parent(n);
  std::iota(parent.begin(), parent.end(), 0);
  for (int i = 0; i < n; ++i)
    for (int j = i + 1; j < n; ++j)
      if (simil(i, j)) parent[detail::find_root(parent, i)] = detail::find_root(parent, j);

  std::vector<std::vector<int>> groups;
  std::vector<int> slot(n, -1);
  for (int i = 0; i < n; ++i) {
    const int r = detail::find_root(parent, i);
    if (slot[r] < 0) {
      slot[r] = static_cast<int>(groups.size());
      groups.emplace_back();
    }
    groups[slot[r]].push_back(i);
  }
  auto by_size = [](const std::vector<int>& a, const std::vector<int>& b) {
    return a.size() != b.size() ? a.size() > b.size() : a.front() < b.front();
  };
  std::stable_sort(groups.begin(), groups.end(), by_size);
  while (static_cast<int>(groups.size()) < K) {
    auto [a, b] = detail::fiedler_split(simil, groups.front());
    groups.erase(groups.begin());
    groups.push_back(std::move(a));
    groups.push_back(std::move(b));
    std::stable_sort(groups.begin(), groups.end(), by_size);
  }
  std::vector<int> labels(n);
  for (int g = 0; g < static_cast<int>(groups.size()); ++g)
    for (int i : groups[g]) labels[i] = std::min(g, K - 1);
  return canonical_labels(labels);
}

/// Average-linkage agglomeration on the raw distance matrix.
inline std::vector<int> agglomerative_clustering(const Eigen::MatrixXd& dist, int K) {
  const int n = static_cast<int>(dist.rows());
  Eigen::MatrixXd d = 0.5 * (dist + dist.transpose());
  std::vector<int> size(n, 1), owner(n);
  std::iota(owner.begin(), owner.end(), 0);
  std::vector<char> active(n, 1);
  for (int clusters = n; clusters > K; --clusters) {
    int bi = -1, bj = -1;
    double best = std::numeric_limits<double>::infinity();
    for (int i = 0; i < n; ++i) {
      if (!active[i]) continue;
      for (int j = i + 1; j < n; ++j)
        if (active[j] && d(i, j) < best) {
          best = d(i, j);
          bi = i;
          bj = j;
        }
    }
    require(bi >= 0 && bj >= 0, "agglomerative clustering: distances are not comparable (NaN)");
    for (int k = 0; k < n; ++k) {
      if (!active[k] || k == bi || k == bj) continue;
      const double v = (size[bi] * d(bi, k) + size[bj] * d(bj, k)) / (size[bi] + size[bj]);
      d(bi, k) = d(k, bi) = v;
    }
    size[bi] += size[bj];
    active[bj] = 0;
    for (int i = 0; i < n; ++i)
      if (owner[i] == bj) owner[i] = bi;
  }
  return canonical_labels(owner);
}

inline std::vector<int> cluster_graph(const Adjacency& simil, int K, GraphBackend backend,
                                      const Eigen::MatrixXd* dist = nullptr,
                                      std::uint64_t seed = 0) {
  const int n = static_cast<int>(simil.rows());
  require(simil.cols() == n, "cluster_graph: similarity matrix is not square");
  require(K >= 1 && K <= n, "cluster_graph: K = " + std::to_string(K) +
                                " exceeds the number of trajectories " + std::to_string(n));
  switch (backend) {
    case GraphBackend::spectral: return spectral_clustering(simil, K, seed);
    case GraphBackend::components: return component_clustering(simil, K);
    case GraphBackend::agglomerative:
      require(dist != nullptr && dist->rows() == n,
              "cluster_graph: agglomerative backend needs the raw distance matrix");
      return agglomerative_clustering(*dist, K);
  }
  throw Error("cluster_graph: unknown backend");
}

// ---------------------------------------------------------------------------
// Beta heuristic

struct SeparationScatter {
  /// Mean of Delta_1^T Delta_2 per (s,a) over the sampled trajectory pairs.
  Eigen::VectorXd mean_product;
  /// Empirical occupancy per (s,a) over all recorded window observations.
  Eigen::VectorXd occupancy;
};

/// `count` distinct unordered index pairs drawn without replacement (all
/// pairs when count exceeds the total).
inline std::vector<std::pair<int, int>> sample_pairs(int n, long long count, std::uint64_t seed) {
  std::vector<std::pair<int, int>> all;
  const long long total = static_cast<long long>(n) * (n - 1) / 2;
  if (count >= total) {
    for (int i = 0; i < n; ++i)
      for (int j = i + 1; j < n; ++j) all.emplace_back(i, j);
    return all;
  }
  Rng rng(derive_seed(seed, stream::scatter));
  std::vector<std::pair<int, int>> out;
  std::unordered_set<long long> picked;
  while (static_cast<long long>(out.size()) < count) {
    const int i = static_cast<int>(rng.below(n));
    const int j = static_cast<int>(rng.below(n));
    if (i == j) continue;
    const auto key = static_cast<long long>(std::min(i, j)) * n + std::max(i, j);
    if (!picked.insert(key).second) continue;
    out.emplace_back(std::min(i, j), std::max(i, j));
  }
  return out;
}

inline SeparationScatter separation_scatter(const SubspaceBank& bank,
                                            std::span<const WindowEstimates> estimates,
                                            std::span<const CountTable> tables,
                                            std::span<const std::pair<int, int>> pairs) {
  std::vector<int> all(bank.num_pairs());
  std::iota(all.begin(), all.end(), 0);
  const auto layout = make_layout(bank, all);
  std::vector<Embedding> emb;
  emb.reserve(estimates.size());
  for (const auto& e : estimates) emb.push_back(embed(e, bank, layout));

  SeparationScatter out;
  out.mean_product = Eigen::VectorXd::Zero(bank.num_pairs());
  std::vector<double> prod;
  for (auto [i, j] : pairs) {
    pair_products(emb[i], emb[j], layout, prod);
    for (int p = 0; p < bank.num_pairs(); ++p) out.mean_product(p) += prod[p];
  }
  if (!pairs.empty()) out.mean_product /= static_cast<double>(pairs.size());
  out.occupancy = pair_frequencies(tables);
  return out;
}

/// Beta admitting every pair in the upper-right quantile box of the scatter
/// (both separation and occupancy at or above the quantile).
inline double suggest_beta(const SeparationScatter& scatter, double quantile = 0.75) {
  std::vector<int> seen;
  for (int p = 0; p < scatter.occupancy.size(); ++p)
    if (scatter.occupancy(p) > 0.0) seen.push_back(p);
  require(!seen.empty(), "suggest_beta: no observed pairs");
  std::vector<double> sep, occ;
  for (int p : seen) {
    sep.push_back(scatter.mean_product(p));
    occ.push_back(scatter.occupancy(p));
  }
  std::sort(sep.begin(), sep.end());
  std::sort(occ.begin(), occ.end());
  const double sep_cut = detail::quantile_sorted(sep, quantile);
  const double occ_cut = detail::quantile_sorted(occ, quantile);
  double min_occ = std::numeric_limits<double>::infinity();
  for (int p : seen)
    if (scatter.mean_product(p) >= sep_cut && scatter.occupancy(p) >= occ_cut)
      min_occ = std::min(min_occ, scatter.occupancy(p));
  if (!std::isfinite(min_occ)) {
    // Empty box: fall back to the single most separating pair.
    int best = seen.front();
    for (int p : seen)
      if (scatter.mean_product(p) > scatter.mean_product(best)) best = p;
    min_occ = scatter.occupancy(best);
  }
  double beta = 0.0;
  for (int p : seen)
    if (scatter.occupancy(p) < min_occ) beta = std::max(beta, scatter.occupancy(p));
  return beta;
}

}  // namespace mixmdp
