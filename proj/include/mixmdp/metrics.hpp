#pragma once

#include <Eigen/Dense>

#include <algorithm>
#include <cstdint>
#include <limits>
#include <numeric>
#include <span>
#include <string>
#include <vector>

#include "mixmdp/error.hpp"
#include "mixmdp/rng.hpp"

namespace mixmdp {

struct PermutationMatch {
  double accuracy = 0.0;
  /// mapping[predicted label] = true label.
  std::vector<int> mapping;
};

namespace detail {

/// Minimum-cost perfect matching on a square cost matrix (Hungarian method
/// with potentials). Returns assignment[row] = column.
inline std::vector<int> hungarian(const Eigen::MatrixXd& cost) {
  const int n = static_cast<int>(cost.rows());
  const double inf = std::numeric_limits<double>::infinity();
  std::vector<double> u(n + 1, 0.0), v(n + 1, 0.0), minv(n + 1);
  std::vector<int> p(n + 1, 0), way(n + 1, 0);
  std::vector<char> used(n + 1);
  for (int i = 1; i <= n; ++i) {
    p[0] = i;
    int j0 = 0;
    std::fill(minv.begin(), minv.end(), inf);
    std::fill(used.begin(), used.end(), 0);
    do {
      used[j0] = 1;
      const int i0 = p[j0];
      double delta = inf;
      int j1 = 0;
      for (int j = 1; j <= n; ++j) {
        if (used[j]) continue;
        const double cur = cost(i0 - 1, j - 1) - u[i0] - v[j];
        if (cur < minv[j]) {
          minv[j] = cur;
          way[j] = j0;
        }
        if (minv[j] < delta) {
          delta = minv[j];
          j1 = j;
        }
      }
      for (int j = 0; j <= n; ++j) {
        if (used[j]) {
          u[p[j]] += delta;
          v[j] -= delta;
        } else {
          minv[j] -= delta;
        }
      }
      j0 = j1;
    } while (p[j0] != 0);
    do {
      const int j1 = way[j0];
      p[j0] = p[j1];
      j0 = j1;
    } while (j0 != 0);
  }
  std::vector<int> assignment(n, -1);
  for (int j = 1; j <= n; ++j)
    if (p[j] > 0) assignment[p[j] - 1] = j - 1;
  return assignment;
}

}  // namespace detail

/// Best accuracy over relabelings of the predicted clusters. Predicted label
/// -1 marks an unassigned item and always counts as wrong.
inline PermutationMatch permutation_accuracy(std::span<const int> pred, std::span<const int> truth,
                                             int K) {
  require(pred.size() == truth.size(), "permutation_accuracy: label lists differ in length");
  require(!pred.empty(), "permutation_accuracy: no labels");
  require(K >= 1 && K <= 12, "permutation_accuracy: K must lie in [1, 12]");
  Eigen::MatrixXd hits = Eigen::MatrixXd::Zero(K, K);
  for (std::size_t i = 0; i < pred.size(); ++i) {
    require(truth[i] >= 0 && truth[i] < K, "permutation_accuracy: true label out of range");
    require(pred[i] >= -1 && pred[i] < K, "permutation_accuracy: predicted label out of range");
    if (pred[i] >= 0) hits(pred[i], truth[i]) += 1.0;
  }

  PermutationMatch out;
  std::vector<int> perm(K);
  std::iota(perm.begin(), perm.end(), 0);
  if (K <= 6) {
    double best = -1.0;
    do {
      double score = 0.0;
      for (int k = 0; k < K; ++k) score += hits(k, perm[k]);
      if (score > best) {
        best = score;
        out.mapping = perm;
      }
    } while (std::next_permutation(perm.begin(), perm.end()));
  } else {
    out.mapping = detail::hungarian(-hits);
  }
  double correct = 0.0;
  for (int k = 0; k < K; ++k) correct += hits(k, out.mapping[k]);
  out.accuracy = correct / static_cast<double>(pred.size());
  return out;
}

/// dim x S matrix with orthonormal rows from a QR factorisation of a
/// seeded Gaussian matrix.
inline Eigen::MatrixXd random_projector(int S, int dim, std::uint64_t seed) {
  require(dim >= 1 && dim <= S, "random_projector: dim must lie in [1, S]");
  Rng rng(derive_seed(seed, stream::projector));
  Eigen::MatrixXd g(S, dim);
  for (int j = 0; j < dim; ++j)
    for (int i = 0; i < S; ++i) g(i, j) = rng.normal();
  Eigen::HouseholderQR<Eigen::MatrixXd> qr(g);
  const Eigen::MatrixXd basis = qr.householderQ() * Eigen::MatrixXd::Identity(S, dim);
  return basis.transpose();
}

}  // namespace mixmdp
