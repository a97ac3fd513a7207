#pragma once

#include <Eigen/Dense>

#include <algorithm>
#include <cmath>
#include <numeric>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "mixmdp/error.hpp"
#include "mixmdp/estimators.hpp"
#include "mixmdp/parallel.hpp"

namespace mixmdp {

/// Averaged double-estimator outer products over the subspace subset.
struct Moments {
  int num_states = 0;
  int num_actions = 0;
  int num_trajectories = 0;
  /// Per (s,a): S x S average of P_{n,1} P_{n,2}^T over trajectories that
  /// observe the pair in both windows; an empty matrix when none do.
  std::vector<Eigen::MatrixXd> transition;
  /// SA x SA average of d_{n,1} d_{n,2}^T over all trajectories.
  Eigen::MatrixXd occupancy;
  std::vector<int> n_traj;

  int num_pairs() const { return num_states * num_actions; }
};

inline Moments accumulate_moments(std::span<const WindowEstimates> estimates) {
  require(!estimates.empty(), "accumulate_moments: subspace subset is empty");
  const int S = estimates.front()[0].num_states;
  const int A = estimates.front()[0].num_actions;
  const int SA = S * A;

  Moments m;
  m.num_states = S;
  m.num_actions = A;
  m.num_trajectories = static_cast<int>(estimates.size());
  m.n_traj.assign(SA, 0);
  for (const auto& w : estimates)
    for (const auto& row : w[0].rows)
      if (w[1].observed(row.pair)) ++m.n_traj[row.pair];

  m.transition.assign(SA, Eigen::MatrixXd());
  for (int p = 0; p < SA; ++p)
    if (m.n_traj[p] > 0) m.transition[p] = Eigen::MatrixXd::Zero(S, S);
  m.occupancy = Eigen::MatrixXd::Zero(SA, SA);

  const double inv_sub = 1.0 / static_cast<double>(estimates.size());
  for (const auto& w : estimates) {
    for (const auto& r1 : w[0].rows) {
      const auto* r2 = w[1].find(r1.pair);
      if (!r2) continue;
      const double scale = 1.0 / m.n_traj[r1.pair];
      auto& M = m.transition[r1.pair];
      for (auto [i, pi] : r1.probs)
        for (auto [j, pj] : r2->probs) M(i, j) += pi * pj * scale;
    }
    const double g1 = w[0].blocks, g2 = w[1].blocks;
    for (const auto& r1 : w[0].rows)
      for (const auto& r2 : w[1].rows)
        m.occupancy(r1.pair, r2.pair) += (r1.count / g1) * (r2.count / g2) * inv_sub;
  }
  return m;
}

/// Orthonormal basis (as rows) of a top-|lambda| invariant subspace, with
/// the full spectrum sorted by decreasing magnitude.
struct Eigenspace {
  Eigen::MatrixXd projector;
  Eigen::VectorXd eigenvalues;
};

inline Eigenspace top_k_eigenspace(const Eigen::MatrixXd& sym, int K,
                                   const std::string& context = "matrix") {
  require(sym.rows() == sym.cols(), "top_k_projector: " + context + " is not square");
  require(K >= 1 && K <= sym.rows(), "top_k_projector: K = " + std::to_string(K) +
                                         " outside [1, " + std::to_string(sym.rows()) +
                                         "] for " + context);
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> solver(sym);
  if (solver.info() != Eigen::Success)
    throw Error("top_k_projector: eigensolver did not converge for " + context);

  const auto& values = solver.eigenvalues();
  std::vector<int> order(values.size());
  std::iota(order.begin(), order.end(), 0);
  std::stable_sort(order.begin(), order.end(),
                   [&](int a, int b) { return std::abs(values(a)) > std::abs(values(b)); });

  Eigenspace out;
  out.projector.resize(K, sym.cols());
  for (int r = 0; r < K; ++r) out.projector.row(r) = solver.eigenvectors().col(order[r]).transpose();
  out.eigenvalues.resize(values.size());
  for (int i = 0; i < values.size(); ++i) out.eigenvalues(i) = values(order[i]);
  return out;
}

/// K x dim matrix whose rows span the eigenspace of the K largest-|lambda|
/// eigenvalues of a symmetric matrix.
inline Eigen::MatrixXd top_k_projector(const Eigen::MatrixXd& sym, int K) {
  return top_k_eigenspace(sym, K).projector;
}

/// Per-(s,a) projectors V_{s,a} (r x S; rows orthonormal, all zero when the
/// pair was never seen in both windows) and the occupancy projector U.
struct SubspaceBank {
  int num_states = 0;
  int num_actions = 0;
  int num_components = 0;
  std::vector<Eigen::MatrixXd> projectors;
  Eigen::MatrixXd occupancy_projector;
  std::vector<int> n_traj;
  /// Eigenvalues of the symmetrised moment (M + M^T)/2, by magnitude; empty
  /// for unobserved pairs.
  std::vector<Eigen::VectorXd> spectra;
  Eigen::VectorXd occupancy_spectrum;

  int num_pairs() const { return num_states * num_actions; }
  bool observed(int pair) const { return n_traj[pair] > 0; }
};

inline SubspaceBank build_subspace_bank(const Moments& m, int K, int threads = 1) {
  const int S = m.num_states, SA = m.num_pairs();
  require(K >= 1 && K <= S, "subspace: K must lie in [1, S]");
  SubspaceBank bank;
  bank.num_states = S;
  bank.num_actions = m.num_actions;
  bank.num_components = K;
  bank.n_traj = m.n_traj;
  bank.projectors.assign(SA, Eigen::MatrixXd::Zero(K, S));
  bank.spectra.assign(SA, Eigen::VectorXd());

  parallel_for(SA, threads, [&](std::size_t p) {
    if (m.n_traj[p] == 0) return;
    const Eigen::MatrixXd sym = m.transition[p] + m.transition[p].transpose();
    auto space = top_k_eigenspace(sym, K, "(s,a) pair " + std::to_string(p));
    bank.projectors[p] = std::move(space.projector);
    bank.spectra[p] = 0.5 * space.eigenvalues;
  });

  const Eigen::MatrixXd dsym = m.occupancy + m.occupancy.transpose();
  auto occ = top_k_eigenspace(dsym, std::min(K, SA), "occupancy moment");
  bank.occupancy_projector = std::move(occ.projector);
  bank.occupancy_spectrum = 0.5 * occ.eigenvalues;
  return bank;
}

inline SubspaceBank estimate_subspaces(std::span<const WindowEstimates> estimates, int K,
                                       int threads = 1) {
  return build_subspace_bank(accumulate_moments(estimates), K, threads);
}

/// Mean squared eigenvalue by rank, over pairs with a defined moment.
inline Eigen::VectorXd eigen_energy_profile(const SubspaceBank& bank) {
  Eigen::VectorXd profile = Eigen::VectorXd::Zero(bank.num_states);
  int observed = 0;
  for (const auto& spec : bank.spectra) {
    if (spec.size() == 0) continue;
    profile += spec.array().square().matrix();
    ++observed;
  }
  if (observed > 0) profile /= observed;
  return profile;
}

/// Smallest r whose energy exceeds `factor` times the energy at rank r+1.
inline std::optional<int> select_num_components(const Eigen::VectorXd& profile,
                                                double factor = 10.0) {
  for (int r = 1; r < profile.size(); ++r) {
    const double next = profile(r);
    if (profile(r - 1) > 0.0 && (next <= 0.0 || profile(r - 1) / next > factor)) return r;
  }
  return std::nullopt;
}

}  // namespace mixmdp
