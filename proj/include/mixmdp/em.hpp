#pragma once

#include <Eigen/Dense>

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <limits>
#include <span>
#include <string>
#include <vector>

#include "mixmdp/core.hpp"
#include "mixmdp/error.hpp"
#include "mixmdp/parallel.hpp"
#include "mixmdp/rng.hpp"

namespace mixmdp {

/// restricted: observations are next-state transitions from the scope pairs.
/// full: every transition plus action choices and the first state.
enum class EmVariant { restricted, full };
enum class EmMode { soft, hard };

/// Observation model for EM: which (s,a) transition rows are modelled, and
/// whether policy and start terms are included.
struct EmScope {
  EmVariant variant = EmVariant::full;
  int num_states = 0;
  int num_actions = 0;
  std::vector<char> in_scope;  // per (s,a)

  static EmScope full(int S, int A) {
    return {EmVariant::full, S, A, std::vector<char>(S * A, 1)};
  }
  static EmScope restricted(int S, int A, std::span<const int> pairs) {
    EmScope s{EmVariant::restricted, S, A, std::vector<char>(S * A, 0)};
    for (int p : pairs) {
      require(p >= 0 && p < S * A, "EmScope: pair out of range");
      s.in_scope[p] = 1;
    }
    return s;
  }
  int num_pairs() const { return num_states * num_actions; }
};

/// Per-label model parameters. Rows whose weighted denominator is zero are
/// flagged undefined and left out of the likelihood.
struct EmParams {
  int num_states = 0;
  int num_actions = 0;
  std::vector<Eigen::MatrixXd> transitions;  // (S*A) x S per label
  std::vector<std::vector<char>> transition_defined;
  std::vector<Eigen::MatrixXd> policies;  // S x A per label (full variant)
  std::vector<std::vector<char>> policy_defined;
  std::vector<Eigen::VectorXd> starts;  // S per label (full variant)
  std::vector<char> start_defined;
  Eigen::VectorXd weights;

  int num_components() const { return static_cast<int>(weights.size()); }
};

/// Row n = (1 - softening) * onehot(label_n) + softening / K. Negative labels
/// (unassigned trajectories) get the uniform row.
inline Eigen::MatrixXd em_init_from_labels(std::span<const int> labels, int K, double softening) {
  require(K >= 1, "em_init_from_labels: K must be >= 1");
  require(softening >= 0.0 && softening <= 1.0, "em_init_from_labels: softening must lie in [0,1]");
  Eigen::MatrixXd resp(labels.size(), K);
  for (std::size_t n = 0; n < labels.size(); ++n) {
    require(labels[n] < K, "em_init_from_labels: label out of range");
    if (labels[n] < 0) {
      resp.row(n).setConstant(1.0 / K);
      continue;
    }
    resp.row(n).setConstant(softening / K);
    resp(n, labels[n]) += 1.0 - softening;
  }
  return resp;
}

/// Random responsibilities: uniformly random labels softened like a cluster
/// initialisation.
inline Eigen::MatrixXd em_init_random(int N, int K, double softening, std::uint64_t seed) {
  Rng rng(seed);
  std::vector<int> labels(N);
  for (auto& l : labels) l = static_cast<int>(rng.below(K));
  return em_init_from_labels(labels, K, softening);
}

/// Weighted maximum-likelihood estimates given responsibilities.
inline EmParams m_step(const Eigen::MatrixXd& resp, std::span<const CountTable> tables,
                       const EmScope& scope) {
  const int N = static_cast<int>(tables.size());
  const int K = static_cast<int>(resp.cols());
  const int S = scope.num_states, A = scope.num_actions, SA = scope.num_pairs();
  require(N >= 1 && resp.rows() == N, "m_step: responsibilities do not match the dataset");

  EmParams p;
  p.num_states = S;
  p.num_actions = A;
  p.weights = Eigen::VectorXd::Zero(K);
  const bool full = scope.variant == EmVariant::full;
  for (int k = 0; k < K; ++k) {
    Eigen::MatrixXd num = Eigen::MatrixXd::Zero(SA, S);
    Eigen::VectorXd den = Eigen::VectorXd::Zero(SA);
    Eigen::VectorXd start = Eigen::VectorXd::Zero(S);
    double mass = 0.0;
    for (int n = 0; n < N; ++n) {
      const double w = resp(n, k);
      mass += w;
      for (const auto& row : tables[n].whole.rows()) {
        if (!scope.in_scope[row.pair]) continue;
        den(row.pair) += w * row.total;
        for (auto [s2, c] : row.next) num(row.pair, s2) += w * c;
      }
      if (full) start(tables[n].first_state) += w;
    }
    p.weights(k) = mass / N;

    std::vector<char> defined(SA, 0);
    for (int r = 0; r < SA; ++r)
      if (den(r) > 0.0) {
        num.row(r) /= den(r);
        defined[r] = 1;
      }
    p.transitions.push_back(std::move(num));
    p.transition_defined.push_back(std::move(defined));

    if (full) {
      // Action counts are the (s,a) totals of the whole-trajectory table.
      Eigen::MatrixXd pol(S, A);
      std::vector<char> pol_def(S, 0);
      for (int s = 0; s < S; ++s) {
        const double tot = den.segment(s * A, A).sum();
        if (tot > 0.0) {
          for (int a = 0; a < A; ++a) pol(s, a) = den(s * A + a) / tot;
          pol_def[s] = 1;
        } else {
          pol.row(s).setZero();
        }
      }
      p.policies.push_back(std::move(pol));
      p.policy_defined.push_back(std::move(pol_def));
      if (mass > 0.0) start /= mass;
      p.starts.push_back(std::move(start));
      p.start_defined.push_back(mass > 0.0);
    }
  }
  return p;
}

/// Elementwise logs of the parameters; zero probabilities map to -inf.
struct EmLogTables {
  std::vector<Eigen::MatrixXd> transitions;
  std::vector<Eigen::MatrixXd> policies;
  std::vector<Eigen::VectorXd> starts;
  Eigen::VectorXd weights;
};

inline EmLogTables log_tables(const EmParams& p) {
  auto safe_log = [](double x) {
    return x > 0.0 ? std::log(x) : -std::numeric_limits<double>::infinity();
  };
  EmLogTables t;
  for (const auto& m : p.transitions) t.transitions.push_back(m.unaryExpr(safe_log));
  for (const auto& m : p.policies) t.policies.push_back(m.unaryExpr(safe_log));
  for (const auto& v : p.starts) t.starts.push_back(v.unaryExpr(safe_log));
  t.weights = p.weights.unaryExpr(safe_log);
  return t;
}

/// log f_k plus the log-likelihood of one trajectory under label k; -inf
/// when an observed event has zero estimated probability.
inline double component_loglik(const EmParams& p, const EmLogTables& logs, const CountTable& t,
                               const EmScope& scope, int k) {
  constexpr double kNegInf = -std::numeric_limits<double>::infinity();
  double ll = logs.weights(k);
  if (ll == kNegInf) return kNegInf;
  const bool full = scope.variant == EmVariant::full;
  const auto& L = logs.transitions[k];
  const int A = p.num_actions;
  for (const auto& row : t.whole.rows()) {
    if (!scope.in_scope[row.pair]) continue;
    if (p.transition_defined[k][row.pair]) {
      for (auto [s2, c] : row.next) {
        const double lp = L(row.pair, s2);
        if (lp == kNegInf) return kNegInf;
        ll += c * lp;
      }
    }
    if (full) {
      const int s = row.pair / A;
      if (p.policy_defined[k][s]) {
        const double lp = logs.policies[k](s, row.pair % A);
        if (lp == kNegInf) return kNegInf;
        ll += row.total * lp;
      }
    }
  }
  if (full && p.start_defined[k]) {
    const double lp = logs.starts[k](t.first_state);
    if (lp == kNegInf) return kNegInf;
    ll += lp;
  }
  return ll;
}

inline double component_loglik(const EmParams& p, const CountTable& t, const EmScope& scope,
                               int k) {
  return component_loglik(p, log_tables(p), t, scope, k);
}

struct EStepResult {
  Eigen::MatrixXd responsibilities;
  /// log sum_k f_k p(n | k) per trajectory.
  Eigen::VectorXd loglik;
  /// Trajectories with zero likelihood under every label (given a uniform row).
  int zero_likelihood = 0;

  double total_loglik() const { return loglik.sum(); }
};

inline EStepResult e_step(const EmParams& p, std::span<const CountTable> tables,
                          const EmScope& scope, EmMode mode, int threads = 1) {
  const int N = static_cast<int>(tables.size());
  const int K = p.num_components();
  EStepResult out;
  out.responsibilities.resize(N, K);
  out.loglik.resize(N);
  std::vector<char> zero(N, 0);
  const auto logs = log_tables(p);
  parallel_for(N, threads, [&](std::size_t nn) {
    const int n = static_cast<int>(nn);
    Eigen::VectorXd logw(K);
    for (int k = 0; k < K; ++k) logw(k) = component_loglik(p, logs, tables[n], scope, k);
    const double top = logw.maxCoeff();
    if (!std::isfinite(top)) {
      out.responsibilities.row(n).setConstant(1.0 / K);
      out.loglik(n) = -std::numeric_limits<double>::infinity();
      zero[n] = 1;
      return;
    }
    const Eigen::ArrayXd w = (logw.array() - top).exp();
    const double total = w.sum();
    out.loglik(n) = top + std::log(total);
    if (mode == EmMode::soft) {
      out.responsibilities.row(n) = (w / total).matrix().transpose();
    } else {
      int arg = 0;
      for (int k = 1; k < K; ++k)
        if (logw(k) > logw(arg)) arg = k;
      out.responsibilities.row(n).setZero();
      out.responsibilities(n, arg) = 1.0;
    }
  });
  for (char z : zero) out.zero_likelihood += z;
  return out;
}

struct EmOptions {
  EmMode mode = EmMode::soft;
  int max_iter = 200;
  double tol = 1e-6;
  int threads = 1;
};

struct EmState {
  Eigen::MatrixXd responsibilities;
  EmParams params;
  std::vector<double> loglik_trace;
  int iterations = 0;
  bool converged = false;
  int zero_likelihood_events = 0;

  std::vector<int> labels() const {
    std::vector<int> out(responsibilities.rows());
    for (int n = 0; n < responsibilities.rows(); ++n)
      responsibilities.row(n).maxCoeff(&out[n]);
    return out;
  }
};

/// Alternate M and E steps until the total log-likelihood moves by less
/// than tol or max_iter is reached.
inline EmState run_em(const Eigen::MatrixXd& init, std::span<const CountTable> tables,
                      const EmScope& scope, const EmOptions& opt = {}) {
  require(init.rows() == static_cast<Eigen::Index>(tables.size()),
          "run_em: initial responsibilities do not match the dataset");
  require(opt.max_iter >= 1, "run_em: max_iter must be >= 1");
  for (int n = 0; n < init.rows(); ++n)
    require((init.row(n).array() >= 0.0).all() && std::abs(init.row(n).sum() - 1.0) <= 1e-9,
            "run_em: initial responsibility row " + std::to_string(n) + " is not a distribution");

  EmState state;
  state.responsibilities = init;
  for (int it = 0; it < opt.max_iter; ++it) {
    state.params = m_step(state.responsibilities, tables, scope);
    auto e = e_step(state.params, tables, scope, opt.mode, opt.threads);
    state.responsibilities = std::move(e.responsibilities);
    state.zero_likelihood_events += e.zero_likelihood;
    const double ll = e.total_loglik();
    state.loglik_trace.push_back(ll);
    state.iterations = it + 1;
    const auto& tr = state.loglik_trace;
    if (tr.size() >= 2 && (std::abs(tr.back() - tr[tr.size() - 2]) < opt.tol ||
                           tr.back() == tr[tr.size() - 2])) {
      state.converged = true;
      break;
    }
  }
  return state;
}

/// Start from parameters instead of responsibilities: one E-step, then EM.
inline EmState run_em_from_params(const EmParams& params, std::span<const CountTable> tables,
                                  const EmScope& scope, const EmOptions& opt = {}) {
  auto e = e_step(params, tables, scope, opt.mode, opt.threads);
  auto state = run_em(e.responsibilities, tables, scope, opt);
  state.zero_likelihood_events += e.zero_likelihood;
  return state;
}

}  // namespace mixmdp
