#pragma once

#include <chrono>
#include <cmath>
#include <cstdint>
#include <limits>
#include <ostream>
#include <string>
#include <vector>

#include "mixmdp/harness.hpp"
#include "mixmdp/io.hpp"
#include "mixmdp/metrics.hpp"
#include "mixmdp/parallel.hpp"
#include "mixmdp/simulator.hpp"

namespace mixmdp {

enum class Scenario { gridworld, random };

struct ExperimentConfig {
  std::string name = "experiment";
  Scenario scenario = Scenario::gridworld;
  GridworldSpec gridworld;
  // Random scenario only.
  int num_states = 5;
  int num_actions = 1;
  int num_components = 2;
  double separation = 1.2;

  std::vector<int> lengths = {40, 60, 70, 100, 140, 200};
  int num_trajectories = 1000;
  int trials = 10;
  std::uint64_t seed = 1;
  /// The first variant's clustering feeds the EM initialisations.
  std::vector<ProjectorVariant> projectors = {{ProjectorKind::learned, 0}};
  std::vector<EmInit> em_inits;
  EmConfig em;
  PipelineConfig pipeline;
  /// Trials evaluated concurrently.
  int threads = 1;
  /// Off for byte-reproducible output (the runtime column is then 0).
  bool record_runtime = true;

  void validate() const {
    require(trials >= 1, "experiment: trials must be >= 1");
    require(!lengths.empty(), "experiment: the T_n sweep is empty");
    require(!projectors.empty(), "experiment: at least one projector variant is required");
    require(num_trajectories >= 4, "experiment: need at least 4 trajectories");
  }
};

struct ResultRow {
  std::string experiment;
  std::string variant;
  int length = 0;
  int trial = 0;
  double clustering_error = std::numeric_limits<double>::quiet_NaN();
  double end_to_end_error = std::numeric_limits<double>::quiet_NaN();
  double loglik = std::numeric_limits<double>::quiet_NaN();
  double runtime_seconds = 0.0;
  double tau = std::numeric_limits<double>::quiet_NaN();
  int num_freq = 0;
  bool ok = true;
  std::string message;
};

/// One random-initialisation EM restart (loglik vs accuracy scatter).
struct RestartRow {
  std::string experiment;
  int length = 0;
  int trial = 0;
  int restart = 0;
  double loglik = 0.0;
  double accuracy = 0.0;
};

struct ExperimentResult {
  std::vector<ResultRow> rows;
  std::vector<RestartRow> restarts;
};

inline std::uint64_t trial_seed(std::uint64_t master, int length, int trial) {
  return derive_seed(master, stream::trial,
                     (static_cast<std::uint64_t>(length) << 32) | static_cast<std::uint32_t>(trial));
}

/// Ground-truth mixture for one trial.
inline MarkovMixture experiment_mixture(const ExperimentConfig& cfg, std::uint64_t seed) {
  if (cfg.scenario == Scenario::gridworld) return build_gridworld_mixture(cfg.gridworld);
  return build_random_mixture(cfg.num_states, cfg.num_actions, cfg.num_components, cfg.separation,
                              derive_seed(seed, stream::mixture))
      .mixture;
}

namespace detail {

inline std::string sanitize(std::string s) {
  for (char& c : s)
    if (c == ',' || c == '\n' || c == '\r') c = ';';
  return s;
}

inline double error_of(std::span<const int> pred, std::span<const int> truth, int K) {
  return 1.0 - permutation_accuracy(pred, truth, K).accuracy;
}

/// Rows and restart records for one (T_n, trial) cell.
inline ExperimentResult run_cell(const ExperimentConfig& cfg, int length, int trial) {
  using clock = std::chrono::steady_clock;
  ExperimentResult out;
  const std::uint64_t seed = trial_seed(cfg.seed, length, trial);
  auto seconds_since = [&](clock::time_point t0) {
    return cfg.record_runtime ? std::chrono::duration<double>(clock::now() - t0).count() : 0.0;
  };
  auto base_row = [&](const std::string& variant) {
    ResultRow r;
    r.experiment = cfg.name;
    r.variant = variant;
    r.length = length;
    r.trial = trial;
    return r;
  };

  std::vector<Trajectory> data;
  MarkovMixture mixture;
  try {
    mixture = experiment_mixture(cfg, seed);
    data = sample_dataset(mixture, cfg.num_trajectories, length,
                          derive_seed(seed, stream::trajectory));
  } catch (const std::exception& e) {
    for (const auto& v : cfg.projectors) {
      auto r = base_row(v.name());
      r.ok = false;
      r.message = sanitize(e.what());
      out.rows.push_back(r);
    }
    return out;
  }
  const int K = mixture.num_components();
  std::vector<int> truth;
  for (const auto& t : data) truth.push_back(*t.true_label);

  std::optional<ClusteringOutcome> first;
  std::optional<InferenceOutcome> first_inf;
  for (std::size_t vi = 0; vi < cfg.projectors.size(); ++vi) {
    const auto& variant = cfg.projectors[vi];
    auto row = base_row(variant.name());
    const auto t0 = clock::now();
    try {
      PipelineConfig pc = cfg.pipeline;
      pc.num_components = K;
      pc.projector = variant;
      auto c = cluster_dataset(data, mixture.num_states, mixture.num_actions, pc, seed);
      std::vector<int> clust_truth;
      for (int i : c.split.clust) clust_truth.push_back(truth[i]);
      row.clustering_error = error_of(c.clust_labels, clust_truth, K);
      row.tau = c.tau;
      row.num_freq = static_cast<int>(c.freq.size());
      auto inf = infer_labels(c, pc);
      row.end_to_end_error = error_of(inf.labels, truth, K);
      if (vi == 0) {
        first = std::move(c);
        first_inf = std::move(inf);
      }
    } catch (const std::exception& e) {
      row.ok = false;
      row.message = sanitize(e.what());
    }
    row.runtime_seconds = seconds_since(t0);
    out.rows.push_back(row);
  }

  for (EmInit init : cfg.em_inits) {
    const auto t0 = clock::now();
    if (!first) {
      auto row = base_row(em_init_name(init));
      row.ok = false;
      row.message = "clustering failed; no EM initialisation available";
      out.rows.push_back(row);
      continue;
    }
    try {
      const auto runs = refine_with_em(*first, *first_inf, init, cfg.em, K, seed);
      if (init == EmInit::random) {
        double mean_err = 0.0, mean_ll = 0.0;
        for (const auto& r : runs) {
          const double err = error_of(r.run.labels, truth, K);
          mean_err += err;
          mean_ll += r.run.loglik;
          out.restarts.push_back({cfg.name, length, trial, r.restart, r.run.loglik, 1.0 - err});
        }
        auto row = base_row(em_init_name(init));
        row.end_to_end_error = mean_err / runs.size();
        row.loglik = mean_ll / runs.size();
        row.runtime_seconds = seconds_since(t0);
        out.rows.push_back(row);
        auto best = base_row("em_random_best_loglik");
        best.end_to_end_error = error_of(runs.front().run.labels, truth, K);
        best.loglik = runs.front().run.loglik;
        out.rows.push_back(best);
      } else {
        auto row = base_row(em_init_name(init));
        row.end_to_end_error = error_of(runs.front().run.labels, truth, K);
        row.loglik = runs.front().run.loglik;
        row.runtime_seconds = seconds_since(t0);
        out.rows.push_back(row);
      }
    } catch (const std::exception& e) {
      auto row = base_row(em_init_name(init));
      row.ok = false;
      row.message = sanitize(e.what());
      row.runtime_seconds = seconds_since(t0);
      out.rows.push_back(row);
    }
  }
  return out;
}

}  // namespace detail

/// Runs every (T_n, trial) cell; rows come back in sweep order regardless
/// of how many cells run concurrently.
inline ExperimentResult run_experiment(const ExperimentConfig& cfg) {
  cfg.validate();
  struct Cell {
    int length;
    int trial;
  };
  std::vector<Cell> cells;
  for (int length : cfg.lengths)
    for (int t = 0; t < cfg.trials; ++t) cells.push_back({length, t});
  std::vector<ExperimentResult> parts(cells.size());
  parallel_for(cells.size(), cfg.threads, [&](std::size_t i) {
    parts[i] = detail::run_cell(cfg, cells[i].length, cells[i].trial);
  });
  ExperimentResult out;
  for (auto& p : parts) {
    out.rows.insert(out.rows.end(), p.rows.begin(), p.rows.end());
    out.restarts.insert(out.restarts.end(), p.restarts.begin(), p.restarts.end());
  }
  return out;
}

namespace io {

inline void write_results(std::ostream& out, std::span<const ResultRow> rows) {
  out << csv_header_comment("results")
      << "\nexperiment,variant,T_n,trial,clustering_error,end_to_end_error,loglik,"
         "runtime_seconds,tau,num_freq,status,message\n";
  for (const auto& r : rows)
    out << r.experiment << ',' << r.variant << ',' << r.length << ',' << r.trial << ','
        << fmt(r.clustering_error) << ',' << fmt(r.end_to_end_error) << ',' << fmt(r.loglik) << ','
        << fmt(r.runtime_seconds) << ',' << fmt(r.tau) << ',' << r.num_freq << ','
        << (r.ok ? "ok" : "error") << ',' << r.message << '\n';
}

inline void write_restarts(std::ostream& out, std::span<const RestartRow> rows) {
  out << csv_header_comment("loglik_accuracy") << "\nexperiment,T_n,trial,restart,loglik,accuracy\n";
  for (const auto& r : rows)
    out << r.experiment << ',' << r.length << ',' << r.trial << ',' << r.restart << ','
        << fmt(r.loglik) << ',' << fmt(r.accuracy) << '\n';
}

}  // namespace io

/// Mean of a column over ok rows matching variant and T_n (NaN if none).
inline double mean_error(std::span<const ResultRow> rows, const std::string& variant, int length,
                         bool end_to_end = false) {
  double sum = 0.0;
  int n = 0;
  for (const auto& r : rows) {
    if (!r.ok || r.variant != variant || r.length != length) continue;
    sum += end_to_end ? r.end_to_end_error : r.clustering_error;
    ++n;
  }
  return n ? sum / n : std::numeric_limits<double>::quiet_NaN();
}

}  // namespace mixmdp
