#include <CLI11.hpp>

#include <fstream>
#include <iostream>
#include <map>
#include <numeric>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include "mixmdp.hpp"

using namespace mixmdp;
using io::json;

namespace {

struct Globals {
  std::uint64_t seed = 1;
  int threads = 1;
};

/// Flags shared by every stage that slices trajectories.
struct SchemeFlags {
  int blocks = 0;
  std::string mode = "full";
  double sub_fraction = 0.5;

  void add(CLI::App* cmd) {
    cmd->add_option("--blocks", blocks, "sub-blocks per window (0: floor(T_n/4))")
        ->check(CLI::NonNegativeNumber);
    cmd->add_option("--mode", mode, "estimator mode")->check(CLI::IsMember({"full", "discard"}));
    cmd->add_option("--sub-fraction", sub_fraction, "share of trajectories used for subspaces")
        ->check(CLI::Range(0.0, 1.0));
  }

  PipelineConfig pipeline() const {
    PipelineConfig p;
    p.blocks = blocks;
    p.mode = mode == "full" ? CountMode::full : CountMode::discard;
    p.sub_fraction = sub_fraction;
    return p;
  }
};

std::optional<double> auto_or_number(const std::string& text, const char* flag) {
  if (text == "auto") return std::nullopt;
  try {
    std::size_t used = 0;
    const double v = std::stod(text, &used);
    if (used == text.size()) return v;
  } catch (const std::exception&) {
  }
  throw Error(std::string(flag) + " must be a number or 'auto', got '" + text + "'");
}

GraphBackend parse_backend(const std::string& s) {
  if (s == "spectral") return GraphBackend::spectral;
  if (s == "components") return GraphBackend::components;
  return GraphBackend::agglomerative;
}

std::vector<int> ids_of(std::span<const Trajectory> data) {
  std::vector<int> ids;
  for (const auto& t : data) ids.push_back(t.id);
  return ids;
}

template <class Fn>
void write_file(const std::string& path, Fn&& fn) {
  auto out = io::open_out(path);
  fn(out);
}

/// Number of states and actions: from --S/--A when given, else the largest
/// index seen plus one.
std::pair<int, int> dims(std::span<const Trajectory> data, int S, int A) {
  int s_max = 0, a_max = 0;
  for (const auto& t : data) {
    for (int s : t.states) s_max = std::max(s_max, s + 1);
    for (int a : t.actions) a_max = std::max(a_max, a + 1);
  }
  if (S > 0) require(S >= s_max, "--S is smaller than the largest state index in the data");
  if (A > 0) require(A >= a_max, "--A is smaller than the largest action index in the data");
  return {S > 0 ? S : s_max, A > 0 ? A : a_max};
}

// ---------------------------------------------------------------------------

struct GenerateCmd {
  std::string scenario = "gridworld";
  int K = 2, S = 5, A = 1, length = 200, N = 1000;
  double delta = 1.2;
  GridworldSpec grid;
  std::string out, model;

  void add(CLI::App& app, Globals& g) {
    auto* c = app.add_subcommand("generate", "sample trajectories from a gridworld or random mixture");
    c->add_option("--scenario", scenario)->check(CLI::IsMember({"gridworld", "random"}));
    c->add_option("--K", K, "components (random scenario)")->check(CLI::PositiveNumber);
    c->add_option("--S", S, "states (random scenario)")->check(CLI::PositiveNumber);
    c->add_option("--A", A, "actions (random scenario)")->check(CLI::PositiveNumber);
    c->add_option("--delta", delta, "target separation (random scenario)");
    c->add_option("--length,--T", length, "transitions per trajectory")->check(CLI::PositiveNumber);
    c->add_option("--N", N, "number of trajectories")->check(CLI::PositiveNumber);
    c->add_option("--eta", grid.adversarial_strength, "adversarial strength");
    c->add_option("--slip", grid.slip, "slip probability");
    c->add_option("--width", grid.width)->check(CLI::PositiveNumber);
    c->add_option("--height", grid.height)->check(CLI::PositiveNumber);
    c->add_option("--discount", grid.discount);
    c->add_option("--out,-o", out, "trajectory JSONL")->required();
    c->add_option("--model", model, "sidecar JSON (default <out>.model.json)");
    c->callback([this, &g] { run(g); });
  }

  void run(const Globals& g) {
    MarkovMixture m;
    json sidecar;
    if (scenario == "gridworld") {
      m = build_gridworld_mixture(grid);
    } else {
      auto rm = build_random_mixture(S, A, K, delta, g.seed);
      m = rm.mixture;
      json seps = json::array();
      for (const auto& sp : rm.separations)
        seps.push_back({{"label_a", sp.label_a}, {"label_b", sp.label_b}, {"pair", sp.pair},
                        {"separation", sp.separation}});
      sidecar["separations"] = seps;
      sidecar["planted_pairs"] = rm.planted_pairs;
    }
    const auto data = sample_dataset(m, N, length, g.seed, g.threads);
    io::save_trajectories(out, data);
    sidecar["mixture"] = io::to_json(m);
    sidecar["mixing"] = io::to_json(mixing_report(m));
    io::save_json(model.empty() ? out + ".model.json" : model, sidecar);
    std::cout << "wrote " << data.size() << " trajectories to " << out << '\n';
  }
};

struct SubspaceCmd {
  std::string in, out, energy_csv, K = "2";
  int S = 0, A = 0;
  double factor = 10.0;
  SchemeFlags scheme;

  void add(CLI::App& app, Globals& g) {
    auto* c = app.add_subcommand("subspace", "estimate per-(s,a) projectors from N_sub");
    c->add_option("--in,-i", in, "trajectory JSONL")->required();
    c->add_option("--K", K, "number of components or 'auto'");
    c->add_option("--energy-factor", factor, "energy ratio used by --K auto");
    c->add_option("--S", S);
    c->add_option("--A", A);
    c->add_option("--out,-o", out, "bank JSON")->required();
    c->add_option("--energy-csv", energy_csv, "eigen-energy profile CSV");
    scheme.add(c);
    c->callback([this, &g] { run(g); });
  }

  void run(const Globals& g) {
    const auto data = io::load_trajectories(in);
    const auto [s, a] = dims(data, S, A);
    const auto cfg = scheme.pipeline();
    const auto tables = segment_dataset(data, cfg.scheme(common_length(data)), s, a);
    const auto split = split_dataset(data, cfg.sub_fraction, derive_seed(g.seed, stream::split));
    const auto est = window_estimates(subset(tables, split.sub), g.threads);
    const auto moments = accumulate_moments(est);
    int k = 0;
    if (K == "auto") {
      const auto profile = eigen_energy_profile(build_subspace_bank(moments, 1, g.threads));
      const auto chosen = select_num_components(profile, factor);
      if (!chosen) throw Error("--K auto: no rank has an energy ratio above the factor; pass --K");
      k = *chosen;
      std::cout << "selected K = " << k << '\n';
    } else {
      k = std::stoi(K);
    }
    const auto bank = build_subspace_bank(moments, k, g.threads);
    io::save_json(out, io::to_json(bank));
    if (!energy_csv.empty())
      write_file(energy_csv, [&](std::ostream& o) { io::write_energy(o, eigen_energy_profile(bank)); });
  }
};

struct ClusterCmd {
  std::string in, bank_path, out, hist, block, beta = "0.02", tau = "auto";
  std::string backend = "spectral", projector = "learned";
  int K = 2, S = 0, A = 0, bins = 100;
  double lambda = 1.0, beta_quantile = 0.75;
  bool freq_all = false;
  SchemeFlags scheme;

  void add(CLI::App& app, Globals& g) {
    auto* c = app.add_subcommand("cluster", "cluster N_clust by thresholded pairwise distances");
    c->add_option("--in,-i", in, "trajectory JSONL")->required();
    c->add_option("--bank", bank_path, "bank JSON from `subspace` (recomputed when absent)");
    c->add_option("--K", K)->check(CLI::PositiveNumber);
    c->add_option("--S", S);
    c->add_option("--A", A);
    c->add_option("--beta", beta, "frequency threshold or 'auto'");
    c->add_option("--beta-quantile", beta_quantile);
    c->add_flag("--freq-all", freq_all, "compute Freq_beta over all trajectories");
    c->add_option("--tau", tau, "distance threshold or 'auto'");
    c->add_option("--lambda", lambda)->check(CLI::Range(0.0, 1.0));
    c->add_option("--backend", backend)
        ->check(CLI::IsMember({"spectral", "components", "agglomerative"}));
    c->add_option("--projector", projector, "learned, identity or random:<dim>");
    c->add_option("--out,-o", out, "labels CSV for N_clust")->required();
    c->add_option("--hist", hist, "distance histogram CSV");
    c->add_option("--bins", bins)->check(CLI::PositiveNumber);
    c->add_option("--block-matrix", block, "sorted block-matrix CSV");
    scheme.add(c);
    c->callback([this, &g] { run(g); });
  }

  void run(const Globals& g) {
    const auto data = io::load_trajectories(in);
    const auto [s, a] = dims(data, S, A);
    auto cfg = scheme.pipeline();
    cfg.num_components = K;
    cfg.beta = auto_or_number(beta, "--beta");
    cfg.beta_quantile = beta_quantile;
    cfg.freq_all_data = freq_all;
    cfg.tau = auto_or_number(tau, "--tau");
    cfg.lambda = lambda;
    cfg.backend = parse_backend(backend);
    cfg.projector = ProjectorVariant::parse(projector);
    cfg.threads = g.threads;
    const auto c = cluster_dataset(data, s, a, cfg, g.seed);
    if (!bank_path.empty()) {
      // Recluster with the supplied projectors instead of the recomputed ones.
      const auto saved = io::bank_from_json(io::load_json(bank_path));
      require(saved.num_states == s && saved.num_actions == a, "bank does not match the data");
      auto c2 = c;
      c2.bank = apply_projector_variant(saved, cfg.projector, g.seed);
      c2.distances = distance_matrix(c2.clust_estimates, c2.bank, c2.freq, lambda, g.threads);
      if (!cfg.tau) {
        c2.threshold = suggest_threshold(off_diagonal(c2.distances.dist));
        c2.tau = c2.threshold->tau;
      }
      c2.clust_labels = cluster_graph(threshold_graph(c2.distances.dist, c2.tau), K, cfg.backend,
                                      &c2.distances.dist, derive_seed(g.seed, stream::kmeans));
      emit(data, c2);
    } else {
      emit(data, c);
    }
  }

  void emit(std::span<const Trajectory> data, const ClusteringOutcome& c) {
    std::vector<int> ids;
    for (int i : c.split.clust) ids.push_back(data[i].id);
    write_file(out, [&](std::ostream& o) { io::write_labels(o, ids, c.clust_labels); });
    std::cout << "beta = " << c.beta << ", |Freq| = " << c.freq.size() << ", tau = " << c.tau
              << ", empty intersections = " << c.distances.empty_intersections << '\n';
    if (!hist.empty()) {
      const auto values = off_diagonal(c.distances.dist);
      write_file(hist, [&](std::ostream& o) {
        io::write_histogram(o, values, bins, c.threshold ? &*c.threshold : nullptr, c.tau);
      });
    }
    if (!block.empty())
      write_file(block, [&](std::ostream& o) {
        io::write_block_matrix(o, c.distances.dist, c.clust_labels, c.tau);
      });
  }
};

struct EmCmd {
  std::string in, init, variant = "full", mode = "soft", out, params, trace, labels_out;
  int K = 2, S = 0, A = 0, max_iter = 200;
  double softening = 0.2, tol = 1e-6, beta = 0.02;
  SchemeFlags scheme;

  void add(CLI::App& app, Globals& g) {
    auto* c = app.add_subcommand("em", "refine labels with soft or hard EM");
    c->add_option("--in,-i", in, "trajectory JSONL")->required();
    c->add_option("--init", init, "labels CSV(s), comma-separated, or random:<seed>:<restarts>")->required();
    c->add_option("--variant", variant)->check(CLI::IsMember({"restricted", "full"}));
    c->add_option("--mode", mode)->check(CLI::IsMember({"soft", "hard"}));
    c->add_option("--K", K)->check(CLI::PositiveNumber);
    c->add_option("--S", S);
    c->add_option("--A", A);
    c->add_option("--softening", softening)->check(CLI::Range(0.0, 1.0));
    c->add_option("--tol", tol);
    c->add_option("--max-iter", max_iter)->check(CLI::PositiveNumber);
    c->add_option("--beta", beta, "frequency threshold for the restricted variant");
    c->add_option("--out,-o", out, "responsibilities CSV")->required();
    c->add_option("--params", params, "parameter JSON");
    c->add_option("--trace", trace, "log-likelihood trace CSV");
    c->add_option("--labels", labels_out, "argmax labels CSV");
    c->add_option("--blocks", scheme.blocks)->check(CLI::NonNegativeNumber);
    c->callback([this, &g] { run(g); });
  }

  void run(const Globals& g) {
    const auto data = io::load_trajectories(in);
    const auto [s, a] = dims(data, S, A);
    const auto tables = segment_dataset(data, scheme.pipeline().scheme(common_length(data)), s, a);
    EmScope scope = EmScope::full(s, a);
    if (variant == "restricted") {
      const auto freq = frequent_pairs(tables, beta);
      scope = EmScope::restricted(s, a, freq);
    }
    EmOptions opt;
    opt.mode = mode == "soft" ? EmMode::soft : EmMode::hard;
    opt.tol = tol;
    opt.max_iter = max_iter;
    opt.threads = g.threads;

    EmState best;
    bool have = false;
    if (init.rfind("random", 0) == 0) {
      std::uint64_t seed = g.seed;
      int restarts = 1;
      std::istringstream parts(init.substr(6));
      std::string field;
      std::vector<std::string> fields;
      while (std::getline(parts, field, ':'))
        if (!field.empty()) fields.push_back(field);
      if (fields.size() >= 1) seed = std::stoull(fields[0]);
      if (fields.size() >= 2) restarts = std::stoi(fields[1]);
      require(restarts >= 1, "--init random: restarts must be >= 1");
      for (int r = 0; r < restarts; ++r) {
        auto st = run_em(em_init_random(static_cast<int>(data.size()), K, softening,
                                        derive_seed(seed, stream::em_restart, r)),
                         tables, scope, opt);
        std::cout << "restart " << r << ": loglik " << st.loglik_trace.back() << '\n';
        if (!have || st.loglik_trace.back() > best.loglik_trace.back()) {
          best = std::move(st);
          have = true;
        }
      }
    } else {
      // Comma-separated label files; earlier files win, unlisted ids start uniform.
      std::map<int, int> merged;
      std::istringstream files(init);
      std::string path;
      while (std::getline(files, path, ',')) {
        const auto f = io::read_labels(path);
        for (std::size_t i = 0; i < f.ids.size(); ++i) merged.emplace(f.ids[i], f.labels[i]);
      }
      std::vector<int> labels;
      int missing = 0;
      for (const auto& t : data) {
        auto it = merged.find(t.id);
        labels.push_back(it == merged.end() ? -1 : it->second);
        missing += it == merged.end();
      }
      if (missing) std::cout << missing << " trajectories without a label start uniform\n";
      best = run_em(em_init_from_labels(labels, K, softening), tables, scope, opt);
    }
    const auto ids = ids_of(data);
    write_file(out, [&](std::ostream& o) { io::write_responsibilities(o, ids, best.responsibilities); });
    if (!params.empty()) io::save_json(params, io::to_json(best.params));
    if (!trace.empty())
      write_file(trace, [&](std::ostream& o) { io::write_loglik_trace(o, best.loglik_trace); });
    if (!labels_out.empty()) {
      const auto lab = best.labels();
      write_file(labels_out, [&](std::ostream& o) { io::write_labels(o, ids, lab); });
    }
    std::cout << "iterations " << best.iterations << (best.converged ? " (converged)" : "")
              << ", final loglik " << best.loglik_trace.back() << ", zero-likelihood events "
              << best.zero_likelihood_events << '\n';
  }
};

struct EstimateCmd {
  std::string in, labels, out;
  int K = 2, S = 0, A = 0;
  double beta = 0.02;
  SchemeFlags scheme;

  void add(CLI::App& app, Globals& g) {
    auto* c = app.add_subcommand("estimate", "estimate per-cluster models from labels");
    c->add_option("--in,-i", in, "trajectory JSONL")->required();
    c->add_option("--labels,-l", labels, "labels CSV (trajectories without a label are skipped)")
        ->required();
    c->add_option("--K", K)->check(CLI::PositiveNumber);
    c->add_option("--S", S);
    c->add_option("--A", A);
    c->add_option("--beta", beta, "frequency threshold stored for classification");
    c->add_option("--blocks", scheme.blocks)->check(CLI::NonNegativeNumber);
    c->add_option("--out,-o", out, "model JSON")->required();
    c->callback([this, &g] { run(g); });
  }

  void run(const Globals& g) {
    const auto all = io::load_trajectories(in);
    const auto file = io::read_labels(labels);
    std::vector<Trajectory> data;
    std::vector<int> lab;
    for (const auto& t : all) {
      auto it = std::find(file.ids.begin(), file.ids.end(), t.id);
      if (it == file.ids.end() || file.labels[it - file.ids.begin()] < 0) continue;
      data.push_back(t);
      lab.push_back(file.labels[it - file.ids.begin()]);
    }
    require(!data.empty(), "no labelled trajectories found");
    const auto [s, a] = dims(all, S, A);
    const auto tables = segment_dataset(data, scheme.pipeline().scheme(common_length(data)), s, a);
    const auto est = estimate_mixture(lab, tables, K, g.threads);
    for (int k : est.models.empty_clusters())
      std::cerr << "warning: cluster " << k << " is empty; its model is undefined\n";
    auto j = io::to_json(est);
    j["freq"] = frequent_pairs(tables, beta);
    j["blocks"] = scheme.blocks;
    io::save_json(out, j);
  }
};

struct ClassifyCmd {
  std::string in, model, out;
  double lambda = 1.0;

  void add(CLI::App& app, Globals& g) {
    auto* c = app.add_subcommand("classify", "assign trajectories to the nearest estimated model");
    c->add_option("--in,-i", in, "trajectory JSONL")->required();
    c->add_option("--model,-m", model, "model JSON from `estimate`")->required();
    c->add_option("--lambda", lambda)->check(CLI::Range(0.0, 1.0));
    c->add_option("--out,-o", out, "classification CSV")->required();
    c->callback([this, &g] { run(g); });
  }

  void run(const Globals& g) {
    const auto data = io::load_trajectories(in);
    const auto j = io::load_json(model);
    const auto est = io::estimate_from_json(j, g.threads);
    const auto freq = j.at("freq").get<std::vector<int>>();
    PipelineConfig p;
    p.blocks = j.value("blocks", 0);
    const auto tables = segment_dataset(data, p.scheme(common_length(data)), est.num_states(),
                                        est.num_actions());
    const auto w = window_estimates(tables, g.threads);
    const auto cls = classify(w, est, freq, lambda, g.threads);
    const auto ids = ids_of(data);
    write_file(out, [&](std::ostream& o) { io::write_classifications(o, ids, cls); });
    int bad = 0;
    for (const auto& c : cls) bad += c.unclassifiable;
    std::cout << "classified " << cls.size() - bad << " of " << cls.size() << " trajectories\n";
  }
};

struct ExperimentCmd {
  ExperimentConfig cfg;
  std::string scenario = "gridworld", out = "results.csv", restarts_out, beta = "0.02",
              tau = "auto", backend = "spectral";
  std::vector<std::string> projectors = {"learned"}, em_inits;
  bool no_runtime = false, freq_all = false;
  SchemeFlags scheme;

  void add(CLI::App& app, Globals& g) {
    auto* c = app.add_subcommand("experiment", "run a seeded sweep and write a results CSV");
    c->add_option("--name", cfg.name);
    c->add_option("--scenario", scenario)->check(CLI::IsMember({"gridworld", "random"}));
    c->add_option("--lengths", cfg.lengths, "T_n sweep")->delimiter(',');
    c->add_option("--N", cfg.num_trajectories)->check(CLI::PositiveNumber);
    c->add_option("--trials", cfg.trials)->check(CLI::PositiveNumber);
    c->add_option("--projectors", projectors, "learned, identity, random:<dim>")->delimiter(',');
    c->add_option("--em-inits", em_inits,
                  "random, models_from_clusters, labels_from_clusters_and_classification")
        ->delimiter(',');
    c->add_option("--restarts", cfg.em.restarts, "random EM restarts per trial");
    c->add_option("--softening", cfg.em.softening);
    c->add_option("--eta", cfg.gridworld.adversarial_strength);
    c->add_option("--S", cfg.num_states);
    c->add_option("--A", cfg.num_actions);
    c->add_option("--K", cfg.num_components);
    c->add_option("--delta", cfg.separation);
    c->add_option("--beta", beta, "frequency threshold or 'auto'");
    c->add_flag("--freq-all", freq_all, "compute Freq_beta over all trajectories");
    c->add_option("--tau", tau, "distance threshold or 'auto'");
    c->add_option("--lambda", cfg.pipeline.lambda)->check(CLI::Range(0.0, 1.0));
    c->add_option("--backend", backend)
        ->check(CLI::IsMember({"spectral", "components", "agglomerative"}));
    c->add_option("--out,-o", out, "results CSV");
    c->add_option("--restarts-out", restarts_out, "loglik vs accuracy CSV for random EM");
    c->add_flag("--no-runtime", no_runtime, "write 0 in the runtime column");
    scheme.add(c);
    c->callback([this, &g] { run(g); });
  }

  void run(const Globals& g) {
    cfg.scenario = scenario == "gridworld" ? Scenario::gridworld : Scenario::random;
    cfg.seed = g.seed;
    cfg.threads = g.threads;
    cfg.record_runtime = !no_runtime;
    const double lambda = cfg.pipeline.lambda;
    cfg.pipeline = scheme.pipeline();
    cfg.pipeline.lambda = lambda;
    cfg.pipeline.beta = auto_or_number(beta, "--beta");
    cfg.pipeline.tau = auto_or_number(tau, "--tau");
    cfg.pipeline.freq_all_data = freq_all;
    cfg.pipeline.backend = parse_backend(backend);
    cfg.projectors.clear();
    for (const auto& p : projectors) cfg.projectors.push_back(ProjectorVariant::parse(p));
    cfg.em_inits.clear();
    for (const auto& e : em_inits) cfg.em_inits.push_back(parse_em_init(e));
    const auto result = run_experiment(cfg);
    write_file(out, [&](std::ostream& o) { io::write_results(o, result.rows); });
    if (!restarts_out.empty())
      write_file(restarts_out, [&](std::ostream& o) { io::write_restarts(o, result.restarts); });
    int failed = 0;
    for (const auto& r : result.rows) failed += !r.ok;
    std::cout << "wrote " << result.rows.size() << " rows to " << out;
    if (failed) std::cout << " (" << failed << " failed)";
    std::cout << '\n';
  }
};

struct EvaluateCmd {
  std::string pred, truth_path, in;
  int K = 2;

  void add(CLI::App& app, Globals&) {
    auto* c = app.add_subcommand("evaluate", "permutation accuracy of predicted labels");
    c->add_option("--pred,-p", pred, "predicted labels CSV")->required();
    c->add_option("--truth", truth_path, "true labels CSV");
    c->add_option("--in,-i", in, "trajectory JSONL carrying true labels");
    c->add_option("--K", K)->check(CLI::Range(1, 12));
    c->callback([this] { run(); });
  }

  void run() {
    require(!truth_path.empty() || !in.empty(), "evaluate: pass --truth or --in");
    const auto p = io::read_labels(pred);
    std::vector<int> ids, truth;
    if (!truth_path.empty()) {
      const auto t = io::read_labels(truth_path);
      ids = t.ids;
      truth = t.labels;
    } else {
      for (const auto& t : io::load_trajectories(in)) {
        require(t.true_label.has_value(), "trajectory " + std::to_string(t.id) + " has no true label");
        ids.push_back(t.id);
        truth.push_back(*t.true_label);
      }
    }
    std::vector<int> pl, tl;
    for (std::size_t i = 0; i < p.ids.size(); ++i) {
      auto it = std::find(ids.begin(), ids.end(), p.ids[i]);
      require(it != ids.end(), "no true label for trajectory " + std::to_string(p.ids[i]));
      pl.push_back(p.labels[i]);
      tl.push_back(truth[it - ids.begin()]);
    }
    const auto m = permutation_accuracy(pl, tl, K);
    std::cout << "accuracy " << m.accuracy << " on " << pl.size() << " trajectories; mapping";
    for (std::size_t k = 0; k < m.mapping.size(); ++k) std::cout << ' ' << k << "->" << m.mapping[k];
    std::cout << '\n';
  }
};

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Learn mixtures of Markov chains and MDPs from short trajectories"};
  app.require_subcommand(1);
  app.set_config("--config", "", "key = value file mirroring the command-line flags");
  Globals g;
  app.add_option("--seed", g.seed, "master seed");
  app.add_option("--threads", g.threads, "worker threads")->check(CLI::PositiveNumber);

  GenerateCmd generate;
  SubspaceCmd subspace;
  ClusterCmd cluster;
  EmCmd em;
  EstimateCmd estimate;
  ClassifyCmd classify_cmd;
  ExperimentCmd experiment;
  EvaluateCmd evaluate;
  generate.add(app, g);
  subspace.add(app, g);
  cluster.add(app, g);
  em.add(app, g);
  estimate.add(app, g);
  classify_cmd.add(app, g);
  experiment.add(app, g);
  evaluate.add(app, g);

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    return app.exit(e);
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << '\n';
    return 1;
  }
  return 0;
}
