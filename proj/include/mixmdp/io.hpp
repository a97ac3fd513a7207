#pragma once

#include <Eigen/Dense>
#include <json.hpp>

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <iomanip>
#include <istream>
#include <numeric>
#include <ostream>
#include <span>
#include <sstream>
#include <string>
#include <vector>

#include "mixmdp/clustering.hpp"
#include "mixmdp/core.hpp"
#include "mixmdp/em.hpp"
#include "mixmdp/error.hpp"
#include "mixmdp/inference.hpp"
#include "mixmdp/simulator.hpp"
#include "mixmdp/subspace.hpp"

namespace mixmdp::io {

using json = nlohmann::json;

/// Version written into the first line of every CSV.
inline constexpr int kCsvSchemaVersion = 1;

inline std::string csv_header_comment(const std::string& kind) {
  return "# mixmdp-csv kind=" + kind + " version=" + std::to_string(kCsvSchemaVersion);
}

/// Shortest decimal form that parses back to the same double.
inline std::string fmt(double v) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  return buf;
}

inline std::ofstream open_out(const std::string& path) {
  std::ofstream out(path);
  if (!out) throw Error("cannot open '" + path + "' for writing");
  return out;
}

inline std::ifstream open_in(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw Error("cannot open '" + path + "' for reading");
  return in;
}

// ---------------------------------------------------------------------------
// Trajectories (JSON Lines)

inline json to_json(const Trajectory& t) {
  json j;
  j["id"] = t.id;
  j["true_label"] = t.true_label ? json(*t.true_label) : json(nullptr);
  j["states"] = t.states;
  j["actions"] = t.actions;
  if (t.rewards) j["rewards"] = *t.rewards;
  return j;
}

inline Trajectory trajectory_from_json(const json& j) {
  Trajectory t;
  t.id = j.at("id").get<int>();
  if (j.contains("true_label") && !j.at("true_label").is_null())
    t.true_label = j.at("true_label").get<int>();
  t.states = j.at("states").get<std::vector<int>>();
  t.actions = j.at("actions").get<std::vector<int>>();
  if (j.contains("rewards") && !j.at("rewards").is_null())
    t.rewards = j.at("rewards").get<std::vector<double>>();
  require(t.states.size() == t.actions.size() + 1,
          "trajectory " + std::to_string(t.id) + ": states must have one more entry than actions");
  return t;
}

inline void write_trajectories(std::ostream& out, std::span<const Trajectory> data) {
  for (const auto& t : data) out << to_json(t).dump() << '\n';
}

inline std::vector<Trajectory> read_trajectories(std::istream& in) {
  std::vector<Trajectory> out;
  std::string line;
  int lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    if (line.find_first_not_of(" \t\r") == std::string::npos) continue;
    try {
      out.push_back(trajectory_from_json(json::parse(line)));
    } catch (const std::exception& e) {
      throw Error("trajectory file line " + std::to_string(lineno) + ": " + e.what());
    }
  }
  return out;
}

inline void save_trajectories(const std::string& path, std::span<const Trajectory> data) {
  auto out = open_out(path);
  write_trajectories(out, data);
}

inline std::vector<Trajectory> load_trajectories(const std::string& path) {
  auto in = open_in(path);
  return read_trajectories(in);
}

// ---------------------------------------------------------------------------
// Mixture models

inline json kernels_to_json(const std::vector<Eigen::MatrixXd>& kernels, int S, int A) {
  json all = json::array();
  for (const auto& P : kernels) {
    json ks = json::array();
    for (int s = 0; s < S; ++s) {
      json ka = json::array();
      for (int a = 0; a < A; ++a) {
        std::vector<double> row(S);
        for (int j = 0; j < S; ++j) row[j] = P(s * A + a, j);
        ka.push_back(row);
      }
      ks.push_back(ka);
    }
    all.push_back(ks);
  }
  return all;
}

inline json to_json(const MarkovMixture& m) {
  const int S = m.num_states, A = m.num_actions, K = m.num_components();
  json j;
  j["S"] = S;
  j["A"] = A;
  j["K"] = K;
  j["kernels"] = kernels_to_json(m.kernels, S, A);
  json pol = json::array(), start = json::array();
  for (int k = 0; k < K; ++k) {
    json pk = json::array();
    for (int s = 0; s < S; ++s) {
      std::vector<double> row(A);
      for (int a = 0; a < A; ++a) row[a] = m.policies[k](s, a);
      pk.push_back(row);
    }
    pol.push_back(pk);
    start.push_back(std::vector<double>(m.start_dists[k].data(), m.start_dists[k].data() + S));
  }
  j["policies"] = pol;
  j["start_dists"] = start;
  j["weights"] = std::vector<double>(m.weights.data(), m.weights.data() + K);
  return j;
}

inline MarkovMixture mixture_from_json(const json& j) {
  MarkovMixture m;
  m.num_states = j.at("S").get<int>();
  m.num_actions = j.at("A").get<int>();
  const int K = j.at("K").get<int>();
  const int S = m.num_states, A = m.num_actions;
  require(S >= 1 && A >= 1 && K >= 1, "model file: S, A, K must be positive");
  const auto& kern = j.at("kernels");
  const auto& pol = j.at("policies");
  const auto& start = j.at("start_dists");
  require(kern.size() == static_cast<std::size_t>(K) && pol.size() == static_cast<std::size_t>(K) &&
              start.size() == static_cast<std::size_t>(K),
          "model file: per-label arrays must have K entries");
  for (int k = 0; k < K; ++k) {
    Eigen::MatrixXd P(S * A, S);
    Eigen::MatrixXd pi(S, A);
    Eigen::VectorXd p0(S);
    for (int s = 0; s < S; ++s) {
      for (int a = 0; a < A; ++a) {
        const auto row = kern.at(k).at(s).at(a).get<std::vector<double>>();
        require(row.size() == static_cast<std::size_t>(S), "model file: kernel row has wrong size");
        for (int t = 0; t < S; ++t) P(s * A + a, t) = row[t];
        pi(s, a) = pol.at(k).at(s).at(a).get<double>();
      }
      p0(s) = start.at(k).at(s).get<double>();
    }
    m.kernels.push_back(std::move(P));
    m.policies.push_back(std::move(pi));
    m.start_dists.push_back(std::move(p0));
  }
  const auto w = j.at("weights").get<std::vector<double>>();
  require(w.size() == static_cast<std::size_t>(K), "model file: weights must have K entries");
  m.weights = Eigen::Map<const Eigen::VectorXd>(w.data(), K);
  m.validate();
  return m;
}

inline json to_json(const MixingReport& r) {
  json j;
  j["t_mix"] = r.t_mix ? json(*r.t_mix) : json(nullptr);
  json comps = json::array();
  for (const auto& c : r.components) {
    json cj;
    cj["label"] = c.label;
    cj["t_mix"] = c.t_mix ? json(*c.t_mix) : json(nullptr);
    cj["tv_curve"] = c.tv_curve;
    cj["stationary"] = std::vector<double>(c.stationary.data(), c.stationary.data() + c.stationary.size());
    comps.push_back(cj);
  }
  j["components"] = comps;
  return j;
}

/// Estimated model: kernels with null for undefined rows, weights, and the
/// classification extras.
inline json to_json(const MixtureEstimate& e) {
  const int S = e.num_states(), A = e.num_actions(), K = e.num_components();
  json j;
  j["S"] = S;
  j["A"] = A;
  j["K"] = K;
  json kern = json::array();
  for (int k = 0; k < K; ++k) {
    json ks = json::array();
    for (int s = 0; s < S; ++s) {
      json ka = json::array();
      for (int a = 0; a < A; ++a) {
        const int p = s * A + a;
        if (!e.models.defined[k][p]) {
          ka.push_back(nullptr);
          continue;
        }
        std::vector<double> row(S);
        for (int t = 0; t < S; ++t) row[t] = e.models.transitions[k](p, t);
        ka.push_back(row);
      }
      ks.push_back(ka);
    }
    kern.push_back(ks);
  }
  j["kernels"] = kern;
  j["weights"] = std::vector<double>(e.models.weights.data(), e.models.weights.data() + K);
  j["cluster_sizes"] = e.models.sizes;
  json prev = json::array(), occ = json::array();
  for (int k = 0; k < K; ++k) {
    std::vector<json> row;
    for (int p = 0; p < S * A; ++p)
      row.push_back(e.prevalence.observed[p] ? json(e.prevalence.share(k, p)) : json(nullptr));
    prev.push_back(row);
    occ.push_back(std::vector<double>(e.occupancy[k].data(), e.occupancy[k].data() + S * A));
  }
  j["prevalence"] = prev;
  j["occupancy"] = occ;
  return j;
}

inline MixtureEstimate estimate_from_json(const json& j, int threads = 1) {
  MixtureEstimate e;
  const int S = j.at("S").get<int>(), A = j.at("A").get<int>(), K = j.at("K").get<int>();
  const int SA = S * A;
  e.models.num_states = S;
  e.models.num_actions = A;
  const auto w = j.at("weights").get<std::vector<double>>();
  require(w.size() == static_cast<std::size_t>(K), "estimate file: weights must have K entries");
  e.models.weights = Eigen::Map<const Eigen::VectorXd>(w.data(), K);
  e.models.sizes = j.at("cluster_sizes").get<std::vector<int>>();
  for (int k = 0; k < K; ++k) {
    Eigen::MatrixXd P = Eigen::MatrixXd::Zero(SA, S);
    std::vector<char> def(SA, 0);
    for (int s = 0; s < S; ++s)
      for (int a = 0; a < A; ++a) {
        const auto& row = j.at("kernels").at(k).at(s).at(a);
        if (row.is_null()) continue;
        const auto v = row.get<std::vector<double>>();
        require(v.size() == static_cast<std::size_t>(S), "estimate file: kernel row has wrong size");
        for (int t = 0; t < S; ++t) P(s * A + a, t) = v[t];
        def[s * A + a] = 1;
      }
    e.models.transitions.push_back(std::move(P));
    e.models.defined.push_back(std::move(def));
  }
  e.prevalence.share = Eigen::MatrixXd::Zero(K, SA);
  e.prevalence.observed.assign(SA, 0);
  for (int k = 0; k < K; ++k)
    for (int p = 0; p < SA; ++p) {
      const auto& v = j.at("prevalence").at(k).at(p);
      if (v.is_null()) continue;
      e.prevalence.share(k, p) = v.get<double>();
      e.prevalence.observed[p] = 1;
    }
  for (int k = 0; k < K; ++k) {
    const auto v = j.at("occupancy").at(k).get<std::vector<double>>();
    require(v.size() == static_cast<std::size_t>(SA), "estimate file: occupancy has wrong size");
    e.occupancy.push_back(Eigen::Map<const Eigen::VectorXd>(v.data(), SA));
  }
  build_class_projectors(e, threads);
  return e;
}

// ---------------------------------------------------------------------------
// Subspace bank

inline json matrix_to_json(const Eigen::MatrixXd& m) {
  json rows = json::array();
  for (int i = 0; i < m.rows(); ++i) {
    std::vector<double> r(m.cols());
    for (int j = 0; j < m.cols(); ++j) r[j] = m(i, j);
    rows.push_back(r);
  }
  return rows;
}

inline Eigen::MatrixXd matrix_from_json(const json& j, int cols) {
  Eigen::MatrixXd m(j.size(), cols);
  for (std::size_t i = 0; i < j.size(); ++i) {
    const auto r = j.at(i).get<std::vector<double>>();
    require(r.size() == static_cast<std::size_t>(cols), "matrix row has wrong size");
    for (int c = 0; c < cols; ++c) m(i, c) = r[c];
  }
  return m;
}

inline json to_json(const SubspaceBank& b) {
  json j;
  j["S"] = b.num_states;
  j["A"] = b.num_actions;
  j["K"] = b.num_components;
  j["n_traj"] = b.n_traj;
  json proj = json::array(), spec = json::array();
  for (int p = 0; p < b.num_pairs(); ++p) {
    proj.push_back(matrix_to_json(b.projectors[p]));
    spec.push_back(std::vector<double>(b.spectra[p].data(), b.spectra[p].data() + b.spectra[p].size()));
  }
  j["projectors"] = proj;
  j["spectra"] = spec;
  j["occupancy_projector"] = matrix_to_json(b.occupancy_projector);
  j["occupancy_spectrum"] = std::vector<double>(
      b.occupancy_spectrum.data(), b.occupancy_spectrum.data() + b.occupancy_spectrum.size());
  return j;
}

inline SubspaceBank bank_from_json(const json& j) {
  SubspaceBank b;
  b.num_states = j.at("S").get<int>();
  b.num_actions = j.at("A").get<int>();
  b.num_components = j.at("K").get<int>();
  b.n_traj = j.at("n_traj").get<std::vector<int>>();
  const int SA = b.num_pairs();
  require(b.n_traj.size() == static_cast<std::size_t>(SA), "bank file: n_traj has wrong size");
  for (int p = 0; p < SA; ++p) {
    b.projectors.push_back(matrix_from_json(j.at("projectors").at(p), b.num_states));
    const auto s = j.at("spectra").at(p).get<std::vector<double>>();
    b.spectra.push_back(Eigen::Map<const Eigen::VectorXd>(s.data(), s.size()));
  }
  b.occupancy_projector = matrix_from_json(j.at("occupancy_projector"), SA);
  const auto os = j.at("occupancy_spectrum").get<std::vector<double>>();
  b.occupancy_spectrum = Eigen::Map<const Eigen::VectorXd>(os.data(), os.size());
  return b;
}

inline void save_json(const std::string& path, const json& j) {
  auto out = open_out(path);
  out << j.dump(1) << '\n';
}

inline json load_json(const std::string& path) {
  auto in = open_in(path);
  try {
    return json::parse(in);
  } catch (const std::exception& e) {
    throw Error("'" + path + "': " + e.what());
  }
}

// ---------------------------------------------------------------------------
// CSV

/// Minimal CSV reader: skips '#' comment lines, splits on commas (no
/// quoting; every field this library writes is numeric or a bare word).
struct CsvTable {
  std::vector<std::string> header;
  std::vector<std::vector<std::string>> rows;

  int column(const std::string& name) const {
    auto it = std::find(header.begin(), header.end(), name);
    if (it == header.end()) throw Error("CSV is missing column '" + name + "'");
    return static_cast<int>(it - header.begin());
  }
};

inline std::vector<std::string> split_csv_line(const std::string& line) {
  std::vector<std::string> out;
  std::string field;
  std::istringstream ss(line);
  while (std::getline(ss, field, ',')) {
    if (!field.empty() && field.back() == '\r') field.pop_back();
    out.push_back(field);
  }
  if (!line.empty() && line.back() == ',') out.emplace_back();
  return out;
}

inline CsvTable read_csv(std::istream& in) {
  CsvTable t;
  std::string line;
  while (std::getline(in, line)) {
    if (line.empty() || line[0] == '#') continue;
    if (t.header.empty())
      t.header = split_csv_line(line);
    else
      t.rows.push_back(split_csv_line(line));
  }
  if (t.header.empty()) throw Error("CSV has no header row");
  return t;
}

inline CsvTable load_csv(const std::string& path) {
  auto in = open_in(path);
  return read_csv(in);
}

/// id,label rows; label -1 means unassigned.
inline void write_labels(std::ostream& out, std::span<const int> ids, std::span<const int> labels) {
  require(ids.size() == labels.size(), "write_labels: size mismatch");
  out << csv_header_comment("labels") << "\nid,label\n";
  for (std::size_t i = 0; i < ids.size(); ++i) out << ids[i] << ',' << labels[i] << '\n';
}

struct LabelFile {
  std::vector<int> ids;
  std::vector<int> labels;
};

inline LabelFile read_labels(const std::string& path) {
  const auto t = load_csv(path);
  const int ci = t.column("id"), cl = t.column("label");
  LabelFile f;
  for (const auto& r : t.rows) {
    f.ids.push_back(std::stoi(r.at(ci)));
    f.labels.push_back(std::stoi(r.at(cl)));
  }
  return f;
}

/// Labels for the given trajectories, matched by id.
inline std::vector<int> labels_for(const LabelFile& f, std::span<const Trajectory> data) {
  std::vector<int> out;
  out.reserve(data.size());
  for (const auto& t : data) {
    auto it = std::find(f.ids.begin(), f.ids.end(), t.id);
    require(it != f.ids.end(), "labels file has no entry for trajectory " + std::to_string(t.id));
    out.push_back(f.labels[it - f.ids.begin()]);
  }
  return out;
}

inline void write_classifications(std::ostream& out, std::span<const int> ids,
                                  std::span<const Classification> cls) {
  const int K = cls.empty() ? 0 : static_cast<int>(cls.front().dist.size());
  out << csv_header_comment("classification") << "\nid,label,unclassifiable";
  for (int k = 0; k < K; ++k) out << ",dist_" << k;
  out << '\n';
  for (std::size_t i = 0; i < cls.size(); ++i) {
    out << ids[i] << ',' << cls[i].label << ',' << (cls[i].unclassifiable ? 1 : 0);
    for (int k = 0; k < K; ++k) out << ',' << fmt(cls[i].dist(k));
    out << '\n';
  }
}

inline void write_responsibilities(std::ostream& out, std::span<const int> ids,
                                   const Eigen::MatrixXd& resp) {
  out << csv_header_comment("responsibilities") << "\nid";
  for (int k = 0; k < resp.cols(); ++k) out << ",p_" << k;
  out << '\n';
  for (int n = 0; n < resp.rows(); ++n) {
    out << ids[n];
    for (int k = 0; k < resp.cols(); ++k) out << ',' << fmt(resp(n, k));
    out << '\n';
  }
}

inline void write_loglik_trace(std::ostream& out, std::span<const double> trace) {
  out << csv_header_comment("loglik_trace") << "\niteration,loglik\n";
  for (std::size_t i = 0; i < trace.size(); ++i) out << i + 1 << ',' << fmt(trace[i]) << '\n';
}

inline json to_json(const EmParams& p) {
  json j;
  j["S"] = p.num_states;
  j["A"] = p.num_actions;
  j["K"] = p.num_components();
  j["weights"] = std::vector<double>(p.weights.data(), p.weights.data() + p.weights.size());
  json kern = json::array();
  for (int k = 0; k < p.num_components(); ++k) {
    json rows = json::array();
    for (int r = 0; r < p.transitions[k].rows(); ++r) {
      if (!p.transition_defined[k][r]) {
        rows.push_back(nullptr);
        continue;
      }
      std::vector<double> v(p.num_states);
      for (int s = 0; s < p.num_states; ++s) v[s] = p.transitions[k](r, s);
      rows.push_back(v);
    }
    kern.push_back(rows);
  }
  j["transitions"] = kern;
  if (!p.policies.empty()) {
    json pol = json::array(), start = json::array();
    for (int k = 0; k < p.num_components(); ++k) {
      pol.push_back(matrix_to_json(p.policies[k]));
      start.push_back(std::vector<double>(p.starts[k].data(), p.starts[k].data() + p.num_states));
    }
    j["policies"] = pol;
    j["start_dists"] = start;
  }
  return j;
}

/// Histogram of values on `bins` equal-width bins, with the KDE density (if
/// given) evaluated at each bin centre.
inline void write_histogram(std::ostream& out, std::span<const double> values, int bins,
                            const ThresholdSuggestion* kde = nullptr, double tau = NAN) {
  require(bins >= 1 && !values.empty(), "write_histogram: need values and at least one bin");
  const auto [lo_it, hi_it] = std::minmax_element(values.begin(), values.end());
  const double lo = *lo_it, hi = *hi_it;
  const double width = hi > lo ? (hi - lo) / bins : 1.0;
  std::vector<long long> counts(bins, 0);
  for (double v : values) {
    const int b = std::min(bins - 1, static_cast<int>((v - lo) / width));
    ++counts[b];
  }
  out << csv_header_comment("distance_histogram") << "\n# tau=" << fmt(tau)
      << "\nbin_lo,bin_hi,count,density\n";
  for (int b = 0; b < bins; ++b) {
    const double a = lo + b * width, c = a + width;
    double dens = NAN;
    if (kde && !kde->grid.empty()) {
      const double mid = 0.5 * (a + c);
      auto it = std::lower_bound(kde->grid.begin(), kde->grid.end(), mid);
      const std::size_t i = std::min<std::size_t>(it - kde->grid.begin(), kde->grid.size() - 1);
      dens = kde->density[i];
    }
    out << fmt(a) << ',' << fmt(c) << ',' << counts[b] << ',' << fmt(dens) << '\n';
  }
}

/// Thresholded distance matrix with rows and columns sorted by label, as
/// row,col,label_row,label_col,dist,similar triples.
inline void write_block_matrix(std::ostream& out, const Eigen::MatrixXd& dist,
                               std::span<const int> labels, double tau) {
  const int n = static_cast<int>(dist.rows());
  std::vector<int> order(n);
  std::iota(order.begin(), order.end(), 0);
  std::stable_sort(order.begin(), order.end(),
                   [&](int a, int b) { return labels[a] < labels[b]; });
  out << csv_header_comment("block_matrix") << "\nrow,col,label_row,label_col,dist,similar\n";
  for (int i = 0; i < n; ++i)
    for (int j = 0; j < n; ++j) {
      const double d = dist(order[i], order[j]);
      out << i << ',' << j << ',' << labels[order[i]] << ',' << labels[order[j]] << ',' << fmt(d)
          << ',' << (d <= tau || i == j ? 1 : 0) << '\n';
    }
}

inline void write_energy(std::ostream& out, const Eigen::VectorXd& profile) {
  out << csv_header_comment("eigen_energy") << "\nrank,energy\n";
  for (int r = 0; r < profile.size(); ++r) out << r + 1 << ',' << fmt(profile(r)) << '\n';
}

}  // namespace mixmdp::io
