#include <gtest/gtest.h>

#include <sstream>

#include "support.hpp"

using namespace mixmdp;
using namespace testing_support;

TEST(TrajectoryIo, RoundTripIsIdentity) {
  const auto m = build_gridworld_mixture(GridworldSpec{});
  auto data = sample_dataset(m, 5, 20, 3);
  data[2].true_label.reset();
  data[3].rewards = std::vector<double>(20, 0.5);
  std::stringstream buf;
  io::write_trajectories(buf, data);
  const auto back = io::read_trajectories(buf);
  ASSERT_EQ(back.size(), data.size());
  for (std::size_t i = 0; i < data.size(); ++i) {
    EXPECT_EQ(back[i].id, data[i].id);
    EXPECT_EQ(back[i].states, data[i].states);
    EXPECT_EQ(back[i].actions, data[i].actions);
    EXPECT_EQ(back[i].true_label, data[i].true_label);
    EXPECT_EQ(back[i].rewards, data[i].rewards);
  }
}

TEST(TrajectoryIo, MalformedLineIsAnError) {
  std::stringstream buf("{\"id\": 0, \"states\": [0, 1], \"actions\": [0, 0]}\n");
  EXPECT_THROW(io::read_trajectories(buf), Error);
  std::stringstream junk("not json\n");
  EXPECT_THROW(io::read_trajectories(junk), std::exception);
}

TEST(MixtureIo, RoundTripIsExact) {
  const auto rm = build_random_mixture(4, 2, 3, 1.0, 8);
  const auto back = io::mixture_from_json(io::to_json(rm.mixture));
  ASSERT_EQ(back.num_components(), 3);
  for (int k = 0; k < 3; ++k) {
    EXPECT_EQ(back.kernels[k], rm.mixture.kernels[k]);
    EXPECT_EQ(back.policies[k], rm.mixture.policies[k]);
    EXPECT_EQ(back.start_dists[k], rm.mixture.start_dists[k]);
  }
  EXPECT_EQ(back.weights, rm.mixture.weights);
}

TEST(EstimateIo, ReloadedEstimateClassifiesIdentically) {
  const auto m = build_gridworld_mixture(GridworldSpec{});
  const auto data = sample_dataset(m, 200, 100, 4);
  const auto tables = tables_for(data, 64, 4);
  std::vector<int> labels;
  for (const auto& t : data) labels.push_back(*t.true_label);
  const auto est = estimate_mixture(labels, tables, 2);
  const auto back = io::estimate_from_json(io::json::parse(io::to_json(est).dump()));
  EXPECT_EQ(back.models.weights, est.models.weights);
  for (int k = 0; k < 2; ++k) {
    EXPECT_EQ(back.models.defined[k], est.models.defined[k]);
    EXPECT_EQ(back.occupancy[k], est.occupancy[k]);
  }
  const auto freq = frequent_pairs(tables, 0.02);
  const auto w = window_estimates(tables);
  const auto a = classify(w, est, freq, 1.0);
  const auto b = classify(w, back, freq, 1.0);
  for (std::size_t n = 0; n < a.size(); ++n) {
    EXPECT_EQ(a[n].label, b[n].label);
    EXPECT_EQ(a[n].dist, b[n].dist);
  }
}

TEST(BankIo, RoundTripIsExact) {
  const auto m = mixture_of({random_kernel(3, 2, 1), random_kernel(3, 2, 2)}, 3, 2);
  const auto bank =
      estimate_subspaces(window_estimates(tables_for(sample_dataset(m, 30, 40, 2), 3, 2)), 2);
  const auto back = io::bank_from_json(io::json::parse(io::to_json(bank).dump()));
  EXPECT_EQ(back.n_traj, bank.n_traj);
  for (int p = 0; p < bank.num_pairs(); ++p) EXPECT_EQ(back.projectors[p], bank.projectors[p]);
  EXPECT_EQ(back.occupancy_projector, bank.occupancy_projector);
}

TEST(CsvIo, LabelsRoundTripThroughAFile) {
  const std::string path = ::testing::TempDir() + "labels_roundtrip.csv";
  {
    auto out = io::open_out(path);
    io::write_labels(out, std::vector<int>{7, 3, 9}, std::vector<int>{1, -1, 0});
  }
  const auto f = io::read_labels(path);
  EXPECT_EQ(f.ids, (std::vector<int>{7, 3, 9}));
  EXPECT_EQ(f.labels, (std::vector<int>{1, -1, 0}));
  std::vector<Trajectory> data(2);
  data[0].id = 9;
  data[1].id = 7;
  EXPECT_EQ(io::labels_for(f, data), (std::vector<int>{0, 1}));
  data[1].id = 8;
  EXPECT_THROW(io::labels_for(f, data), Error);
}

TEST(CsvIo, EveryWriterStartsWithTheSchemaComment) {
  std::ostringstream a, b, c;
  io::write_energy(a, Eigen::Vector3d(3, 2, 1));
  io::write_histogram(b, std::vector<double>{0.0, 0.5, 1.0}, 4);
  io::write_block_matrix(c, Eigen::Matrix2d::Zero(), std::vector<int>{1, 0}, 0.1);
  for (const auto* s : {&a, &b, &c}) EXPECT_EQ(s->str().rfind("# mixmdp-csv kind=", 0), 0u);

  std::istringstream in(a.str());
  const auto t = io::read_csv(in);
  EXPECT_EQ(t.header, (std::vector<std::string>{"rank", "energy"}));
  ASSERT_EQ(t.rows.size(), 3u);
  EXPECT_EQ(std::stod(t.rows[1][t.column("energy")]), 2.0);
  EXPECT_THROW(t.column("missing"), Error);
}

TEST(CsvIo, FmtRoundTripsDoubles) {
  for (double v : {0.1, 1.0 / 3.0, 1e-300, -2.5e17}) EXPECT_EQ(std::stod(io::fmt(v)), v);
}
