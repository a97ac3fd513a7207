#include <gtest/gtest.h>

#include "support.hpp"

using namespace mixmdp;
using namespace testing_support;

TEST(SegmentEstimates, RowIsTheCountRatio) {
  // Window 2 (steps 6..11) holds (0,0) -> 0, 2, 0, 2 and (2,1) -> 0, 1.
  std::vector<int> states(25, 1), actions(24, 1);
  const int w[] = {0, 0, 2, 0, 0, 2, 1};
  const int a[] = {0, 0, 1, 0, 0, 1};
  for (int i = 0; i < 7; ++i) states[6 + i] = w[i];
  for (int i = 0; i < 6; ++i) actions[6 + i] = a[i];
  SegmentScheme scheme;
  scheme.length = 24;
  scheme.blocks = 1;
  const auto table = segment_trajectory(make_trajectory(0, states, actions), scheme, 3, 2);
  const auto est = segment_estimates(table, 0);
  ASSERT_TRUE(est.observed(0));
  EXPECT_EQ(est.transition(0), Eigen::Vector3d(0.5, 0.0, 0.5));
  EXPECT_EQ(est.find(0)->count, 4);
  EXPECT_DOUBLE_EQ(est.occupancy(0), 4.0);
  // (1,0) never occurs: zero vector, flagged unobserved.
  EXPECT_FALSE(est.observed(2));
  EXPECT_EQ(est.transition(2), Eigen::Vector3d::Zero());
}

TEST(SegmentEstimates, MatchNaiveRecount) {
  const int S = 4, A = 2;
  const auto m = mixture_of({random_kernel(S, A, 5)}, S, A);
  const auto t = sample_trajectory(m, 200, std::nullopt, 17);
  SegmentScheme scheme;
  scheme.length = 200;
  scheme.blocks = 50;
  const auto table = segment_trajectory(t, scheme, S, A);
  for (int w = 0; w < 2; ++w) {
    const auto est = segment_estimates(table, w);
    const int begin = w == 0 ? 50 : 150;
    for (int p = 0; p < S * A; ++p) {
      Eigen::VectorXd counts = Eigen::VectorXd::Zero(S);
      for (int step = begin; step < begin + 50; ++step)
        if (t.states[step] * A + t.actions[step] == p) counts(t.states[step + 1]) += 1.0;
      const double total = counts.sum();
      if (total == 0.0) {
        EXPECT_FALSE(est.observed(p));
        continue;
      }
      EXPECT_LT((est.transition(p) - counts / total).cwiseAbs().maxCoeff(), 1e-15);
      EXPECT_DOUBLE_EQ(est.occupancy(p), total / 50.0);
    }
  }
}

TEST(SegmentEstimates, ConvergeOnALongErgodicChain) {
  const int S = 3, A = 1;
  const Eigen::MatrixXd P = random_kernel(S, A, 8);
  const auto m = mixture_of({P}, S, A);
  const auto t = sample_trajectory(m, 400000, std::nullopt, 3);
  SegmentScheme scheme;
  scheme.length = 400000;
  scheme.blocks = 1;
  const auto table = segment_trajectory(t, scheme, S, A);
  for (int w = 0; w < 2; ++w) {
    const auto est = segment_estimates(table, w);
    for (int p = 0; p < S; ++p)
      EXPECT_LT((est.transition(p) - P.row(p).transpose()).lpNorm<1>(), 0.05);
  }
}
