#include "tse/train.hpp"

#include <gtest/gtest.h>

#include <set>

namespace tse {
namespace {

const Environment kEnv(25.0, 0.15);

DensityField reference_field(const Grid& g) {
  return lax_hopf_solve(PiecewiseConstantProfile::reference(), kEnv, g).second;
}

TrainConfig small_config() {
  TrainConfig c;
  c.layer_sizes = hidden_architecture(2, 10);
  c.adam_iterations = 200;
  c.lbfgs_iterations = 100;
  c.seed = 5;
  c.normalization = InputNormalization<double>::to_unit_box(0.0, 1000.0, 0.0, 50.0);
  c.history_interval = 10;
  return c;
}

TEST(SampleDataset, ExhaustiveDrawVisitsEveryNodeOnce) {
  const Grid g(0.0, 40.0, 2.0, 2.0, 0.1);
  const auto field = reference_field(Grid(0.0, 1000.0, 2.0, 2.0, 0.1));
  const DensityField small(g, kEnv, field.rho.topRows(g.space_nodes()));
  const auto s = sample_dataset(small, static_cast<std::size_t>(g.node_count()), 3);
  std::set<std::pair<long, long>> seen;
  for (const auto& p : s.points) {
    seen.insert({std::lround(p.x / g.dx()), std::lround(p.t / g.dt())});
  }
  EXPECT_EQ(seen.size(), static_cast<std::size_t>(g.node_count()));
}

TEST(SampleDataset, SixPercentOfFiveHundredSquare) {
  const Grid g(0.0, 998.0, 2.0, 49.9, 0.1);
  ASSERT_EQ(g.space_nodes(), 500);
  ASSERT_EQ(g.time_nodes(), 500);
  const auto s = sample_dataset(reference_field(g), 15000, 1);
  EXPECT_EQ(s.size(), 15000u);
  EXPECT_DOUBLE_EQ(static_cast<double>(s.size()) / static_cast<double>(g.node_count()), 0.06);
}

TEST(SampleDataset, DeterministicDistinctInBounds) {
  const Grid g;
  const auto field = reference_field(g);
  const auto a = sample_dataset(field, 2000, 77);
  const auto b = sample_dataset(field, 2000, 77);
  const auto c = sample_dataset(field, 2000, 78);
  EXPECT_EQ(a.points, b.points);
  EXPECT_NE(a.points, c.points);
  std::set<std::pair<double, double>> nodes;
  for (const auto& p : a.points) {
    EXPECT_GE(p.x, g.x_min());
    EXPECT_LE(p.x, g.x_max());
    EXPECT_GE(p.t, 0.0);
    EXPECT_LE(p.t, g.t_max() + 1e-9);
    EXPECT_GE(p.rho, 0.0);
    EXPECT_LE(p.rho, kEnv.jam_density);
    nodes.insert({p.x, p.t});
  }
  EXPECT_EQ(nodes.size(), a.size());
}

TEST(SampleDataset, RejectsOversizedRequest) {
  const Grid g(0.0, 10.0, 2.0, 1.0, 0.5);
  const auto field = reference_field(Grid(0.0, 1000.0, 2.0, 1.0, 0.5));
  const DensityField small(g, kEnv, field.rho.topRows(g.space_nodes()));
  EXPECT_THROW(sample_dataset(small, 19, 0), std::invalid_argument);
  EXPECT_NO_THROW(sample_dataset(small, 18, 0));
}

TEST(Train, ZeroIterationsReturnsInitialParams) {
  const auto s = sample_dataset(reference_field(Grid()), 100, 2);
  TrainConfig c = small_config();
  c.adam_iterations = 0;
  c.lbfgs_iterations = 0;
  const auto [params, report] = train(s, c);
  MlpParams<double> initial = init_params<double>(c.layer_sizes, c.seed);
  initial.normalization = c.normalization;
  EXPECT_TRUE(params == initial);
  EXPECT_EQ(report.final_mse, report.initial_mse);
  EXPECT_FALSE(report.mse_history.empty());
}

TEST(Train, InterpolatesTinyDataset) {
  const auto s = sample_dataset(reference_field(Grid()), 10, 4);
  TrainConfig c;
  c.layer_sizes = hidden_architecture(2, 16);
  c.adam_iterations = 2000;
  c.lbfgs_iterations = 2000;
  c.seed = 1;
  c.normalization = InputNormalization<double>::to_unit_box(0.0, 1000.0, 0.0, 50.0);
  const auto [params, report] = train(s, c);
  EXPECT_LT(report.final_mse, 1e-6);
}

TEST(Train, DeterministicBitForBit) {
  const auto s = sample_dataset(reference_field(Grid()), 300, 9);
  const auto a = train(s, small_config());
  const auto b = train(s, small_config());
  EXPECT_TRUE(a.first == b.first);
  EXPECT_EQ(a.second.final_mse, b.second.final_mse);
}

TEST(Train, LbfgsPhaseNeverIncreasesLoss) {
  const auto s = sample_dataset(reference_field(Grid()), 500, 10);
  TrainConfig c = small_config();
  c.history_interval = 1;
  const auto [params, report] = train(s, c);
  double previous = std::numeric_limits<double>::infinity();
  for (const auto& h : report.mse_history) {
    if (h.phase != "lbfgs") continue;
    EXPECT_LE(h.mse, previous);
    previous = h.mse;
  }
  EXPECT_LT(report.final_mse, report.initial_mse);
  EXPECT_GT(report.lbfgs_iterations_run, 0);
}

TEST(Train, AdamWindowedMeanDecreases) {
  const auto s = sample_dataset(reference_field(Grid()), 1000, 12);
  TrainConfig c = small_config();
  c.adam_iterations = 1000;
  c.lbfgs_iterations = 0;
  c.history_interval = 1;
  const auto [params, report] = train(s, c);
  std::vector<double> window_means;
  double sum = 0.0;
  int count = 0;
  for (const auto& h : report.mse_history) {
    if (h.phase != "adam") continue;
    sum += h.mse;
    if (++count == 100) {
      window_means.push_back(sum / 100.0);
      sum = 0.0;
      count = 0;
    }
  }
  ASSERT_EQ(window_means.size(), 10u);
  for (std::size_t k = 1; k < window_means.size(); ++k) {
    EXPECT_LT(window_means[k], window_means[k - 1]) << "window " << k;
  }
}

TEST(Train, RejectsInvalidConfigAndEmptySamples) {
  const auto s = sample_dataset(reference_field(Grid()), 10, 4);
  TrainConfig c = small_config();
  c.adam.learning_rate = 0.0;
  EXPECT_THROW(train(s, c), std::invalid_argument);
  c = small_config();
  c.adam_iterations = -1;
  EXPECT_THROW(train(s, c), std::invalid_argument);
  SampleSet empty{{}, Grid(), kEnv, 0};
  EXPECT_THROW(train(empty, small_config()), std::invalid_argument);
}

TEST(PredictGrid, MatchesPointwiseForward) {
  const Grid g(0.0, 100.0, 10.0, 5.0, 1.0);
  auto p = init_params<double>(hidden_architecture(2, 5), 3);
  p.normalization = InputNormalization<double>::to_unit_box(0.0, 100.0, 0.0, 5.0);
  const Eigen::MatrixXd out = predict_grid(p, g);
  for (Eigen::Index i = 0; i < g.space_nodes(); ++i) {
    for (Eigen::Index n = 0; n < g.time_nodes(); ++n) {
      EXPECT_NEAR(out(i, n), forward(p, g.x(i), g.t(n)), 1e-14);
    }
  }
}

}  // namespace
}  // namespace tse
