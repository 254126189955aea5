#ifndef TSE_TRAIN_HPP
#define TSE_TRAIN_HPP

#include "tse/lwr.hpp"
#include "tse/mlp.hpp"
#include "tse/optim.hpp"

#include <cstdint>
#include <string>
#include <vector>

namespace tse {

struct Sample {
  double x = 0.0;
  double t = 0.0;
  double rho = 0.0;
  friend bool operator==(const Sample&, const Sample&) = default;
};

/// Sparse observations drawn from one environment's density field.
struct SampleSet {
  std::vector<Sample> points;
  Grid source_grid;
  Environment source_env;
  std::uint64_t seed = 0;

  std::size_t size() const { return points.size(); }
  Batch<double> to_batch() const;
};

/// Uniform draw of `count` distinct grid nodes; deterministic in `seed`.
SampleSet sample_dataset(const DensityField& field, std::size_t count, std::uint64_t seed);

/// Every node of the field, in node order (x-major).
SampleSet full_sample_set(const DensityField& field);

/// Concatenation; the result keeps `a`'s provenance.
SampleSet merge(const SampleSet& a, const SampleSet& b);

struct TrainConfig {
  std::vector<int> layer_sizes = hidden_architecture();
  std::int64_t adam_iterations = 15000;
  AdamOptions adam;
  std::int64_t lbfgs_iterations = 50000;
  int lbfgs_memory = 10;
  double lbfgs_tolerance = 1e-9;
  std::uint64_t seed = 0;
  InputNormalization<double> normalization;
  /// Loss is recorded every `history_interval` iterations of each phase.
  int history_interval = 100;

  void validate() const;
  LbfgsOptions lbfgs_options() const;
};

struct HistoryPoint {
  std::string phase;  // "adam" or "lbfgs"
  std::int64_t iteration = 0;
  double mse = 0.0;
};

struct TrainReport {
  double initial_mse = 0.0;
  double final_mse = 0.0;
  std::vector<HistoryPoint> mse_history;
  double wall_time_seconds = 0.0;
  std::int64_t adam_iterations_run = 0;
  std::int64_t lbfgs_iterations_run = 0;
  std::int64_t lbfgs_evaluations = 0;
  std::int64_t lbfgs_memory_resets = 0;
  std::string lbfgs_stop_reason = "not run";
};

/// Adam then L-BFGS from the given starting point, full batch.
TrainReport train_from(MlpParams<double>& params, const SampleSet& samples,
                       const TrainConfig& config);

/// Fresh initialization from config.seed, then train_from.
std::pair<MlpParams<double>, TrainReport> train(const SampleSet& samples,
                                                const TrainConfig& config);

/// Predicted density at every node of `grid`.
Eigen::MatrixXd predict_grid(const MlpParams<double>& params, const Grid& grid);

}  // namespace tse

#endif  // TSE_TRAIN_HPP
