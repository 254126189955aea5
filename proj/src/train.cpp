#include "tse/train.hpp"

#include <algorithm>
#include <chrono>
#include <numeric>
#include <random>
#include <stdexcept>

namespace tse {

namespace {

// Unbiased draw in [0, bound) by rejection; stable across standard libraries.
std::uint64_t bounded(std::mt19937_64& engine, std::uint64_t bound) {
  const std::uint64_t limit = std::numeric_limits<std::uint64_t>::max() -
                              std::numeric_limits<std::uint64_t>::max() % bound;
  std::uint64_t r;
  do {
    r = engine();
  } while (r >= limit);
  return r % bound;
}

}  // namespace

std::string to_string(LbfgsStop reason) {
  switch (reason) {
    case LbfgsStop::kIterationLimit: return "iteration limit";
    case LbfgsStop::kGradientTolerance: return "gradient tolerance";
    case LbfgsStop::kLineSearchFailed: return "line search failed";
    case LbfgsStop::kNonFiniteLoss: return "non-finite loss";
  }
  return "unknown";
}

Batch<double> SampleSet::to_batch() const {
  Batch<double> batch;
  const auto n = static_cast<Eigen::Index>(points.size());
  batch.inputs.resize(2, n);
  batch.targets.resize(1, n);
  for (Eigen::Index k = 0; k < n; ++k) {
    const Sample& s = points[static_cast<std::size_t>(k)];
    batch.inputs(0, k) = s.x;
    batch.inputs(1, k) = s.t;
    batch.targets(0, k) = s.rho;
  }
  return batch;
}

SampleSet sample_dataset(const DensityField& field, std::size_t count, std::uint64_t seed) {
  const auto total = static_cast<std::size_t>(field.grid.node_count());
  if (count > total) {
    throw std::invalid_argument("sample_dataset: requested " + std::to_string(count) +
                                " samples from " + std::to_string(total) + " nodes");
  }
  std::vector<std::uint64_t> order(total);
  std::iota(order.begin(), order.end(), 0);
  std::mt19937_64 engine(seed);
  // Partial Fisher-Yates: the first `count` entries are the draw.
  for (std::size_t k = 0; k < count; ++k) {
    const std::size_t j = k + bounded(engine, total - k);
    std::swap(order[k], order[j]);
  }
  SampleSet out{{}, field.grid, field.env, seed};
  out.points.reserve(count);
  const auto nx = static_cast<std::uint64_t>(field.grid.space_nodes());
  for (std::size_t k = 0; k < count; ++k) {
    const auto i = static_cast<Eigen::Index>(order[k] % nx);
    const auto n = static_cast<Eigen::Index>(order[k] / nx);
    out.points.push_back({field.grid.x(i), field.grid.t(n), field.rho(i, n)});
  }
  return out;
}

SampleSet full_sample_set(const DensityField& field) {
  SampleSet out{{}, field.grid, field.env, 0};
  out.points.reserve(static_cast<std::size_t>(field.grid.node_count()));
  for (Eigen::Index i = 0; i < field.grid.space_nodes(); ++i) {
    for (Eigen::Index n = 0; n < field.grid.time_nodes(); ++n) {
      out.points.push_back({field.grid.x(i), field.grid.t(n), field.rho(i, n)});
    }
  }
  return out;
}

SampleSet merge(const SampleSet& a, const SampleSet& b) {
  SampleSet out = a;
  out.points.insert(out.points.end(), b.points.begin(), b.points.end());
  return out;
}

void TrainConfig::validate() const {
  if (adam_iterations < 0 || lbfgs_iterations < 0) {
    throw std::invalid_argument("iteration counts must be >= 0");
  }
  if (!(adam.learning_rate > 0.0)) throw std::invalid_argument("learning rate must be > 0");
  if (lbfgs_memory < 1) throw std::invalid_argument("lbfgs memory must be >= 1");
  if (history_interval < 1) throw std::invalid_argument("history interval must be >= 1");
}

LbfgsOptions TrainConfig::lbfgs_options() const {
  LbfgsOptions opt;
  opt.max_iterations = lbfgs_iterations;
  opt.memory = lbfgs_memory;
  opt.gradient_tolerance = lbfgs_tolerance;
  return opt;
}

TrainReport train_from(MlpParams<double>& params, const SampleSet& samples,
                       const TrainConfig& config) {
  config.validate();
  if (samples.points.empty()) throw std::invalid_argument("train: empty sample set");
  const auto start = std::chrono::steady_clock::now();
  const Batch<double> batch = samples.to_batch();

  TrainReport report;
  MlpParams<double> grad = params.zeros_like();
  Eigen::VectorXd theta = params.flatten();
  auto evaluate = [&](const Eigen::VectorXd& at, Eigen::VectorXd& g) {
    params.assign(at);
    const double loss = loss_and_gradient(params, batch, grad);
    g = grad.flatten();
    return loss;
  };

  Eigen::VectorXd g(theta.size());
  report.initial_mse = mse_loss(params, batch);
  report.final_mse = report.initial_mse;

  AdamState<double> state = AdamState<double>::zeros(theta.size());
  for (std::int64_t it = 0; it < config.adam_iterations; ++it) {
    const double loss = evaluate(theta, g);
    if (!std::isfinite(loss)) throw std::runtime_error("adam phase: loss became non-finite");
    if (it % config.history_interval == 0) report.mse_history.push_back({"adam", it, loss});
    adam_step(theta, g, state, config.adam);
    ++report.adam_iterations_run;
  }
  params.assign(theta);

  if (config.lbfgs_iterations > 0) {
    const Objective<double> objective = evaluate;
    const LbfgsResult res = lbfgs_minimize<double>(
        objective, theta, config.lbfgs_options(), [&](std::int64_t it, double loss) {
          if (it % config.history_interval == 0) report.mse_history.push_back({"lbfgs", it, loss});
        });
    report.lbfgs_iterations_run = res.iterations;
    report.lbfgs_evaluations = res.evaluations;
    report.lbfgs_memory_resets = res.memory_resets;
    report.lbfgs_stop_reason = to_string(res.reason);
    params.assign(theta);
  }

  report.final_mse = mse_loss(params, batch);
  report.mse_history.push_back(
      {"final", report.adam_iterations_run + report.lbfgs_iterations_run, report.final_mse});
  report.wall_time_seconds =
      std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
  return report;
}

std::pair<MlpParams<double>, TrainReport> train(const SampleSet& samples,
                                                const TrainConfig& config) {
  config.validate();
  MlpParams<double> params = init_params<double>(config.layer_sizes, config.seed);
  params.normalization = config.normalization;
  TrainReport report = train_from(params, samples, config);
  return {std::move(params), std::move(report)};
}

Eigen::MatrixXd predict_grid(const MlpParams<double>& params, const Grid& grid) {
  const Eigen::Index nx = grid.space_nodes();
  const Eigen::Index nt = grid.time_nodes();
  Eigen::MatrixXd out(nx, nt);
  // One time column per batch keeps the working set small.
  Eigen::Matrix<double, 2, Eigen::Dynamic> inputs(2, nx);
  for (Eigen::Index i = 0; i < nx; ++i) inputs(0, i) = grid.x(i);
  for (Eigen::Index n = 0; n < nt; ++n) {
    inputs.row(1).setConstant(grid.t(n));
    out.col(n) = forward_batch(params, inputs).transpose();
  }
  return out;
}

}  // namespace tse
