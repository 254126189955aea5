#ifndef TSE_OPTIM_HPP
#define TSE_OPTIM_HPP

#include <Eigen/Dense>

#include <cmath>
#include <cstdint>
#include <deque>
#include <functional>
#include <string>
#include <vector>

namespace tse {

struct AdamOptions {
  double learning_rate = 1e-3;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double epsilon = 1e-8;
};

template <typename Scalar>
struct AdamState {
  using Vector = Eigen::Matrix<Scalar, Eigen::Dynamic, 1>;
  Vector first_moment;
  Vector second_moment;
  std::int64_t step = 0;

  static AdamState zeros(Eigen::Index n) {
    return {Vector::Zero(n), Vector::Zero(n), 0};
  }
};

/// One bias-corrected Adam update, in place.
template <typename Scalar>
void adam_step(Eigen::Matrix<Scalar, Eigen::Dynamic, 1>& params,
               const Eigen::Matrix<Scalar, Eigen::Dynamic, 1>& grad, AdamState<Scalar>& state,
               const AdamOptions& opt) {
  if (state.first_moment.size() != params.size()) state = AdamState<Scalar>::zeros(params.size());
  state.step += 1;
  const Scalar b1 = static_cast<Scalar>(opt.beta1);
  const Scalar b2 = static_cast<Scalar>(opt.beta2);
  state.first_moment = b1 * state.first_moment + (Scalar(1) - b1) * grad;
  state.second_moment = b2 * state.second_moment + (Scalar(1) - b2) * grad.cwiseAbs2();
  const auto k = static_cast<double>(state.step);
  const Scalar correct1 = static_cast<Scalar>(1.0 - std::pow(opt.beta1, k));
  const Scalar correct2 = static_cast<Scalar>(1.0 - std::pow(opt.beta2, k));
  const Scalar lr = static_cast<Scalar>(opt.learning_rate);
  const Scalar eps = static_cast<Scalar>(opt.epsilon);
  params.array() -= lr * (state.first_moment.array() / correct1) /
                    ((state.second_moment.array() / correct2).sqrt() + eps);
}

struct LbfgsOptions {
  std::int64_t max_iterations = 50000;
  int memory = 10;
  double gradient_tolerance = 1e-9;
  double initial_step = 1.0;
  double contraction = 0.5;
  double sufficient_decrease = 1e-4;
  int max_line_search_evaluations = 40;
  double curvature_floor = 1e-12;
};

enum class LbfgsStop { kIterationLimit, kGradientTolerance, kLineSearchFailed, kNonFiniteLoss };

std::string to_string(LbfgsStop reason);

struct LbfgsResult {
  std::int64_t iterations = 0;
  std::int64_t evaluations = 0;
  double final_loss = 0.0;
  double final_gradient_norm = 0.0;
  std::int64_t memory_resets = 0;
  LbfgsStop reason = LbfgsStop::kIterationLimit;
};

/// Objective returning f(x) and writing grad f(x) into its second argument.
template <typename Scalar>
using Objective = std::function<Scalar(const Eigen::Matrix<Scalar, Eigen::Dynamic, 1>&,
                                       Eigen::Matrix<Scalar, Eigen::Dynamic, 1>&)>;

/// Called after every accepted step with (iteration, loss).
using IterationCallback = std::function<void(std::int64_t, double)>;

/// Limited-memory BFGS: two-loop recursion with backtracking Armijo search.
/// Accepted steps never increase the objective.
template <typename Scalar>
LbfgsResult lbfgs_minimize(const Objective<Scalar>& objective,
                           Eigen::Matrix<Scalar, Eigen::Dynamic, 1>& x, const LbfgsOptions& opt,
                           const IterationCallback& on_iteration = {}) {
  using Vector = Eigen::Matrix<Scalar, Eigen::Dynamic, 1>;
  LbfgsResult result;
  Vector grad(x.size());
  Scalar loss = objective(x, grad);
  result.evaluations = 1;
  result.final_loss = static_cast<double>(loss);
  result.final_gradient_norm = static_cast<double>(grad.norm());
  if (!std::isfinite(result.final_loss)) {
    result.reason = LbfgsStop::kNonFiniteLoss;
    return result;
  }

  std::deque<Vector> s_hist, y_hist;
  std::deque<Scalar> rho_hist;
  Vector direction(x.size()), trial(x.size()), trial_grad(x.size());
  std::vector<Scalar> alpha(static_cast<std::size_t>(opt.memory));

  while (true) {
    if (result.final_gradient_norm < opt.gradient_tolerance) {
      result.reason = LbfgsStop::kGradientTolerance;
      return result;
    }
    if (result.iterations >= opt.max_iterations) {
      result.reason = LbfgsStop::kIterationLimit;
      return result;
    }

    // Two-loop recursion for -H grad.
    direction = -grad;
    const std::size_t m = s_hist.size();
    for (std::size_t i = m; i-- > 0;) {
      alpha[i] = rho_hist[i] * s_hist[i].dot(direction);
      direction -= alpha[i] * y_hist[i];
    }
    if (m > 0) direction *= s_hist.back().dot(y_hist.back()) / y_hist.back().squaredNorm();
    for (std::size_t i = 0; i < m; ++i) {
      const Scalar beta = rho_hist[i] * y_hist[i].dot(direction);
      direction += (alpha[i] - beta) * s_hist[i];
    }
    Scalar slope = grad.dot(direction);
    if (!(slope < 0)) {
      ++result.memory_resets;
      s_hist.clear();
      y_hist.clear();
      rho_hist.clear();
      direction = -grad;
      slope = -grad.squaredNorm();
    }

    Scalar step = static_cast<Scalar>(opt.initial_step);
    bool accepted = false;
    Scalar trial_loss = 0;
    for (int e = 0; e < opt.max_line_search_evaluations; ++e) {
      trial = x + step * direction;
      trial_loss = objective(trial, trial_grad);
      ++result.evaluations;
      if (std::isfinite(static_cast<double>(trial_loss)) &&
          trial_loss <= loss + static_cast<Scalar>(opt.sufficient_decrease) * step * slope) {
        accepted = true;
        break;
      }
      step *= static_cast<Scalar>(opt.contraction);
    }
    if (!accepted) {
      result.reason = LbfgsStop::kLineSearchFailed;
      return result;
    }

    Vector s = trial - x;
    Vector y = trial_grad - grad;
    const Scalar curvature = s.dot(y);
    x.swap(trial);
    grad.swap(trial_grad);
    loss = trial_loss;
    ++result.iterations;
    result.final_loss = static_cast<double>(loss);
    result.final_gradient_norm = static_cast<double>(grad.norm());
    if (opt.memory > 0 && curvature > static_cast<Scalar>(opt.curvature_floor)) {
      if (static_cast<int>(s_hist.size()) == opt.memory) {
        s_hist.pop_front();
        y_hist.pop_front();
        rho_hist.pop_front();
      }
      s_hist.push_back(std::move(s));
      y_hist.push_back(std::move(y));
      rho_hist.push_back(Scalar(1) / curvature);
    } else if (opt.memory > 0) {
      // Degenerate pair: restart from steepest descent.
      ++result.memory_resets;
      s_hist.clear();
      y_hist.clear();
      rho_hist.clear();
    }
    if (on_iteration) on_iteration(result.iterations, result.final_loss);
  }
}

}  // namespace tse

#endif  // TSE_OPTIM_HPP
