#ifndef TSE_MLP_HPP
#define TSE_MLP_HPP

#include <Eigen/Dense>

#include <cmath>
#include <cstdint>
#include <random>
#include <span>
#include <stdexcept>
#include <vector>

namespace tse {

enum class Activation : std::uint8_t { kTanh = 0 };

/// Affine map applied to (x, t) before the first layer:
/// x_in = (x - x_offset) * x_scale, same for t.
template <typename Scalar>
struct InputNormalization {
  Scalar x_offset = 0, x_scale = 1, t_offset = 0, t_scale = 1;

  /// Maps [x_lo, x_hi] and [t_lo, t_hi] onto [-1, 1].
  static InputNormalization to_unit_box(Scalar x_lo, Scalar x_hi, Scalar t_lo, Scalar t_hi) {
    return {Scalar(0.5) * (x_lo + x_hi), Scalar(2) / (x_hi - x_lo), Scalar(0.5) * (t_lo + t_hi),
            Scalar(2) / (t_hi - t_lo)};
  }

  friend bool operator==(const InputNormalization&, const InputNormalization&) = default;
};

/// Dense network rho_hat(x, t): tanh hidden layers, linear scalar output.
template <typename Scalar>
struct MlpParams {
  using Matrix = Eigen::Matrix<Scalar, Eigen::Dynamic, Eigen::Dynamic>;
  using Vector = Eigen::Matrix<Scalar, Eigen::Dynamic, 1>;

  std::vector<int> layer_sizes;
  std::vector<Matrix> weights;  // weights[l] is layer_sizes[l+1] x layer_sizes[l]
  std::vector<Vector> biases;
  Activation activation = Activation::kTanh;
  InputNormalization<Scalar> normalization;

  std::size_t layer_count() const { return weights.size(); }

  Eigen::Index parameter_count() const {
    Eigen::Index total = 0;
    for (std::size_t l = 0; l < weights.size(); ++l) total += weights[l].size() + biases[l].size();
    return total;
  }

  /// Same shapes, every entry zero.
  MlpParams zeros_like() const {
    MlpParams out = *this;
    for (auto& w : out.weights) w.setZero();
    for (auto& b : out.biases) b.setZero();
    return out;
  }

  /// Packs every layer's weights (column-major) then biases into one vector.
  Vector flatten() const {
    Vector flat(parameter_count());
    Eigen::Index at = 0;
    for (std::size_t l = 0; l < weights.size(); ++l) {
      flat.segment(at, weights[l].size()) = weights[l].reshaped();
      at += weights[l].size();
      flat.segment(at, biases[l].size()) = biases[l];
      at += biases[l].size();
    }
    return flat;
  }

  void assign(const Vector& flat) {
    if (flat.size() != parameter_count()) throw std::invalid_argument("parameter vector size mismatch");
    Eigen::Index at = 0;
    for (std::size_t l = 0; l < weights.size(); ++l) {
      weights[l].reshaped() = flat.segment(at, weights[l].size());
      at += weights[l].size();
      biases[l] = flat.segment(at, biases[l].size());
      at += biases[l].size();
    }
  }

  bool all_finite() const {
    for (std::size_t l = 0; l < weights.size(); ++l) {
      if (!weights[l].allFinite() || !biases[l].allFinite()) return false;
    }
    return true;
  }

  friend bool operator==(const MlpParams& a, const MlpParams& b) {
    if (a.layer_sizes != b.layer_sizes || a.activation != b.activation ||
        !(a.normalization == b.normalization)) {
      return false;
    }
    for (std::size_t l = 0; l < a.weights.size(); ++l) {
      if (a.weights[l] != b.weights[l] || a.biases[l] != b.biases[l]) return false;
    }
    return true;
  }
};

/// [2, width x depth, 1]; the default is ten hidden layers of forty units.
std::vector<int> hidden_architecture(int depth = 10, int width = 40);

/// Glorot-uniform weights, zero biases, deterministic in `seed`.
template <typename Scalar>
MlpParams<Scalar> init_params(const std::vector<int>& layer_sizes, std::uint64_t seed) {
  if (layer_sizes.size() < 2) throw std::invalid_argument("need at least input and output layers");
  if (layer_sizes.front() != 2) throw std::invalid_argument("input layer must have width 2");
  if (layer_sizes.back() != 1) throw std::invalid_argument("output layer must have width 1");
  for (int w : layer_sizes) {
    if (w <= 0) throw std::invalid_argument("layer widths must be positive");
  }
  MlpParams<Scalar> p;
  p.layer_sizes = layer_sizes;
  std::mt19937_64 engine(seed);
  for (std::size_t l = 0; l + 1 < layer_sizes.size(); ++l) {
    const int fan_in = layer_sizes[l];
    const int fan_out = layer_sizes[l + 1];
    const double limit = std::sqrt(6.0 / (fan_in + fan_out));
    typename MlpParams<Scalar>::Matrix w(fan_out, fan_in);
    // Filled row by row so the draw order is independent of storage order.
    for (int r = 0; r < fan_out; ++r) {
      for (int c = 0; c < fan_in; ++c) {
        // 53 random bits mapped to [-limit, limit); not std::uniform_real_distribution,
        // whose output is implementation-defined.
        const double unit = static_cast<double>(engine() >> 11) * 0x1.0p-53;
        w(r, c) = static_cast<Scalar>((2.0 * unit - 1.0) * limit);
      }
    }
    p.weights.push_back(std::move(w));
    p.biases.push_back(MlpParams<Scalar>::Vector::Zero(fan_out));
  }
  return p;
}

/// Elementwise tanh through the vectorized exp; |error| stays near machine epsilon.
template <typename Derived>
auto tanh_inplace(Eigen::ArrayBase<Derived>& z) {
  using Scalar = typename Derived::Scalar;
  // tanh(z) = 1 - 2 / (exp(2z) + 1); clamp keeps exp finite.
  z = Scalar(1) - Scalar(2) / ((Scalar(2) * z.cwiseMax(Scalar(-40)).cwiseMin(Scalar(40))).exp() + Scalar(1));
}

/// Forward pass over a batch; `inputs` is 2 x N raw (x, t) columns.
template <typename Scalar>
Eigen::Matrix<Scalar, 1, Eigen::Dynamic> forward_batch(
    const MlpParams<Scalar>& p, const Eigen::Matrix<Scalar, 2, Eigen::Dynamic>& inputs) {
  using Matrix = typename MlpParams<Scalar>::Matrix;
  if (!inputs.allFinite()) throw std::invalid_argument("forward: non-finite input");
  Matrix a(2, inputs.cols());
  a.row(0) = (inputs.row(0).array() - p.normalization.x_offset) * p.normalization.x_scale;
  a.row(1) = (inputs.row(1).array() - p.normalization.t_offset) * p.normalization.t_scale;
  const std::size_t last = p.layer_count() - 1;
  for (std::size_t l = 0; l < p.layer_count(); ++l) {
    Matrix z = p.weights[l] * a;
    z.colwise() += p.biases[l];
    if (l != last) {
      auto arr = z.array();
      tanh_inplace(arr);
    }
    a = std::move(z);
  }
  return a.row(0);
}

template <typename Scalar>
Scalar forward(const MlpParams<Scalar>& p, Scalar x, Scalar t) {
  Eigen::Matrix<Scalar, 2, Eigen::Dynamic> in(2, 1);
  in << x, t;
  return forward_batch(p, in)(0);
}

/// Training points packed for batched evaluation.
template <typename Scalar>
struct Batch {
  Eigen::Matrix<Scalar, 2, Eigen::Dynamic> inputs;   // raw (x, t)
  Eigen::Matrix<Scalar, 1, Eigen::Dynamic> targets;  // rho
  Eigen::Index size() const { return inputs.cols(); }
};

/// Mean squared error over the batch.
template <typename Scalar>
Scalar mse_loss(const MlpParams<Scalar>& p, const Batch<Scalar>& batch) {
  if (batch.size() == 0) throw std::invalid_argument("mse_loss: empty sample set");
  return (forward_batch(p, batch.inputs) - batch.targets).squaredNorm() /
         static_cast<Scalar>(batch.size());
}

/// Loss and reverse-mode gradient in one pass. Gradient shapes match `p`.
template <typename Scalar>
Scalar loss_and_gradient(const MlpParams<Scalar>& p, const Batch<Scalar>& batch,
                         MlpParams<Scalar>& grad) {
  using Matrix = typename MlpParams<Scalar>::Matrix;
  const Eigen::Index n = batch.size();
  if (n == 0) throw std::invalid_argument("gradient: empty sample set");
  const std::size_t layers = p.layer_count();

  // activations[l] is the input to layer l.
  std::vector<Matrix> activations(layers + 1);
  activations[0].resize(2, n);
  activations[0].row(0) =
      (batch.inputs.row(0).array() - p.normalization.x_offset) * p.normalization.x_scale;
  activations[0].row(1) =
      (batch.inputs.row(1).array() - p.normalization.t_offset) * p.normalization.t_scale;
  for (std::size_t l = 0; l < layers; ++l) {
    Matrix z = p.weights[l] * activations[l];
    z.colwise() += p.biases[l];
    if (l + 1 != layers) {
      auto arr = z.array();
      tanh_inplace(arr);
    }
    activations[l + 1] = std::move(z);
  }

  Matrix delta = activations[layers];
  delta.row(0) -= batch.targets;
  const Scalar loss = delta.squaredNorm() / static_cast<Scalar>(n);
  delta *= Scalar(2) / static_cast<Scalar>(n);

  if (grad.layer_sizes != p.layer_sizes) grad = p.zeros_like();
  for (std::size_t l = layers; l-- > 0;) {
    grad.weights[l].noalias() = delta * activations[l].transpose();
    grad.biases[l] = delta.rowwise().sum();
    if (l == 0) break;
    Matrix back = p.weights[l].transpose() * delta;
    delta = back.array() * (Scalar(1) - activations[l].array().square());
  }
  return loss;
}

template <typename Scalar>
MlpParams<Scalar> gradient(const MlpParams<Scalar>& p, const Batch<Scalar>& batch) {
  MlpParams<Scalar> grad = p.zeros_like();
  loss_and_gradient(p, batch, grad);
  return grad;
}

extern template MlpParams<double> init_params<double>(const std::vector<int>&, std::uint64_t);

}  // namespace tse

#endif  // TSE_MLP_HPP
