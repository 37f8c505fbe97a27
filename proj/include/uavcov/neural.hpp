#pragma once

// Dense ReLU networks with hand-written backprop, Adam and Polyak updates.
// Batched calls take one sample per column.

#include <Eigen/Dense>

#include <cstddef>
#include <iosfwd>
#include <vector>

#include "uavcov/random.hpp"

namespace uavcov {

enum class Activation { relu, tanh, linear };

struct MlpParams {
  std::vector<std::size_t> layer_sizes;     // input, hidden..., output
  std::vector<Eigen::MatrixXd> weights;     // layer l: sizes[l+1] x sizes[l]
  std::vector<Eigen::VectorXd> biases;
  Activation hidden = Activation::relu;
  Activation output = Activation::linear;

  std::size_t num_layers() const { return weights.size(); }
  std::size_t input_size() const { return layer_sizes.front(); }
  std::size_t output_size() const { return layer_sizes.back(); }
  std::size_t parameter_count() const;
  /// Throws std::invalid_argument on inconsistent shapes or non-finite values.
  void validate() const;
};

/// Gradient w.r.t. every parameter, shaped like MlpParams.
struct MlpGradients {
  std::vector<Eigen::MatrixXd> weights;
  std::vector<Eigen::VectorXd> biases;

  static MlpGradients zeros_like(const MlpParams& params);
  void scale(double s);
  bool all_finite() const;
};

/// Post-activation outputs of every layer; activations[0] is the input.
struct ForwardCache {
  std::vector<Eigen::MatrixXd> activations;
};

struct AdamState {
  std::size_t step_count = 0;
  MlpGradients first_moment;
  MlpGradients second_moment;
  double learning_rate = 1e-4;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double epsilon = 1e-8;

  static AdamState for_params(const MlpParams& params, double learning_rate);
};

Eigen::MatrixXd forward(const MlpParams& params, const Eigen::MatrixXd& input,
                        ForwardCache* cache = nullptr);
Eigen::VectorXd forward(const MlpParams& params, const Eigen::VectorXd& input,
                        ForwardCache* cache = nullptr);

/// Reverse pass from `output_gradient` (same shape as the forward output).
/// Parameter gradients are summed over the batch into `grads` when non-null.
/// Returns the input gradient, or an empty matrix when `input_gradient` is
/// false.
Eigen::MatrixXd backward(const MlpParams& params, const ForwardCache& cache,
                         const Eigen::MatrixXd& output_gradient, MlpGradients* grads,
                         bool input_gradient = true);

/// Bias-corrected Adam descent step. Throws std::domain_error on non-finite
/// gradients and leaves params/state untouched in that case.
void adam_step(MlpParams& params, const MlpGradients& grads, AdamState& state);

/// target <- tau * online + (1 - tau) * target
void soft_update(MlpParams& target, const MlpParams& online, double tau);

/// He-uniform hidden layers, zero hidden biases; final layer weights and
/// biases uniform in [-3e-3, 3e-3].
MlpParams init_params(RandomStream& rng, const std::vector<std::size_t>& layer_sizes,
                      Activation output_activation);

/// Checkpoint layout, little-endian: "UAVMLP\0\1", u64 layer count, u64
/// sizes, u8 hidden tag, u8 output tag, then per layer the row-major weight
/// matrix followed by the bias vector as f64.
void save_params(std::ostream& out, const MlpParams& params);
MlpParams load_params(std::istream& in);

}  // namespace uavcov
