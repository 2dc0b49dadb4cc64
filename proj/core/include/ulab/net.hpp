#pragma once

#include <cstdint>
#include <iosfwd>
#include <span>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "ulab/dataset.hpp"

namespace ulab {

/// Probabilities are clamped to [kProbClamp, 1 - kProbClamp] so that every
/// log term in the losses stays finite.
inline constexpr double kProbClamp = 1e-7;

enum class Activation { relu, tanh, identity, sigmoid };

std::string to_string(Activation a);
Activation parse_activation(const std::string& text);

/// Shape of a binary classifier: input -> hidden layers -> one sigmoid unit.
/// An empty hidden list is a single logistic layer.
struct LayerSpec {
  int input_width = 0;
  std::vector<int> hidden_widths;
  int output_width = 1;
  Activation hidden_activation = Activation::relu;

  void validate() const;
};

struct DenseLayer {
  Eigen::MatrixXd weight;  // out x in
  Eigen::VectorXd bias;    // out
  Activation activation = Activation::relu;

  int fan_in() const noexcept { return static_cast<int>(weight.cols()); }
  int fan_out() const noexcept { return static_cast<int>(weight.rows()); }
};

struct NetworkParams {
  std::vector<DenseLayer> layers;

  int input_width() const noexcept { return layers.empty() ? 0 : layers.front().fan_in(); }
  int output_width() const noexcept { return layers.empty() ? 0 : layers.back().fan_out(); }
  bool all_finite() const;

  friend bool operator==(const NetworkParams& a, const NetworkParams& b);
};

struct LayerGrad {
  Eigen::MatrixXd weight;
  Eigen::VectorXd bias;
};
using Gradients = std::vector<LayerGrad>;

Gradients zeros_like(const NetworkParams& params);

/// Classifier parameters: weights ~ U(-1/sqrt(fan_in), 1/sqrt(fan_in)), biases
/// zero, last layer sigmoid. Deterministic in (spec, seed).
NetworkParams init_params(const LayerSpec& spec, std::uint64_t seed);

/// Stack of dense layers that all use `activation` (no sigmoid head). Used as
/// the shared feature extractor of the adversarial trainer.
NetworkParams init_feature_extractor(int input_width, const std::vector<int>& widths,
                                     Activation activation, std::uint64_t seed);

/// Concatenates layer stacks, e.g. feature extractor followed by a head.
NetworkParams compose(const NetworkParams& first, const NetworkParams& second);

/// Per-layer pre-activations and activations for one batch.
/// activations[0] is the input; activations[l + 1] is the output of layer l.
struct ForwardTrace {
  std::vector<Eigen::MatrixXd> pre;
  std::vector<Eigen::MatrixXd> activations;

  Eigen::Index batch_size() const noexcept { return activations.front().rows(); }
  const Eigen::MatrixXd& output() const noexcept { return activations.back(); }
  /// Final-layer pre-activation (the logit for a sigmoid head).
  Eigen::VectorXd logits() const { return pre.back().col(0); }
  /// Clamped probabilities; only valid when the last layer is sigmoid.
  Eigen::VectorXd probabilities() const { return activations.back().col(0); }
};

/// Throws ShapeError when batch.cols() differs from the network input width.
ForwardTrace forward(const NetworkParams& params, const Eigen::Ref<const Eigen::MatrixXd>& batch);

/// Probabilities only, without keeping the trace.
Eigen::VectorXd predict(const NetworkParams& params, const Eigen::Ref<const Eigen::MatrixXd>& batch);

/// Gradients of the batch-mean loss. dL_dp[i] is the derivative of the i-th
/// example's loss with respect to its probability; it is chained through the
/// sigmoid and every layer and averaged over the batch.
Gradients backward(const NetworkParams& params, const ForwardTrace& trace, std::span<const double> dL_dp);

/// Generic backpropagation from dLoss/d(output activation) (already including
/// any batch averaging). When input_grad is non-null it receives dLoss/d(input).
Gradients backward_from_output(const NetworkParams& params, const ForwardTrace& trace,
                               const Eigen::MatrixXd& dL_doutput, Eigen::MatrixXd* input_grad = nullptr);

enum class OptimizerKind { sgd, adam };

struct OptimizerState {
  OptimizerKind kind = OptimizerKind::adam;
  double learning_rate = 1e-3;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double epsilon = 1e-8;
  long t = 0;
  Gradients m;
  Gradients v;

  static OptimizerState sgd(double lr) {
    OptimizerState s;
    s.kind = OptimizerKind::sgd;
    s.learning_rate = lr;
    return s;
  }
  static OptimizerState adam(double lr) {
    OptimizerState s;
    s.learning_rate = lr;
    return s;
  }
};

/// One optimizer update in place. Throws NumericError naming the first layer
/// whose gradient holds a NaN or infinity; parameters are left untouched then.
void step(NetworkParams& params, const Gradients& grads, OptimizerState& state);

/// Text format: "network <layers>" then per layer "layer <in> <out> <activation>",
/// a "w" line with the row-major weights and a "b" line with the biases.
void write_params(std::ostream& out, const NetworkParams& params);
NetworkParams read_params(std::istream& in);

}  // namespace ulab
