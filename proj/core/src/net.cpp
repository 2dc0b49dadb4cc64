#include "ulab/net.hpp"

#include <fmt/format.h>

#include <cmath>
#include <istream>
#include <ostream>

#include "ulab/error.hpp"
#include "ulab/rng.hpp"

namespace ulab {

std::string to_string(Activation a) {
  switch (a) {
    case Activation::relu: return "relu";
    case Activation::tanh: return "tanh";
    case Activation::identity: return "identity";
    case Activation::sigmoid: return "sigmoid";
  }
  return "?";
}

Activation parse_activation(const std::string& text) {
  if (text == "relu") return Activation::relu;
  if (text == "tanh") return Activation::tanh;
  if (text == "identity") return Activation::identity;
  if (text == "sigmoid") return Activation::sigmoid;
  throw InvalidArgument("unknown activation '" + text + "'");
}

void LayerSpec::validate() const {
  if (input_width <= 0) throw InvalidArgument("input_width must be positive");
  for (int w : hidden_widths)
    if (w <= 0) throw InvalidArgument("hidden widths must be positive");
  if (output_width != 1) throw InvalidArgument("binary classifiers have output_width 1");
  if (hidden_activation != Activation::relu && hidden_activation != Activation::tanh)
    throw InvalidArgument("hidden activation must be relu or tanh");
}

bool NetworkParams::all_finite() const {
  for (const auto& l : layers)
    if (!l.weight.allFinite() || !l.bias.allFinite()) return false;
  return true;
}

bool operator==(const NetworkParams& a, const NetworkParams& b) {
  if (a.layers.size() != b.layers.size()) return false;
  for (std::size_t i = 0; i < a.layers.size(); ++i) {
    const auto& la = a.layers[i];
    const auto& lb = b.layers[i];
    if (la.activation != lb.activation || la.weight.rows() != lb.weight.rows() ||
        la.weight.cols() != lb.weight.cols() || la.weight != lb.weight || la.bias != lb.bias)
      return false;
  }
  return true;
}

Gradients zeros_like(const NetworkParams& params) {
  Gradients g(params.layers.size());
  for (std::size_t i = 0; i < g.size(); ++i) {
    g[i].weight = Eigen::MatrixXd::Zero(params.layers[i].weight.rows(), params.layers[i].weight.cols());
    g[i].bias = Eigen::VectorXd::Zero(params.layers[i].bias.size());
  }
  return g;
}

namespace {

DenseLayer make_layer(int in, int out, Activation act, Rng& rng) {
  DenseLayer layer;
  layer.activation = act;
  layer.weight.resize(out, in);
  layer.bias = Eigen::VectorXd::Zero(out);
  const double bound = 1.0 / std::sqrt(static_cast<double>(in));
  // Row-major draw order keeps the stream layout independent of Eigen storage.
  for (int r = 0; r < out; ++r)
    for (int c = 0; c < in; ++c) layer.weight(r, c) = rng.uniform(-bound, bound);
  return layer;
}

void apply_activation(Activation act, const Eigen::MatrixXd& pre, Eigen::MatrixXd& out) {
  switch (act) {
    case Activation::relu: out = pre.cwiseMax(0.0); break;
    case Activation::tanh: out = pre.array().tanh(); break;
    case Activation::identity: out = pre; break;
    case Activation::sigmoid:
      out = pre.unaryExpr([](double v) {
        const double s = v >= 0 ? 1.0 / (1.0 + std::exp(-v)) : std::exp(v) / (1.0 + std::exp(v));
        return std::clamp(s, kProbClamp, 1.0 - kProbClamp);
      });
      break;
  }
}

// Multiplies grad (dL/d activation) in place by d activation / d pre.
void chain_activation(Activation act, const Eigen::MatrixXd& pre, const Eigen::MatrixXd& post,
                      Eigen::MatrixXd& grad) {
  switch (act) {
    case Activation::relu: grad.array() *= (pre.array() > 0.0).cast<double>(); break;
    case Activation::tanh: grad.array() *= 1.0 - post.array().square(); break;
    case Activation::identity: break;
    case Activation::sigmoid: grad.array() *= post.array() * (1.0 - post.array()); break;
  }
}

}  // namespace

NetworkParams init_params(const LayerSpec& spec, std::uint64_t seed) {
  spec.validate();
  Rng rng(seed);
  NetworkParams params;
  int in = spec.input_width;
  for (int w : spec.hidden_widths) {
    params.layers.push_back(make_layer(in, w, spec.hidden_activation, rng));
    in = w;
  }
  params.layers.push_back(make_layer(in, spec.output_width, Activation::sigmoid, rng));
  return params;
}

NetworkParams init_feature_extractor(int input_width, const std::vector<int>& widths, Activation activation,
                                     std::uint64_t seed) {
  if (input_width <= 0) throw InvalidArgument("input_width must be positive");
  if (widths.empty()) throw InvalidArgument("feature extractor needs at least one layer");
  Rng rng(seed);
  NetworkParams params;
  int in = input_width;
  for (int w : widths) {
    if (w <= 0) throw InvalidArgument("layer widths must be positive");
    params.layers.push_back(make_layer(in, w, activation, rng));
    in = w;
  }
  return params;
}

NetworkParams compose(const NetworkParams& first, const NetworkParams& second) {
  if (first.output_width() != second.input_width())
    throw ShapeError("compose: second network input width", first.output_width(), second.input_width());
  NetworkParams out = first;
  out.layers.insert(out.layers.end(), second.layers.begin(), second.layers.end());
  return out;
}

ForwardTrace forward(const NetworkParams& params, const Eigen::Ref<const Eigen::MatrixXd>& batch) {
  if (params.layers.empty()) throw InvalidArgument("forward: empty network");
  if (batch.cols() != params.input_width())
    throw ShapeError("forward: batch column count vs network input width", params.input_width(), long(batch.cols()));
  ForwardTrace trace;
  trace.pre.resize(params.layers.size());
  trace.activations.resize(params.layers.size() + 1);
  trace.activations[0] = batch;
  for (std::size_t l = 0; l < params.layers.size(); ++l) {
    const auto& layer = params.layers[l];
    trace.pre[l].noalias() = trace.activations[l] * layer.weight.transpose();
    trace.pre[l].rowwise() += layer.bias.transpose();
    apply_activation(layer.activation, trace.pre[l], trace.activations[l + 1]);
  }
  return trace;
}

Eigen::VectorXd predict(const NetworkParams& params, const Eigen::Ref<const Eigen::MatrixXd>& batch) {
  return forward(params, batch).probabilities();
}

Gradients backward_from_output(const NetworkParams& params, const ForwardTrace& trace,
                               const Eigen::MatrixXd& dL_doutput, Eigen::MatrixXd* input_grad) {
  const auto n_layers = params.layers.size();
  if (trace.pre.size() != n_layers) throw ShapeError("backward: trace layers", long(n_layers), long(trace.pre.size()));
  if (dL_doutput.rows() != trace.batch_size() || dL_doutput.cols() != params.output_width())
    throw ShapeError("backward: output gradient rows", long(trace.batch_size()), long(dL_doutput.rows()));
  Gradients grads(n_layers);
  Eigen::MatrixXd delta = dL_doutput;
  for (std::size_t k = n_layers; k-- > 0;) {
    const auto& layer = params.layers[k];
    chain_activation(layer.activation, trace.pre[k], trace.activations[k + 1], delta);
    grads[k].weight.noalias() = delta.transpose() * trace.activations[k];
    grads[k].bias = delta.colwise().sum().transpose();
    if (k > 0 || input_grad != nullptr) {
      Eigen::MatrixXd upstream = delta * layer.weight;
      if (k == 0)
        *input_grad = std::move(upstream);
      else
        delta = std::move(upstream);
    }
  }
  return grads;
}

Gradients backward(const NetworkParams& params, const ForwardTrace& trace, std::span<const double> dL_dp) {
  const auto batch = trace.batch_size();
  if (static_cast<Eigen::Index>(dL_dp.size()) != batch)
    throw ShapeError("backward: dL_dp length vs batch size", long(batch), long(dL_dp.size()));
  if (params.layers.empty() || params.layers.back().activation != Activation::sigmoid)
    throw InvalidArgument("backward: network has no sigmoid output");
  Eigen::MatrixXd grad(batch, 1);
  const double scale = 1.0 / static_cast<double>(batch);
  for (Eigen::Index i = 0; i < batch; ++i) grad(i, 0) = dL_dp[static_cast<std::size_t>(i)] * scale;
  return backward_from_output(params, trace, grad);
}

void step(NetworkParams& params, const Gradients& grads, OptimizerState& state) {
  if (grads.size() != params.layers.size())
    throw ShapeError("step: gradient layers", long(params.layers.size()), long(grads.size()));
  if (!(state.learning_rate > 0)) throw InvalidArgument("learning rate must be positive");
  for (std::size_t l = 0; l < grads.size(); ++l) {
    if (!grads[l].weight.allFinite() || !grads[l].bias.allFinite())
      throw NumericError(fmt::format("non-finite gradient in layer {}", l));
  }
  const double lr = state.learning_rate;
  if (state.kind == OptimizerKind::sgd) {
    for (std::size_t l = 0; l < grads.size(); ++l) {
      params.layers[l].weight -= lr * grads[l].weight;
      params.layers[l].bias -= lr * grads[l].bias;
    }
    return;
  }
  if (state.m.size() != grads.size()) {
    state.m = zeros_like(params);
    state.v = zeros_like(params);
    state.t = 0;
  }
  ++state.t;
  const double b1 = state.beta1;
  const double b2 = state.beta2;
  const double c1 = 1.0 - std::pow(b1, static_cast<double>(state.t));
  const double c2 = 1.0 - std::pow(b2, static_cast<double>(state.t));
  const double eps = state.epsilon;
  auto update = [&](auto& param, const auto& g, auto& m, auto& v) {
    m = b1 * m + (1.0 - b1) * g;
    v = b2 * v + (1.0 - b2) * g.cwiseProduct(g);
    param.array() -= lr * (m.array() / c1) / ((v.array() / c2).sqrt() + eps);
  };
  for (std::size_t l = 0; l < grads.size(); ++l) {
    update(params.layers[l].weight, grads[l].weight, state.m[l].weight, state.v[l].weight);
    update(params.layers[l].bias, grads[l].bias, state.m[l].bias, state.v[l].bias);
  }
}

void write_params(std::ostream& out, const NetworkParams& params) {
  out << "network " << params.layers.size() << '\n';
  for (const auto& l : params.layers) {
    out << fmt::format("layer {} {} {}\nw", l.fan_in(), l.fan_out(), to_string(l.activation));
    for (Eigen::Index r = 0; r < l.weight.rows(); ++r)
      for (Eigen::Index c = 0; c < l.weight.cols(); ++c) out << fmt::format(" {:.17g}", l.weight(r, c));
    out << "\nb";
    for (Eigen::Index r = 0; r < l.bias.size(); ++r) out << fmt::format(" {:.17g}", l.bias[r]);
    out << '\n';
  }
}

NetworkParams read_params(std::istream& in) {
  std::string tag;
  std::size_t n_layers = 0;
  if (!(in >> tag >> n_layers) || tag != "network") throw DataError("model file: expected 'network <layers>'");
  NetworkParams params;
  for (std::size_t l = 0; l < n_layers; ++l) {
    int fan_in = 0, fan_out = 0;
    std::string act;
    if (!(in >> tag >> fan_in >> fan_out >> act) || tag != "layer" || fan_in <= 0 || fan_out <= 0)
      throw DataError(fmt::format("model file: bad header for layer {}", l));
    DenseLayer layer;
    layer.activation = parse_activation(act);
    layer.weight.resize(fan_out, fan_in);
    layer.bias.resize(fan_out);
    if (!(in >> tag) || tag != "w") throw DataError(fmt::format("model file: layer {} missing weights", l));
    for (int r = 0; r < fan_out; ++r)
      for (int c = 0; c < fan_in; ++c)
        if (!(in >> layer.weight(r, c))) throw DataError(fmt::format("model file: layer {} truncated weights", l));
    if (!(in >> tag) || tag != "b") throw DataError(fmt::format("model file: layer {} missing biases", l));
    for (int r = 0; r < fan_out; ++r)
      if (!(in >> layer.bias(r))) throw DataError(fmt::format("model file: layer {} truncated biases", l));
    if (!params.layers.empty() && params.layers.back().fan_out() != fan_in)
      throw ShapeError(fmt::format("model file: layer {} input width", l), params.layers.back().fan_out(), fan_in);
    params.layers.push_back(std::move(layer));
  }
  return params;
}

}  // namespace ulab
