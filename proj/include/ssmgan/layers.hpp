#pragma once

#include <cmath>
#include <string>
#include <utility>
#include <vector>

#include "ssmgan/autodiff.hpp"
#include "ssmgan/rng.hpp"
#include "ssmgan/serialize.hpp"

namespace ssmgan::nn {

using ad::Shape;
using ad::Tensor;

inline Tensor uniform_param(Shape shape, double bound, Rng& rng) {
  std::vector<double> v(ad::numel(shape));
  for (auto& x : v) x = rng.uniform(-bound, bound);
  return Tensor::parameter(std::move(shape), std::move(v));
}

/// Fully connected layer; weight is (out, in).
struct Linear {
  Tensor weight;
  Tensor bias;

  static Linear init(std::size_t in, std::size_t out, Rng& rng) {
    const double bound = 1.0 / std::sqrt(static_cast<double>(in));
    return {uniform_param({out, in}, bound, rng), uniform_param({out}, bound, rng)};
  }

  Tensor operator()(const Tensor& x) const { return ad::affine(x, weight, bias); }

  std::size_t in_features() const { return weight.dim(1); }
  std::size_t out_features() const { return weight.dim(0); }
};

/// Batch normalization over the rows of an (N, C) matrix. Running
/// statistics are buffers, not parameters.
struct BatchNorm {
  Tensor gamma;
  Tensor beta;
  std::vector<double> running_mean;
  std::vector<double> running_var;
  double momentum = 0.1;
  double eps = 1e-5;

  static BatchNorm init(std::size_t channels) {
    return {Tensor::parameter({channels}, std::vector<double>(channels, 1.0)),
            Tensor::parameter({channels}, std::vector<double>(channels, 0.0)), std::vector<double>(channels, 0.0),
            std::vector<double>(channels, 1.0)};
  }

  std::size_t channels() const { return gamma.dim(0); }
};

/// Train mode normalizes with the batch mean and biased variance and
/// updates the running statistics; eval mode is the fixed affine map given
/// by the running statistics.
inline Tensor batch_norm(const Tensor& x, BatchNorm& bn, bool train) {
  if (x.rank() != 2 || x.dim(1) != bn.channels()) {
    fail(ErrorCode::ShapeMismatch, "batch_norm expects (N, " + std::to_string(bn.channels()) + ")");
  }
  const auto c = bn.channels();
  if (!train) {
    std::vector<double> shift(c), inv(c);
    for (std::size_t j = 0; j < c; ++j) {
      inv[j] = 1.0 / std::sqrt(bn.running_var[j] + bn.eps);
      shift[j] = -bn.running_mean[j] * inv[j];
    }
    Tensor norm = x * Tensor::constant({c}, std::move(inv)) + Tensor::constant({c}, std::move(shift));
    return norm * bn.gamma + bn.beta;
  }
  const auto n = x.dim(0);
  if (n < 2) fail(ErrorCode::ShapeMismatch, "batch_norm in train mode needs at least two rows");
  Tensor mu = ad::mean_axis(x, 0);
  Tensor centered = x - mu;
  Tensor var = ad::mean_axis(ad::square(centered), 0);
  Tensor y = centered * ad::pow_scalar(ad::add_scalar(var, bn.eps), -0.5);
  {
    const double unbias = static_cast<double>(n) / static_cast<double>(n - 1);
    for (std::size_t j = 0; j < c; ++j) {
      bn.running_mean[j] = (1 - bn.momentum) * bn.running_mean[j] + bn.momentum * mu[j];
      bn.running_var[j] = (1 - bn.momentum) * bn.running_var[j] + bn.momentum * var[j] * unbias;
    }
  }
  return y * bn.gamma + bn.beta;
}

/// Batch norm on (batch, C, L), statistics per channel over batch and
/// positions.
inline Tensor batch_norm_1d(const Tensor& x, BatchNorm& bn, bool train) {
  if (x.rank() != 3) fail(ErrorCode::ShapeMismatch, "batch_norm_1d expects (batch, C, L)");
  const auto b = x.dim(0), ch = x.dim(1), len = x.dim(2);
  Tensor rows = ad::reshape(ad::permute(x, {0, 2, 1}), {b * len, ch});
  return ad::permute(ad::reshape(batch_norm(rows, bn, train), {b, len, ch}), {0, 2, 1});
}

/// One LSTM layer, gate order (input, forget, cell, output).
struct LstmLayer {
  Tensor w_ih;  // (4H, In)
  Tensor w_hh;  // (4H, H)
  Tensor bias;  // (4H)

  std::size_t hidden() const { return w_hh.dim(1); }
};

struct Lstm {
  std::vector<LstmLayer> layers;

  static Lstm init(std::size_t in, std::size_t hidden, std::size_t num_layers, Rng& rng) {
    Lstm l;
    for (std::size_t i = 0; i < num_layers; ++i) {
      const std::size_t layer_in = i == 0 ? in : hidden;
      const double b_in = 1.0 / std::sqrt(static_cast<double>(layer_in));
      const double b_h = 1.0 / std::sqrt(static_cast<double>(hidden));
      l.layers.push_back({uniform_param({4 * hidden, layer_in}, b_in, rng), uniform_param({4 * hidden, hidden}, b_h, rng),
                          uniform_param({4 * hidden}, b_in, rng)});
    }
    return l;
  }

  std::size_t hidden() const { return layers.front().hidden(); }
};

/// Runs a stacked LSTM over `sequence` (each step (B, In)) from zero
/// state. Returns the last layer's hidden state at every step.
inline std::vector<Tensor> lstm_forward(const Lstm& lstm, const std::vector<Tensor>& sequence) {
  if (sequence.empty() || lstm.layers.empty()) fail(ErrorCode::ShapeMismatch, "LSTM needs layers and a non-empty sequence");
  std::vector<Tensor> inputs = sequence;
  for (const auto& layer : lstm.layers) {
    const auto H = layer.hidden();
    const auto B = inputs.front().dim(0);
    Tensor h = Tensor::zeros({B, H});
    Tensor c = Tensor::zeros({B, H});
    std::vector<Tensor> outputs;
    for (const auto& x : inputs) {
      Tensor gates = ad::affine(x, layer.w_ih, layer.bias) + ad::matmul(h, layer.w_hh, false, true);
      Tensor i = ad::sigmoid(ad::slice(gates, 1, 0, H));
      Tensor f = ad::sigmoid(ad::slice(gates, 1, H, H));
      Tensor g = ad::tanh(ad::slice(gates, 1, 2 * H, H));
      Tensor o = ad::sigmoid(ad::slice(gates, 1, 3 * H, H));
      c = f * c + i * g;
      h = o * ad::tanh(c);
      outputs.push_back(h);
    }
    inputs = std::move(outputs);
  }
  return inputs;
}

inline Tensor one_hot(const std::vector<int>& labels, std::size_t classes) {
  std::vector<double> v(labels.size() * classes, 0.0);
  for (std::size_t i = 0; i < labels.size(); ++i) {
    if (labels[i] < 0 || static_cast<std::size_t>(labels[i]) >= classes) fail(ErrorCode::ShapeMismatch, "label out of range");
    v[i * classes + static_cast<std::size_t>(labels[i])] = 1.0;
  }
  return Tensor::constant({labels.size(), classes}, std::move(v));
}

// ------------------------------------------------------- serialization

/// Named view over the tensors and buffers of a network.
struct ParamRef {
  std::string name;
  Tensor* tensor = nullptr;
};

struct BufferRef {
  std::string name;
  std::vector<double>* values = nullptr;
};

inline io::json tensor_to_json(const Tensor& t) {
  return {{"shape", t.shape()}, {"data", io::encode_reals(std::vector<double>(t.data().begin(), t.data().end()))}};
}

inline void tensor_from_json(const io::json& j, Tensor& t) {
  const auto shape = j.at("shape").get<Shape>();
  if (shape != t.shape()) fail(ErrorCode::FormatError, "tensor shape " + ad::shape_str(shape) + " expected " + ad::shape_str(t.shape()));
  auto data = io::decode_reals(j.at("data"));
  if (data.size() != t.size()) fail(ErrorCode::FormatError, "tensor data length mismatch");
  t.mutable_data() = std::move(data);
}

inline io::json params_to_json(const std::vector<ParamRef>& params, const std::vector<BufferRef>& buffers) {
  io::json layers = io::json::array();
  for (const auto& p : params) layers.push_back({{"name", p.name}, {"tensor", tensor_to_json(*p.tensor)}});
  io::json bufs = io::json::array();
  for (const auto& b : buffers) bufs.push_back({{"name", b.name}, {"data", io::encode_reals(*b.values)}});
  return {{"version", 1}, {"params", layers}, {"buffers", bufs}};
}

inline void params_from_json(const io::json& j, const std::vector<ParamRef>& params, const std::vector<BufferRef>& buffers) {
  io::require_version(j, 1, "parameter set");
  const auto& layers = j.at("params");
  if (layers.size() != params.size()) fail(ErrorCode::FormatError, "parameter count mismatch");
  for (std::size_t i = 0; i < params.size(); ++i) {
    if (layers[i].at("name").get<std::string>() != params[i].name) fail(ErrorCode::FormatError, "unexpected parameter " + params[i].name);
    tensor_from_json(layers[i].at("tensor"), *params[i].tensor);
  }
  const auto& bufs = j.at("buffers");
  if (bufs.size() != buffers.size()) fail(ErrorCode::FormatError, "buffer count mismatch");
  for (std::size_t i = 0; i < buffers.size(); ++i) {
    auto v = io::decode_reals(bufs[i].at("data"));
    if (v.size() != buffers[i].values->size()) fail(ErrorCode::FormatError, "buffer length mismatch for " + buffers[i].name);
    *buffers[i].values = std::move(v);
  }
}

}  // namespace ssmgan::nn
