#pragma once

// Conditional generator and critic. Defaults follow the published layer
// table: kernel-size-1 convolutions 16/32/64 with batch norm, an FC head
// to K x maxB for the generator, and FC(128) -> LSTM(256 x 3) ->
// FC-tanh(128) -> FC-tanh(64) -> FC(1) for the critic.

#include <cstdint>
#include <string>
#include <vector>

#include "ssmgan/layers.hpp"
#include "ssmgan/preprocess.hpp"

namespace ssmgan::nn {

struct NetworkConfig {
  std::size_t z_dim = 100;
  std::size_t num_classes = kNumClasses;
  std::vector<std::size_t> generator_widths{16, 32, 64};
  std::vector<std::size_t> critic_widths{16, 32, 64};
  std::size_t critic_fc = 128;
  std::size_t lstm_hidden = 256;
  std::size_t lstm_layers = 3;
  std::vector<std::size_t> critic_head{128, 64};
  bool critic_batch_norm = true;

  /// Layer sizes of the published architecture.
  static NetworkConfig table2() { return {}; }

  /// Same layer sequence at reduced critic widths and without critic batch
  /// norm, for single-core runs.
  static NetworkConfig compact() {
    NetworkConfig c;
    c.critic_widths = {4, 4, 4};
    c.critic_batch_norm = false;
    c.critic_fc = 16;
    c.lstm_hidden = 16;
    c.lstm_layers = 1;
    c.critic_head = {16, 8};
    return c;
  }

  friend bool operator==(const NetworkConfig&, const NetworkConfig&) = default;
};

inline io::json network_config_to_json(const NetworkConfig& c) {
  return {{"z_dim", c.z_dim},
          {"num_classes", c.num_classes},
          {"generator_widths", c.generator_widths},
          {"critic_widths", c.critic_widths},
          {"critic_fc", c.critic_fc},
          {"lstm_hidden", c.lstm_hidden},
          {"lstm_layers", c.lstm_layers},
          {"critic_head", c.critic_head},
          {"critic_batch_norm", c.critic_batch_norm}};
}

inline NetworkConfig network_config_from_json(const io::json& j) {
  NetworkConfig c;
  c.z_dim = j.at("z_dim").get<std::size_t>();
  c.num_classes = j.at("num_classes").get<std::size_t>();
  c.generator_widths = j.at("generator_widths").get<std::vector<std::size_t>>();
  c.critic_widths = j.at("critic_widths").get<std::vector<std::size_t>>();
  c.critic_fc = j.at("critic_fc").get<std::size_t>();
  c.lstm_hidden = j.at("lstm_hidden").get<std::size_t>();
  c.lstm_layers = j.at("lstm_layers").get<std::size_t>();
  c.critic_head = j.at("critic_head").get<std::vector<std::size_t>>();
  c.critic_batch_norm = j.at("critic_batch_norm").get<bool>();
  return c;
}

// ------------------------------------------------------------ generator

/// G(z, l): [z | one-hot(l)] through conv-BN-ReLU, conv-BN-ReLU, conv-BN
/// on a length-1 axis, then an FC layer to K x maxB weights.
struct Generator {
  std::vector<Linear> convs;  // kernel-1 convs on a length-1 axis are affine maps
  std::vector<BatchNorm> norms;
  Linear head;
  std::size_t clusters = 0;
  std::size_t max_rank = 0;

  static Generator init(const NetworkConfig& cfg, std::size_t clusters, std::size_t max_rank, Rng& rng) {
    Generator g;
    g.clusters = clusters;
    g.max_rank = max_rank;
    std::size_t in = cfg.z_dim + cfg.num_classes;
    for (auto w : cfg.generator_widths) {
      g.convs.push_back(Linear::init(in, w, rng));
      g.norms.push_back(BatchNorm::init(w));
      in = w;
    }
    g.head = Linear::init(in, clusters * max_rank, rng);
    return g;
  }

  std::size_t output_dim() const { return clusters * max_rank; }

  std::vector<ParamRef> parameters() {
    std::vector<ParamRef> p;
    for (std::size_t i = 0; i < convs.size(); ++i) {
      const auto n = std::to_string(i + 1);
      p.push_back({"conv" + n + ".weight", &convs[i].weight});
      p.push_back({"conv" + n + ".bias", &convs[i].bias});
      p.push_back({"bn" + n + ".gamma", &norms[i].gamma});
      p.push_back({"bn" + n + ".beta", &norms[i].beta});
    }
    p.push_back({"fc.weight", &head.weight});
    p.push_back({"fc.bias", &head.bias});
    return p;
  }

  std::vector<BufferRef> buffers() {
    std::vector<BufferRef> b;
    for (std::size_t i = 0; i < norms.size(); ++i) {
      const auto n = std::to_string(i + 1);
      b.push_back({"bn" + n + ".running_mean", &norms[i].running_mean});
      b.push_back({"bn" + n + ".running_var", &norms[i].running_var});
    }
    return b;
  }

  std::vector<Tensor> tensors() {
    std::vector<Tensor> t;
    for (auto& p : parameters()) t.push_back(*p.tensor);
    return t;
  }
};

/// W batch of shape (B, K * maxB) for noise z (B, z_dim) and labels.
inline Tensor generator_forward(Generator& g, const Tensor& z, const std::vector<int>& labels, bool train) {
  if (z.rank() != 2 || z.dim(0) != labels.size()) fail(ErrorCode::ShapeMismatch, "z must be (batch, z_dim) with one label per row");
  const std::size_t classes = g.convs.front().in_features() - z.dim(1);
  Tensor x = ad::concat({z, one_hot(labels, classes)}, 1);
  for (std::size_t i = 0; i < g.convs.size(); ++i) {
    x = batch_norm(g.convs[i](x), g.norms[i], train);
    if (i + 1 < g.convs.size()) x = ad::relu(x);
  }
  return g.head(x);
}

// --------------------------------------------------------------- critic

struct Discriminator {
  std::vector<Linear> convs;
  std::vector<BatchNorm> norms;  // empty when batch norm is disabled
  Linear fc;
  Lstm lstm;
  std::vector<Linear> head;  // tanh layers followed by the final linear score
  std::size_t signal_length = 0;  // T
  std::size_t num_classes = kNumClasses;

  static Discriminator init(const NetworkConfig& cfg, std::size_t signal_length, Rng& rng) {
    Discriminator d;
    d.signal_length = signal_length;
    d.num_classes = cfg.num_classes;
    std::size_t in = 2;
    for (auto w : cfg.critic_widths) {
      d.convs.push_back(Linear::init(in, w, rng));
      if (cfg.critic_batch_norm) d.norms.push_back(BatchNorm::init(w));
      in = w;
    }
    d.fc = Linear::init(in * signal_length, cfg.critic_fc, rng);
    d.lstm = Lstm::init(cfg.critic_fc + cfg.num_classes, cfg.lstm_hidden, cfg.lstm_layers, rng);
    in = cfg.lstm_hidden;
    for (auto w : cfg.critic_head) {
      d.head.push_back(Linear::init(in, w, rng));
      in = w;
    }
    d.head.push_back(Linear::init(in, 1, rng));
    return d;
  }

  std::vector<ParamRef> parameters() {
    std::vector<ParamRef> p;
    for (std::size_t i = 0; i < convs.size(); ++i) {
      const auto n = std::to_string(i + 1);
      p.push_back({"conv" + n + ".weight", &convs[i].weight});
      p.push_back({"conv" + n + ".bias", &convs[i].bias});
      if (!norms.empty()) {
        p.push_back({"bn" + n + ".gamma", &norms[i].gamma});
        p.push_back({"bn" + n + ".beta", &norms[i].beta});
      }
    }
    p.push_back({"fc.weight", &fc.weight});
    p.push_back({"fc.bias", &fc.bias});
    for (std::size_t i = 0; i < lstm.layers.size(); ++i) {
      const auto n = std::to_string(i);
      p.push_back({"lstm" + n + ".w_ih", &lstm.layers[i].w_ih});
      p.push_back({"lstm" + n + ".w_hh", &lstm.layers[i].w_hh});
      p.push_back({"lstm" + n + ".bias", &lstm.layers[i].bias});
    }
    for (std::size_t i = 0; i < head.size(); ++i) {
      const auto n = std::to_string(i + 1);
      p.push_back({"head" + n + ".weight", &head[i].weight});
      p.push_back({"head" + n + ".bias", &head[i].bias});
    }
    return p;
  }

  std::vector<BufferRef> buffers() {
    std::vector<BufferRef> b;
    for (std::size_t i = 0; i < norms.size(); ++i) {
      const auto n = std::to_string(i + 1);
      b.push_back({"bn" + n + ".running_mean", &norms[i].running_mean});
      b.push_back({"bn" + n + ".running_var", &norms[i].running_var});
    }
    return b;
  }

  std::vector<Tensor> tensors() {
    std::vector<Tensor> t;
    for (auto& p : parameters()) t.push_back(*p.tensor);
    return t;
  }
};

/// Critic logit (B, 1) for signals x (B, 2T) laid out [time | amplitude].
/// The two rows are the input channels of the kernel-1 convolutions,
/// evaluated as affine maps over the (B * T, C) position rows.
inline Tensor discriminator_logit(Discriminator& d, const Tensor& x, const std::vector<int>& labels, bool train) {
  const auto T = d.signal_length;
  if (x.rank() != 2 || x.dim(1) != 2 * T || x.dim(0) != labels.size()) {
    fail(ErrorCode::ShapeMismatch, "critic input must be (batch, 2T) with one label per row");
  }
  const auto B = x.dim(0);
  Tensor h = ad::reshape(ad::permute(ad::reshape(x, {B, 2, T}), {0, 2, 1}), {B * T, 2});
  for (std::size_t i = 0; i < d.convs.size(); ++i) {
    h = d.convs[i](h);
    if (!d.norms.empty()) h = batch_norm(h, d.norms[i], train);
    if (i + 1 < d.convs.size()) h = ad::relu(h);
  }
  h = d.fc(ad::reshape(h, {B, T * d.convs.back().out_features()}));
  h = ad::concat({h, one_hot(labels, d.num_classes)}, 1);
  h = lstm_forward(d.lstm, {h}).back();
  for (std::size_t i = 0; i + 1 < d.head.size(); ++i) h = ad::tanh(d.head[i](h));
  return d.head.back()(h);
}

/// Score in (0, 1): the sigmoid of the critic logit.
inline Tensor discriminator_forward(Discriminator& d, const Tensor& x, const std::vector<int>& labels, bool train) {
  return ad::sigmoid(discriminator_logit(d, x, labels, train));
}

}  // namespace ssmgan::nn
