#pragma once

#include <cmath>
#include <vector>

#include "ssmgan/autodiff.hpp"
#include "ssmgan/layers.hpp"
#include "ssmgan/serialize.hpp"

namespace ssmgan::nn {

struct AdamConfig {
  double learning_rate = 1e-3;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double eps = 1e-8;
};

/// Adam with bias correction. Moment buffers are laid out in the order of
/// the parameter list passed to init().
class Adam {
 public:
  Adam() = default;
  explicit Adam(AdamConfig cfg) : cfg_(cfg) {}

  void init(const std::vector<ParamRef>& params) {
    m_.clear();
    v_.clear();
    for (const auto& p : params) {
      m_.emplace_back(p.tensor->size(), 0.0);
      v_.emplace_back(p.tensor->size(), 0.0);
    }
    t_ = 0;
  }

  void step(const std::vector<ParamRef>& params, const std::vector<ad::Tensor>& grads) {
    if (params.size() != grads.size() || params.size() != m_.size()) fail(ErrorCode::ShapeMismatch, "Adam parameter/gradient mismatch");
    ++t_;
    const double c1 = 1.0 - std::pow(cfg_.beta1, static_cast<double>(t_));
    const double c2 = 1.0 - std::pow(cfg_.beta2, static_cast<double>(t_));
    for (std::size_t i = 0; i < params.size(); ++i) {
      auto& w = params[i].tensor->mutable_data();
      const auto g = grads[i].data();
      if (g.size() != w.size()) fail(ErrorCode::ShapeMismatch, "gradient shape mismatch for " + params[i].name);
      auto& m = m_[i];
      auto& v = v_[i];
      for (std::size_t j = 0; j < w.size(); ++j) {
        m[j] = cfg_.beta1 * m[j] + (1 - cfg_.beta1) * g[j];
        v[j] = cfg_.beta2 * v[j] + (1 - cfg_.beta2) * g[j] * g[j];
        w[j] -= cfg_.learning_rate * (m[j] / c1) / (std::sqrt(v[j] / c2) + cfg_.eps);
      }
    }
  }

  const AdamConfig& config() const { return cfg_; }
  long long steps() const { return t_; }
  const std::vector<std::vector<double>>& first_moments() const { return m_; }
  const std::vector<std::vector<double>>& second_moments() const { return v_; }

  io::json to_json() const {
    io::json m = io::json::array(), v = io::json::array();
    for (const auto& x : m_) m.push_back(io::encode_reals(x));
    for (const auto& x : v_) v.push_back(io::encode_reals(x));
    return {{"t", t_}, {"m", m}, {"v", v}};
  }

  void from_json(const io::json& j) {
    t_ = j.at("t").get<long long>();
    const auto& m = j.at("m");
    const auto& v = j.at("v");
    if (m.size() != m_.size() || v.size() != v_.size()) fail(ErrorCode::FormatError, "Adam moment count mismatch");
    for (std::size_t i = 0; i < m_.size(); ++i) {
      auto mi = io::decode_reals(m[i]);
      auto vi = io::decode_reals(v[i]);
      if (mi.size() != m_[i].size() || vi.size() != v_[i].size()) fail(ErrorCode::FormatError, "Adam moment shape mismatch");
      m_[i] = std::move(mi);
      v_[i] = std::move(vi);
    }
  }

 private:
  AdamConfig cfg_;
  std::vector<std::vector<double>> m_;
  std::vector<std::vector<double>> v_;
  long long t_ = 0;
};

}  // namespace ssmgan::nn
