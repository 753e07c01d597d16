#pragma once

// Reverse-mode automatic differentiation over dense float64 tensors.
//
// Every op records its inputs and a backward rule. Backward rules are
// themselves written with differentiable ops, so with create_graph set
// the gradients come back as graph nodes and can be differentiated
// again (needed for the gradient penalty). Ops that only provide a
// numeric first-order rule are flagged and refuse create_graph.

#include <algorithm>
#include <cmath>
#include <functional>
#include <memory>
#include <numeric>
#include <span>
#include <string>
#include <unordered_map>
#include <unordered_set>
#include <vector>

#include <Eigen/Dense>

#include "ssmgan/error.hpp"

namespace ssmgan::ad {

using Shape = std::vector<std::size_t>;

inline std::size_t numel(const Shape& s) {
  return std::accumulate(s.begin(), s.end(), std::size_t{1}, std::multiplies<>());
}

inline std::string shape_str(const Shape& s) {
  std::string out = "(";
  for (std::size_t i = 0; i < s.size(); ++i) out += (i ? "," : "") + std::to_string(s[i]);
  return out + ")";
}

class Tensor;
struct Node;
using BackwardFn = std::function<std::vector<Tensor>(const Tensor& out, const Tensor& grad)>;

struct Node {
  Shape shape;
  std::vector<double> value;
  bool requires_grad = false;
  bool second_order = true;
  const char* op = "leaf";
  std::vector<Tensor> inputs;
  BackwardFn backward;
};

class Tensor {
 public:
  Tensor() = default;
  explicit Tensor(std::shared_ptr<Node> node) : node_(std::move(node)) {}

  static Tensor make(Shape shape, std::vector<double> value, bool requires_grad = false) {
    if (numel(shape) != value.size()) {
      fail(ErrorCode::ShapeMismatch, "data length " + std::to_string(value.size()) + " does not fit " + shape_str(shape));
    }
    auto n = std::make_shared<Node>();
    n->shape = std::move(shape);
    n->value = std::move(value);
    n->requires_grad = requires_grad;
    return Tensor(std::move(n));
  }
  static Tensor constant(Shape shape, std::vector<double> value) { return make(std::move(shape), std::move(value), false); }
  static Tensor parameter(Shape shape, std::vector<double> value) { return make(std::move(shape), std::move(value), true); }
  static Tensor full(Shape shape, double v) {
    const auto n = numel(shape);
    return make(std::move(shape), std::vector<double>(n, v));
  }
  static Tensor zeros(Shape shape) { return full(std::move(shape), 0.0); }
  static Tensor scalar(double v) { return make({}, {v}); }

  bool defined() const { return static_cast<bool>(node_); }
  const Shape& shape() const { return node_->shape; }
  std::size_t dim(std::size_t i) const { return node_->shape.at(i); }
  std::size_t rank() const { return node_->shape.size(); }
  std::size_t size() const { return node_->value.size(); }
  std::span<const double> data() const { return node_->value; }
  /// In-place access for optimizers; only meaningful on leaves.
  std::vector<double>& mutable_data() { return node_->value; }
  double item() const {
    if (size() != 1) fail(ErrorCode::NotScalarOutput, "item() on tensor of shape " + shape_str(shape()));
    return node_->value[0];
  }
  double operator[](std::size_t i) const { return node_->value[i]; }
  bool requires_grad() const { return node_ && node_->requires_grad; }
  const char* op() const { return node_->op; }
  Node* node() const { return node_.get(); }
  const std::shared_ptr<Node>& node_ptr() const { return node_; }

  Tensor detach() const { return constant(shape(), node_->value); }

 private:
  std::shared_ptr<Node> node_;
};

// ------------------------------------------------------------ grad mode

namespace detail {
inline bool& grad_enabled_flag() {
  thread_local bool enabled = true;
  return enabled;
}
}  // namespace detail

inline bool grad_enabled() { return detail::grad_enabled_flag(); }

class GradModeGuard {
 public:
  explicit GradModeGuard(bool enabled) : saved_(detail::grad_enabled_flag()) { detail::grad_enabled_flag() = enabled; }
  ~GradModeGuard() { detail::grad_enabled_flag() = saved_; }
  GradModeGuard(const GradModeGuard&) = delete;
  GradModeGuard& operator=(const GradModeGuard&) = delete;

 private:
  bool saved_;
};

struct NoGradGuard : GradModeGuard {
  NoGradGuard() : GradModeGuard(false) {}
};

namespace detail {

inline Tensor record(const char* op, Shape shape, std::vector<double> value, std::vector<Tensor> inputs, BackwardFn backward,
                     bool second_order = true) {
  for (double v : value) {
    if (!std::isfinite(v)) fail(ErrorCode::NonFiniteValue, std::string("op '") + op + "' produced a non-finite value");
  }
  auto n = std::make_shared<Node>();
  n->shape = std::move(shape);
  n->value = std::move(value);
  n->op = op;
  const bool track = grad_enabled() && std::any_of(inputs.begin(), inputs.end(), [](const Tensor& t) { return t.requires_grad(); });
  if (track) {
    n->requires_grad = true;
    n->second_order = second_order;
    n->inputs = std::move(inputs);
    n->backward = std::move(backward);
  }
  return Tensor(std::move(n));
}

inline std::vector<std::size_t> strides_of(const Shape& s) {
  std::vector<std::size_t> st(s.size(), 1);
  for (std::size_t i = s.size(); i-- > 1;) st[i - 1] = st[i] * s[i];
  return st;
}

inline Shape broadcast_shape(const Shape& a, const Shape& b) {
  const std::size_t r = std::max(a.size(), b.size());
  Shape out(r);
  for (std::size_t i = 0; i < r; ++i) {
    const std::size_t da = i + a.size() >= r ? a[i + a.size() - r] : 1;
    const std::size_t db = i + b.size() >= r ? b[i + b.size() - r] : 1;
    if (da != db && da != 1 && db != 1) fail(ErrorCode::ShapeMismatch, "cannot broadcast " + shape_str(a) + " with " + shape_str(b));
    out[i] = std::max(da, db);
  }
  return out;
}

/// Strides of `in` laid out against `out` (0 on broadcast dimensions).
inline std::vector<std::size_t> broadcast_strides(const Shape& in, const Shape& out) {
  const auto st = strides_of(in);
  std::vector<std::size_t> res(out.size(), 0);
  const std::size_t off = out.size() - in.size();
  for (std::size_t i = 0; i < in.size(); ++i) res[i + off] = in[i] == 1 ? 0 : st[i];
  return res;
}

/// Calls f(out_index, in_index) for every element of `out` shape.
template <typename F>
void for_each_broadcast(const Shape& out, const std::vector<std::size_t>& in_strides, F&& f) {
  const std::size_t total = numel(out);
  if (total == 0) return;
  const std::size_t r = out.size();
  if (r == 0) {
    f(std::size_t{0}, std::size_t{0});
    return;
  }
  std::vector<std::size_t> idx(r, 0);
  std::size_t in = 0;
  const std::size_t inner = out[r - 1];
  const std::size_t inner_stride = in_strides[r - 1];
  for (std::size_t o = 0; o < total; o += inner) {
    for (std::size_t k = 0; k < inner; ++k) f(o + k, in + k * inner_stride);
    // advance the odometer past the innermost dimension
    for (std::size_t d = r - 1; d-- > 0;) {
      ++idx[d];
      in += in_strides[d];
      if (idx[d] < out[d]) break;
      in -= in_strides[d] * idx[d];
      idx[d] = 0;
    }
  }
}

}  // namespace detail

// ------------------------------------------------- shape manipulation

inline Tensor broadcast_to(const Tensor& x, const Shape& shape);
inline Tensor reduce_to(const Tensor& g, const Shape& shape);

inline Tensor reshape(const Tensor& x, Shape shape) {
  if (numel(shape) != x.size()) fail(ErrorCode::ShapeMismatch, "reshape " + shape_str(x.shape()) + " -> " + shape_str(shape));
  const Shape in_shape = x.shape();
  return detail::record("reshape", std::move(shape), std::vector<double>(x.data().begin(), x.data().end()), {x},
                        [x, in_shape](const Tensor&, const Tensor& g) { return std::vector<Tensor>{reshape(g, in_shape)}; });
}

/// Sums `g` down to `shape` (the adjoint of broadcasting).
inline Tensor reduce_to(const Tensor& g, const Shape& shape) {
  if (g.shape() == shape) return g;
  std::vector<double> out(numel(shape), 0.0);
  const auto src = g.data();
  if (out.size() == 1) {
    for (double v : src) out[0] += v;
  } else if (g.rank() >= 1 && out.size() == g.shape().back() && shape.back() == out.size()) {
    // column sums of the (rows, C) view
    const std::size_t c = out.size();
    for (std::size_t o = 0; o < src.size(); o += c) {
      for (std::size_t j = 0; j < c; ++j) out[j] += src[o + j];
    }
  } else {
    // A broadcast target may have fewer leading dims; align on the right.
    Shape padded = shape;
    while (padded.size() < g.rank()) padded.insert(padded.begin(), 1);
    const auto st = detail::broadcast_strides(padded, g.shape());
    detail::for_each_broadcast(g.shape(), st, [&](std::size_t o, std::size_t i) { out[i] += src[o]; });
  }
  return detail::record("reduce_to", shape, std::move(out), {g},
                        [g](const Tensor&, const Tensor& gg) { return std::vector<Tensor>{broadcast_to(gg, g.shape())}; });
}

inline Tensor broadcast_to(const Tensor& x, const Shape& shape) {
  if (x.shape() == shape) return x;
  if (detail::broadcast_shape(x.shape(), shape) != shape) {
    fail(ErrorCode::ShapeMismatch, "cannot broadcast " + shape_str(x.shape()) + " to " + shape_str(shape));
  }
  std::vector<double> out(numel(shape));
  const auto st = detail::broadcast_strides(x.shape(), shape);
  const auto src = x.data();
  detail::for_each_broadcast(shape, st, [&](std::size_t o, std::size_t i) { out[o] = src[i]; });
  return detail::record("broadcast_to", shape, std::move(out), {x},
                        [x](const Tensor&, const Tensor& g) { return std::vector<Tensor>{reduce_to(g, x.shape())}; });
}

inline Tensor permute(const Tensor& x, const std::vector<std::size_t>& order) {
  const auto r = x.rank();
  if (order.size() != r) fail(ErrorCode::ShapeMismatch, "permute order rank mismatch");
  Shape out_shape(r);
  for (std::size_t i = 0; i < r; ++i) out_shape[i] = x.dim(order[i]);
  const auto in_st = detail::strides_of(x.shape());
  std::vector<std::size_t> st(r);
  for (std::size_t i = 0; i < r; ++i) st[i] = in_st[order[i]];
  std::vector<double> out(x.size());
  const auto src = x.data();
  detail::for_each_broadcast(out_shape, st, [&](std::size_t o, std::size_t i) { out[o] = src[i]; });
  std::vector<std::size_t> inverse(r);
  for (std::size_t i = 0; i < r; ++i) inverse[order[i]] = i;
  return detail::record("permute", out_shape, std::move(out), {x},
                        [inverse](const Tensor&, const Tensor& g) { return std::vector<Tensor>{permute(g, inverse)}; });
}

inline Tensor transpose(const Tensor& x) {
  if (x.rank() != 2) fail(ErrorCode::ShapeMismatch, "transpose needs a matrix");
  return permute(x, {1, 0});
}

inline Tensor pad_axis(const Tensor& x, std::size_t axis, std::size_t before, std::size_t total);

/// Elements [start, start + length) along `axis`.
inline Tensor slice(const Tensor& x, std::size_t axis, std::size_t start, std::size_t length) {
  if (axis >= x.rank() || start + length > x.dim(axis)) fail(ErrorCode::ShapeMismatch, "slice out of range");
  Shape out_shape = x.shape();
  out_shape[axis] = length;
  std::size_t outer = 1, inner = 1;
  for (std::size_t i = 0; i < axis; ++i) outer *= x.dim(i);
  for (std::size_t i = axis + 1; i < x.rank(); ++i) inner *= x.dim(i);
  const std::size_t full = x.dim(axis);
  std::vector<double> out(numel(out_shape));
  const auto src = x.data();
  for (std::size_t o = 0; o < outer; ++o) {
    std::copy_n(src.begin() + static_cast<std::ptrdiff_t>((o * full + start) * inner), length * inner,
                out.begin() + static_cast<std::ptrdiff_t>(o * length * inner));
  }
  return detail::record("slice", out_shape, std::move(out), {x}, [axis, start, full](const Tensor&, const Tensor& g) {
    return std::vector<Tensor>{pad_axis(g, axis, start, full)};
  });
}

/// Zero-pads `x` along `axis` to `total`, placing it at offset `before`.
inline Tensor pad_axis(const Tensor& x, std::size_t axis, std::size_t before, std::size_t total) {
  const std::size_t length = x.dim(axis);
  if (before + length > total) fail(ErrorCode::ShapeMismatch, "pad target too small");
  Shape out_shape = x.shape();
  out_shape[axis] = total;
  std::size_t outer = 1, inner = 1;
  for (std::size_t i = 0; i < axis; ++i) outer *= x.dim(i);
  for (std::size_t i = axis + 1; i < x.rank(); ++i) inner *= x.dim(i);
  std::vector<double> out(numel(out_shape), 0.0);
  const auto src = x.data();
  for (std::size_t o = 0; o < outer; ++o) {
    std::copy_n(src.begin() + static_cast<std::ptrdiff_t>(o * length * inner), length * inner,
                out.begin() + static_cast<std::ptrdiff_t>((o * total + before) * inner));
  }
  return detail::record("pad_axis", out_shape, std::move(out), {x}, [axis, before, length](const Tensor&, const Tensor& g) {
    return std::vector<Tensor>{slice(g, axis, before, length)};
  });
}

inline Tensor concat(const std::vector<Tensor>& parts, std::size_t axis) {
  if (parts.empty()) fail(ErrorCode::ShapeMismatch, "concat of nothing");
  Shape out_shape = parts.front().shape();
  if (axis >= out_shape.size()) fail(ErrorCode::ShapeMismatch, "concat axis out of range");
  out_shape[axis] = 0;
  for (const auto& p : parts) {
    Shape s = p.shape();
    if (s.size() != out_shape.size()) fail(ErrorCode::ShapeMismatch, "concat rank mismatch");
    out_shape[axis] += s[axis];
    for (std::size_t d = 0; d < s.size(); ++d) {
      if (d != axis && s[d] != parts.front().dim(d)) fail(ErrorCode::ShapeMismatch, "concat shape mismatch");
    }
  }
  std::size_t outer = 1, inner = 1;
  for (std::size_t i = 0; i < axis; ++i) outer *= out_shape[i];
  for (std::size_t i = axis + 1; i < out_shape.size(); ++i) inner *= out_shape[i];
  std::vector<double> out(numel(out_shape));
  std::size_t offset = 0;
  std::vector<std::pair<std::size_t, std::size_t>> ranges;
  for (const auto& p : parts) {
    const std::size_t len = p.dim(axis);
    const auto src = p.data();
    for (std::size_t o = 0; o < outer; ++o) {
      std::copy_n(src.begin() + static_cast<std::ptrdiff_t>(o * len * inner), len * inner,
                  out.begin() + static_cast<std::ptrdiff_t>((o * out_shape[axis] + offset) * inner));
    }
    ranges.emplace_back(offset, len);
    offset += len;
  }
  return detail::record("concat", out_shape, std::move(out), parts, [axis, ranges](const Tensor&, const Tensor& g) {
    std::vector<Tensor> grads;
    for (const auto& [start, len] : ranges) grads.push_back(slice(g, axis, start, len));
    return grads;
  });
}

// ----------------------------------------------------------- elementwise

namespace detail {

/// out[o] = f(a[ia], b[ib]) over the broadcast of a and b, without
/// materializing either operand.
template <typename F>
std::vector<double> broadcast_apply(const Tensor& a, const Tensor& b, const Shape& shape, F f) {
  std::vector<double> out(numel(shape));
  const auto x = a.data(), y = b.data();
  if (a.shape() == b.shape()) {
    for (std::size_t i = 0; i < out.size(); ++i) out[i] = f(x[i], y[i]);
    return out;
  }
  if (b.size() == 1 && a.size() == out.size()) {
    for (std::size_t i = 0; i < out.size(); ++i) out[i] = f(x[i], y[0]);
    return out;
  }
  if (a.size() == 1 && b.size() == out.size()) {
    for (std::size_t i = 0; i < out.size(); ++i) out[i] = f(x[0], y[i]);
    return out;
  }
  // Row broadcast: a full (N, C) and b a trailing (C) or (1, C).
  if (a.size() == out.size() && shape.size() >= 1 && b.size() == shape.back() &&
      (b.rank() == 1 || numel(Shape(b.shape().begin(), b.shape().end() - 1)) == 1)) {
    const std::size_t c = shape.back();
    for (std::size_t o = 0; o < out.size(); o += c) {
      for (std::size_t j = 0; j < c; ++j) out[o + j] = f(x[o + j], y[j]);
    }
    return out;
  }
  const auto sa = broadcast_strides(a.shape(), shape);
  std::vector<std::size_t> ia(out.size());
  for_each_broadcast(shape, sa, [&](std::size_t o, std::size_t i) { ia[o] = i; });
  const auto sb = broadcast_strides(b.shape(), shape);
  for_each_broadcast(shape, sb, [&](std::size_t o, std::size_t i) { out[o] = f(x[ia[o]], y[i]); });
  return out;
}

/// Elementwise op over broadcast operands; the backward rule receives the
/// original operands and must reduce its results to their shapes.
template <typename F>
Tensor binary_forward(const char* op, const Tensor& a, const Tensor& b, F f, BackwardFn backward) {
  const Shape shape = a.shape() == b.shape() ? a.shape() : broadcast_shape(a.shape(), b.shape());
  auto out = broadcast_apply(a, b, shape, f);
  return record(op, shape, std::move(out), {a, b}, std::move(backward));
}

}  // namespace detail

inline Tensor operator*(const Tensor& a, const Tensor& b);
inline Tensor operator/(const Tensor& a, const Tensor& b);
inline Tensor operator-(const Tensor& a);

inline Tensor operator+(const Tensor& a, const Tensor& b) {
  return detail::binary_forward("add", a, b, [](double x, double y) { return x + y; },
                                [sa = a.shape(), sb = b.shape()](const Tensor&, const Tensor& g) {
                                  return std::vector<Tensor>{reduce_to(g, sa), reduce_to(g, sb)};
                                });
}

inline Tensor operator-(const Tensor& a, const Tensor& b) {
  return detail::binary_forward("sub", a, b, [](double x, double y) { return x - y; },
                                [sa = a.shape(), sb = b.shape()](const Tensor&, const Tensor& g) {
                                  return std::vector<Tensor>{reduce_to(g, sa), reduce_to(-g, sb)};
                                });
}

inline Tensor operator*(const Tensor& a, const Tensor& b) {
  return detail::binary_forward("mul", a, b, [](double x, double y) { return x * y; }, [a, b](const Tensor&, const Tensor& g) {
    return std::vector<Tensor>{reduce_to(g * b, a.shape()), reduce_to(g * a, b.shape())};
  });
}

inline Tensor operator/(const Tensor& a, const Tensor& b) {
  return detail::binary_forward("div", a, b, [](double x, double y) { return x / y; }, [a, b](const Tensor& out, const Tensor& g) {
    const Tensor gb = g / b;
    return std::vector<Tensor>{reduce_to(gb, a.shape()), reduce_to(-(gb * out), b.shape())};
  });
}

namespace detail {

template <typename F>
Tensor unary_forward(const char* op, const Tensor& x, F f, BackwardFn backward, bool second_order = true) {
  std::vector<double> out(x.size());
  const auto src = x.data();
  for (std::size_t i = 0; i < out.size(); ++i) out[i] = f(src[i]);
  return record(op, x.shape(), std::move(out), {x}, std::move(backward), second_order);
}

}  // namespace detail

inline Tensor scale(const Tensor& x, double c) {
  return detail::unary_forward("scale", x, [c](double v) { return c * v; },
                               [c](const Tensor&, const Tensor& g) { return std::vector<Tensor>{scale(g, c)}; });
}

inline Tensor operator-(const Tensor& a) { return scale(a, -1.0); }
inline Tensor operator*(const Tensor& a, double c) { return scale(a, c); }
inline Tensor operator*(double c, const Tensor& a) { return scale(a, c); }

inline Tensor add_scalar(const Tensor& x, double c) {
  return detail::unary_forward("add_scalar", x, [c](double v) { return v + c; },
                               [](const Tensor&, const Tensor& g) { return std::vector<Tensor>{g}; });
}

inline Tensor operator+(const Tensor& a, double c) { return add_scalar(a, c); }
inline Tensor operator-(double c, const Tensor& a) { return add_scalar(-a, c); }

inline Tensor square(const Tensor& x) {
  return detail::unary_forward("square", x, [](double v) { return v * v; },
                               [x](const Tensor&, const Tensor& g) { return std::vector<Tensor>{g * scale(x, 2.0)}; });
}

inline Tensor pow_scalar(const Tensor& x, double p) {
  return detail::unary_forward("pow", x, [p](double v) { return std::pow(v, p); }, [x, p](const Tensor&, const Tensor& g) {
    return std::vector<Tensor>{g * scale(pow_scalar(x, p - 1.0), p)};
  });
}

inline Tensor sqrt(const Tensor& x) {
  return detail::unary_forward("sqrt", x, [](double v) { return std::sqrt(v); },
                               [](const Tensor& out, const Tensor& g) { return std::vector<Tensor>{scale(g / out, 0.5)}; });
}

inline Tensor exp(const Tensor& x) {
  return detail::unary_forward("exp", x, [](double v) { return std::exp(v); },
                               [](const Tensor& out, const Tensor& g) { return std::vector<Tensor>{g * out}; });
}

inline Tensor log(const Tensor& x) {
  return detail::unary_forward("log", x, [](double v) { return std::log(v); },
                               [x](const Tensor&, const Tensor& g) { return std::vector<Tensor>{g / x}; });
}

inline Tensor tanh(const Tensor& x) {
  return detail::unary_forward("tanh", x, [](double v) { return std::tanh(v); },
                               [](const Tensor& out, const Tensor& g) { return std::vector<Tensor>{g * (1.0 - square(out))}; });
}

inline Tensor sigmoid(const Tensor& x) {
  return detail::unary_forward(
      "sigmoid", x, [](double v) { return v >= 0 ? 1.0 / (1.0 + std::exp(-v)) : std::exp(v) / (1.0 + std::exp(v)); },
      [](const Tensor& out, const Tensor& g) { return std::vector<Tensor>{g * (out * (1.0 - out))}; });
}

/// Derivative taken as 0 at 0; the second derivative is 0 everywhere.
inline Tensor relu(const Tensor& x) {
  return detail::unary_forward("relu", x, [](double v) { return v > 0 ? v : 0.0; }, [x](const Tensor&, const Tensor& g) {
    std::vector<double> mask(x.size());
    for (std::size_t i = 0; i < mask.size(); ++i) mask[i] = x[i] > 0 ? 1.0 : 0.0;
    return std::vector<Tensor>{g * Tensor::constant(x.shape(), std::move(mask))};
  });
}

// ------------------------------------------------------------ reductions

inline Tensor sum(const Tensor& x) {
  double s = 0.0;
  for (double v : x.data()) s += v;
  return detail::record("sum", {}, {s}, {x},
                        [x](const Tensor&, const Tensor& g) { return std::vector<Tensor>{broadcast_to(g, x.shape())}; });
}

inline Tensor mean(const Tensor& x) { return scale(sum(x), 1.0 / static_cast<double>(x.size())); }

/// Sum over `axis`, keeping it with length 1.
inline Tensor sum_axis(const Tensor& x, std::size_t axis) {
  if (axis >= x.rank()) fail(ErrorCode::ShapeMismatch, "sum axis out of range");
  Shape out_shape = x.shape();
  out_shape[axis] = 1;
  return reduce_to(x, out_shape);
}

inline Tensor mean_axis(const Tensor& x, std::size_t axis) {
  return scale(sum_axis(x, axis), 1.0 / static_cast<double>(x.dim(axis)));
}

/// Max over `axis` (kept with length 1). The gradient flows to the first
/// maximal element through a constant one-hot mask.
inline Tensor max_axis(const Tensor& x, std::size_t axis) {
  if (axis >= x.rank()) fail(ErrorCode::ShapeMismatch, "max axis out of range");
  Shape out_shape = x.shape();
  const std::size_t len = x.dim(axis);
  out_shape[axis] = 1;
  std::size_t outer = 1, inner = 1;
  for (std::size_t i = 0; i < axis; ++i) outer *= x.dim(i);
  for (std::size_t i = axis + 1; i < x.rank(); ++i) inner *= x.dim(i);
  std::vector<double> out(outer * inner);
  std::vector<double> mask(x.size(), 0.0);
  const auto src = x.data();
  for (std::size_t o = 0; o < outer; ++o) {
    for (std::size_t in = 0; in < inner; ++in) {
      std::size_t best = 0;
      for (std::size_t k = 1; k < len; ++k) {
        if (src[(o * len + k) * inner + in] > src[(o * len + best) * inner + in]) best = k;
      }
      out[o * inner + in] = src[(o * len + best) * inner + in];
      mask[(o * len + best) * inner + in] = 1.0;
    }
  }
  Tensor m = Tensor::constant(x.shape(), std::move(mask));
  return detail::record("max_axis", out_shape, std::move(out), {x},
                        [m](const Tensor&, const Tensor& g) { return std::vector<Tensor>{broadcast_to(g, m.shape()) * m}; });
}

// ---------------------------------------------------------- linear algebra

/// op(a) op(b) where op transposes a matrix when its flag is set.
inline Tensor matmul(const Tensor& a, const Tensor& b, bool trans_a, bool trans_b) {
  if (a.rank() != 2 || b.rank() != 2) fail(ErrorCode::ShapeMismatch, "matmul needs matrices");
  const auto m = trans_a ? a.dim(1) : a.dim(0), k = trans_a ? a.dim(0) : a.dim(1);
  const auto kb = trans_b ? b.dim(1) : b.dim(0), n = trans_b ? b.dim(0) : b.dim(1);
  if (k != kb) {
    fail(ErrorCode::ShapeMismatch, "matmul " + shape_str(a.shape()) + (trans_a ? "^T" : "") + " x " + shape_str(b.shape()) + (trans_b ? "^T" : ""));
  }
  using RowMat = Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;
  using Map = Eigen::Map<const RowMat>;
  const auto ei = [](std::size_t v) { return static_cast<Eigen::Index>(v); };
  const Map A(a.data().data(), ei(a.dim(0)), ei(a.dim(1)));
  const Map B(b.data().data(), ei(b.dim(0)), ei(b.dim(1)));
  std::vector<double> out(m * n);
  Eigen::Map<RowMat> C(out.data(), ei(m), ei(n));
  if (!trans_a && !trans_b) C.noalias() = A * B;
  else if (!trans_a) C.noalias() = A * B.transpose();
  else if (!trans_b) C.noalias() = A.transpose() * B;
  else C.noalias() = A.transpose() * B.transpose();
  return detail::record("matmul", {m, n}, std::move(out), {a, b}, [a, b, trans_a, trans_b](const Tensor&, const Tensor& g) {
    if (!trans_a && !trans_b) return std::vector<Tensor>{matmul(g, b, false, true), matmul(a, g, true, false)};
    if (!trans_a) return std::vector<Tensor>{matmul(g, b, false, false), matmul(g, a, true, false)};
    if (!trans_b) return std::vector<Tensor>{matmul(b, g, false, true), matmul(a, g, false, false)};
    return std::vector<Tensor>{matmul(b, g, true, true), matmul(g, a, true, true)};
  });
}

inline Tensor matmul(const Tensor& a, const Tensor& b) { return matmul(a, b, false, false); }

/// x W^T + b for x (N, in), W (out, in), b (out).
inline Tensor affine(const Tensor& x, const Tensor& weight, const Tensor& bias) {
  if (x.rank() != 2 || weight.rank() != 2 || x.dim(1) != weight.dim(1)) {
    fail(ErrorCode::ShapeMismatch, "affine " + shape_str(x.shape()) + " with weight " + shape_str(weight.shape()));
  }
  Tensor y = matmul(x, weight, false, true);
  return bias.defined() ? y + bias : y;
}

/// Kernel-size-1 convolution over (batch, C_in, L): the same affine map
/// W (C_out, C_in), b (C_out) applied at every position.
inline Tensor pointwise_conv1(const Tensor& x, const Tensor& weight, const Tensor& bias) {
  if (x.rank() != 3) fail(ErrorCode::ShapeMismatch, "pointwise_conv1 expects (batch, C, L)");
  const auto batch = x.dim(0), length = x.dim(2);
  Tensor rows = reshape(permute(x, {0, 2, 1}), {batch * length, x.dim(1)});
  Tensor y = affine(rows, weight, bias);
  return permute(reshape(y, {batch, length, weight.dim(0)}), {0, 2, 1});
}

/// Valid 1-D convolution: x (batch, C_in, L), W (C_out, C_in, k), b (C_out).
inline Tensor conv1d(const Tensor& x, const Tensor& weight, const Tensor& bias) {
  if (x.rank() != 3 || weight.rank() != 3 || x.dim(1) != weight.dim(1) || x.dim(2) < weight.dim(2)) {
    fail(ErrorCode::ShapeMismatch, "conv1d " + shape_str(x.shape()) + " with kernel " + shape_str(weight.shape()));
  }
  const auto k = weight.dim(2);
  const auto out_len = x.dim(2) - k + 1;
  Tensor acc;
  for (std::size_t j = 0; j < k; ++j) {
    Tensor w_j = reshape(slice(weight, 2, j, 1), {weight.dim(0), weight.dim(1)});
    Tensor term = pointwise_conv1(slice(x, 2, j, out_len), w_j, Tensor{});
    acc = acc.defined() ? acc + term : term;
  }
  return acc + reshape(bias, {bias.dim(0), 1});
}

/// Non-overlapping max pooling along the last axis of (batch, C, L);
/// a trailing remainder shorter than the window is dropped.
inline Tensor maxpool1d(const Tensor& x, std::size_t window) {
  if (x.rank() != 3 || window == 0) fail(ErrorCode::ShapeMismatch, "maxpool1d expects (batch, C, L)");
  const auto out_len = x.dim(2) / window;
  Tensor trimmed = out_len * window == x.dim(2) ? x : slice(x, 2, 0, out_len * window);
  Tensor pooled = max_axis(reshape(trimmed, {x.dim(0), x.dim(1), out_len, window}), 3);
  return reshape(pooled, {x.dim(0), x.dim(1), out_len});
}

/// Row-wise Euclidean norm of a matrix, sqrt(sum x^2 + eps), shape (N, 1).
inline Tensor l2_norm_rows(const Tensor& x, double eps = 0.0) {
  if (x.rank() != 2) fail(ErrorCode::ShapeMismatch, "l2_norm_rows expects a matrix");
  return sqrt(add_scalar(sum_axis(square(x), 1), eps));
}

/// Softmax over the last axis of a matrix.
inline Tensor softmax(const Tensor& logits) {
  if (logits.rank() != 2) fail(ErrorCode::ShapeMismatch, "softmax expects a matrix");
  Tensor shift = max_axis(logits, 1).detach();
  Tensor e = exp(logits - shift);
  return e / sum_axis(e, 1);
}

/// Mean cross-entropy of softmax(logits) against integer labels. Fused
/// with a closed-form gradient; no second-order rule.
inline Tensor softmax_cross_entropy(const Tensor& logits, const std::vector<int>& labels) {
  if (logits.rank() != 2 || logits.dim(0) != labels.size()) fail(ErrorCode::ShapeMismatch, "logits/labels mismatch");
  const auto n = logits.dim(0), c = logits.dim(1);
  std::vector<double> probs(logits.size());
  double loss = 0.0;
  const auto z = logits.data();
  for (std::size_t i = 0; i < n; ++i) {
    if (labels[i] < 0 || static_cast<std::size_t>(labels[i]) >= c) fail(ErrorCode::ShapeMismatch, "label out of range");
    double mx = z[i * c];
    for (std::size_t j = 1; j < c; ++j) mx = std::max(mx, z[i * c + j]);
    double s = 0.0;
    for (std::size_t j = 0; j < c; ++j) s += std::exp(z[i * c + j] - mx);
    for (std::size_t j = 0; j < c; ++j) probs[i * c + j] = std::exp(z[i * c + j] - mx) / s;
    loss -= z[i * c + static_cast<std::size_t>(labels[i])] - mx - std::log(s);
  }
  loss /= static_cast<double>(n);
  return detail::record(
      "softmax_cross_entropy", {}, {loss}, {logits},
      [probs, labels, n, c](const Tensor&, const Tensor& g) {
        std::vector<double> d(probs);
        for (std::size_t i = 0; i < n; ++i) d[i * c + static_cast<std::size_t>(labels[i])] -= 1.0;
        const double s = g.item() / static_cast<double>(n);
        for (auto& v : d) v *= s;
        return std::vector<Tensor>{Tensor::constant({n, c}, std::move(d))};
      },
      /*second_order=*/false);
}

// -------------------------------------------------------------- gradients

/// Gradients of scalar `output` with respect to `wrt`. With
/// `create_graph` the results are graph nodes that can be differentiated
/// again. Leaves that `output` does not depend on get zero gradients.
inline std::vector<Tensor> grad(const Tensor& output, const std::vector<Tensor>& wrt, bool create_graph = false) {
  if (output.size() != 1) fail(ErrorCode::NotScalarOutput, "gradient of non-scalar " + shape_str(output.shape()));
  std::vector<Tensor> result;
  result.reserve(wrt.size());
  if (!output.requires_grad()) {
    for (const auto& w : wrt) result.push_back(Tensor::zeros(w.shape()));
    return result;
  }

  std::unordered_set<const Node*> targets;
  for (const auto& w : wrt) targets.insert(w.node());

  // iterative post-order gives a topological order (inputs first)
  std::vector<std::shared_ptr<Node>> topo;
  std::unordered_map<const Node*, bool> needed;
  {
    std::vector<std::pair<std::shared_ptr<Node>, std::size_t>> stack;
    std::unordered_set<const Node*> visited;
    stack.emplace_back(output.node_ptr(), 0);
    visited.insert(output.node());
    while (!stack.empty()) {
      auto& [node, next] = stack.back();
      if (next < node->inputs.size()) {
        const auto& in = node->inputs[next++].node_ptr();
        if (in->requires_grad && visited.insert(in.get()).second) stack.emplace_back(in, 0);
      } else {
        bool need = targets.count(node.get()) > 0;
        for (const auto& in : node->inputs) {
          if (!in.requires_grad()) continue;
          const auto it = needed.find(in.node());
          if (it != needed.end() && it->second) need = true;
        }
        needed[node.get()] = need;
        topo.push_back(node);
        stack.pop_back();
      }
    }
  }

  std::unordered_map<const Node*, Tensor> grads;
  grads[output.node()] = Tensor::full(output.shape(), 1.0);
  GradModeGuard mode(create_graph);
  for (auto it = topo.rbegin(); it != topo.rend(); ++it) {
    const auto& node = *it;
    if (!needed[node.get()] || !node->backward) continue;
    const auto g_it = grads.find(node.get());
    if (g_it == grads.end()) continue;
    if (create_graph && !node->second_order) {
      fail(ErrorCode::UnsupportedSecondOrder, std::string("op '") + node->op + "' has no second-order rule");
    }
    const Tensor g = g_it->second;
    const auto in_grads = node->backward(Tensor(node), g);
    for (std::size_t i = 0; i < node->inputs.size(); ++i) {
      const auto& in = node->inputs[i];
      if (!in.requires_grad() || !needed[in.node()] || !in_grads[i].defined()) continue;
      auto [slot, inserted] = grads.try_emplace(in.node(), in_grads[i]);
      if (!inserted) slot->second = slot->second + in_grads[i];
    }
    if (!targets.count(node.get())) grads.erase(node.get());
  }

  for (const auto& w : wrt) {
    const auto it = grads.find(w.node());
    result.push_back(it == grads.end() ? Tensor::zeros(w.shape()) : it->second);
  }
  return result;
}

inline std::vector<Tensor> backward(const Tensor& output, const std::vector<Tensor>& wrt) { return grad(output, wrt, false); }

inline std::vector<Tensor> grad_graph(const Tensor& output, const std::vector<Tensor>& wrt) { return grad(output, wrt, true); }

}  // namespace ssmgan::ad
