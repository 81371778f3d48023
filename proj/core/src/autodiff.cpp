/*
 * Copyright 2026 The GL-AT Authors.
 *
 * Licensed under the Apache License, Version 2.0 (the "License");
 * you may not use this file except in compliance with the License.
 * You may obtain a copy of the License at
 *
 *   http://www.apache.org/licenses/LICENSE-2.0
 *
 * Unless required by applicable law or agreed to in writing, software
 * distributed under the License is distributed on an "AS IS" BASIS,
 * WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
 * See the License for the specific language governing permissions and
 * limitations under the License.
 */

#include "glat/autodiff.hpp"

#include <algorithm>
#include <cmath>
#include <memory>
#include <numeric>

#include <Eigen/Core>

#include "glat/errors.hpp"

namespace glat::ad {
namespace {

template <typename T>
using RowMatrix = Eigen::Matrix<T, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;
template <typename T>
using MatMap = Eigen::Map<RowMatrix<T>>;
template <typename T>
using ConstMatMap = Eigen::Map<const RowMatrix<T>>;

[[noreturn]] void shape_mismatch(std::string_view op, const Shape& a, const Shape& b) {
  throw ShapeError(std::string(op) + ": incompatible shapes " + shape_string(a) + " and " +
                   shape_string(b));
}

void require_rank(std::string_view op, const Shape& s, std::size_t rank) {
  if (s.size() != rank) {
    throw ShapeError(std::string(op) + ": expected rank " + std::to_string(rank) + ", got " +
                     shape_string(s));
  }
}

/// outer x axis x inner decomposition around \p axis.
struct AxisSplit {
  std::size_t outer = 1;
  std::size_t length = 1;
  std::size_t inner = 1;
  Shape reduced;
};

AxisSplit split_axis(std::string_view op, const Shape& s, std::size_t axis) {
  if (axis >= s.size()) {
    throw ShapeError(std::string(op) + ": axis " + std::to_string(axis) + " out of range for " +
                     shape_string(s));
  }
  AxisSplit out;
  for (std::size_t i = 0; i < axis; ++i) out.outer *= s[i];
  out.length = s[axis];
  for (std::size_t i = axis + 1; i < s.size(); ++i) out.inner *= s[i];
  for (std::size_t i = 0; i < s.size(); ++i) {
    if (i != axis) out.reduced.push_back(s[i]);
  }
  if (out.reduced.empty()) out.reduced.push_back(1);
  if (out.length == 0) throw ShapeError(std::string(op) + ": cannot reduce an empty axis");
  return out;
}

}  // namespace

std::size_t numel(const Shape& shape) {
  return std::accumulate(shape.begin(), shape.end(), std::size_t{1}, std::multiplies<>());
}

std::string shape_string(const Shape& shape) {
  std::string out = "[";
  for (std::size_t i = 0; i < shape.size(); ++i) {
    if (i) out += ", ";
    out += std::to_string(shape[i]);
  }
  return out + "]";
}

const char* to_string(ParamGroup group) {
  return group == ParamGroup::feature_extractor ? "feature_extractor" : "classifier";
}

ParamGroup parse_param_group(std::string_view text) {
  if (text == "feature_extractor") return ParamGroup::feature_extractor;
  if (text == "classifier") return ParamGroup::classifier;
  throw FormatError("unknown parameter group '" + std::string(text) + "'");
}

// ---------------------------------------------------------------- Tensor

template <typename T>
Tensor<T>::Tensor(Shape s, T fill) : shape(std::move(s)), values(numel(shape), fill) {}

template <typename T>
Tensor<T>::Tensor(Shape s, std::vector<T> v) : shape(std::move(s)), values(std::move(v)) {
  if (numel(shape) != values.size()) {
    throw ShapeError("tensor of shape " + shape_string(shape) + " given " +
                     std::to_string(values.size()) + " values");
  }
}

// ---------------------------------------------------------------- ParameterStore

template <typename T>
std::size_t ParameterStore<T>::add(std::string name, ParamGroup group, Tensor<T> init) {
  if (find(name)) throw UsageError("duplicate parameter '" + name + "'");
  Parameter<T> p;
  p.name = std::move(name);
  p.group = group;
  const std::size_t n = init.size();
  p.value = std::move(init);
  p.value.requires_grad = true;
  p.grad.assign(n, T{0});
  p.first_moment.assign(n, T{0});
  p.second_moment.assign(n, T{0});
  params_.push_back(std::move(p));
  return params_.size() - 1;
}

template <typename T>
std::size_t ParameterStore<T>::num_values() const {
  std::size_t n = 0;
  for (const auto& p : params_) n += p.value.size();
  return n;
}

template <typename T>
std::optional<std::size_t> ParameterStore<T>::find(std::string_view name) const {
  for (std::size_t i = 0; i < params_.size(); ++i) {
    if (params_[i].name == name) return i;
  }
  return std::nullopt;
}

template <typename T>
std::size_t ParameterStore<T>::index_of(std::string_view name) const {
  if (auto i = find(name)) return *i;
  throw UsageError("no parameter named '" + std::string(name) + "'");
}

template <typename T>
void ParameterStore<T>::zero_grad() {
  for (auto& p : params_) {
    std::fill(p.grad.begin(), p.grad.end(), T{0});
    p.has_grad = false;
  }
}

// ---------------------------------------------------------------- GradientBuffer

template <typename T>
GradientBuffer<T>::GradientBuffer(const ParameterStore<T>& store)
    : grads_(store.size()), touched_(store.size(), 0) {
  for (std::size_t i = 0; i < store.size(); ++i) grads_[i].assign(store[i].value.size(), T{0});
}

template <typename T>
void GradientBuffer<T>::accumulate(std::size_t index, std::span<const T> grad) {
  auto& g = grads_.at(index);
  if (g.size() != grad.size()) throw ShapeError("gradient size mismatch for parameter slot");
  for (std::size_t i = 0; i < g.size(); ++i) g[i] += grad[i];
  touched_[index] = 1;
}

template <typename T>
void GradientBuffer<T>::add_to(ParameterStore<T>& store, T scale) const {
  if (store.size() != grads_.size()) throw UsageError("gradient buffer does not match the store");
  for (std::size_t p = 0; p < grads_.size(); ++p) {
    if (!touched_[p]) continue;
    auto& dst = store[p].grad;
    for (std::size_t i = 0; i < dst.size(); ++i) dst[i] += scale * grads_[p][i];
    store[p].has_grad = true;
  }
}

template <typename T>
void GradientBuffer<T>::clear() {
  for (auto& g : grads_) std::fill(g.begin(), g.end(), T{0});
  std::fill(touched_.begin(), touched_.end(), std::uint8_t{0});
}

// ---------------------------------------------------------------- Var / Graph

template <typename T>
const Shape& Var<T>::shape() const {
  return graph_->shape_of(id_);
}

template <typename T>
std::span<const T> Var<T>::values() const {
  return graph_->values_of(id_);
}

template <typename T>
T Var<T>::item() const {
  const auto v = values();
  if (v.size() != 1) throw UsageError("item() on a node of shape " + shape_string(shape()));
  return v[0];
}

template <typename T>
void Graph<T>::check_alive() const {
  if (consumed_) throw UsageError("graph already consumed by backward()");
}

namespace {

template <typename T>
void check_input(const Tensor<T>& t, const char* what) {
  if (numel(t.shape) != t.values.size()) {
    throw ShapeError(std::string(what) + ": shape " + shape_string(t.shape) + " does not match " +
                     std::to_string(t.values.size()) + " values");
  }
  for (const T& v : t.values) {
    if (!std::isfinite(v)) throw NumericalFault(std::string(what) + " holds a non-finite value");
  }
}

}  // namespace

template <typename T>
Var<T> Graph<T>::constant(Tensor<T> value) {
  check_alive();
  check_input(value, "constant");
  Node n;
  n.shape = std::move(value.shape);
  n.value = std::move(value.values);
  nodes_.push_back(std::move(n));
  return Var<T>(this, nodes_.size() - 1);
}

template <typename T>
Var<T> Graph<T>::leaf(Tensor<T> value) {
  check_alive();
  check_input(value, "leaf");
  Node n;
  n.shape = std::move(value.shape);
  n.value = std::move(value.values);
  n.requires_grad = grad_enabled_;
  n.is_leaf = true;
  nodes_.push_back(std::move(n));
  return Var<T>(this, nodes_.size() - 1);
}

template <typename T>
Var<T> Graph<T>::parameter(ParameterStore<T>& store, std::size_t index) {
  check_alive();
  const auto& p = store[index];
  Node n;
  n.shape = p.value.shape;
  n.value = p.value.values;
  n.requires_grad = grad_enabled_;
  n.is_leaf = true;
  n.store = &store;
  n.param_index = index;
  nodes_.push_back(std::move(n));
  return Var<T>(this, nodes_.size() - 1);
}

template <typename T>
Var<T> Graph<T>::record(std::string_view op, Shape shape, std::vector<T> values,
                        std::initializer_list<Var<T>> parents, BackwardFn backward) {
  return record(op, std::move(shape), std::move(values),
                std::span<const Var<T>>(parents.begin(), parents.size()), std::move(backward));
}

template <typename T>
Var<T> Graph<T>::record(std::string_view op, Shape shape, std::vector<T> values,
                        std::span<const Var<T>> parents, BackwardFn backward) {
  check_alive();
  for (const T& v : values) {
    if (!std::isfinite(v)) {
      throw NumericalFault(std::string(op) + " produced a non-finite value at node " +
                           std::to_string(nodes_.size()));
    }
  }
  Node n;
  n.shape = std::move(shape);
  n.value = std::move(values);
  bool needs = false;
  for (const auto& p : parents) {
    if (p.graph_ != this) throw UsageError(std::string(op) + ": operands belong to different graphs");
    needs = needs || nodes_[p.id_].requires_grad;
  }
  n.requires_grad = grad_enabled_ && needs;
  if (n.requires_grad) n.backward = std::move(backward);
  nodes_.push_back(std::move(n));
  return Var<T>(this, nodes_.size() - 1);
}

template <typename T>
std::vector<T>& Graph<T>::grad_of(Var<T> v) {
  auto& n = nodes_[v.id_];
  if (n.grad.empty()) n.grad.assign(n.value.size(), T{0});
  return n.grad;
}

template <typename T>
std::span<const T> Graph<T>::grad(Var<T> v) const {
  const auto& n = nodes_[v.id_];
  if (!n.is_leaf) throw UsageError("gradients are only retained on leaves");
  return n.grad;
}

template <typename T>
void Graph<T>::run_backward(Var<T> loss, GradientBuffer<T>* sink) {
  check_alive();
  if (loss.graph_ != this) throw UsageError("loss belongs to a different graph");
  auto& root = nodes_[loss.id_];
  if (root.value.size() != 1) {
    throw UsageError("backward() needs a scalar loss, got shape " + shape_string(root.shape));
  }
  if (!root.requires_grad) throw UsageError("loss does not depend on any differentiable input");
  root.grad.assign(1, T{1});
  for (std::size_t i = loss.id_ + 1; i-- > 0;) {
    auto& n = nodes_[i];
    if (n.grad.empty() || !n.backward) continue;
    // Gradients flow strictly to lower indices, so n.grad is final here.
    n.backward(*this, n.grad);
  }
  for (auto& n : nodes_) {
    if (n.is_leaf && n.requires_grad && n.grad.empty()) n.grad.assign(n.value.size(), T{0});
    if (n.is_leaf && n.store != nullptr && n.requires_grad) {
      if (sink != nullptr) {
        sink->accumulate(n.param_index, n.grad);
      } else {
        auto& p = (*n.store)[n.param_index];
        for (std::size_t k = 0; k < p.grad.size(); ++k) p.grad[k] += n.grad[k];
        p.has_grad = true;
      }
    }
    if (!n.is_leaf) {
      n.backward = nullptr;
      std::vector<T>().swap(n.grad);
      std::vector<T>().swap(n.value);
    }
  }
  consumed_ = true;
}

template <typename T>
void Graph<T>::backward(Var<T> loss) {
  run_backward(loss, nullptr);
}

template <typename T>
void Graph<T>::backward(Var<T> loss, GradientBuffer<T>& sink) {
  run_backward(loss, &sink);
}

// ---------------------------------------------------------------- elementwise

template <typename T>
Var<T> add(Var<T> a, Var<T> b) {
  if (a.shape() != b.shape()) shape_mismatch("add", a.shape(), b.shape());
  const auto av = a.values();
  const auto bv = b.values();
  std::vector<T> out(av.size());
  for (std::size_t i = 0; i < out.size(); ++i) out[i] = av[i] + bv[i];
  return a.graph().record("add", a.shape(), std::move(out), {a, b},
                          [a, b](Graph<T>& g, std::span<const T> dy) {
                            for (Var<T> p : {a, b}) {
                              if (!g.requires_grad(p)) continue;
                              auto& gp = g.grad_of(p);
                              for (std::size_t i = 0; i < dy.size(); ++i) gp[i] += dy[i];
                            }
                          });
}

template <typename T>
Var<T> mul(Var<T> a, Var<T> b) {
  if (a.shape() != b.shape()) shape_mismatch("mul", a.shape(), b.shape());
  const auto av = a.values();
  const auto bv = b.values();
  std::vector<T> out(av.size());
  for (std::size_t i = 0; i < out.size(); ++i) out[i] = av[i] * bv[i];
  return a.graph().record("mul", a.shape(), std::move(out), {a, b},
                          [a, b](Graph<T>& g, std::span<const T> dy) {
                            const auto av = g.values_of(a.id());
                            const auto bv = g.values_of(b.id());
                            if (g.requires_grad(a)) {
                              auto& ga = g.grad_of(a);
                              for (std::size_t i = 0; i < dy.size(); ++i) ga[i] += dy[i] * bv[i];
                            }
                            if (g.requires_grad(b)) {
                              auto& gb = g.grad_of(b);
                              for (std::size_t i = 0; i < dy.size(); ++i) gb[i] += dy[i] * av[i];
                            }
                          });
}

template <typename T>
Var<T> scale(Var<T> a, T factor) {
  const auto av = a.values();
  std::vector<T> out(av.size());
  for (std::size_t i = 0; i < out.size(); ++i) out[i] = av[i] * factor;
  return a.graph().record("scale", a.shape(), std::move(out), {a},
                          [a, factor](Graph<T>& g, std::span<const T> dy) {
                            auto& ga = g.grad_of(a);
                            for (std::size_t i = 0; i < dy.size(); ++i) ga[i] += dy[i] * factor;
                          });
}

template <typename T>
Var<T> relu(Var<T> a) {
  const auto av = a.values();
  std::vector<T> out(av.size());
  for (std::size_t i = 0; i < out.size(); ++i) out[i] = av[i] > T{0} ? av[i] : T{0};
  return a.graph().record("relu", a.shape(), std::move(out), {a},
                          [a](Graph<T>& g, std::span<const T> dy) {
                            const auto av = g.values_of(a.id());
                            auto& ga = g.grad_of(a);
                            for (std::size_t i = 0; i < dy.size(); ++i) {
                              if (av[i] > T{0}) ga[i] += dy[i];
                            }
                          });
}

template <typename T>
Var<T> sigmoid(Var<T> a) {
  const auto av = a.values();
  std::vector<T> out(av.size());
  for (std::size_t i = 0; i < out.size(); ++i) {
    // Split by sign so exp never overflows.
    const T x = av[i];
    if (x >= T{0}) {
      out[i] = T{1} / (T{1} + std::exp(-x));
    } else {
      const T e = std::exp(x);
      out[i] = e / (T{1} + e);
    }
  }
  return a.graph().record("sigmoid", a.shape(), std::move(out), {a},
                            [a](Graph<T>& g, std::span<const T> dy) {
                              const auto av = g.values_of(a.id());
                              auto& ga = g.grad_of(a);
                              for (std::size_t i = 0; i < dy.size(); ++i) {
                                const T x = av[i];
                                const T s = x >= T{0} ? T{1} / (T{1} + std::exp(-x))
                                                      : std::exp(x) / (T{1} + std::exp(x));
                                ga[i] += dy[i] * s * (T{1} - s);
                              }
                            });
}

template <typename T>
Var<T> reshape(Var<T> a, Shape shape) {
  if (numel(shape) != numel(a.shape())) shape_mismatch("reshape", a.shape(), shape);
  std::vector<T> out(a.values().begin(), a.values().end());
  return a.graph().record("reshape", std::move(shape), std::move(out), {a},
                          [a](Graph<T>& g, std::span<const T> dy) {
                            auto& ga = g.grad_of(a);
                            for (std::size_t i = 0; i < dy.size(); ++i) ga[i] += dy[i];
                          });
}

template <typename T>
Var<T> transpose(Var<T> a) {
  require_rank("transpose", a.shape(), 2);
  const std::size_t rows = a.shape()[0];
  const std::size_t cols = a.shape()[1];
  const auto av = a.values();
  std::vector<T> out(av.size());
  for (std::size_t r = 0; r < rows; ++r) {
    for (std::size_t c = 0; c < cols; ++c) out[c * rows + r] = av[r * cols + c];
  }
  return a.graph().record("transpose", {cols, rows}, std::move(out), {a},
                          [a, rows, cols](Graph<T>& g, std::span<const T> dy) {
                            auto& ga = g.grad_of(a);
                            for (std::size_t r = 0; r < rows; ++r) {
                              for (std::size_t c = 0; c < cols; ++c) ga[r * cols + c] += dy[c * rows + r];
                            }
                          });
}

template <typename T>
Var<T> sum(Var<T> a) {
  const auto av = a.values();
  T total{0};
  for (const T& v : av) total += v;
  return a.graph().record("sum", {1}, {total}, {a}, [a](Graph<T>& g, std::span<const T> dy) {
    auto& ga = g.grad_of(a);
    for (auto& v : ga) v += dy[0];
  });
}

template <typename T>
Var<T> mean_axis(Var<T> a, std::size_t axis) {
  const AxisSplit s = split_axis("mean_axis", a.shape(), axis);
  const auto av = a.values();
  std::vector<T> out(s.outer * s.inner, T{0});
  for (std::size_t o = 0; o < s.outer; ++o) {
    for (std::size_t l = 0; l < s.length; ++l) {
      const T* row = av.data() + (o * s.length + l) * s.inner;
      T* dst = out.data() + o * s.inner;
      for (std::size_t i = 0; i < s.inner; ++i) dst[i] += row[i];
    }
  }
  const T inv = T{1} / static_cast<T>(s.length);
  for (auto& v : out) v *= inv;
  return a.graph().record("mean_axis", s.reduced, std::move(out), {a},
                          [a, s, inv](Graph<T>& g, std::span<const T> dy) {
                            auto& ga = g.grad_of(a);
                            for (std::size_t o = 0; o < s.outer; ++o) {
                              for (std::size_t l = 0; l < s.length; ++l) {
                                T* row = ga.data() + (o * s.length + l) * s.inner;
                                const T* src = dy.data() + o * s.inner;
                                for (std::size_t i = 0; i < s.inner; ++i) row[i] += src[i] * inv;
                              }
                            }
                          });
}

template <typename T>
Var<T> max_axis(Var<T> a, std::size_t axis) {
  const AxisSplit s = split_axis("max_axis", a.shape(), axis);
  const auto av = a.values();
  std::vector<T> out(s.outer * s.inner);
  std::vector<std::size_t> arg(s.outer * s.inner, 0);
  for (std::size_t o = 0; o < s.outer; ++o) {
    for (std::size_t i = 0; i < s.inner; ++i) {
      std::size_t best = 0;
      T best_v = av[o * s.length * s.inner + i];
      for (std::size_t l = 1; l < s.length; ++l) {
        const T v = av[(o * s.length + l) * s.inner + i];
        if (v > best_v) {
          best_v = v;
          best = l;
        }
      }
      out[o * s.inner + i] = best_v;
      arg[o * s.inner + i] = best;
    }
  }
  return a.graph().record("max_axis", s.reduced, std::move(out), {a},
                          [a, s, arg = std::move(arg)](Graph<T>& g, std::span<const T> dy) {
                            auto& ga = g.grad_of(a);
                            for (std::size_t o = 0; o < s.outer; ++o) {
                              for (std::size_t i = 0; i < s.inner; ++i) {
                                const std::size_t k = o * s.inner + i;
                                ga[(o * s.length + arg[k]) * s.inner + i] += dy[k];
                              }
                            }
                          });
}

// ---------------------------------------------------------------- linear / conv

template <typename T>
Var<T> linear(Var<T> x, Var<T> weight, Var<T> bias) {
  require_rank("linear weight", weight.shape(), 2);
  const std::size_t out_dim = weight.shape()[0];
  const std::size_t in_dim = weight.shape()[1];
  if (bias.shape() != Shape{out_dim}) shape_mismatch("linear bias", bias.shape(), {out_dim});
  const bool vector_input = x.shape().size() == 1;
  if (!vector_input && x.shape().size() != 2) shape_mismatch("linear", x.shape(), weight.shape());
  const std::size_t rows = vector_input ? 1 : x.shape()[0];
  const std::size_t cols = vector_input ? x.shape()[0] : x.shape()[1];
  if (cols != in_dim) shape_mismatch("linear", x.shape(), weight.shape());

  std::vector<T> out(rows * out_dim);
  {
    ConstMatMap<T> X(x.values().data(), rows, in_dim);
    ConstMatMap<T> W(weight.values().data(), out_dim, in_dim);
    Eigen::Map<const Eigen::Matrix<T, 1, Eigen::Dynamic>> b(bias.values().data(), out_dim);
    MatMap<T> Y(out.data(), rows, out_dim);
    Y.noalias() = X * W.transpose();
    Y.rowwise() += b;
  }
  Shape shape = vector_input ? Shape{out_dim} : Shape{rows, out_dim};
  return x.graph().record(
      "linear", std::move(shape), std::move(out), {x, weight, bias},
      [x, weight, bias, rows, in_dim, out_dim](Graph<T>& g, std::span<const T> dy) {
        ConstMatMap<T> dY(dy.data(), rows, out_dim);
        if (g.requires_grad(x)) {
          ConstMatMap<T> W(g.values_of(weight.id()).data(), out_dim, in_dim);
          MatMap<T> dX(g.grad_of(x).data(), rows, in_dim);
          dX.noalias() += dY * W;
        }
        if (g.requires_grad(weight)) {
          ConstMatMap<T> X(g.values_of(x.id()).data(), rows, in_dim);
          MatMap<T> dW(g.grad_of(weight).data(), out_dim, in_dim);
          dW.noalias() += dY.transpose() * X;
        }
        if (g.requires_grad(bias)) {
          Eigen::Map<Eigen::Matrix<T, 1, Eigen::Dynamic>> db(g.grad_of(bias).data(), out_dim);
          db += dY.colwise().sum();
        }
      });
}

namespace {

template <typename T>
void im2col(const T* in, std::size_t channels, std::size_t height, std::size_t width, std::size_t k,
            T* cols) {
  const std::size_t pad = k / 2;
  const std::size_t plane = height * width;
  for (std::size_t c = 0; c < channels; ++c) {
    for (std::size_t ky = 0; ky < k; ++ky) {
      for (std::size_t kx = 0; kx < k; ++kx) {
        T* row = cols + ((c * k + ky) * k + kx) * plane;
        // Valid output columns for this kernel tap: 0 <= x + kx - pad < width.
        const std::size_t x0 = std::min(width, kx < pad ? pad - kx : 0);
        const std::size_t x1 = width + pad > kx ? std::max(x0, std::min(width, width + pad - kx)) : x0;
        for (std::size_t y = 0; y < height; ++y) {
          T* dst = row + y * width;
          const std::ptrdiff_t iy = static_cast<std::ptrdiff_t>(y + ky) - static_cast<std::ptrdiff_t>(pad);
          if (iy < 0 || iy >= static_cast<std::ptrdiff_t>(height)) {
            std::fill(dst, dst + width, T{0});
            continue;
          }
          const T* src = in + c * plane + static_cast<std::size_t>(iy) * width;
          std::fill(dst, dst + x0, T{0});
          for (std::size_t x = x0; x < x1; ++x) dst[x] = src[x + kx - pad];
          std::fill(dst + x1, dst + width, T{0});
        }
      }
    }
  }
}

template <typename T>
void col2im_add(const T* cols, std::size_t channels, std::size_t height, std::size_t width, std::size_t k,
                T* out) {
  const std::size_t pad = k / 2;
  const std::size_t plane = height * width;
  for (std::size_t c = 0; c < channels; ++c) {
    for (std::size_t ky = 0; ky < k; ++ky) {
      for (std::size_t kx = 0; kx < k; ++kx) {
        const T* row = cols + ((c * k + ky) * k + kx) * plane;
        const std::size_t x0 = std::min(width, kx < pad ? pad - kx : 0);
        const std::size_t x1 = width + pad > kx ? std::max(x0, std::min(width, width + pad - kx)) : x0;
        for (std::size_t y = 0; y < height; ++y) {
          const std::ptrdiff_t iy = static_cast<std::ptrdiff_t>(y + ky) - static_cast<std::ptrdiff_t>(pad);
          if (iy < 0 || iy >= static_cast<std::ptrdiff_t>(height)) continue;
          T* dst = out + c * plane + static_cast<std::size_t>(iy) * width;
          const T* src = row + y * width;
          for (std::size_t x = x0; x < x1; ++x) dst[x + kx - pad] += src[x];
        }
      }
    }
  }
}

}  // namespace

template <typename T>
Var<T> conv2d(Var<T> x, Var<T> weight, Var<T> bias) {
  require_rank("conv2d input", x.shape(), 3);
  require_rank("conv2d weight", weight.shape(), 4);
  const std::size_t cin = x.shape()[0];
  const std::size_t height = x.shape()[1];
  const std::size_t width = x.shape()[2];
  const std::size_t cout = weight.shape()[0];
  const std::size_t k = weight.shape()[2];
  if (weight.shape()[1] != cin || weight.shape()[3] != k || k % 2 == 0) {
    shape_mismatch("conv2d", x.shape(), weight.shape());
  }
  if (bias.shape() != Shape{cout}) shape_mismatch("conv2d bias", bias.shape(), {cout});
  const std::size_t plane = height * width;
  const std::size_t patch = cin * k * k;

  auto cols = std::make_shared<std::vector<T>>(patch * plane);
  im2col(x.values().data(), cin, height, width, k, cols->data());
  std::vector<T> out(cout * plane);
  {
    ConstMatMap<T> W(weight.values().data(), cout, patch);
    ConstMatMap<T> C(cols->data(), patch, plane);
    Eigen::Map<const Eigen::Matrix<T, Eigen::Dynamic, 1>> b(bias.values().data(), cout);
    MatMap<T> Y(out.data(), cout, plane);
    Y.noalias() = W * C;
    Y.colwise() += b;
  }
  Graph<T>& graph = x.graph();
  const bool keep_cols = graph.grad_enabled() &&
                         (graph.requires_grad(weight) || graph.requires_grad(x) || graph.requires_grad(bias));
  if (!keep_cols) cols.reset();
  return graph.record(
      "conv2d", {cout, height, width}, std::move(out), {x, weight, bias},
      [x, weight, bias, cols, cin, height, width, cout, k, plane, patch](Graph<T>& g,
                                                                          std::span<const T> dy) {
        ConstMatMap<T> dY(dy.data(), cout, plane);
        if (g.requires_grad(weight)) {
          ConstMatMap<T> C(cols->data(), patch, plane);
          MatMap<T> dW(g.grad_of(weight).data(), cout, patch);
          dW.noalias() += dY * C.transpose();
        }
        if (g.requires_grad(bias)) {
          Eigen::Map<Eigen::Matrix<T, Eigen::Dynamic, 1>> db(g.grad_of(bias).data(), cout);
          db += dY.rowwise().sum();
        }
        if (g.requires_grad(x)) {
          ConstMatMap<T> W(g.values_of(weight.id()).data(), cout, patch);
          RowMatrix<T> dC = W.transpose() * dY;
          col2im_add(dC.data(), cin, height, width, k, g.grad_of(x).data());
        }
      });
}

template <typename T>
Var<T> avg_pool2d(Var<T> x, std::size_t kh, std::size_t kw) {
  require_rank("avg_pool2d", x.shape(), 3);
  if (kh == 0 || kw == 0) throw ShapeError("avg_pool2d: zero pooling factor");
  const std::size_t channels = x.shape()[0];
  const std::size_t height = x.shape()[1];
  const std::size_t width = x.shape()[2];
  const std::size_t oh = (height + kh - 1) / kh;
  const std::size_t ow = (width + kw - 1) / kw;
  const auto xv = x.values();
  std::vector<T> out(channels * oh * ow);
  for (std::size_t c = 0; c < channels; ++c) {
    for (std::size_t i = 0; i < oh; ++i) {
      const std::size_t y1 = std::min(height, (i + 1) * kh);
      for (std::size_t j = 0; j < ow; ++j) {
        const std::size_t x1 = std::min(width, (j + 1) * kw);
        T acc{0};
        for (std::size_t y = i * kh; y < y1; ++y) {
          for (std::size_t xx = j * kw; xx < x1; ++xx) acc += xv[(c * height + y) * width + xx];
        }
        out[(c * oh + i) * ow + j] = acc / static_cast<T>((y1 - i * kh) * (x1 - j * kw));
      }
    }
  }
  return x.graph().record(
      "avg_pool2d", {channels, oh, ow}, std::move(out), {x},
      [x, kh, kw, channels, height, width, oh, ow](Graph<T>& g, std::span<const T> dy) {
        auto& gx = g.grad_of(x);
        for (std::size_t c = 0; c < channels; ++c) {
          for (std::size_t i = 0; i < oh; ++i) {
            const std::size_t y1 = std::min(height, (i + 1) * kh);
            for (std::size_t j = 0; j < ow; ++j) {
              const std::size_t x1 = std::min(width, (j + 1) * kw);
              const T share = dy[(c * oh + i) * ow + j] / static_cast<T>((y1 - i * kh) * (x1 - j * kw));
              for (std::size_t y = i * kh; y < y1; ++y) {
                for (std::size_t xx = j * kw; xx < x1; ++xx) gx[(c * height + y) * width + xx] += share;
              }
            }
          }
        }
      });
}

template <typename T>
Var<T> stack(std::span<const Var<T>> parts) {
  if (parts.empty()) throw ShapeError("stack: no inputs");
  const Shape& s = parts[0].shape();
  const std::size_t n = numel(s);
  std::vector<T> out;
  out.reserve(n * parts.size());
  for (const auto& p : parts) {
    if (p.shape() != s) shape_mismatch("stack", s, p.shape());
    out.insert(out.end(), p.values().begin(), p.values().end());
  }
  Shape shape{parts.size()};
  shape.insert(shape.end(), s.begin(), s.end());
  std::vector<Var<T>> inputs(parts.begin(), parts.end());
  return parts[0].graph().record("stack", std::move(shape), std::move(out), parts,
                                 [inputs, n](Graph<T>& g, std::span<const T> dy) {
                                   for (std::size_t k = 0; k < inputs.size(); ++k) {
                                     if (!g.requires_grad(inputs[k])) continue;
                                     auto& gp = g.grad_of(inputs[k]);
                                     for (std::size_t i = 0; i < n; ++i) gp[i] += dy[k * n + i];
                                   }
                                 });
}

template <typename T>
Var<T> bce_loss(Var<T> pred, std::span<const T> target) {
  const auto pv = pred.values();
  if (target.size() != pv.size()) {
    throw ShapeError("bce_loss: prediction shape " + shape_string(pred.shape()) + " vs " +
                     std::to_string(target.size()) + " targets");
  }
  const std::size_t rows = pred.shape().size() == 2 ? pred.shape()[0] : 1;
  if (pred.shape().size() > 2 || rows == 0) throw ShapeError("bce_loss: expected [L] or [B, L]");
  const T eps = static_cast<T>(kBceEpsilon);
  double total = 0.0;
  for (std::size_t i = 0; i < pv.size(); ++i) {
    if (target[i] != T{0} && target[i] != T{1}) throw UsageError("bce_loss: targets must be 0 or 1");
    const double p = std::clamp(static_cast<double>(pv[i]), kBceEpsilon, 1.0 - kBceEpsilon);
    total -= target[i] != T{0} ? std::log(p) : std::log1p(-p);
  }
  const T loss = static_cast<T>(total / static_cast<double>(rows));
  std::vector<T> tgt(target.begin(), target.end());
  return pred.graph().record("bce_loss", {1}, {loss}, {pred},
                             [pred, tgt = std::move(tgt), rows, eps](Graph<T>& g, std::span<const T> dy) {
                               const auto pv = g.values_of(pred.id());
                               auto& gp = g.grad_of(pred);
                               const T inv_rows = T{1} / static_cast<T>(rows);
                               for (std::size_t i = 0; i < pv.size(); ++i) {
                                 const T p = pv[i];
                                 if (p < eps || p > T{1} - eps) continue;
                                 const T d = tgt[i] != T{0} ? -T{1} / p : T{1} / (T{1} - p);
                                 gp[i] += dy[0] * d * inv_rows;
                               }
                             });
}

// ---------------------------------------------------------------- Adam

template <typename T>
void adam_step(ParameterStore<T>& store, const AdamConfig& config) {
  for (const auto& p : store) {
    if (!p.has_grad) throw UsageError("adam_step: parameter '" + p.name + "' has no gradient");
  }
  for (auto& p : store) {
    p.step += 1;
    const double correction1 = 1.0 - std::pow(config.beta1, static_cast<double>(p.step));
    const double correction2 = 1.0 - std::pow(config.beta2, static_cast<double>(p.step));
    const T b1 = static_cast<T>(config.beta1);
    const T b2 = static_cast<T>(config.beta2);
    const T step_size = static_cast<T>(config.lr / correction1);
    const T root_correction2 = static_cast<T>(std::sqrt(correction2));
    const T eps = static_cast<T>(config.eps);
    for (std::size_t i = 0; i < p.grad.size(); ++i) {
      const T g = p.grad[i];
      p.first_moment[i] = b1 * p.first_moment[i] + (T{1} - b1) * g;
      p.second_moment[i] = b2 * p.second_moment[i] + (T{1} - b2) * g * g;
      const T denom = std::sqrt(p.second_moment[i]) / root_correction2 + eps;
      p.value.values[i] -= step_size * p.first_moment[i] / denom;
    }
  }
}

// ---------------------------------------------------------------- instantiation

#define GLAT_INSTANTIATE(T)                                                         \
  template struct Tensor<T>;                                                        \
  template class ParameterStore<T>;                                                 \
  template class GradientBuffer<T>;                                                 \
  template class Var<T>;                                                            \
  template class Graph<T>;                                                          \
  template Var<T> add(Var<T>, Var<T>);                                              \
  template Var<T> mul(Var<T>, Var<T>);                                              \
  template Var<T> scale(Var<T>, T);                                                 \
  template Var<T> relu(Var<T>);                                                     \
  template Var<T> sigmoid(Var<T>);                                                  \
  template Var<T> reshape(Var<T>, Shape);                                           \
  template Var<T> transpose(Var<T>);                                                \
  template Var<T> sum(Var<T>);                                                      \
  template Var<T> mean_axis(Var<T>, std::size_t);                                   \
  template Var<T> max_axis(Var<T>, std::size_t);                                    \
  template Var<T> linear(Var<T>, Var<T>, Var<T>);                                   \
  template Var<T> conv2d(Var<T>, Var<T>, Var<T>);                                   \
  template Var<T> avg_pool2d(Var<T>, std::size_t, std::size_t);                     \
  template Var<T> stack(std::span<const Var<T>>);                                   \
  template Var<T> bce_loss(Var<T>, std::span<const T>);                             \
  template void adam_step(ParameterStore<T>&, const AdamConfig&);

GLAT_INSTANTIATE(float)
GLAT_INSTANTIATE(double)

#undef GLAT_INSTANTIATE

}  // namespace glat::ad
