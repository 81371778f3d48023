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

#pragma once

#include <cstddef>
#include <cstdint>
#include <functional>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

namespace glat::ad {

using Shape = std::vector<std::size_t>;

std::size_t numel(const Shape& shape);
std::string shape_string(const Shape& shape);

template <typename T>
struct Tensor {
  Shape shape;
  std::vector<T> values;
  bool requires_grad = false;

  Tensor() = default;
  explicit Tensor(Shape s, T fill = T{0});
  /// Throws ShapeError if product(shape) != values.size().
  Tensor(Shape s, std::vector<T> v);

  [[nodiscard]] std::size_t size() const { return values.size(); }
  T& operator[](std::size_t i) { return values[i]; }
  T operator[](std::size_t i) const { return values[i]; }
};

/// theta_F vs theta_C.
enum class ParamGroup { feature_extractor, classifier };

const char* to_string(ParamGroup group);
ParamGroup parse_param_group(std::string_view text);

template <typename T>
struct Parameter {
  std::string name;
  ParamGroup group = ParamGroup::feature_extractor;
  Tensor<T> value;
  std::vector<T> grad;
  bool has_grad = false;
  // Adam state.
  std::vector<T> first_moment;
  std::vector<T> second_moment;
  std::int64_t step = 0;
};

/// Named parameters with their gradients and optimizer state.
template <typename T>
class ParameterStore {
 public:
  /// Registers a parameter; throws UsageError on duplicate names.
  std::size_t add(std::string name, ParamGroup group, Tensor<T> init);

  [[nodiscard]] std::size_t size() const { return params_.size(); }
  [[nodiscard]] std::size_t num_values() const;
  Parameter<T>& operator[](std::size_t i) { return params_[i]; }
  const Parameter<T>& operator[](std::size_t i) const { return params_[i]; }
  [[nodiscard]] std::optional<std::size_t> find(std::string_view name) const;
  /// Throws UsageError if absent.
  [[nodiscard]] std::size_t index_of(std::string_view name) const;

  void zero_grad();

  auto begin() { return params_.begin(); }
  auto end() { return params_.end(); }
  auto begin() const { return params_.begin(); }
  auto end() const { return params_.end(); }

 private:
  std::vector<Parameter<T>> params_;
};

/// Gradient accumulator laid out like a ParameterStore. One per concurrent
/// graph; reduced into the store in a fixed order.
template <typename T>
class GradientBuffer {
 public:
  explicit GradientBuffer(const ParameterStore<T>& store);

  void accumulate(std::size_t index, std::span<const T> grad);
  /// store.grad += scale * buffer, marking touched parameters as populated.
  void add_to(ParameterStore<T>& store, T scale = T{1}) const;
  void clear();

  [[nodiscard]] std::span<const T> grad(std::size_t index) const { return grads_[index]; }
  [[nodiscard]] bool touched(std::size_t index) const { return touched_[index] != 0; }

 private:
  std::vector<std::vector<T>> grads_;
  std::vector<std::uint8_t> touched_;
};

template <typename T>
class Graph;

/// Handle to a node of a Graph.
template <typename T>
class Var {
 public:
  Var() = default;

  [[nodiscard]] const Shape& shape() const;
  [[nodiscard]] std::span<const T> values() const;
  /// Value of a single-element node.
  [[nodiscard]] T item() const;
  [[nodiscard]] std::size_t id() const { return id_; }
  [[nodiscard]] Graph<T>& graph() const { return *graph_; }
  [[nodiscard]] bool valid() const { return graph_ != nullptr; }

 private:
  friend class Graph<T>;
  Var(Graph<T>* graph, std::size_t id) : graph_(graph), id_(id) {}

  Graph<T>* graph_ = nullptr;
  std::size_t id_ = 0;
};

/// Reverse-mode tape. Nodes are appended in evaluation order, so walking the
/// tape backwards visits every node after all of its consumers. A graph
/// belongs to one thread; backward() consumes it.
template <typename T>
class Graph {
 public:
  /// Receives the gradient of the output node and pushes it to the parents.
  using BackwardFn = std::function<void(Graph&, std::span<const T> out_grad)>;

  Graph() = default;
  Graph(const Graph&) = delete;
  Graph& operator=(const Graph&) = delete;

  /// With gradients disabled parameters enter as constants and no backward
  /// closures are kept.
  void set_grad_enabled(bool enabled) { grad_enabled_ = enabled; }
  [[nodiscard]] bool grad_enabled() const { return grad_enabled_; }

  Var<T> constant(Tensor<T> value);
  /// Leaf whose gradient is readable through grad() after backward().
  Var<T> leaf(Tensor<T> value);
  Var<T> parameter(ParameterStore<T>& store, std::size_t index);

  /// Accumulates d(loss)/d(parameter) into the owning stores.
  void backward(Var<T> loss);
  /// Accumulates parameter gradients into \p sink instead.
  void backward(Var<T> loss, GradientBuffer<T>& sink);

  /// Gradient retained on a leaf or parameter node after backward().
  [[nodiscard]] std::span<const T> grad(Var<T> v) const;

  [[nodiscard]] std::size_t size() const { return nodes_.size(); }

  // Op-author interface.
  Var<T> record(std::string_view op, Shape shape, std::vector<T> values,
                std::initializer_list<Var<T>> parents, BackwardFn backward);
  Var<T> record(std::string_view op, Shape shape, std::vector<T> values,
                std::span<const Var<T>> parents, BackwardFn backward);
  [[nodiscard]] bool requires_grad(Var<T> v) const { return nodes_[v.id_].requires_grad; }
  /// Gradient buffer of a node, zero-initialized on first use.
  std::vector<T>& grad_of(Var<T> v);
  [[nodiscard]] const Shape& shape_of(std::size_t id) const { return nodes_[id].shape; }
  [[nodiscard]] std::span<const T> values_of(std::size_t id) const { return nodes_[id].value; }

 private:
  struct Node {
    Shape shape;
    std::vector<T> value;
    std::vector<T> grad;
    BackwardFn backward;
    bool requires_grad = false;
    bool is_leaf = false;
    ParameterStore<T>* store = nullptr;
    std::size_t param_index = 0;
  };

  void check_alive() const;
  void run_backward(Var<T> loss, GradientBuffer<T>* sink);

  std::vector<Node> nodes_;
  bool grad_enabled_ = true;
  bool consumed_ = false;
};

// Forward ops. Shape mismatches throw ShapeError naming both shapes; any
// non-finite output throws NumericalFault naming the op.

template <typename T> Var<T> add(Var<T> a, Var<T> b);
template <typename T> Var<T> mul(Var<T> a, Var<T> b);
template <typename T> Var<T> scale(Var<T> a, T factor);
template <typename T> Var<T> relu(Var<T> a);
template <typename T> Var<T> sigmoid(Var<T> a);
template <typename T> Var<T> reshape(Var<T> a, Shape shape);
/// 2-D transpose.
template <typename T> Var<T> transpose(Var<T> a);
/// Sum of all entries, shape {1}.
template <typename T> Var<T> sum(Var<T> a);
template <typename T> Var<T> mean_axis(Var<T> a, std::size_t axis);
/// Max over an axis; the gradient goes to the first maximal entry.
template <typename T> Var<T> max_axis(Var<T> a, std::size_t axis);
/// x: [in] or [n, in]; weight: [out, in]; bias: [out].
template <typename T> Var<T> linear(Var<T> x, Var<T> weight, Var<T> bias);
/// x: [C_in, H, W]; weight: [C_out, C_in, k, k] with odd k; bias: [C_out].
/// Stride 1, zero "same" padding.
template <typename T> Var<T> conv2d(Var<T> x, Var<T> weight, Var<T> bias);
/// x: [C, H, W]. Output [C, ceil(H/kh), ceil(W/kw)]; edge windows average
/// over the entries they cover.
template <typename T> Var<T> avg_pool2d(Var<T> x, std::size_t kh, std::size_t kw);
/// Stacks equally shaped nodes along a new leading axis.
template <typename T> Var<T> stack(std::span<const Var<T>> parts);

/// Probability clamp applied before the logs.
inline constexpr double kBceEpsilon = 1e-7;

/// -sum_j [y ln p + (1-y) ln(1-p)] per row, averaged over rows.
/// pred: [L] or [B, L]; target has the same number of entries, each 0 or 1.
template <typename T> Var<T> bce_loss(Var<T> pred, std::span<const T> target);

struct AdamConfig {
  double lr = 1e-3;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double eps = 1e-8;
};

/// Bias-corrected Adam update of every parameter. Throws UsageError if any
/// parameter has no gradient populated since the last zero_grad().
template <typename T> void adam_step(ParameterStore<T>& store, const AdamConfig& config);

}  // namespace glat::ad
