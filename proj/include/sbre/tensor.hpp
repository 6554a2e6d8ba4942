#pragma once

#include <cstddef>
#include <cstdint>
#include <functional>
#include <initializer_list>
#include <map>
#include <span>
#include <string>
#include <vector>

namespace sbre {

using Shape = std::vector<std::size_t>;

std::string shape_string(const Shape& shape);

/// Dense row-major array of doubles.
class Tensor {
 public:
  Tensor() = default;
  explicit Tensor(Shape shape, double fill = 0.0);
  Tensor(Shape shape, std::vector<double> data);

  static Tensor vector(std::vector<double> values);
  static Tensor matrix(std::size_t rows, std::size_t cols, std::vector<double> values);

  const Shape& shape() const noexcept { return shape_; }
  std::size_t rank() const noexcept { return shape_.size(); }
  std::size_t dim(std::size_t axis) const;
  std::size_t size() const noexcept { return data_.size(); }
  bool empty() const noexcept { return data_.empty(); }

  std::span<double> data() noexcept { return data_; }
  std::span<const double> data() const noexcept { return data_; }

  double& operator[](std::size_t i) { return data_[i]; }
  double operator[](std::size_t i) const { return data_[i]; }

  double& at(std::size_t r, std::size_t c) { return data_[r * shape_[1] + c]; }
  double at(std::size_t r, std::size_t c) const { return data_[r * shape_[1] + c]; }

  std::span<double> row(std::size_t r);
  std::span<const double> row(std::size_t r) const;

  void fill(double value);
  bool all_finite() const;
  bool same_shape(const Tensor& other) const { return shape_ == other.shape_; }

  /// Bitwise equality of shape and contents.
  bool operator==(const Tensor& other) const;

 private:
  Shape shape_;
  std::vector<double> data_;
};

/// Gradient accumulator for a large lookup table where only a few rows are touched.
class SparseRowGrad {
 public:
  explicit SparseRowGrad(std::size_t cols = 0) : cols_(cols) {}

  std::size_t cols() const noexcept { return cols_; }
  void add_row(std::size_t row, std::span<const double> values);
  void merge(const SparseRowGrad& other);
  void clear() { rows_.clear(); }
  bool empty() const { return rows_.empty(); }
  const std::map<std::size_t, std::vector<double>>& rows() const { return rows_; }

  /// Writes the accumulated rows into a dense tensor with `table_rows` rows.
  void scatter_into(Tensor& dense) const;

 private:
  std::size_t cols_;
  std::map<std::size_t, std::vector<double>> rows_;
};

enum class Activation { identity, relu, tanh };

/// Max-shifted softmax.
std::vector<double> softmax(std::span<const double> logits);

/// Handle to a node in a Graph.
struct Var {
  std::size_t index = 0;
};

/// Reverse-mode autodiff tape. Nodes are appended in creation order, which is a
/// topological order, so backward is a single reverse sweep.
class Graph {
 public:
  Graph() = default;
  Graph(const Graph&) = delete;
  Graph& operator=(const Graph&) = delete;

  /// Leaf without gradient. The graph keeps its own copy.
  Var constant(Tensor value);
  /// Leaf without gradient referencing external storage, which must outlive the graph.
  Var constant_ref(const Tensor& value);
  /// Leaf whose gradient is accumulated into `grad_sink` (same shape as value).
  /// The value is referenced, not copied, and must outlive the graph.
  Var parameter(const Tensor& value, Tensor* grad_sink);
  /// Lookup-table leaf whose gradient is accumulated row-sparsely. Referenced like parameter().
  Var sparse_parameter(const Tensor& table, SparseRowGrad* grad_sink);

  // Operations. Shapes are checked; outputs are checked for finiteness.
  Var embed_lookup(Var table, std::span<const std::size_t> ids);
  Var concat_columns(Var left, Var right);
  Var pad_rows(Var x, std::size_t rows);
  Var conv1d(Var input, Var kernels, Var bias);
  Var max_over_time(Var input);
  Var relu(Var x);
  Var tanh(Var x);
  Var dense(Var x, Var weight, Var bias, Activation activation);
  Var concat(std::span<const Var> parts);
  Var concat(std::initializer_list<Var> parts);
  Var subtract3(Var b, Var e1, Var e2);
  Var hadamard(Var a, Var b);
  Var mul_mask(Var x, const Tensor& mask);
  Var scale(Var x, double factor);
  Var sum(Var x);
  /// Cross-entropy of softmax(logits) against `gold`; the loss node is a scalar.
  Var softmax_xent(Var logits, std::size_t gold);

  const Tensor& value(Var v) const;
  /// Gradient of a node after backward; zeros if the node received none.
  const Tensor& grad(Var v);
  /// Probabilities computed by the softmax_xent node `loss`.
  const Tensor& probs(Var loss) const;

  /// Seeds d(root)/d(root) = 1 and sweeps in reverse creation order.
  void backward(Var root);

  std::size_t size() const noexcept { return nodes_.size(); }

 private:
  struct Node {
    Tensor owned;
    const Tensor* external = nullptr;
    Tensor grad;
    Tensor* dense_sink = nullptr;
    SparseRowGrad* sparse_sink = nullptr;
    bool requires_grad = false;
    bool has_grad = false;
    Tensor aux;
    std::function<void(Graph&, std::size_t)> backward;
  };

  const Tensor& node_value(std::size_t i) const;
  Tensor& grad_buffer(std::size_t i);
  bool needs(std::size_t i) const { return nodes_[i].requires_grad; }
  Var push(Tensor value, bool requires_grad, std::function<void(Graph&, std::size_t)> backward);
  Node& node(Var v);

  std::vector<Node> nodes_;
};

/// Result of a central-difference gradient check.
struct GradCheckResult {
  double max_rel_error = 0.0;
  std::size_t coords_checked = 0;
  std::string worst_location;
};

/// Builds a scalar from the parameter leaves it is handed.
using ScalarGraphFn = std::function<Var(Graph&, std::span<const Var>)>;

/// Compares autodiff gradients of `fn` against central differences on a
/// random subsample (at most `max_coords` per tensor) of every parameter.
/// Relative error is |a - n| / max(|a|, |n|, floor).
GradCheckResult grad_check(const ScalarGraphFn& fn, std::span<Tensor* const> params,
                           double eps = 1e-5, std::size_t max_coords = 200,
                           std::uint64_t seed = 1, double floor = 1e-6);

struct AdamConfig {
  double lr = 1e-3;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double eps = 1e-8;
};

/// Bias-corrected Adam over an ordered list of parameter tensors.
class Adam {
 public:
  explicit Adam(AdamConfig config = {}) : config_(config) {}

  void attach(std::span<Tensor* const> params);
  void step(std::span<Tensor* const> params, std::span<const Tensor* const> grads);

  std::uint64_t timestep() const noexcept { return t_; }
  const AdamConfig& config() const noexcept { return config_; }
  const std::vector<Tensor>& first_moments() const { return m_; }
  const std::vector<Tensor>& second_moments() const { return v_; }

 private:
  AdamConfig config_;
  std::uint64_t t_ = 0;
  std::vector<Tensor> m_;
  std::vector<Tensor> v_;
};

}  // namespace sbre
