#pragma once

#include <Eigen/Dense>

#include <cstddef>
#include <functional>
#include <optional>
#include <span>
#include <string>
#include <vector>

namespace tvcp::nn {

using Matrix = Eigen::MatrixXd;
using Index = Eigen::Index;

struct Parameter {
  std::string name;
  Matrix value;
  std::string group;  // "embedding", "encoder", "head", "regression", ...
  bool trainable = true;
};

class ParameterSet {
 public:
  std::size_t add(std::string name, Matrix init, std::string group);
  Parameter& operator[](std::size_t i) { return params_[i]; }
  const Parameter& operator[](std::size_t i) const { return params_[i]; }
  std::size_t size() const noexcept { return params_.size(); }
  std::optional<std::size_t> find(const std::string& name) const;
  void set_trainable(const std::string& group, bool trainable);
  std::size_t scalar_count() const;

  auto begin() { return params_.begin(); }
  auto end() { return params_.end(); }
  auto begin() const { return params_.begin(); }
  auto end() const { return params_.end(); }

 private:
  std::vector<Parameter> params_;
};

// Dense gradient buffer shaped like a ParameterSet.
class Gradients {
 public:
  Gradients() = default;
  explicit Gradients(const ParameterSet& params);
  Matrix& operator[](std::size_t i) { return g_[i]; }
  const Matrix& operator[](std::size_t i) const { return g_[i]; }
  std::size_t size() const noexcept { return g_.size(); }
  void zero();
  Gradients& operator+=(const Gradients& other);

 private:
  std::vector<Matrix> g_;
};

class Graph;

// Handle to a node of a Graph. Cheap to copy; valid while the graph lives.
class Var {
 public:
  Var() = default;
  const Matrix& value() const;
  Index rows() const { return value().rows(); }
  Index cols() const { return value().cols(); }
  double scalar() const { return value()(0, 0); }
  Graph* graph() const { return graph_; }
  int id() const { return id_; }
  bool valid() const { return graph_ != nullptr; }

 private:
  friend class Graph;
  Var(Graph* g, int id) : graph_(g), id_(id) {}
  Graph* graph_ = nullptr;
  int id_ = -1;
};

// Dynamic reverse-mode tape. Nodes are recorded in creation order;
// backward() walks them in reverse. Without a Gradients sink no backward
// closures are recorded, which makes inference cheaper.
class Graph {
 public:
  explicit Graph(const ParameterSet* params = nullptr, Gradients* grads = nullptr);
  Graph(const Graph&) = delete;
  Graph& operator=(const Graph&) = delete;

  Var constant(Matrix m);
  Var param(std::size_t id);
  // Gathers rows of a parameter matrix; the gradient is scattered back.
  Var embedding(std::size_t id, std::span<const int> rows);

  // Seeds d(out)/d(out) = 1 for a 1x1 node and propagates to parameters.
  void backward(Var out);

  bool recording() const noexcept { return grads_ != nullptr; }
  const Matrix& value(int id) const;
  std::size_t node_count() const noexcept { return nodes_.size(); }

  using Backward = std::function<void(const Matrix& grad)>;
  // Low-level hook used by the ops below.
  Var make(Matrix value, std::vector<int> inputs, Backward backward);
  bool needs_grad(int id) const { return nodes_[static_cast<std::size_t>(id)].needs_grad; }
  void accumulate(int id, const Matrix& g);

 private:
  struct Node {
    Matrix value;
    const Matrix* view = nullptr;
    Matrix grad;
    Backward backward;
    bool needs_grad = false;
  };
  const ParameterSet* params_;
  Gradients* grads_;
  std::vector<Node> nodes_;
};

// ---- ops -------------------------------------------------------------------

Var matmul(Var a, Var b);
Var matmul_nt(Var a, Var b);                  // a * b^T
Var matmul_const_left(const Matrix& m, Var x);  // m * x, m constant
Var add(Var a, Var b);
Var sub(Var a, Var b);
Var add_row(Var a, Var row);  // row (1 x n) broadcast over the rows of a
Var hadamard(Var a, Var b);
Var scale(Var a, double s);
Var mask(Var a, const Matrix& m);  // elementwise product with a constant
Var gelu(Var a);
Var tanh(Var a);
Var layer_norm(Var x, Var gamma, Var beta, double eps = 1e-5);
Var softmax_rows(Var a);
Var slice_rows(Var a, Index start, Index n);
Var slice_cols(Var a, Index start, Index n);
Var concat_cols(const std::vector<Var>& parts);
Var concat_rows(const std::vector<Var>& parts);
Var transpose(Var a);

// Scalar (1x1) losses.
Var cross_entropy(Var logits_row, int label);  // -log softmax(logits)[label]
Var squared_error(Var pred, double target);    // (pred - target)^2 for a 1x1 pred
Var sum_squares(Var a);

}  // namespace tvcp::nn
