#include "tvcp/nn/graph.hpp"

#include <cmath>

#include "tvcp/error.hpp"

namespace tvcp::nn {

// ---- parameters ------------------------------------------------------------

std::size_t ParameterSet::add(std::string name, Matrix init, std::string group) {
  if (find(name)) throw ContractError("duplicate parameter name '" + name + "'");
  params_.push_back(Parameter{std::move(name), std::move(init), std::move(group), true});
  return params_.size() - 1;
}

std::optional<std::size_t> ParameterSet::find(const std::string& name) const {
  for (std::size_t i = 0; i < params_.size(); ++i)
    if (params_[i].name == name) return i;
  return std::nullopt;
}

void ParameterSet::set_trainable(const std::string& group, bool trainable) {
  for (auto& p : params_)
    if (p.group == group) p.trainable = trainable;
}

std::size_t ParameterSet::scalar_count() const {
  std::size_t n = 0;
  for (const auto& p : params_) n += static_cast<std::size_t>(p.value.size());
  return n;
}

Gradients::Gradients(const ParameterSet& params) {
  g_.reserve(params.size());
  for (const auto& p : params) g_.push_back(Matrix::Zero(p.value.rows(), p.value.cols()));
}

void Gradients::zero() {
  for (auto& m : g_) m.setZero();
}

Gradients& Gradients::operator+=(const Gradients& other) {
  if (other.g_.size() != g_.size()) throw ContractError("gradient buffers have different layouts");
  for (std::size_t i = 0; i < g_.size(); ++i) g_[i] += other.g_[i];
  return *this;
}

// ---- graph -----------------------------------------------------------------

const Matrix& Var::value() const { return graph_->value(id_); }

Graph::Graph(const ParameterSet* params, Gradients* grads) : params_(params), grads_(grads) {
  nodes_.reserve(512);
}

const Matrix& Graph::value(int id) const {
  const auto& n = nodes_[static_cast<std::size_t>(id)];
  return n.view ? *n.view : n.value;
}

Var Graph::make(Matrix value, std::vector<int> inputs, Backward backward) {
  Node n;
  n.value = std::move(value);
  if (recording()) {
    for (int i : inputs)
      if (nodes_[static_cast<std::size_t>(i)].needs_grad) n.needs_grad = true;
    if (n.needs_grad) n.backward = std::move(backward);
  }
  nodes_.push_back(std::move(n));
  return Var(this, static_cast<int>(nodes_.size() - 1));
}

Var Graph::constant(Matrix m) {
  Node n;
  n.value = std::move(m);
  nodes_.push_back(std::move(n));
  return Var(this, static_cast<int>(nodes_.size() - 1));
}

Var Graph::param(std::size_t id) {
  if (!params_) throw ContractError("graph has no parameter set");
  Node n;
  n.view = &(*params_)[id].value;
  if (recording() && (*params_)[id].trainable) {
    n.needs_grad = true;
    Gradients* sink = grads_;
    n.backward = [sink, id](const Matrix& g) { (*sink)[id] += g; };
  }
  nodes_.push_back(std::move(n));
  return Var(this, static_cast<int>(nodes_.size() - 1));
}

Var Graph::embedding(std::size_t id, std::span<const int> rows) {
  if (!params_) throw ContractError("graph has no parameter set");
  const Matrix& table = (*params_)[id].value;
  Matrix out(static_cast<Index>(rows.size()), table.cols());
  for (std::size_t i = 0; i < rows.size(); ++i) {
    if (rows[i] < 0 || rows[i] >= table.rows()) throw ContractError("embedding row out of range");
    out.row(static_cast<Index>(i)) = table.row(rows[i]);
  }
  Node n;
  n.value = std::move(out);
  if (recording() && (*params_)[id].trainable) {
    n.needs_grad = true;
    Gradients* sink = grads_;
    std::vector<int> r(rows.begin(), rows.end());
    n.backward = [sink, id, r = std::move(r)](const Matrix& g) {
      Matrix& dst = (*sink)[id];
      for (std::size_t i = 0; i < r.size(); ++i) dst.row(r[i]) += g.row(static_cast<Index>(i));
    };
  }
  nodes_.push_back(std::move(n));
  return Var(this, static_cast<int>(nodes_.size() - 1));
}

void Graph::accumulate(int id, const Matrix& g) {
  auto& n = nodes_[static_cast<std::size_t>(id)];
  if (!n.needs_grad) return;
  if (n.grad.size() == 0)
    n.grad = g;
  else
    n.grad += g;
}

void Graph::backward(Var out) {
  if (!recording()) throw ContractError("backward on a graph without a gradient sink");
  if (out.rows() != 1 || out.cols() != 1) throw ContractError("backward needs a scalar output");
  auto& root = nodes_[static_cast<std::size_t>(out.id())];
  if (!root.needs_grad) return;
  root.grad = Matrix::Ones(1, 1);
  for (int i = out.id(); i >= 0; --i) {
    auto& n = nodes_[static_cast<std::size_t>(i)];
    if (n.grad.size() == 0 || !n.backward) continue;
    Matrix g = std::move(n.grad);
    n.grad = Matrix();
    n.backward(g);
  }
}

// ---- ops -------------------------------------------------------------------

namespace {

Graph& same_graph(Var a, Var b) {
  if (a.graph() != b.graph() || !a.graph()) throw ContractError("vars belong to different graphs");
  return *a.graph();
}

void check_same_shape(Var a, Var b, const char* op) {
  if (a.rows() != b.rows() || a.cols() != b.cols())
    throw ContractError(std::string(op) + ": shape mismatch " + std::to_string(a.rows()) + "x" +
                        std::to_string(a.cols()) + " vs " + std::to_string(b.rows()) + "x" +
                        std::to_string(b.cols()));
}

constexpr double kGeluC = 0.7978845608028654;  // sqrt(2/pi)
constexpr double kGeluA = 0.044715;

}  // namespace

Var matmul(Var a, Var b) {
  Graph& g = same_graph(a, b);
  if (a.cols() != b.rows()) throw ContractError("matmul: inner dimensions differ");
  const int ia = a.id(), ib = b.id();
  return g.make(a.value() * b.value(), {ia, ib}, [&g, ia, ib](const Matrix& d) {
    if (g.needs_grad(ia)) g.accumulate(ia, d * g.value(ib).transpose());
    if (g.needs_grad(ib)) g.accumulate(ib, g.value(ia).transpose() * d);
  });
}

Var matmul_nt(Var a, Var b) {
  Graph& g = same_graph(a, b);
  if (a.cols() != b.cols()) throw ContractError("matmul_nt: inner dimensions differ");
  const int ia = a.id(), ib = b.id();
  return g.make(a.value() * b.value().transpose(), {ia, ib}, [&g, ia, ib](const Matrix& d) {
    if (g.needs_grad(ia)) g.accumulate(ia, d * g.value(ib));
    if (g.needs_grad(ib)) g.accumulate(ib, d.transpose() * g.value(ia));
  });
}

Var matmul_const_left(const Matrix& m, Var x) {
  Graph& g = *x.graph();
  if (m.cols() != x.rows()) throw ContractError("matmul_const_left: inner dimensions differ");
  const int ix = x.id();
  return g.make(m * x.value(), {ix}, [&g, ix, m](const Matrix& d) { g.accumulate(ix, m.transpose() * d); });
}

Var add(Var a, Var b) {
  Graph& g = same_graph(a, b);
  check_same_shape(a, b, "add");
  const int ia = a.id(), ib = b.id();
  return g.make(a.value() + b.value(), {ia, ib}, [&g, ia, ib](const Matrix& d) {
    g.accumulate(ia, d);
    g.accumulate(ib, d);
  });
}

Var sub(Var a, Var b) {
  Graph& g = same_graph(a, b);
  check_same_shape(a, b, "sub");
  const int ia = a.id(), ib = b.id();
  return g.make(a.value() - b.value(), {ia, ib}, [&g, ia, ib](const Matrix& d) {
    g.accumulate(ia, d);
    if (g.needs_grad(ib)) g.accumulate(ib, -d);
  });
}

Var add_row(Var a, Var row) {
  Graph& g = same_graph(a, row);
  if (row.rows() != 1 || row.cols() != a.cols()) throw ContractError("add_row: bias shape mismatch");
  const int ia = a.id(), ir = row.id();
  Matrix v = a.value();
  v.rowwise() += row.value().row(0);
  return g.make(std::move(v), {ia, ir}, [&g, ia, ir](const Matrix& d) {
    g.accumulate(ia, d);
    if (g.needs_grad(ir)) g.accumulate(ir, d.colwise().sum());
  });
}

Var hadamard(Var a, Var b) {
  Graph& g = same_graph(a, b);
  check_same_shape(a, b, "hadamard");
  const int ia = a.id(), ib = b.id();
  return g.make(a.value().cwiseProduct(b.value()), {ia, ib}, [&g, ia, ib](const Matrix& d) {
    if (g.needs_grad(ia)) g.accumulate(ia, d.cwiseProduct(g.value(ib)));
    if (g.needs_grad(ib)) g.accumulate(ib, d.cwiseProduct(g.value(ia)));
  });
}

Var scale(Var a, double s) {
  Graph& g = *a.graph();
  const int ia = a.id();
  return g.make(a.value() * s, {ia}, [&g, ia, s](const Matrix& d) { g.accumulate(ia, d * s); });
}

Var mask(Var a, const Matrix& m) {
  Graph& g = *a.graph();
  if (m.rows() != a.rows() || m.cols() != a.cols()) throw ContractError("mask: shape mismatch");
  const int ia = a.id();
  return g.make(a.value().cwiseProduct(m), {ia}, [&g, ia, m](const Matrix& d) {
    g.accumulate(ia, d.cwiseProduct(m));
  });
}

Var gelu(Var a) {
  Graph& g = *a.graph();
  const int ia = a.id();
  const Matrix& x = a.value();
  Matrix t = (kGeluC * (x.array() + kGeluA * x.array().cube())).tanh().matrix();
  Matrix y = (0.5 * x.array() * (1.0 + t.array())).matrix();
  return g.make(std::move(y), {ia}, [&g, ia, t = std::move(t)](const Matrix& d) {
    const auto x = g.value(ia).array();
    auto dy = 0.5 * (1.0 + t.array()) +
              0.5 * x * (1.0 - t.array().square()) * kGeluC * (1.0 + 3.0 * kGeluA * x.square());
    g.accumulate(ia, (d.array() * dy).matrix());
  });
}

Var tanh(Var a) {
  Graph& g = *a.graph();
  const int ia = a.id();
  Matrix y = a.value().array().tanh().matrix();
  const int self = static_cast<int>(g.node_count());
  return g.make(std::move(y), {ia}, [&g, ia, self](const Matrix& d) {
    const auto y = g.value(self).array();
    g.accumulate(ia, (d.array() * (1.0 - y.square())).matrix());
  });
}

Var layer_norm(Var x, Var gamma, Var beta, double eps) {
  Graph& g = same_graph(x, gamma);
  const Index n = x.cols();
  if (gamma.rows() != 1 || gamma.cols() != n || beta.rows() != 1 || beta.cols() != n)
    throw ContractError("layer_norm: gain/bias shape mismatch");
  const Matrix& xv = x.value();
  Eigen::VectorXd mean = xv.rowwise().mean();
  Matrix centered = xv.colwise() - mean;
  Eigen::VectorXd inv =
      ((centered.array().square().rowwise().sum() / static_cast<double>(n)) + eps).rsqrt().matrix();
  Matrix xhat = inv.asDiagonal() * centered;
  Matrix y = xhat.array().rowwise() * gamma.value().row(0).array();
  y.rowwise() += beta.value().row(0);
  const int ix = x.id(), ig = gamma.id(), ib = beta.id();
  return g.make(std::move(y), {ix, ig, ib},
                [&g, ix, ig, ib, n, xhat = std::move(xhat), inv = std::move(inv)](const Matrix& d) {
                  if (g.needs_grad(ig)) g.accumulate(ig, d.cwiseProduct(xhat).colwise().sum());
                  if (g.needs_grad(ib)) g.accumulate(ib, d.colwise().sum());
                  if (g.needs_grad(ix)) {
                    Matrix dxhat = d.array().rowwise() * g.value(ig).row(0).array();
                    Eigen::VectorXd m1 = dxhat.rowwise().mean();
                    Eigen::VectorXd m2 = dxhat.cwiseProduct(xhat).rowwise().sum() / static_cast<double>(n);
                    Matrix dx = dxhat;
                    dx.colwise() -= m1;
                    dx -= m2.asDiagonal() * xhat;
                    g.accumulate(ix, inv.asDiagonal() * dx);
                  }
                });
}

Var softmax_rows(Var a) {
  Graph& g = *a.graph();
  const Matrix& x = a.value();
  Matrix y = x.colwise() - x.rowwise().maxCoeff();
  y = y.array().exp().matrix();
  Eigen::VectorXd sums = y.rowwise().sum();
  y = sums.cwiseInverse().asDiagonal() * y;
  const int ia = a.id();
  const int self = static_cast<int>(g.node_count());
  return g.make(std::move(y), {ia}, [&g, ia, self](const Matrix& d) {
    const Matrix& y = g.value(self);
    Eigen::VectorXd dot = d.cwiseProduct(y).rowwise().sum();
    Matrix dx = d;
    dx.colwise() -= dot;
    g.accumulate(ia, dx.cwiseProduct(y));
  });
}

Var slice_rows(Var a, Index start, Index n) {
  Graph& g = *a.graph();
  if (start < 0 || n < 0 || start + n > a.rows()) throw ContractError("slice_rows out of range");
  const int ia = a.id();
  const Index rows = a.rows(), cols = a.cols();
  return g.make(a.value().middleRows(start, n), {ia}, [&g, ia, start, n, rows, cols](const Matrix& d) {
    Matrix full = Matrix::Zero(rows, cols);
    full.middleRows(start, n) = d;
    g.accumulate(ia, full);
  });
}

Var slice_cols(Var a, Index start, Index n) {
  Graph& g = *a.graph();
  if (start < 0 || n < 0 || start + n > a.cols()) throw ContractError("slice_cols out of range");
  const int ia = a.id();
  const Index rows = a.rows(), cols = a.cols();
  return g.make(a.value().middleCols(start, n), {ia}, [&g, ia, start, n, rows, cols](const Matrix& d) {
    Matrix full = Matrix::Zero(rows, cols);
    full.middleCols(start, n) = d;
    g.accumulate(ia, full);
  });
}

Var concat_cols(const std::vector<Var>& parts) {
  if (parts.empty()) throw ContractError("concat_cols of nothing");
  Graph& g = *parts.front().graph();
  const Index rows = parts.front().rows();
  Index cols = 0;
  std::vector<int> ids;
  std::vector<Index> widths;
  for (const auto& p : parts) {
    if (p.graph() != &g || p.rows() != rows) throw ContractError("concat_cols: row count mismatch");
    cols += p.cols();
    ids.push_back(p.id());
    widths.push_back(p.cols());
  }
  Matrix v(rows, cols);
  Index off = 0;
  for (const auto& p : parts) {
    v.middleCols(off, p.cols()) = p.value();
    off += p.cols();
  }
  return g.make(std::move(v), ids, [&g, ids, widths](const Matrix& d) {
    Index o = 0;
    for (std::size_t i = 0; i < ids.size(); ++i) {
      if (g.needs_grad(ids[i])) g.accumulate(ids[i], d.middleCols(o, widths[i]));
      o += widths[i];
    }
  });
}

Var concat_rows(const std::vector<Var>& parts) {
  if (parts.empty()) throw ContractError("concat_rows of nothing");
  Graph& g = *parts.front().graph();
  const Index cols = parts.front().cols();
  Index rows = 0;
  std::vector<int> ids;
  std::vector<Index> heights;
  for (const auto& p : parts) {
    if (p.graph() != &g || p.cols() != cols) throw ContractError("concat_rows: column count mismatch");
    rows += p.rows();
    ids.push_back(p.id());
    heights.push_back(p.rows());
  }
  Matrix v(rows, cols);
  Index off = 0;
  for (const auto& p : parts) {
    v.middleRows(off, p.rows()) = p.value();
    off += p.rows();
  }
  return g.make(std::move(v), ids, [&g, ids, heights](const Matrix& d) {
    Index o = 0;
    for (std::size_t i = 0; i < ids.size(); ++i) {
      if (g.needs_grad(ids[i])) g.accumulate(ids[i], d.middleRows(o, heights[i]));
      o += heights[i];
    }
  });
}

Var transpose(Var a) {
  Graph& g = *a.graph();
  const int ia = a.id();
  return g.make(a.value().transpose(), {ia}, [&g, ia](const Matrix& d) { g.accumulate(ia, d.transpose()); });
}

Var cross_entropy(Var logits_row, int label) {
  Graph& g = *logits_row.graph();
  const Matrix& z = logits_row.value();
  if (z.rows() != 1 || label < 0 || label >= z.cols()) throw ContractError("cross_entropy: bad shape or label");
  const double mx = z.maxCoeff();
  Matrix p = (z.array() - mx).exp().matrix();
  const double sum = p.sum();
  p /= sum;
  const double loss = std::log(sum) + mx - z(0, label);
  const int iz = logits_row.id();
  return g.make(Matrix::Constant(1, 1, loss), {iz}, [&g, iz, label, p = std::move(p)](const Matrix& d) {
    Matrix grad = p;
    grad(0, label) -= 1.0;
    g.accumulate(iz, grad * d(0, 0));
  });
}

Var squared_error(Var pred, double target) {
  Graph& g = *pred.graph();
  if (pred.rows() != 1 || pred.cols() != 1) throw ContractError("squared_error expects a 1x1 prediction");
  const double diff = pred.scalar() - target;
  const int ip = pred.id();
  return g.make(Matrix::Constant(1, 1, diff * diff), {ip},
                [&g, ip, diff](const Matrix& d) { g.accumulate(ip, Matrix::Constant(1, 1, 2.0 * diff * d(0, 0))); });
}

Var sum_squares(Var a) {
  Graph& g = *a.graph();
  const int ia = a.id();
  return g.make(Matrix::Constant(1, 1, a.value().squaredNorm()), {ia},
                [&g, ia](const Matrix& d) { g.accumulate(ia, g.value(ia) * (2.0 * d(0, 0))); });
}

}  // namespace tvcp::nn
