#include "sbre/tensor.hpp"

#include <algorithm>
#include <cmath>
#include <cstring>
#include <functional>
#include <limits>
#include <numeric>
#include <sstream>

#include "sbre/error.hpp"
#include "sbre/random.hpp"

namespace sbre {

namespace {

std::size_t product(const Shape& shape) {
  return std::accumulate(shape.begin(), shape.end(), std::size_t{1}, std::multiplies<>());
}

void require(bool ok, const std::string& what) {
  if (!ok) throw ShapeError(what);
}

void check_finite(const Tensor& t, const char* op) {
  if (!t.all_finite()) throw NumericError(std::string("non-finite value produced by ") + op);
}

void add_into(std::span<double> dst, std::span<const double> src) {
  for (std::size_t i = 0; i < dst.size(); ++i) dst[i] += src[i];
}

}  // namespace

std::string shape_string(const Shape& shape) {
  std::ostringstream out;
  out << '[';
  for (std::size_t i = 0; i < shape.size(); ++i) out << (i ? "," : "") << shape[i];
  out << ']';
  return out.str();
}

// ---------------------------------------------------------------------------
// Tensor

Tensor::Tensor(Shape shape, double fill) : shape_(std::move(shape)), data_(product(shape_), fill) {}

Tensor::Tensor(Shape shape, std::vector<double> data) : shape_(std::move(shape)), data_(std::move(data)) {
  require(data_.size() == product(shape_),
          "tensor data length " + std::to_string(data_.size()) + " does not match shape " + shape_string(shape_));
}

Tensor Tensor::vector(std::vector<double> values) {
  const std::size_t n = values.size();
  return Tensor({n}, std::move(values));
}

Tensor Tensor::matrix(std::size_t rows, std::size_t cols, std::vector<double> values) {
  return Tensor({rows, cols}, std::move(values));
}

std::size_t Tensor::dim(std::size_t axis) const {
  require(axis < shape_.size(), "axis out of range for shape " + shape_string(shape_));
  return shape_[axis];
}

std::span<double> Tensor::row(std::size_t r) {
  const std::size_t cols = size() / shape_[0];
  return std::span<double>(data_).subspan(r * cols, cols);
}

std::span<const double> Tensor::row(std::size_t r) const {
  const std::size_t cols = size() / shape_[0];
  return std::span<const double>(data_).subspan(r * cols, cols);
}

void Tensor::fill(double value) { std::fill(data_.begin(), data_.end(), value); }

bool Tensor::all_finite() const {
  return std::all_of(data_.begin(), data_.end(), [](double x) { return std::isfinite(x); });
}

bool Tensor::operator==(const Tensor& other) const {
  return shape_ == other.shape_ &&
         (data_.empty() || std::memcmp(data_.data(), other.data_.data(), data_.size() * sizeof(double)) == 0);
}

std::vector<double> softmax(std::span<const double> logits) {
  if (logits.empty()) return {};
  const double peak = *std::max_element(logits.begin(), logits.end());
  std::vector<double> out(logits.size());
  double total = 0.0;
  for (std::size_t i = 0; i < logits.size(); ++i) {
    out[i] = std::exp(logits[i] - peak);
    total += out[i];
  }
  for (double& p : out) p /= total;
  return out;
}

// ---------------------------------------------------------------------------
// SparseRowGrad

void SparseRowGrad::add_row(std::size_t row, std::span<const double> values) {
  require(values.size() == cols_, "sparse gradient row width mismatch");
  auto [it, inserted] = rows_.try_emplace(row, cols_, 0.0);
  add_into(it->second, values);
}

void SparseRowGrad::merge(const SparseRowGrad& other) {
  for (const auto& [row, values] : other.rows_) add_row(row, values);
}

void SparseRowGrad::scatter_into(Tensor& dense) const {
  require(dense.rank() == 2 && dense.dim(1) == cols_, "sparse gradient scatter shape mismatch");
  for (const auto& [row, values] : rows_) {
    require(row < dense.dim(0), "sparse gradient row out of range");
    add_into(dense.row(row), values);
  }
}

// ---------------------------------------------------------------------------
// Graph plumbing

Var Graph::push(Tensor value, bool requires_grad, std::function<void(Graph&, std::size_t)> backward) {
  Node n;
  n.owned = std::move(value);
  n.requires_grad = requires_grad;
  if (requires_grad) n.backward = std::move(backward);
  nodes_.push_back(std::move(n));
  return Var{nodes_.size() - 1};
}

Graph::Node& Graph::node(Var v) {
  require(v.index < nodes_.size(), "variable does not belong to this graph");
  return nodes_[v.index];
}

const Tensor& Graph::node_value(std::size_t i) const {
  const Node& n = nodes_[i];
  return n.external ? *n.external : n.owned;
}

Tensor& Graph::grad_buffer(std::size_t i) {
  Node& n = nodes_[i];
  if (n.dense_sink) return *n.dense_sink;
  if (!n.has_grad) {
    n.grad = Tensor(node_value(i).shape(), 0.0);
    n.has_grad = true;
  }
  return n.grad;
}

Var Graph::constant(Tensor value) { return push(std::move(value), false, nullptr); }

Var Graph::constant_ref(const Tensor& value) {
  Var v = push(Tensor{}, false, nullptr);
  nodes_[v.index].external = &value;
  return v;
}

Var Graph::parameter(const Tensor& value, Tensor* grad_sink) {
  require(grad_sink != nullptr && grad_sink->shape() == value.shape(),
          "parameter gradient sink must match value shape " + shape_string(value.shape()));
  Var v = push(Tensor{}, true, nullptr);
  nodes_[v.index].external = &value;
  nodes_[v.index].dense_sink = grad_sink;
  return v;
}

Var Graph::sparse_parameter(const Tensor& table, SparseRowGrad* grad_sink) {
  require(table.rank() == 2 && grad_sink != nullptr && grad_sink->cols() == table.dim(1),
          "sparse parameter must be a matrix with a matching sink");
  Var v = push(Tensor{}, true, nullptr);
  nodes_[v.index].external = &table;
  nodes_[v.index].sparse_sink = grad_sink;
  return v;
}

const Tensor& Graph::value(Var v) const {
  require(v.index < nodes_.size(), "variable does not belong to this graph");
  return node_value(v.index);
}

const Tensor& Graph::grad(Var v) {
  Node& n = node(v);
  require(n.sparse_sink == nullptr, "gradient of a sparse parameter lives in its sink");
  return grad_buffer(v.index);
}

const Tensor& Graph::probs(Var loss) const {
  require(loss.index < nodes_.size() && !nodes_[loss.index].aux.empty(), "node is not a softmax_xent output");
  return nodes_[loss.index].aux;
}

void Graph::backward(Var root) {
  require(value(root).size() == 1, "backward root must be a scalar");
  if (!nodes_[root.index].requires_grad) return;
  grad_buffer(root.index)[0] += 1.0;
  for (std::size_t i = root.index + 1; i-- > 0;) {
    Node& n = nodes_[i];
    if (!n.requires_grad || !n.backward) continue;
    if (!n.has_grad) continue;  // nothing flowed into this node
    n.backward(*this, i);
  }
}

// ---------------------------------------------------------------------------
// Operations

Var Graph::embed_lookup(Var table, std::span<const std::size_t> ids) {
  const Tensor& t = value(table);
  require(t.rank() == 2, "embed_lookup table must be a matrix");
  const std::size_t d = t.dim(1);
  Tensor out({ids.size(), d});
  for (std::size_t i = 0; i < ids.size(); ++i) {
    require(ids[i] < t.dim(0), "embed_lookup id " + std::to_string(ids[i]) + " out of range");
    std::copy_n(t.row(ids[i]).begin(), d, out.row(i).begin());
  }
  check_finite(out, "embed_lookup");
  std::vector<std::size_t> kept(ids.begin(), ids.end());
  const std::size_t tix = table.index;
  return push(std::move(out), needs(tix), [tix, kept = std::move(kept)](Graph& g, std::size_t self) {
    const Tensor& up = g.nodes_[self].grad;
    Node& tn = g.nodes_[tix];
    if (tn.sparse_sink) {
      for (std::size_t i = 0; i < kept.size(); ++i) tn.sparse_sink->add_row(kept[i], up.row(i));
    } else {
      Tensor& gt = g.grad_buffer(tix);
      for (std::size_t i = 0; i < kept.size(); ++i) add_into(gt.row(kept[i]), up.row(i));
    }
  });
}

Var Graph::concat_columns(Var left, Var right) {
  const Tensor& a = value(left);
  const Tensor& b = value(right);
  require(a.rank() == 2 && b.rank() == 2 && a.dim(0) == b.dim(0),
          "concat_columns needs matrices with equal rows, got " + shape_string(a.shape()) + " and " +
              shape_string(b.shape()));
  const std::size_t rows = a.dim(0), ca = a.dim(1), cb = b.dim(1);
  Tensor out({rows, ca + cb});
  for (std::size_t r = 0; r < rows; ++r) {
    std::copy_n(a.row(r).begin(), ca, out.row(r).begin());
    std::copy_n(b.row(r).begin(), cb, out.row(r).begin() + static_cast<std::ptrdiff_t>(ca));
  }
  const std::size_t li = left.index, ri = right.index;
  return push(std::move(out), needs(li) || needs(ri), [li, ri, rows, ca, cb](Graph& g, std::size_t self) {
    const Tensor& up = g.nodes_[self].grad;
    if (g.needs(li)) {
      Tensor& ga = g.grad_buffer(li);
      for (std::size_t r = 0; r < rows; ++r) add_into(ga.row(r), up.row(r).subspan(0, ca));
    }
    if (g.needs(ri)) {
      Tensor& gb = g.grad_buffer(ri);
      for (std::size_t r = 0; r < rows; ++r) add_into(gb.row(r), up.row(r).subspan(ca, cb));
    }
  });
}

Var Graph::pad_rows(Var x, std::size_t rows) {
  const Tensor& a = value(x);
  require(a.rank() == 2 && rows >= a.dim(0), "pad_rows cannot shrink " + shape_string(a.shape()));
  if (rows == a.dim(0)) return x;
  Tensor out({rows, a.dim(1)}, 0.0);
  std::copy(a.data().begin(), a.data().end(), out.data().begin());
  const std::size_t xi = x.index, n = a.size();
  return push(std::move(out), needs(xi), [xi, n](Graph& g, std::size_t self) {
    add_into(g.grad_buffer(xi).data(), g.nodes_[self].grad.data().subspan(0, n));
  });
}

Var Graph::conv1d(Var input, Var kernels, Var bias) {
  const Tensor& x = value(input);
  const Tensor& k = value(kernels);
  const Tensor& b = value(bias);
  require(x.rank() == 2 && k.rank() == 3 && b.rank() == 1, "conv1d expects L×D input, k×D×F kernels, F bias");
  const std::size_t len = x.dim(0), depth = x.dim(1);
  const std::size_t width = k.dim(0), filters = k.dim(2);
  require(k.dim(1) == depth && b.dim(0) == filters,
          "conv1d kernel " + shape_string(k.shape()) + " incompatible with input " + shape_string(x.shape()));
  require(len >= width, "conv1d input length " + std::to_string(len) + " shorter than kernel width " +
                            std::to_string(width));
  const std::size_t steps = len - width + 1;
  Tensor out({steps, filters});
  const double* xd = x.data().data();
  const double* kd = k.data().data();
  for (std::size_t t = 0; t < steps; ++t) {
    double* o = &out.at(t, 0);
    std::copy_n(b.data().begin(), filters, o);
    // Window rows t..t+width-1 are contiguous, as are the matching kernel rows.
    const double* xw = xd + t * depth;
    for (std::size_t j = 0; j < width * depth; ++j) {
      const double v = xw[j];
      if (v == 0.0) continue;
      const double* kr = kd + j * filters;
      for (std::size_t f = 0; f < filters; ++f) o[f] += v * kr[f];
    }
  }
  check_finite(out, "conv1d");
  const std::size_t xi = input.index, ki = kernels.index, bi = bias.index;
  return push(std::move(out), needs(xi) || needs(ki) || needs(bi),
              [xi, ki, bi, steps, width, depth, filters](Graph& g, std::size_t self) {
                const Tensor& up = g.nodes_[self].grad;
                const double* ud = up.data().data();
                if (g.needs(bi)) {
                  Tensor& gb = g.grad_buffer(bi);
                  for (std::size_t t = 0; t < steps; ++t)
                    for (std::size_t f = 0; f < filters; ++f) gb[f] += ud[t * filters + f];
                }
                if (g.needs(ki)) {
                  const double* xd = g.node_value(xi).data().data();
                  double* gk = g.grad_buffer(ki).data().data();
                  for (std::size_t t = 0; t < steps; ++t) {
                    const double* xw = xd + t * depth;
                    const double* u = ud + t * filters;
                    for (std::size_t j = 0; j < width * depth; ++j) {
                      const double v = xw[j];
                      if (v == 0.0) continue;
                      double* gr = gk + j * filters;
                      for (std::size_t f = 0; f < filters; ++f) gr[f] += v * u[f];
                    }
                  }
                }
                if (g.needs(xi)) {
                  const double* kd = g.node_value(ki).data().data();
                  double* gx = g.grad_buffer(xi).data().data();
                  for (std::size_t t = 0; t < steps; ++t) {
                    double* gw = gx + t * depth;
                    const double* u = ud + t * filters;
                    for (std::size_t j = 0; j < width * depth; ++j) {
                      const double* kr = kd + j * filters;
                      double acc = 0.0;
                      for (std::size_t f = 0; f < filters; ++f) acc += kr[f] * u[f];
                      gw[j] += acc;
                    }
                  }
                }
              });
}

Var Graph::max_over_time(Var input) {
  const Tensor& x = value(input);
  require(x.rank() == 2 && x.dim(0) > 0, "max_over_time expects a non-empty L×F matrix");
  const std::size_t len = x.dim(0), filters = x.dim(1);
  Tensor out({filters});
  std::vector<std::size_t> argmax(filters, 0);
  for (std::size_t f = 0; f < filters; ++f) out[f] = x.at(0, f);
  for (std::size_t t = 1; t < len; ++t) {
    for (std::size_t f = 0; f < filters; ++f) {
      // strict comparison keeps the lowest time index on ties
      if (x.at(t, f) > out[f]) {
        out[f] = x.at(t, f);
        argmax[f] = t;
      }
    }
  }
  const std::size_t xi = input.index;
  return push(std::move(out), needs(xi), [xi, filters, argmax = std::move(argmax)](Graph& g, std::size_t self) {
    const Tensor& up = g.nodes_[self].grad;
    Tensor& gx = g.grad_buffer(xi);
    for (std::size_t f = 0; f < filters; ++f) gx.at(argmax[f], f) += up[f];
  });
}

Var Graph::relu(Var x) {
  Tensor out = value(x);
  for (double& v : out.data()) v = v > 0.0 ? v : 0.0;
  const std::size_t xi = x.index;
  return push(std::move(out), needs(xi), [xi](Graph& g, std::size_t self) {
    const Tensor& y = g.node_value(self);
    const Tensor& up = g.nodes_[self].grad;
    Tensor& gx = g.grad_buffer(xi);
    for (std::size_t i = 0; i < y.size(); ++i)
      if (y[i] > 0.0) gx[i] += up[i];
  });
}

Var Graph::tanh(Var x) {
  Tensor out = value(x);
  for (double& v : out.data()) v = std::tanh(v);
  const std::size_t xi = x.index;
  return push(std::move(out), needs(xi), [xi](Graph& g, std::size_t self) {
    const Tensor& y = g.node_value(self);
    const Tensor& up = g.nodes_[self].grad;
    Tensor& gx = g.grad_buffer(xi);
    for (std::size_t i = 0; i < y.size(); ++i) gx[i] += up[i] * (1.0 - y[i] * y[i]);
  });
}

Var Graph::dense(Var x, Var weight, Var bias, Activation activation) {
  const Tensor& in = value(x);
  const Tensor& w = value(weight);
  const Tensor& b = value(bias);
  require(in.rank() == 1 && w.rank() == 2 && b.rank() == 1 && w.dim(1) == in.dim(0) && b.dim(0) == w.dim(0),
          "dense shape mismatch: x " + shape_string(in.shape()) + ", W " + shape_string(w.shape()) + ", b " +
              shape_string(b.shape()));
  const std::size_t m = w.dim(0), n = w.dim(1);
  Tensor out({m});
  for (std::size_t i = 0; i < m; ++i) {
    const auto wr = w.row(i);
    double acc = b[i];
    for (std::size_t j = 0; j < n; ++j) acc += wr[j] * in[j];
    out[i] = acc;
  }
  check_finite(out, "dense");
  const std::size_t xi = x.index, wi = weight.index, bi = bias.index;
  Var lin = push(std::move(out), needs(xi) || needs(wi) || needs(bi), [xi, wi, bi, m, n](Graph& g, std::size_t self) {
    const Tensor& up = g.nodes_[self].grad;
    if (g.needs(bi)) add_into(g.grad_buffer(bi).data(), up.data());
    if (g.needs(wi)) {
      const Tensor& in = g.node_value(xi);
      Tensor& gw = g.grad_buffer(wi);
      for (std::size_t i = 0; i < m; ++i) {
        if (up[i] == 0.0) continue;
        auto row = gw.row(i);
        for (std::size_t j = 0; j < n; ++j) row[j] += up[i] * in[j];
      }
    }
    if (g.needs(xi)) {
      const Tensor& w = g.node_value(wi);
      Tensor& gx = g.grad_buffer(xi);
      for (std::size_t i = 0; i < m; ++i) {
        if (up[i] == 0.0) continue;
        const auto row = w.row(i);
        for (std::size_t j = 0; j < n; ++j) gx[j] += up[i] * row[j];
      }
    }
  });
  switch (activation) {
    case Activation::relu:
      return relu(lin);
    case Activation::tanh:
      return tanh(lin);
    case Activation::identity:
      break;
  }
  return lin;
}

Var Graph::concat(std::span<const Var> parts) {
  require(!parts.empty(), "concat of nothing");
  std::vector<std::size_t> ids, sizes;
  std::vector<double> data;
  bool grad = false;
  for (Var p : parts) {
    const Tensor& t = value(p);
    require(t.rank() == 1, "concat expects vectors, got " + shape_string(t.shape()));
    data.insert(data.end(), t.data().begin(), t.data().end());
    ids.push_back(p.index);
    sizes.push_back(t.size());
    grad = grad || needs(p.index);
  }
  return push(Tensor::vector(std::move(data)), grad, [ids, sizes](Graph& g, std::size_t self) {
    const auto up = g.nodes_[self].grad.data();
    std::size_t offset = 0;
    for (std::size_t i = 0; i < ids.size(); ++i) {
      if (g.needs(ids[i])) add_into(g.grad_buffer(ids[i]).data(), up.subspan(offset, sizes[i]));
      offset += sizes[i];
    }
  });
}

Var Graph::concat(std::initializer_list<Var> parts) {
  return concat(std::span<const Var>(parts.begin(), parts.size()));
}

Var Graph::subtract3(Var b, Var e1, Var e2) {
  const Tensor& tb = value(b);
  const Tensor& t1 = value(e1);
  const Tensor& t2 = value(e2);
  require(tb.same_shape(t1) && tb.same_shape(t2), "subtract3 needs equal shapes");
  Tensor out = tb;
  for (std::size_t i = 0; i < out.size(); ++i) out[i] = tb[i] - t1[i] - t2[i];
  const std::size_t bi = b.index, i1 = e1.index, i2 = e2.index;
  return push(std::move(out), needs(bi) || needs(i1) || needs(i2), [bi, i1, i2](Graph& g, std::size_t self) {
    const Tensor& up = g.nodes_[self].grad;
    if (g.needs(bi)) add_into(g.grad_buffer(bi).data(), up.data());
    for (std::size_t idx : {i1, i2}) {
      if (!g.needs(idx)) continue;
      Tensor& ge = g.grad_buffer(idx);
      for (std::size_t i = 0; i < up.size(); ++i) ge[i] -= up[i];
    }
  });
}

Var Graph::hadamard(Var a, Var b) {
  const Tensor& ta = value(a);
  const Tensor& tb = value(b);
  require(ta.same_shape(tb), "hadamard needs equal shapes");
  Tensor out = ta;
  for (std::size_t i = 0; i < out.size(); ++i) out[i] = ta[i] * tb[i];
  check_finite(out, "hadamard");
  const std::size_t ai = a.index, bi = b.index;
  return push(std::move(out), needs(ai) || needs(bi), [ai, bi](Graph& g, std::size_t self) {
    const Tensor& up = g.nodes_[self].grad;
    const Tensor& va = g.node_value(ai);
    const Tensor& vb = g.node_value(bi);
    if (g.needs(ai)) {
      Tensor& ga = g.grad_buffer(ai);
      for (std::size_t i = 0; i < up.size(); ++i) ga[i] += up[i] * vb[i];
    }
    if (g.needs(bi)) {
      Tensor& gb = g.grad_buffer(bi);
      for (std::size_t i = 0; i < up.size(); ++i) gb[i] += up[i] * va[i];
    }
  });
}

Var Graph::mul_mask(Var x, const Tensor& mask) {
  const Tensor& tx = value(x);
  require(tx.same_shape(mask), "mask shape mismatch");
  Tensor out = tx;
  for (std::size_t i = 0; i < out.size(); ++i) out[i] *= mask[i];
  const std::size_t xi = x.index;
  Var v = push(std::move(out), needs(xi), [xi](Graph& g, std::size_t self) {
    const Tensor& up = g.nodes_[self].grad;
    const Tensor& m = g.nodes_[self].aux;
    Tensor& gx = g.grad_buffer(xi);
    for (std::size_t i = 0; i < up.size(); ++i) gx[i] += up[i] * m[i];
  });
  nodes_[v.index].aux = mask;
  return v;
}

Var Graph::scale(Var x, double factor) {
  Tensor out = value(x);
  for (double& v : out.data()) v *= factor;
  check_finite(out, "scale");
  const std::size_t xi = x.index;
  return push(std::move(out), needs(xi), [xi, factor](Graph& g, std::size_t self) {
    const Tensor& up = g.nodes_[self].grad;
    Tensor& gx = g.grad_buffer(xi);
    for (std::size_t i = 0; i < up.size(); ++i) gx[i] += factor * up[i];
  });
}

Var Graph::sum(Var x) {
  const Tensor& tx = value(x);
  double acc = 0.0;
  for (double v : tx.data()) acc += v;
  const std::size_t xi = x.index;
  return push(Tensor({1}, acc), needs(xi), [xi](Graph& g, std::size_t self) {
    const double up = g.nodes_[self].grad[0];
    for (double& v : g.grad_buffer(xi).data()) v += up;
  });
}

Var Graph::softmax_xent(Var logits, std::size_t gold) {
  const Tensor& z = value(logits);
  require(z.rank() == 1 && gold < z.dim(0), "softmax_xent expects K logits and gold < K");
  Tensor probs = Tensor::vector(softmax(z.data()));
  const double loss = -std::log(probs[gold]);
  if (!std::isfinite(loss)) throw NumericError("non-finite loss in softmax_xent");
  const std::size_t zi = logits.index;
  Var v = push(Tensor({1}, loss), needs(zi), [zi, gold](Graph& g, std::size_t self) {
    const double up = g.nodes_[self].grad[0];
    const Tensor& p = g.nodes_[self].aux;
    Tensor& gz = g.grad_buffer(zi);
    for (std::size_t i = 0; i < p.size(); ++i) gz[i] += up * (p[i] - (i == gold ? 1.0 : 0.0));
  });
  nodes_[v.index].aux = std::move(probs);
  return v;
}

// ---------------------------------------------------------------------------
// Gradient checking

GradCheckResult grad_check(const ScalarGraphFn& fn, std::span<Tensor* const> params, double eps,
                           std::size_t max_coords, std::uint64_t seed, double floor) {
  std::vector<Tensor> analytic;
  analytic.reserve(params.size());
  for (Tensor* p : params) analytic.emplace_back(p->shape(), 0.0);
  {
    Graph g;
    std::vector<Var> leaves;
    for (std::size_t i = 0; i < params.size(); ++i) leaves.push_back(g.parameter(*params[i], &analytic[i]));
    Var out = fn(g, leaves);
    g.backward(out);
  }

  auto evaluate = [&]() {
    Graph g;
    std::vector<Var> leaves;
    for (Tensor* p : params) leaves.push_back(g.constant_ref(*p));
    return g.value(fn(g, leaves))[0];
  };

  GradCheckResult result;
  Rng rng(seed);
  for (std::size_t pi = 0; pi < params.size(); ++pi) {
    Tensor& p = *params[pi];
    std::vector<std::size_t> coords(p.size());
    std::iota(coords.begin(), coords.end(), std::size_t{0});
    if (coords.size() > max_coords) {
      rng.shuffle(std::span<std::size_t>(coords));
      coords.resize(max_coords);
    }
    for (std::size_t c : coords) {
      const double saved = p[c];
      p[c] = saved + eps;
      const double plus = evaluate();
      p[c] = saved - eps;
      const double minus = evaluate();
      p[c] = saved;
      const double numeric = (plus - minus) / (2.0 * eps);
      const double a = analytic[pi][c];
      const double rel = std::abs(a - numeric) / std::max({std::abs(a), std::abs(numeric), floor});
      ++result.coords_checked;
      if (rel >= result.max_rel_error) {
        result.max_rel_error = rel;
        result.worst_location = "param " + std::to_string(pi) + " coord " + std::to_string(c);
      }
    }
  }
  return result;
}

// ---------------------------------------------------------------------------
// Adam

void Adam::attach(std::span<Tensor* const> params) {
  m_.clear();
  v_.clear();
  for (Tensor* p : params) {
    m_.emplace_back(p->shape(), 0.0);
    v_.emplace_back(p->shape(), 0.0);
  }
  t_ = 0;
}

void Adam::step(std::span<Tensor* const> params, std::span<const Tensor* const> grads) {
  if (m_.empty() && !params.empty()) attach(params);
  require(params.size() == m_.size() && grads.size() == params.size(), "Adam parameter list changed");
  ++t_;
  const double c1 = 1.0 - std::pow(config_.beta1, static_cast<double>(t_));
  const double c2 = 1.0 - std::pow(config_.beta2, static_cast<double>(t_));
  for (std::size_t i = 0; i < params.size(); ++i) {
    Tensor& p = *params[i];
    const Tensor& g = *grads[i];
    require(p.same_shape(g) && p.same_shape(m_[i]), "Adam gradient shape mismatch");
    auto pd = p.data();
    auto gd = g.data();
    auto md = m_[i].data();
    auto vd = v_[i].data();
    for (std::size_t j = 0; j < pd.size(); ++j) {
      md[j] = config_.beta1 * md[j] + (1.0 - config_.beta1) * gd[j];
      vd[j] = config_.beta2 * vd[j] + (1.0 - config_.beta2) * gd[j] * gd[j];
      const double mhat = md[j] / c1;
      const double vhat = vd[j] / c2;
      pd[j] -= config_.lr * mhat / (std::sqrt(vhat) + config_.eps);
    }
  }
}

}  // namespace sbre
