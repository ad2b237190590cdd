#include "topiceq/tape.hpp"

#include <algorithm>
#include <cmath>
#include <string>

#include "topiceq/error.hpp"

namespace topiceq {

namespace {

void require(bool cond, const char* op, const std::string& detail) {
  if (!cond) throw Error(ErrorKind::ShapeError, std::string(op) + ": " + detail);
}

void check_finite(const Array& a, const char* op) {
  if (!a.all_finite()) throw Error(ErrorKind::NumericsError, std::string("non-finite value produced by ") + op);
}

double sigmoid_scalar(double x) {
  if (x >= 0) return 1.0 / (1.0 + std::exp(-x));
  const double e = std::exp(x);
  return e / (1.0 + e);
}

void axpy(std::span<double> dst, std::span<const double> src, double scale = 1.0) {
  for (std::size_t i = 0; i < dst.size(); ++i) dst[i] += scale * src[i];
}

}  // namespace

Var Tape::push(Node&& node) {
  check_finite(node.ref ? *node.ref : node.value, "tape op");
  nodes_.push_back(std::move(node));
  return Var{static_cast<std::uint32_t>(nodes_.size() - 1)};
}

Array& Tape::adjoint_of(std::uint32_t id) {
  Node& n = nodes_[id];
  if (n.adjoint.empty() && !val(id).empty()) n.adjoint = Array(val(id).shape());
  if (n.adjoint.shape() != val(id).shape()) n.adjoint = Array(val(id).shape());
  return n.adjoint;
}

Var Tape::constant(Array value) {
  Node n;
  n.op = OpKind::Constant;
  n.value = std::move(value);
  return push(std::move(n));
}

Var Tape::variable(Array value) {
  Node n;
  n.op = OpKind::Constant;
  n.value = std::move(value);
  n.needs_grad = true;
  return push(std::move(n));
}

Var Tape::param(std::string_view name) {
  if (!store_) throw Error(ErrorKind::InputError, "tape has no parameter store");
  return param(store_->index(name));
}

Var Tape::param(std::size_t index) {
  if (!store_) throw Error(ErrorKind::InputError, "tape has no parameter store");
  if (param_nodes_.size() < store_->size()) param_nodes_.resize(store_->size(), -1);
  if (param_nodes_[index] >= 0) return Var{static_cast<std::uint32_t>(param_nodes_[index])};
  const Parameter& p = store_->at(index);
  Node n;
  n.op = OpKind::Param;
  n.ref = &p.value;
  n.needs_grad = !p.frozen;
  n.param_index = index;
  Var v = push(std::move(n));
  param_nodes_[index] = v.id;
  return v;
}

Var Tape::affine(Var w, Var x, Var b) {
  const Array& W = val(w.id);
  const Array& X = val(x.id);
  const Array& B = val(b.id);
  require(W.rank() == 2 && X.rank() == 1 && W.dim(1) == X.dim(0), "affine",
          "W " + shape_string(W.shape()) + " x " + shape_string(X.shape()));
  require(B.rank() == 1 && B.dim(0) == W.dim(0), "affine", "bias " + shape_string(B.shape()));
  const std::size_t m = W.dim(0), k = W.dim(1);
  Array out(Shape{m});
  const double* wp = W.data().data();
  const double* xp = X.data().data();
  for (std::size_t i = 0; i < m; ++i) {
    double s = B[i];
    const double* row = wp + i * k;
    for (std::size_t j = 0; j < k; ++j) s += row[j] * xp[j];
    out[i] = s;
  }
  Node n;
  n.op = OpKind::Affine;
  n.in0 = w.id;
  n.in1 = x.id;
  n.in2 = b.id;
  n.n_in = 3;
  n.needs_grad = nodes_[w.id].needs_grad || nodes_[x.id].needs_grad || nodes_[b.id].needs_grad;
  n.value = std::move(out);
  return push(std::move(n));
}

Var Tape::affine(Var w, Var x) {
  const Array& W = val(w.id);
  const Array& X = val(x.id);
  require(W.rank() == 2 && X.rank() == 1 && W.dim(1) == X.dim(0), "affine",
          "W " + shape_string(W.shape()) + " x " + shape_string(X.shape()));
  const std::size_t m = W.dim(0), k = W.dim(1);
  Array out(Shape{m});
  const double* wp = W.data().data();
  const double* xp = X.data().data();
  for (std::size_t i = 0; i < m; ++i) {
    double s = 0.0;
    const double* row = wp + i * k;
    for (std::size_t j = 0; j < k; ++j) s += row[j] * xp[j];
    out[i] = s;
  }
  Node n;
  n.op = OpKind::Affine;
  n.in0 = w.id;
  n.in1 = x.id;
  n.n_in = 2;
  n.needs_grad = nodes_[w.id].needs_grad || nodes_[x.id].needs_grad;
  n.value = std::move(out);
  return push(std::move(n));
}

Var Tape::matmul(Var a, Var b) {
  const Array& A = val(a.id);
  const Array& B = val(b.id);
  Array out;
  if (A.rank() == 2 && B.rank() == 2) {
    require(A.dim(1) == B.dim(0), "matmul", shape_string(A.shape()) + " x " + shape_string(B.shape()));
    const std::size_t m = A.dim(0), k = A.dim(1), p = B.dim(1);
    out = Array(Shape{m, p});
    for (std::size_t i = 0; i < m; ++i)
      for (std::size_t t = 0; t < k; ++t) {
        const double a_it = A.at(i, t);
        if (a_it == 0.0) continue;
        for (std::size_t j = 0; j < p; ++j) out.at(i, j) += a_it * B.at(t, j);
      }
  } else if (A.rank() == 1 && B.rank() == 2) {
    require(A.dim(0) == B.dim(0), "matmul", shape_string(A.shape()) + " x " + shape_string(B.shape()));
    const std::size_t k = B.dim(0), p = B.dim(1);
    out = Array(Shape{p});
    for (std::size_t t = 0; t < k; ++t) {
      const double a_t = A[t];
      if (a_t == 0.0) continue;
      for (std::size_t j = 0; j < p; ++j) out[j] += a_t * B.at(t, j);
    }
  } else if (A.rank() == 2 && B.rank() == 1) {
    require(A.dim(1) == B.dim(0), "matmul", shape_string(A.shape()) + " x " + shape_string(B.shape()));
    const std::size_t m = A.dim(0), k = A.dim(1);
    out = Array(Shape{m});
    for (std::size_t i = 0; i < m; ++i) {
      double s = 0.0;
      for (std::size_t t = 0; t < k; ++t) s += A.at(i, t) * B[t];
      out[i] = s;
    }
  } else {
    require(false, "matmul", "unsupported ranks " + shape_string(A.shape()) + " x " + shape_string(B.shape()));
  }
  Node n;
  n.op = OpKind::MatMul;
  n.in0 = a.id;
  n.in1 = b.id;
  n.n_in = 2;
  n.needs_grad = nodes_[a.id].needs_grad || nodes_[b.id].needs_grad;
  n.value = std::move(out);
  return push(std::move(n));
}

#define TOPICEQ_BINARY(NAME, KIND, EXPR)                                                          \
  Var Tape::NAME(Var a, Var b) {                                                                  \
    const Array& A = val(a.id);                                                                   \
    const Array& B = val(b.id);                                                                   \
    require(A.shape() == B.shape(), #NAME, shape_string(A.shape()) + " vs " + shape_string(B.shape())); \
    Array out(A.shape());                                                                         \
    for (std::size_t i = 0; i < out.size(); ++i) out[i] = EXPR;                                   \
    Node n;                                                                                       \
    n.op = OpKind::KIND;                                                                          \
    n.in0 = a.id;                                                                                 \
    n.in1 = b.id;                                                                                 \
    n.n_in = 2;                                                                                   \
    n.needs_grad = nodes_[a.id].needs_grad || nodes_[b.id].needs_grad;                            \
    n.value = std::move(out);                                                                     \
    return push(std::move(n));                                                                    \
  }

TOPICEQ_BINARY(add, Add, A[i] + B[i])
TOPICEQ_BINARY(sub, Sub, A[i] - B[i])
TOPICEQ_BINARY(mul, Mul, A[i] * B[i])

#undef TOPICEQ_BINARY

#define TOPICEQ_UNARY(NAME, KIND, EXPR)         \
  Var Tape::NAME(Var a) {                       \
    const Array& A = val(a.id);                 \
    Array out(A.shape());                       \
    for (std::size_t i = 0; i < out.size(); ++i) { \
      const double x = A[i];                    \
      out[i] = EXPR;                            \
    }                                           \
    Node n;                                     \
    n.op = OpKind::KIND;                        \
    n.in0 = a.id;                               \
    n.n_in = 1;                                 \
    n.needs_grad = nodes_[a.id].needs_grad;     \
    n.value = std::move(out);                   \
    return push(std::move(n));                  \
  }

TOPICEQ_UNARY(sigmoid, Sigmoid, sigmoid_scalar(x))
TOPICEQ_UNARY(tanh, Tanh, std::tanh(x))
TOPICEQ_UNARY(exp, Exp, std::exp(x))
TOPICEQ_UNARY(log, Log, std::log(x))

#undef TOPICEQ_UNARY

Var Tape::scale(Var a, double c) {
  const Array& A = val(a.id);
  Array out(A.shape());
  for (std::size_t i = 0; i < out.size(); ++i) out[i] = c * A[i];
  Node n;
  n.op = OpKind::Scale;
  n.in0 = a.id;
  n.n_in = 1;
  n.c0 = c;
  n.needs_grad = nodes_[a.id].needs_grad;
  n.value = std::move(out);
  return push(std::move(n));
}

Var Tape::add_scalar(Var a, double c) {
  const Array& A = val(a.id);
  Array out(A.shape());
  for (std::size_t i = 0; i < out.size(); ++i) out[i] = A[i] + c;
  Node n;
  n.op = OpKind::AddScalar;
  n.in0 = a.id;
  n.n_in = 1;
  n.c0 = c;
  n.needs_grad = nodes_[a.id].needs_grad;
  n.value = std::move(out);
  return push(std::move(n));
}

Var Tape::clamp(Var a, double lo, double hi) {
  const Array& A = val(a.id);
  Array out(A.shape());
  for (std::size_t i = 0; i < out.size(); ++i) out[i] = std::clamp(A[i], lo, hi);
  Node n;
  n.op = OpKind::Clamp;
  n.in0 = a.id;
  n.n_in = 1;
  n.c0 = lo;
  n.c1 = hi;
  n.needs_grad = nodes_[a.id].needs_grad;
  n.value = std::move(out);
  return push(std::move(n));
}

Var Tape::concat(std::span<const Var> parts) {
  std::size_t total = 0;
  bool needs = false;
  for (Var p : parts) {
    require(val(p.id).rank() == 1, "concat", "inputs must be 1-D");
    total += val(p.id).size();
    needs = needs || nodes_[p.id].needs_grad;
  }
  Array out(Shape{total});
  std::size_t off = 0;
  Node n;
  for (Var p : parts) {
    const Array& P = val(p.id);
    std::copy(P.data().begin(), P.data().end(), out.data().begin() + static_cast<std::ptrdiff_t>(off));
    off += P.size();
    n.inputs.push_back(p.id);
  }
  n.op = OpKind::Concat;
  n.needs_grad = needs;
  n.value = std::move(out);
  return push(std::move(n));
}

Var Tape::slice(Var a, std::size_t begin, std::size_t length) {
  const Array& A = val(a.id);
  require(A.rank() == 1 && begin + length <= A.size(), "slice", "range out of bounds");
  Array out(Shape{length});
  std::copy_n(A.data().begin() + static_cast<std::ptrdiff_t>(begin), length, out.data().begin());
  Node n;
  n.op = OpKind::Slice;
  n.in0 = a.id;
  n.n_in = 1;
  n.ids = {begin};
  n.needs_grad = nodes_[a.id].needs_grad;
  n.value = std::move(out);
  return push(std::move(n));
}

Var Tape::softmax(Var a) {
  const Array& A = val(a.id);
  require(A.rank() == 1 || A.rank() == 2, "softmax", "rank must be 1 or 2");
  const std::size_t cols = A.shape().back();
  const std::size_t rows = A.size() / std::max<std::size_t>(cols, 1);
  Array out(A.shape());
  for (std::size_t r = 0; r < rows; ++r) {
    const double* x = A.data().data() + r * cols;
    double* y = out.data().data() + r * cols;
    const double mx = *std::max_element(x, x + cols);
    double sum = 0.0;
    for (std::size_t j = 0; j < cols; ++j) {
      y[j] = std::exp(x[j] - mx);
      sum += y[j];
    }
    for (std::size_t j = 0; j < cols; ++j) y[j] /= sum;
  }
  Node n;
  n.op = OpKind::Softmax;
  n.in0 = a.id;
  n.n_in = 1;
  n.needs_grad = nodes_[a.id].needs_grad;
  n.value = std::move(out);
  return push(std::move(n));
}

Var Tape::embed_lookup(Var table, std::size_t row) {
  const Array& E = val(table.id);
  require(E.rank() == 2, "embed_lookup", "table must be 2-D");
  if (row >= E.dim(0)) throw Error(ErrorKind::InputError, "embedding row " + std::to_string(row) + " out of range");
  const std::size_t d = E.dim(1);
  Array out(Shape{d});
  std::copy_n(E.data().begin() + static_cast<std::ptrdiff_t>(row * d), d, out.data().begin());
  Node n;
  n.op = OpKind::EmbedLookup;
  n.in0 = table.id;
  n.n_in = 1;
  n.ids = {row};
  n.needs_grad = nodes_[table.id].needs_grad;
  n.value = std::move(out);
  return push(std::move(n));
}

Var Tape::dropout(Var a, double rate, Rng& rng, bool train) {
  if (!(rate >= 0.0 && rate < 1.0)) throw Error(ErrorKind::InputError, "dropout rate must lie in [0,1)");
  if (!train || rate == 0.0) return a;
  const Array& A = val(a.id);
  Array mask(A.shape());
  Array out(A.shape());
  const double keep_scale = 1.0 / (1.0 - rate);
  for (std::size_t i = 0; i < A.size(); ++i) {
    mask[i] = rng.uniform() < rate ? 0.0 : keep_scale;
    out[i] = A[i] * mask[i];
  }
  Node n;
  n.op = OpKind::Dropout;
  n.in0 = a.id;
  n.n_in = 1;
  n.needs_grad = nodes_[a.id].needs_grad;
  n.saved = std::move(mask);
  n.value = std::move(out);
  return push(std::move(n));
}

Var Tape::reduce_sum(Var a) {
  const Array& A = val(a.id);
  double s = 0.0;
  for (double x : A.data()) s += x;
  Node n;
  n.op = OpKind::ReduceSum;
  n.in0 = a.id;
  n.n_in = 1;
  n.needs_grad = nodes_[a.id].needs_grad;
  n.value = Array::scalar(s);
  return push(std::move(n));
}

Var Tape::gather(Var a, std::span<const std::size_t> ids) {
  const Array& A = val(a.id);
  require(A.rank() == 1, "gather", "input must be 1-D");
  Array out(Shape{ids.size()});
  for (std::size_t i = 0; i < ids.size(); ++i) {
    if (ids[i] >= A.size()) throw Error(ErrorKind::InputError, "gather index out of range");
    out[i] = A[ids[i]];
  }
  Node n;
  n.op = OpKind::Gather;
  n.in0 = a.id;
  n.n_in = 1;
  n.ids.assign(ids.begin(), ids.end());
  n.needs_grad = nodes_[a.id].needs_grad;
  n.value = std::move(out);
  return push(std::move(n));
}

Var Tape::categorical_nll(Var logits, std::size_t target) {
  const Array& L = val(logits.id);
  require(L.rank() == 1, "categorical_nll", "logits must be 1-D");
  if (target >= L.size()) throw Error(ErrorKind::InputError, "target id out of range");
  const double mx = *std::max_element(L.data().begin(), L.data().end());
  Array probs(L.shape());
  double sum = 0.0;
  for (std::size_t i = 0; i < L.size(); ++i) {
    probs[i] = std::exp(L[i] - mx);
    sum += probs[i];
  }
  for (double& p : probs.data()) p /= sum;
  const double nll = -(L[target] - mx - std::log(sum));
  Node n;
  n.op = OpKind::CategoricalNll;
  n.in0 = logits.id;
  n.n_in = 1;
  n.ids = {target};
  n.needs_grad = nodes_[logits.id].needs_grad;
  n.saved = std::move(probs);
  n.value = Array::scalar(nll);
  return push(std::move(n));
}

Var Tape::mean_pairwise_cosine(Var rows) {
  const Array& B = val(rows.id);
  require(B.rank() == 2 && B.dim(0) >= 2, "mean_pairwise_cosine", "need a 2-D array with at least 2 rows");
  const std::size_t k = B.dim(0), v = B.dim(1);
  Array norms(Shape{k});
  for (std::size_t i = 0; i < k; ++i) {
    double s = 0.0;
    for (std::size_t j = 0; j < v; ++j) s += B.at(i, j) * B.at(i, j);
    norms[i] = std::sqrt(s);
    if (!(norms[i] > 0.0)) throw Error(ErrorKind::NumericsError, "zero row in mean_pairwise_cosine");
  }
  double total = 0.0;
  for (std::size_t i = 0; i < k; ++i)
    for (std::size_t j = i + 1; j < k; ++j) {
      double dot = 0.0;
      for (std::size_t t = 0; t < v; ++t) dot += B.at(i, t) * B.at(j, t);
      total += dot / (norms[i] * norms[j]);
    }
  const double pairs = static_cast<double>(k * (k - 1) / 2);
  Node n;
  n.op = OpKind::MeanPairwiseCosine;
  n.in0 = rows.id;
  n.n_in = 1;
  n.needs_grad = nodes_[rows.id].needs_grad;
  n.saved = std::move(norms);
  n.value = Array::scalar(total / pairs);
  return push(std::move(n));
}

const Array& Tape::value(Var v) const {
  if (v.id >= nodes_.size()) throw Error(ErrorKind::InputError, "unknown tape node");
  return val(v.id);
}

Array Tape::grad(Var v) const {
  const Node& n = nodes_.at(v.id);
  if (n.adjoint.empty()) return Array(val(v.id).shape());
  return n.adjoint;
}

void Tape::backward(Var loss) {
  if (val(loss.id).size() != 1) {
    throw Error(ErrorKind::ShapeError, "backward requires a scalar loss, got " + shape_string(val(loss.id).shape()));
  }
  for (auto& n : nodes_) n.adjoint = Array();
  adjoint_of(loss.id)[0] = 1.0;
  for (std::int64_t id = loss.id; id >= 0; --id) {
    const Node& n = nodes_[static_cast<std::size_t>(id)];
    if (!n.needs_grad || n.adjoint.empty()) continue;
    backprop_node(static_cast<std::uint32_t>(id));
  }
}

void Tape::backprop_node(std::uint32_t id) {
  // Copy what we need; adjoint_of() on inputs never reallocates nodes_.
  Node& n = nodes_[id];
  const Array& g = n.adjoint;
  auto wants = [&](std::uint32_t in) { return nodes_[in].needs_grad; };

  switch (n.op) {
    case OpKind::Constant:
    case OpKind::Param:
      return;
    case OpKind::Affine: {
      const Array& W = val(n.in0);
      const Array& X = val(n.in1);
      const std::size_t m = W.dim(0), k = W.dim(1);
      if (wants(n.in0)) {
        Array& dW = adjoint_of(n.in0);
        for (std::size_t i = 0; i < m; ++i) {
          const double gi = g[i];
          if (gi == 0.0) continue;
          double* row = dW.data().data() + i * k;
          for (std::size_t j = 0; j < k; ++j) row[j] += gi * X[j];
        }
      }
      if (wants(n.in1)) {
        Array& dX = adjoint_of(n.in1);
        for (std::size_t i = 0; i < m; ++i) {
          const double gi = g[i];
          if (gi == 0.0) continue;
          const double* row = W.data().data() + i * k;
          for (std::size_t j = 0; j < k; ++j) dX[j] += gi * row[j];
        }
      }
      if (n.n_in == 3 && wants(n.in2)) axpy(adjoint_of(n.in2).data(), g.data());
      return;
    }
    case OpKind::MatMul: {
      const Array& A = val(n.in0);
      const Array& B = val(n.in1);
      if (A.rank() == 2 && B.rank() == 2) {
        const std::size_t m = A.dim(0), k = A.dim(1), p = B.dim(1);
        if (wants(n.in0)) {
          Array& dA = adjoint_of(n.in0);
          for (std::size_t i = 0; i < m; ++i)
            for (std::size_t t = 0; t < k; ++t) {
              double s = 0.0;
              for (std::size_t j = 0; j < p; ++j) s += g.at(i, j) * B.at(t, j);
              dA.at(i, t) += s;
            }
        }
        if (wants(n.in1)) {
          Array& dB = adjoint_of(n.in1);
          for (std::size_t i = 0; i < m; ++i)
            for (std::size_t t = 0; t < k; ++t) {
              const double a = A.at(i, t);
              if (a == 0.0) continue;
              for (std::size_t j = 0; j < p; ++j) dB.at(t, j) += a * g.at(i, j);
            }
        }
      } else if (A.rank() == 1) {
        const std::size_t k = B.dim(0), p = B.dim(1);
        if (wants(n.in0)) {
          Array& dA = adjoint_of(n.in0);
          for (std::size_t t = 0; t < k; ++t) {
            double s = 0.0;
            for (std::size_t j = 0; j < p; ++j) s += g[j] * B.at(t, j);
            dA[t] += s;
          }
        }
        if (wants(n.in1)) {
          Array& dB = adjoint_of(n.in1);
          for (std::size_t t = 0; t < k; ++t) {
            const double a = A[t];
            if (a == 0.0) continue;
            for (std::size_t j = 0; j < p; ++j) dB.at(t, j) += a * g[j];
          }
        }
      } else {
        const std::size_t m = A.dim(0), k = A.dim(1);
        if (wants(n.in0)) {
          Array& dA = adjoint_of(n.in0);
          for (std::size_t i = 0; i < m; ++i)
            for (std::size_t t = 0; t < k; ++t) dA.at(i, t) += g[i] * B[t];
        }
        if (wants(n.in1)) {
          Array& dB = adjoint_of(n.in1);
          for (std::size_t i = 0; i < m; ++i)
            for (std::size_t t = 0; t < k; ++t) dB[t] += g[i] * A.at(i, t);
        }
      }
      return;
    }
    case OpKind::Add:
      if (wants(n.in0)) axpy(adjoint_of(n.in0).data(), g.data());
      if (wants(n.in1)) axpy(adjoint_of(n.in1).data(), g.data());
      return;
    case OpKind::Sub:
      if (wants(n.in0)) axpy(adjoint_of(n.in0).data(), g.data());
      if (wants(n.in1)) axpy(adjoint_of(n.in1).data(), g.data(), -1.0);
      return;
    case OpKind::Mul: {
      const Array& A = val(n.in0);
      const Array& B = val(n.in1);
      if (wants(n.in0)) {
        Array& dA = adjoint_of(n.in0);
        for (std::size_t i = 0; i < g.size(); ++i) dA[i] += g[i] * B[i];
      }
      if (wants(n.in1)) {
        Array& dB = adjoint_of(n.in1);
        for (std::size_t i = 0; i < g.size(); ++i) dB[i] += g[i] * A[i];
      }
      return;
    }
    case OpKind::Scale:
      axpy(adjoint_of(n.in0).data(), g.data(), n.c0);
      return;
    case OpKind::AddScalar:
      axpy(adjoint_of(n.in0).data(), g.data());
      return;
    case OpKind::Concat: {
      std::size_t off = 0;
      for (std::uint32_t in : n.inputs) {
        const std::size_t len = val(in).size();
        if (wants(in)) {
          Array& d = adjoint_of(in);
          for (std::size_t i = 0; i < len; ++i) d[i] += g[off + i];
        }
        off += len;
      }
      return;
    }
    case OpKind::Slice: {
      Array& d = adjoint_of(n.in0);
      const std::size_t begin = n.ids[0];
      for (std::size_t i = 0; i < g.size(); ++i) d[begin + i] += g[i];
      return;
    }
    case OpKind::Sigmoid: {
      Array& d = adjoint_of(n.in0);
      for (std::size_t i = 0; i < g.size(); ++i) d[i] += g[i] * n.value[i] * (1.0 - n.value[i]);
      return;
    }
    case OpKind::Tanh: {
      Array& d = adjoint_of(n.in0);
      for (std::size_t i = 0; i < g.size(); ++i) d[i] += g[i] * (1.0 - n.value[i] * n.value[i]);
      return;
    }
    case OpKind::Exp: {
      Array& d = adjoint_of(n.in0);
      for (std::size_t i = 0; i < g.size(); ++i) d[i] += g[i] * n.value[i];
      return;
    }
    case OpKind::Log: {
      const Array& A = val(n.in0);
      Array& d = adjoint_of(n.in0);
      for (std::size_t i = 0; i < g.size(); ++i) d[i] += g[i] / A[i];
      return;
    }
    case OpKind::Softmax: {
      Array& d = adjoint_of(n.in0);
      const std::size_t cols = n.value.shape().back();
      const std::size_t rows = n.value.size() / cols;
      for (std::size_t r = 0; r < rows; ++r) {
        const double* y = n.value.data().data() + r * cols;
        const double* gy = g.data().data() + r * cols;
        double dot = 0.0;
        for (std::size_t j = 0; j < cols; ++j) dot += gy[j] * y[j];
        double* dx = d.data().data() + r * cols;
        for (std::size_t j = 0; j < cols; ++j) dx[j] += y[j] * (gy[j] - dot);
      }
      return;
    }
    case OpKind::Clamp: {
      const Array& A = val(n.in0);
      Array& d = adjoint_of(n.in0);
      for (std::size_t i = 0; i < g.size(); ++i) {
        if (A[i] >= n.c0 && A[i] <= n.c1) d[i] += g[i];
      }
      return;
    }
    case OpKind::EmbedLookup: {
      Array& d = adjoint_of(n.in0);
      const std::size_t width = g.size();
      axpy(d.data().subspan(n.ids[0] * width, width), g.data());
      return;
    }
    case OpKind::Dropout: {
      Array& d = adjoint_of(n.in0);
      for (std::size_t i = 0; i < g.size(); ++i) d[i] += g[i] * n.saved[i];
      return;
    }
    case OpKind::ReduceSum: {
      Array& d = adjoint_of(n.in0);
      const double gs = g[0];
      for (double& x : d.data()) x += gs;
      return;
    }
    case OpKind::Gather: {
      Array& d = adjoint_of(n.in0);
      for (std::size_t i = 0; i < n.ids.size(); ++i) d[n.ids[i]] += g[i];
      return;
    }
    case OpKind::CategoricalNll: {
      Array& d = adjoint_of(n.in0);
      const double gs = g[0];
      for (std::size_t i = 0; i < d.size(); ++i) d[i] += gs * n.saved[i];
      d[n.ids[0]] -= gs;
      return;
    }
    case OpKind::MeanPairwiseCosine: {
      const Array& B = val(n.in0);
      Array& d = adjoint_of(n.in0);
      const std::size_t k = B.dim(0), v = B.dim(1);
      const double coef = g[0] / static_cast<double>(k * (k - 1) / 2);
      const Array& norms = n.saved;
      for (std::size_t i = 0; i < k; ++i)
        for (std::size_t j = i + 1; j < k; ++j) {
          double dot = 0.0;
          for (std::size_t t = 0; t < v; ++t) dot += B.at(i, t) * B.at(j, t);
          const double ni = norms[i], nj = norms[j];
          const double cos = dot / (ni * nj);
          for (std::size_t t = 0; t < v; ++t) {
            d.at(i, t) += coef * (B.at(j, t) / (ni * nj) - cos * B.at(i, t) / (ni * ni));
            d.at(j, t) += coef * (B.at(i, t) / (ni * nj) - cos * B.at(j, t) / (nj * nj));
          }
        }
      return;
    }
  }
}

void Tape::accumulate_param_grads(GradBuffer& out, double scale) const {
  for (const Node& n : nodes_) {
    if (n.op == OpKind::Param && n.needs_grad && !n.adjoint.empty()) out.add(n.param_index, n.adjoint, scale);
  }
}

void Tape::accumulate_param_grads(ParamStore& store, double scale) const {
  for (const Node& n : nodes_) {
    if (n.op != OpKind::Param || !n.needs_grad || n.adjoint.empty()) continue;
    auto dst = store.at(n.param_index).grad.data();
    axpy(dst, n.adjoint.data(), scale);
  }
}

}  // namespace topiceq
