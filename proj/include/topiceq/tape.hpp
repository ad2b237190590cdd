#pragma once

#include <cstddef>
#include <cstdint>
#include <span>
#include <vector>

#include "topiceq/array.hpp"
#include "topiceq/params.hpp"
#include "topiceq/rng.hpp"

namespace topiceq {

/// Handle to a node recorded on a Tape.
struct Var {
  std::uint32_t id = 0;
};

enum class OpKind : std::uint8_t {
  Constant,
  Param,
  Affine,
  MatMul,
  Add,
  Sub,
  Mul,
  Scale,
  AddScalar,
  Concat,
  Slice,
  Sigmoid,
  Tanh,
  Exp,
  Log,
  Softmax,
  Clamp,
  EmbedLookup,
  Dropout,
  ReduceSum,
  Gather,
  CategoricalNll,
  MeanPairwiseCosine,
};

/// Reverse-mode differentiation over an append-only list of nodes. Inputs
/// of node i always have ids < i, so one backward sweep in reverse id order
/// is a valid topological traversal.
///
/// Parameter leaves reference the bound ParamStore without copying; the
/// store must outlive the tape and must not be mutated while it is in use.
class Tape {
 public:
  Tape() = default;
  explicit Tape(const ParamStore& store) : store_(&store) {}

  Tape(const Tape&) = delete;
  Tape& operator=(const Tape&) = delete;
  Tape(Tape&&) = default;
  Tape& operator=(Tape&&) = default;

  /// Non-differentiable leaf.
  Var constant(Array value);
  /// Differentiable leaf that is not backed by a parameter (used by tests
  /// and for per-coordinate gradient probing).
  Var variable(Array value);
  /// Leaf bound to a parameter; repeated calls return the same node.
  /// Frozen parameters produce leaves that do not receive gradients.
  Var param(std::string_view name);
  Var param(std::size_t index);

  Var affine(Var w, Var x, Var b);  // W[m,n] * x[n] + b[m]
  Var affine(Var w, Var x);         // W[m,n] * x[n]
  Var matmul(Var a, Var b);         // [m,k]x[k,n], [k]x[k,n] or [m,k]x[k]
  Var add(Var a, Var b);
  Var sub(Var a, Var b);
  Var mul(Var a, Var b);  // elementwise
  Var scale(Var a, double c);
  Var add_scalar(Var a, double c);
  Var concat(std::span<const Var> parts);  // 1-D only
  Var concat(std::initializer_list<Var> parts) { return concat(std::span<const Var>(parts.begin(), parts.size())); }
  Var slice(Var a, std::size_t begin, std::size_t length);  // 1-D only
  Var sigmoid(Var a);
  Var tanh(Var a);
  Var exp(Var a);
  Var log(Var a);
  Var softmax(Var a);  // over the last axis
  Var clamp(Var a, double lo, double hi);
  Var embed_lookup(Var table, std::size_t row);
  /// Inverted dropout. With train == false (or rate == 0) the input node is
  /// returned unchanged.
  Var dropout(Var a, double rate, Rng& rng, bool train);
  Var reduce_sum(Var a);
  Var gather(Var a, std::span<const std::size_t> ids);  // 1-D only
  /// -log softmax(logits)[target], a scalar.
  Var categorical_nll(Var logits, std::size_t target);
  /// Mean cosine similarity over all row pairs i < j of a 2-D array.
  Var mean_pairwise_cosine(Var rows);

  /// Populates adjoints for every node that loss depends on. loss must hold
  /// exactly one element.
  void backward(Var loss);

  const Array& value(Var v) const;
  double scalar(Var v) const { return value(v).item(); }
  /// Adjoint after backward(); a zero array if the node was never reached.
  Array grad(Var v) const;
  std::size_t node_count() const noexcept { return nodes_.size(); }

  /// Adds the adjoint of every parameter leaf into the buffer (scaled).
  void accumulate_param_grads(GradBuffer& out, double scale = 1.0) const;
  /// Adds the adjoint of every parameter leaf into the bound store's grads.
  void accumulate_param_grads(ParamStore& store, double scale = 1.0) const;

 private:
  struct Node {
    OpKind op = OpKind::Constant;
    std::uint32_t in0 = 0, in1 = 0, in2 = 0;
    std::uint8_t n_in = 0;
    bool needs_grad = false;
    Array value;
    const Array* ref = nullptr;  // parameter leaves
    Array adjoint;               // lazily allocated
    Array saved;                 // op-specific cache (softmax probs, masks)
    std::vector<std::uint32_t> inputs;  // variadic ops (concat)
    std::vector<std::size_t> ids;       // gather indices, lookup row, etc.
    double c0 = 0.0, c1 = 0.0;
    std::size_t param_index = 0;
  };

  const Array& val(std::uint32_t id) const { return nodes_[id].ref ? *nodes_[id].ref : nodes_[id].value; }
  Var push(Node&& node);
  Array& adjoint_of(std::uint32_t id);
  void backprop_node(std::uint32_t id);

  const ParamStore* store_ = nullptr;
  std::vector<Node> nodes_;
  std::vector<std::int64_t> param_nodes_;  // param index -> node id, -1 if absent
};

}  // namespace topiceq
