#pragma once

// Reverse-mode automatic differentiation over 2-D matrices.
//
// A Tape records every operation in execution order; node ids are therefore a
// topological order and backward() is a single reverse sweep. A tape is
// confined to one thread. Parameters live outside the tape and are aliased
// (not copied) by parameter leaves; their gradients accumulate into
// Parameter::grad when backward() runs.

#include <cstddef>
#include <deque>
#include <functional>
#include <initializer_list>
#include <string>
#include <unordered_map>
#include <vector>

#include "fusionrec/kernels.hpp"
#include "fusionrec/matrix.hpp"

namespace fusionrec::ad {

template <typename T>
struct Parameter {
  std::string name;
  Matrix<T> value;
  Matrix<T> grad;

  Parameter() = default;
  Parameter(std::string n, Matrix<T> v)
      : name(std::move(n)), value(std::move(v)), grad(value.rows(), value.cols()) {}

  void zero_grad() { grad = Matrix<T>(value.rows(), value.cols()); }
};

template <typename T>
class Tape;

/// Handle to a node on a tape. Cheap to copy.
template <typename T>
class Var {
 public:
  Var() = default;

  const Matrix<T>& value() const { return tape_->value(*this); }
  std::size_t rows() const { return value().rows(); }
  std::size_t cols() const { return value().cols(); }
  Tape<T>* tape() const { return tape_; }
  std::size_t id() const { return id_; }
  bool valid() const { return tape_ != nullptr; }

 private:
  friend class Tape<T>;
  Var(Tape<T>* tape, std::size_t id) : tape_(tape), id_(id) {}

  Tape<T>* tape_ = nullptr;
  std::size_t id_ = 0;
};

template <typename T>
class Tape {
 public:
  using Backward = std::function<void(Tape&, std::size_t self)>;

  Tape() = default;
  Tape(const Tape&) = delete;
  Tape& operator=(const Tape&) = delete;

  Var<T> constant(Matrix<T> value);
  /// Leaf owned by the tape whose gradient is readable through grad().
  Var<T> variable(Matrix<T> value);
  /// Leaf aliasing p.value. Repeated calls for the same parameter return the same node.
  Var<T> parameter(Parameter<T>& p);

  /// Appends a computed node; it requires grad iff any input does.
  Var<T> record(const char* op, Matrix<T> value, std::initializer_list<Var<T>> inputs, Backward fn);
  Var<T> record(const char* op, Matrix<T> value, const std::vector<Var<T>>& inputs, Backward fn);

  /// Seeds d(loss)/d(loss) = 1 and propagates. Valid once per tape.
  void backward(Var<T> loss);

  const Matrix<T>& value(Var<T> v) const { return value_of(v.id()); }
  const Matrix<T>& value_of(std::size_t id) const;
  /// Gradient of a node after backward(); an all-zero matrix if nothing flowed into it.
  Matrix<T> grad(Var<T> v) const;
  bool requires_grad(Var<T> v) const { return nodes_[v.id()].requires_grad; }
  bool needs_grad(std::size_t id) const { return nodes_[id].requires_grad; }
  /// Gradient buffer of node `id`, allocated as zeros on first use.
  Matrix<T>& grad_buffer(std::size_t id);
  const Matrix<T>& grad_of(std::size_t id) const { return nodes_[id].grad; }

  std::size_t size() const { return nodes_.size(); }
  bool finished() const { return backward_done_; }

 private:
  struct Node {
    Matrix<T> value;
    const Matrix<T>* alias = nullptr;
    Matrix<T> grad;
    bool requires_grad = false;
    Parameter<T>* param = nullptr;
    Backward backward;
  };

  Var<T> push(Node node);

  std::deque<Node> nodes_;
  std::unordered_map<const Parameter<T>*, std::size_t> param_nodes_;
  bool backward_done_ = false;
};

// ---------------------------------------------------------------------------
// operations; every input must come from the same tape
// ---------------------------------------------------------------------------

template <typename T> Var<T> matmul(Var<T> a, Var<T> b);
/// a * b^T
template <typename T> Var<T> matmul_nt(Var<T> a, Var<T> b);
template <typename T> Var<T> transpose(Var<T> a);

template <typename T> Var<T> add(Var<T> a, Var<T> b);
template <typename T> Var<T> mul(Var<T> a, Var<T> b);
/// Adds a 1 x cols row vector to every row of a. The only broadcast supported.
template <typename T> Var<T> add_row(Var<T> a, Var<T> row);
template <typename T> Var<T> scale(Var<T> a, T c);
template <typename T> Var<T> relu(Var<T> a);
/// Elementwise product with a fixed matrix (dropout keep-masks, selectors).
template <typename T> Var<T> mul_constant(Var<T> a, const Matrix<T>& c);

template <typename T> Var<T> softmax_rows(Var<T> a);
/// Row-wise layer normalisation with 1 x cols gain and bias.
template <typename T> Var<T> layer_norm(Var<T> x, Var<T> gain, Var<T> bias, T eps = T(1e-5));

template <typename T> Var<T> concat_cols(const std::vector<Var<T>>& parts);
template <typename T> Var<T> concat_rows(const std::vector<Var<T>>& parts);
template <typename T> Var<T> slice_cols(Var<T> a, std::size_t start, std::size_t count);
/// out.row(i) = a.row(index[i]); backward scatter-adds.
template <typename T> Var<T> gather_rows(Var<T> a, std::vector<std::size_t> index);

template <typename T> Var<T> sum(Var<T> a);
template <typename T> Var<T> mean(Var<T> a);

/// Fused multi-head attention over stacked sequences (see kernels::AttentionShape).
/// `keep` is an optional dropout mask over the attention weights, already
/// scaled by 1/(1-p). When `probs_out` is given the attention weights are copied there.
template <typename T>
Var<T> attention(Var<T> q, Var<T> k, Var<T> v, const kernels::AttentionShape& shape,
                 const Matrix<T>* keep = nullptr, Matrix<T>* probs_out = nullptr);

/// Mean over rows of -log(max(probs[r][target[r]], floor)).
template <typename T>
Var<T> nll(Var<T> probs, const std::vector<std::size_t>& target, T floor = T(1e-12));

}  // namespace fusionrec::ad
