#include "fusionrec/autodiff.hpp"

#include <algorithm>
#include <cmath>
#include <optional>
#include <stdexcept>

namespace fusionrec::ad {

namespace kp = kernels::parallel;
using kernels::Trans;

// ---------------------------------------------------------------------------
// Tape
// ---------------------------------------------------------------------------

template <typename T>
Var<T> Tape<T>::push(Node node) {
  nodes_.push_back(std::move(node));
  return Var<T>(this, nodes_.size() - 1);
}

template <typename T>
Var<T> Tape<T>::constant(Matrix<T> value) {
  Node n;
  n.value = std::move(value);
  return push(std::move(n));
}

template <typename T>
Var<T> Tape<T>::variable(Matrix<T> value) {
  Node n;
  n.value = std::move(value);
  n.requires_grad = true;
  return push(std::move(n));
}

template <typename T>
Var<T> Tape<T>::parameter(Parameter<T>& p) {
  if (auto it = param_nodes_.find(&p); it != param_nodes_.end()) return Var<T>(this, it->second);
  Node n;
  n.alias = &p.value;
  n.requires_grad = true;
  n.param = &p;
  auto v = push(std::move(n));
  param_nodes_.emplace(&p, v.id());
  return v;
}

template <typename T>
Var<T> Tape<T>::record(const char* op, Matrix<T> value, std::initializer_list<Var<T>> inputs,
                       Backward fn) {
  return record(op, std::move(value), std::vector<Var<T>>(inputs), std::move(fn));
}

template <typename T>
Var<T> Tape<T>::record(const char* op, Matrix<T> value, const std::vector<Var<T>>& inputs,
                       Backward fn) {
  if (backward_done_) throw std::logic_error(std::string(op) + ": tape already differentiated");
  if (!value.all_finite()) throw NumericError(std::string(op) + ": non-finite output");
  Node n;
  n.value = std::move(value);
  for (const auto& in : inputs) {
    if (in.tape() != this) throw std::invalid_argument(std::string(op) + ": input from another tape");
    n.requires_grad = n.requires_grad || nodes_[in.id()].requires_grad;
  }
  if (n.requires_grad) n.backward = std::move(fn);
  return push(std::move(n));
}

template <typename T>
const Matrix<T>& Tape<T>::value_of(std::size_t id) const {
  const Node& n = nodes_[id];
  return n.alias ? *n.alias : n.value;
}

template <typename T>
Matrix<T> Tape<T>::grad(Var<T> v) const {
  const Node& n = nodes_[v.id()];
  if (n.grad.empty()) {
    const auto& val = value_of(v.id());
    return Matrix<T>(val.rows(), val.cols());
  }
  return n.grad;
}

template <typename T>
Matrix<T>& Tape<T>::grad_buffer(std::size_t id) {
  Node& n = nodes_[id];
  if (n.grad.empty()) {
    const auto& val = value_of(id);
    n.grad = Matrix<T>(val.rows(), val.cols());
  }
  return n.grad;
}

template <typename T>
void Tape<T>::backward(Var<T> loss) {
  if (loss.tape() != this) throw std::invalid_argument("backward: loss belongs to another tape");
  if (backward_done_) throw std::logic_error("backward: already called on this tape");
  const auto& lv = value_of(loss.id());
  if (lv.rows() != 1 || lv.cols() != 1) {
    throw ShapeError("backward: loss must be 1x1, got " + shape_str(lv));
  }
  backward_done_ = true;
  if (!nodes_[loss.id()].requires_grad) return;
  grad_buffer(loss.id()).fill(T(1));
  for (std::size_t id = loss.id() + 1; id-- > 0;) {
    Node& n = nodes_[id];
    if (!n.requires_grad || n.grad.empty()) continue;
    if (n.backward) n.backward(*this, id);
  }
  for (auto& [param, id] : param_nodes_) {
    const Node& n = nodes_[id];
    if (n.grad.empty()) continue;
    auto* p = n.param;
    if (!p->grad.same_shape(p->value)) p->zero_grad();
    T* dst = p->grad.data();
    const T* src = n.grad.data();
    for (std::size_t i = 0; i < n.grad.size(); ++i) dst[i] += src[i];
  }
}

// ---------------------------------------------------------------------------
// helpers
// ---------------------------------------------------------------------------

namespace {

template <typename T>
void require_same_tape(Var<T> a, Var<T> b, const char* op) {
  if (a.tape() != b.tape() || a.tape() == nullptr) {
    throw std::invalid_argument(std::string(op) + ": inputs must share a tape");
  }
}

template <typename T>
void require_same_shape(const Matrix<T>& a, const Matrix<T>& b, const char* op) {
  if (!a.same_shape(b)) {
    throw ShapeError(std::string(op) + ": shape mismatch " + shape_str(a) + " vs " + shape_str(b));
  }
}

template <typename T>
void axpy(Matrix<T>& dst, const Matrix<T>& src, T alpha = T(1)) {
  T* d = dst.data();
  const T* s = src.data();
  const std::size_t n = dst.size();
  for (std::size_t i = 0; i < n; ++i) d[i] += alpha * s[i];
}

}  // namespace

// ---------------------------------------------------------------------------
// linear algebra
// ---------------------------------------------------------------------------

template <typename T>
Var<T> matmul(Var<T> a, Var<T> b) {
  require_same_tape(a, b, "matmul");
  const auto& av = a.value();
  const auto& bv = b.value();
  if (av.cols() != bv.rows()) {
    throw ShapeError("matmul: " + shape_str(av) + " * " + shape_str(bv));
  }
  Matrix<T> out(av.rows(), bv.cols());
  kp::gemm(Trans::no, Trans::no, T(1), av, bv, T(0), out);
  const std::size_t ia = a.id(), ib = b.id();
  return a.tape()->record("matmul", std::move(out), {a, b}, [ia, ib](Tape<T>& t, std::size_t self) {
    const auto& g = t.grad_of(self);
    if (t.needs_grad(ia)) kp::gemm(Trans::no, Trans::yes, T(1), g, t.value_of(ib), T(1), t.grad_buffer(ia));
    if (t.needs_grad(ib)) kp::gemm(Trans::yes, Trans::no, T(1), t.value_of(ia), g, T(1), t.grad_buffer(ib));
  });
}

template <typename T>
Var<T> matmul_nt(Var<T> a, Var<T> b) {
  require_same_tape(a, b, "matmul_nt");
  const auto& av = a.value();
  const auto& bv = b.value();
  if (av.cols() != bv.cols()) {
    throw ShapeError("matmul_nt: " + shape_str(av) + " * " + shape_str(bv) + "^T");
  }
  Matrix<T> out(av.rows(), bv.rows());
  kp::gemm(Trans::no, Trans::yes, T(1), av, bv, T(0), out);
  const std::size_t ia = a.id(), ib = b.id();
  return a.tape()->record("matmul_nt", std::move(out), {a, b}, [ia, ib](Tape<T>& t, std::size_t self) {
    const auto& g = t.grad_of(self);
    // C = A B^T : dA = dC B, dB = dC^T A
    if (t.needs_grad(ia)) kp::gemm(Trans::no, Trans::no, T(1), g, t.value_of(ib), T(1), t.grad_buffer(ia));
    if (t.needs_grad(ib)) kp::gemm(Trans::yes, Trans::no, T(1), g, t.value_of(ia), T(1), t.grad_buffer(ib));
  });
}

template <typename T>
Var<T> transpose(Var<T> a) {
  const auto& av = a.value();
  Matrix<T> out(av.cols(), av.rows());
  for (std::size_t r = 0; r < av.rows(); ++r)
    for (std::size_t c = 0; c < av.cols(); ++c) out(c, r) = av(r, c);
  const std::size_t ia = a.id();
  return a.tape()->record("transpose", std::move(out), {a}, [ia](Tape<T>& t, std::size_t self) {
    const auto& g = t.grad_of(self);
    auto& ga = t.grad_buffer(ia);
    for (std::size_t r = 0; r < ga.rows(); ++r)
      for (std::size_t c = 0; c < ga.cols(); ++c) ga(r, c) += g(c, r);
  });
}

// ---------------------------------------------------------------------------
// elementwise
// ---------------------------------------------------------------------------

template <typename T>
Var<T> add(Var<T> a, Var<T> b) {
  require_same_tape(a, b, "add");
  require_same_shape(a.value(), b.value(), "add");
  Matrix<T> out = a.value();
  axpy(out, b.value());
  const std::size_t ia = a.id(), ib = b.id();
  return a.tape()->record("add", std::move(out), {a, b}, [ia, ib](Tape<T>& t, std::size_t self) {
    const auto& g = t.grad_of(self);
    if (t.needs_grad(ia)) axpy(t.grad_buffer(ia), g);
    if (t.needs_grad(ib)) axpy(t.grad_buffer(ib), g);
  });
}

template <typename T>
Var<T> mul(Var<T> a, Var<T> b) {
  require_same_tape(a, b, "mul");
  require_same_shape(a.value(), b.value(), "mul");
  Matrix<T> out = a.value();
  const auto& bv = b.value();
  for (std::size_t i = 0; i < out.size(); ++i) out.data()[i] *= bv.data()[i];
  const std::size_t ia = a.id(), ib = b.id();
  return a.tape()->record("mul", std::move(out), {a, b}, [ia, ib](Tape<T>& t, std::size_t self) {
    const auto& g = t.grad_of(self);
    const auto& av = t.value_of(ia);
    const auto& bv = t.value_of(ib);
    if (t.needs_grad(ia)) {
      auto& ga = t.grad_buffer(ia);
      for (std::size_t i = 0; i < g.size(); ++i) ga.data()[i] += g.data()[i] * bv.data()[i];
    }
    if (t.needs_grad(ib)) {
      auto& gb = t.grad_buffer(ib);
      for (std::size_t i = 0; i < g.size(); ++i) gb.data()[i] += g.data()[i] * av.data()[i];
    }
  });
}

template <typename T>
Var<T> add_row(Var<T> a, Var<T> row) {
  require_same_tape(a, row, "add_row");
  const auto& av = a.value();
  const auto& rv = row.value();
  if (rv.rows() != 1 || rv.cols() != av.cols()) {
    throw ShapeError("add_row: row " + shape_str(rv) + " for matrix " + shape_str(av));
  }
  Matrix<T> out = av;
  for (std::size_t r = 0; r < out.rows(); ++r) {
    auto o = out.row(r);
    for (std::size_t c = 0; c < o.size(); ++c) o[c] += rv(0, c);
  }
  const std::size_t ia = a.id(), ir = row.id();
  return a.tape()->record("add_row", std::move(out), {a, row}, [ia, ir](Tape<T>& t, std::size_t self) {
    const auto& g = t.grad_of(self);
    if (t.needs_grad(ia)) axpy(t.grad_buffer(ia), g);
    if (t.needs_grad(ir)) {
      auto& gr = t.grad_buffer(ir);
      for (std::size_t r = 0; r < g.rows(); ++r)
        for (std::size_t c = 0; c < g.cols(); ++c) gr(0, c) += g(r, c);
    }
  });
}

template <typename T>
Var<T> scale(Var<T> a, T c) {
  Matrix<T> out = a.value();
  for (auto& v : out.values()) v *= c;
  const std::size_t ia = a.id();
  return a.tape()->record("scale", std::move(out), {a}, [ia, c](Tape<T>& t, std::size_t self) {
    axpy(t.grad_buffer(ia), t.grad_of(self), c);
  });
}

template <typename T>
Var<T> relu(Var<T> a) {
  Matrix<T> out = a.value();
  for (auto& v : out.values()) v = v > T(0) ? v : T(0);
  const std::size_t ia = a.id();
  return a.tape()->record("relu", std::move(out), {a}, [ia](Tape<T>& t, std::size_t self) {
    const auto& g = t.grad_of(self);
    const auto& y = t.value_of(self);
    auto& ga = t.grad_buffer(ia);
    for (std::size_t i = 0; i < g.size(); ++i) {
      if (y.data()[i] > T(0)) ga.data()[i] += g.data()[i];
    }
  });
}

template <typename T>
Var<T> mul_constant(Var<T> a, const Matrix<T>& c) {
  require_same_shape(a.value(), c, "mul_constant");
  Matrix<T> out = a.value();
  for (std::size_t i = 0; i < out.size(); ++i) out.data()[i] *= c.data()[i];
  const std::size_t ia = a.id();
  return a.tape()->record("mul_constant", std::move(out), {a}, [ia, c](Tape<T>& t, std::size_t self) {
    const auto& g = t.grad_of(self);
    auto& ga = t.grad_buffer(ia);
    for (std::size_t i = 0; i < g.size(); ++i) ga.data()[i] += g.data()[i] * c.data()[i];
  });
}

// ---------------------------------------------------------------------------
// normalisation
// ---------------------------------------------------------------------------

template <typename T>
Var<T> softmax_rows(Var<T> a) {
  const auto& av = a.value();
  for (const T v : av.values()) {
    if (std::isnan(v)) throw NumericError("softmax_rows: NaN input");
  }
  Matrix<T> out;
  kp::softmax_rows(av, out);
  const std::size_t ia = a.id();
  return a.tape()->record("softmax_rows", std::move(out), {a}, [ia](Tape<T>& t, std::size_t self) {
    const auto& g = t.grad_of(self);
    const auto& y = t.value_of(self);
    auto& ga = t.grad_buffer(ia);
    for (std::size_t r = 0; r < y.rows(); ++r) {
      T dot = T(0);
      for (std::size_t c = 0; c < y.cols(); ++c) dot += g(r, c) * y(r, c);
      for (std::size_t c = 0; c < y.cols(); ++c) ga(r, c) += y(r, c) * (g(r, c) - dot);
    }
  });
}

template <typename T>
Var<T> layer_norm(Var<T> x, Var<T> gain, Var<T> bias, T eps) {
  require_same_tape(x, gain, "layer_norm");
  require_same_tape(x, bias, "layer_norm");
  const auto& xv = x.value();
  const auto& gv = gain.value();
  const auto& bv = bias.value();
  if (gv.rows() != 1 || gv.cols() != xv.cols() || !gv.same_shape(bv)) {
    throw ShapeError("layer_norm: gain/bias must be 1x" + std::to_string(xv.cols()));
  }
  Matrix<T> out;
  std::vector<T> mu, rstd;
  kp::layer_norm_rows(xv, gv.values(), bv.values(), eps, out, mu, rstd);
  const std::size_t ix = x.id(), ig = gain.id(), ib = bias.id();
  return x.tape()->record(
      "layer_norm", std::move(out), {x, gain, bias},
      [ix, ig, ib, mu = std::move(mu), rstd = std::move(rstd)](Tape<T>& t, std::size_t self) {
        Matrix<T>* dx = t.needs_grad(ix) ? &t.grad_buffer(ix) : nullptr;
        std::span<T> dg = t.needs_grad(ig) ? t.grad_buffer(ig).values() : std::span<T>{};
        std::span<T> db = t.needs_grad(ib) ? t.grad_buffer(ib).values() : std::span<T>{};
        kp::layer_norm_rows_backward(t.value_of(ix), t.value_of(ig).values(), mu, rstd, t.grad_of(self),
                                     dx, dg, db);
      });
}

// ---------------------------------------------------------------------------
// structural
// ---------------------------------------------------------------------------

template <typename T>
Var<T> concat_cols(const std::vector<Var<T>>& parts) {
  if (parts.empty()) throw std::invalid_argument("concat_cols: no inputs");
  const std::size_t rows = parts.front().rows();
  std::size_t cols = 0;
  for (const auto& p : parts) {
    require_same_tape(parts.front(), p, "concat_cols");
    if (p.rows() != rows) throw ShapeError("concat_cols: row count mismatch");
    cols += p.cols();
  }
  Matrix<T> out(rows, cols);
  std::vector<std::size_t> ids, offsets;
  std::size_t off = 0;
  for (const auto& p : parts) {
    const auto& pv = p.value();
    for (std::size_t r = 0; r < rows; ++r) std::copy(pv.row(r).begin(), pv.row(r).end(), out.row(r).begin() + off);
    ids.push_back(p.id());
    offsets.push_back(off);
    off += pv.cols();
  }
  return parts.front().tape()->record(
      "concat_cols", std::move(out), parts, [ids, offsets](Tape<T>& t, std::size_t self) {
        const auto& g = t.grad_of(self);
        for (std::size_t k = 0; k < ids.size(); ++k) {
          if (!t.needs_grad(ids[k])) continue;
          auto& gp = t.grad_buffer(ids[k]);
          for (std::size_t r = 0; r < gp.rows(); ++r)
            for (std::size_t c = 0; c < gp.cols(); ++c) gp(r, c) += g(r, offsets[k] + c);
        }
      });
}

template <typename T>
Var<T> concat_rows(const std::vector<Var<T>>& parts) {
  if (parts.empty()) throw std::invalid_argument("concat_rows: no inputs");
  const std::size_t cols = parts.front().cols();
  std::size_t rows = 0;
  for (const auto& p : parts) {
    require_same_tape(parts.front(), p, "concat_rows");
    if (p.cols() != cols) throw ShapeError("concat_rows: column count mismatch");
    rows += p.rows();
  }
  std::vector<T> data;
  data.reserve(rows * cols);
  std::vector<std::size_t> ids, offsets;
  std::size_t off = 0;
  for (const auto& p : parts) {
    const auto& pv = p.value();
    data.insert(data.end(), pv.values().begin(), pv.values().end());
    ids.push_back(p.id());
    offsets.push_back(off);
    off += pv.rows();
  }
  return parts.front().tape()->record(
      "concat_rows", Matrix<T>(rows, cols, std::move(data)), parts,
      [ids, offsets](Tape<T>& t, std::size_t self) {
        const auto& g = t.grad_of(self);
        for (std::size_t k = 0; k < ids.size(); ++k) {
          if (!t.needs_grad(ids[k])) continue;
          auto& gp = t.grad_buffer(ids[k]);
          const T* src = g.data() + offsets[k] * g.cols();
          for (std::size_t i = 0; i < gp.size(); ++i) gp.data()[i] += src[i];
        }
      });
}

template <typename T>
Var<T> slice_cols(Var<T> a, std::size_t start, std::size_t count) {
  const auto& av = a.value();
  if (start + count > av.cols()) {
    throw ShapeError("slice_cols: [" + std::to_string(start) + ", " + std::to_string(start + count) +
                     ") out of " + std::to_string(av.cols()) + " columns");
  }
  Matrix<T> out(av.rows(), count);
  for (std::size_t r = 0; r < av.rows(); ++r)
    std::copy_n(av.row(r).begin() + start, count, out.row(r).begin());
  const std::size_t ia = a.id();
  return a.tape()->record("slice_cols", std::move(out), {a}, [ia, start](Tape<T>& t, std::size_t self) {
    const auto& g = t.grad_of(self);
    auto& ga = t.grad_buffer(ia);
    for (std::size_t r = 0; r < g.rows(); ++r)
      for (std::size_t c = 0; c < g.cols(); ++c) ga(r, start + c) += g(r, c);
  });
}

template <typename T>
Var<T> gather_rows(Var<T> a, std::vector<std::size_t> index) {
  const auto& av = a.value();
  Matrix<T> out(index.size(), av.cols());
  for (std::size_t i = 0; i < index.size(); ++i) {
    if (index[i] >= av.rows()) {
      throw ShapeError("gather_rows: row " + std::to_string(index[i]) + " of " + std::to_string(av.rows()));
    }
    std::copy(av.row(index[i]).begin(), av.row(index[i]).end(), out.row(i).begin());
  }
  const std::size_t ia = a.id();
  return a.tape()->record("gather_rows", std::move(out), {a},
                          [ia, index = std::move(index)](Tape<T>& t, std::size_t self) {
                            const auto& g = t.grad_of(self);
                            auto& ga = t.grad_buffer(ia);
                            for (std::size_t i = 0; i < index.size(); ++i) {
                              auto dst = ga.row(index[i]);
                              auto src = g.row(i);
                              for (std::size_t c = 0; c < dst.size(); ++c) dst[c] += src[c];
                            }
                          });
}

template <typename T>
Var<T> sum(Var<T> a) {
  T s = T(0);
  for (const T v : a.value().values()) s += v;
  const std::size_t ia = a.id();
  return a.tape()->record("sum", Matrix<T>(1, 1, s), {a}, [ia](Tape<T>& t, std::size_t self) {
    const T g = t.grad_of(self)(0, 0);
    for (auto& v : t.grad_buffer(ia).values()) v += g;
  });
}

template <typename T>
Var<T> mean(Var<T> a) {
  const auto n = a.value().size();
  if (n == 0) throw ShapeError("mean: empty input");
  return scale(sum(a), T(1) / static_cast<T>(n));
}

// ---------------------------------------------------------------------------
// attention and loss
// ---------------------------------------------------------------------------

template <typename T>
Var<T> attention(Var<T> q, Var<T> k, Var<T> v, const kernels::AttentionShape& shape,
                 const Matrix<T>* keep, Matrix<T>* probs_out) {
  require_same_tape(q, k, "attention");
  require_same_tape(q, v, "attention");
  if (keep && (keep->rows() != shape.prob_rows() || keep->cols() != shape.seq_len)) {
    throw ShapeError("attention: keep mask must be " + shape_str(shape.prob_rows(), shape.seq_len));
  }
  Matrix<T> probs, out;
  kp::attention_forward(shape, q.value(), k.value(), v.value(), keep, probs, out);
  if (probs_out) *probs_out = probs;
  std::optional<Matrix<T>> mask;
  if (keep) mask = *keep;
  const std::size_t iq = q.id(), ik = k.id(), iv = v.id();
  return q.tape()->record(
      "attention", std::move(out), {q, k, v},
      [iq, ik, iv, shape, probs = std::move(probs), mask = std::move(mask)](Tape<T>& t, std::size_t self) {
        Matrix<T>* dq = t.needs_grad(iq) ? &t.grad_buffer(iq) : nullptr;
        Matrix<T>* dk = t.needs_grad(ik) ? &t.grad_buffer(ik) : nullptr;
        Matrix<T>* dv = t.needs_grad(iv) ? &t.grad_buffer(iv) : nullptr;
        kp::attention_backward(shape, t.value_of(iq), t.value_of(ik), t.value_of(iv),
                               mask ? &*mask : nullptr, probs, t.grad_of(self), dq, dk, dv);
      });
}

template <typename T>
Var<T> nll(Var<T> probs, const std::vector<std::size_t>& target, T floor) {
  const auto& pv = probs.value();
  if (target.size() != pv.rows() || pv.rows() == 0) {
    throw ShapeError("nll: " + std::to_string(target.size()) + " targets for " + shape_str(pv));
  }
  T total = T(0);
  for (std::size_t r = 0; r < pv.rows(); ++r) {
    if (target[r] >= pv.cols()) throw std::out_of_range("nll: target class out of range");
    total -= std::log(std::max(pv(r, target[r]), floor));
  }
  const T n = static_cast<T>(pv.rows());
  const std::size_t ip = probs.id();
  return probs.tape()->record("nll", Matrix<T>(1, 1, total / n), {probs},
                              [ip, target, floor, n](Tape<T>& t, std::size_t self) {
                                const T g = t.grad_of(self)(0, 0);
                                const auto& p = t.value_of(ip);
                                auto& gp = t.grad_buffer(ip);
                                for (std::size_t r = 0; r < p.rows(); ++r) {
                                  const T pr = p(r, target[r]);
                                  if (pr >= floor) gp(r, target[r]) -= g / (pr * n);
                                }
                              });
}

// ---------------------------------------------------------------------------

#define FUSIONREC_AD_INSTANTIATE(T)                                                            \
  template class Tape<T>;                                                                      \
  template Var<T> matmul(Var<T>, Var<T>);                                                      \
  template Var<T> matmul_nt(Var<T>, Var<T>);                                                   \
  template Var<T> transpose(Var<T>);                                                           \
  template Var<T> add(Var<T>, Var<T>);                                                         \
  template Var<T> mul(Var<T>, Var<T>);                                                         \
  template Var<T> add_row(Var<T>, Var<T>);                                                     \
  template Var<T> scale(Var<T>, T);                                                            \
  template Var<T> relu(Var<T>);                                                                \
  template Var<T> mul_constant(Var<T>, const Matrix<T>&);                                      \
  template Var<T> softmax_rows(Var<T>);                                                        \
  template Var<T> layer_norm(Var<T>, Var<T>, Var<T>, T);                                       \
  template Var<T> concat_cols(const std::vector<Var<T>>&);                                     \
  template Var<T> concat_rows(const std::vector<Var<T>>&);                                     \
  template Var<T> slice_cols(Var<T>, std::size_t, std::size_t);                               \
  template Var<T> gather_rows(Var<T>, std::vector<std::size_t>);                               \
  template Var<T> sum(Var<T>);                                                                 \
  template Var<T> mean(Var<T>);                                                                \
  template Var<T> attention(Var<T>, Var<T>, Var<T>, const kernels::AttentionShape&,            \
                            const Matrix<T>*, Matrix<T>*);                                     \
  template Var<T> nll(Var<T>, const std::vector<std::size_t>&, T);

FUSIONREC_AD_INSTANTIATE(float)
FUSIONREC_AD_INSTANTIATE(double)

#undef FUSIONREC_AD_INSTANTIATE

}  // namespace fusionrec::ad
