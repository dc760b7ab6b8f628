#include "fusionrec/kernels.hpp"

#include <omp.h>

#include <Eigen/Core>
#include <algorithm>
#include <cmath>
#include <limits>

namespace fusionrec::kernels {

void set_num_threads(int n) {
  if (n > 0) {
    omp_set_num_threads(n);
    Eigen::setNbThreads(n);
  }
}

int num_threads() { return omp_get_max_threads(); }

namespace {

void check_gemm_shapes(std::size_t m, std::size_t ka, std::size_t kb, std::size_t n,
                       std::size_t cr, std::size_t cc) {
  if (ka != kb || cr != m || cc != n) {
    throw ShapeError("gemm: op(a) " + shape_str(m, ka) + " op(b) " + shape_str(kb, n) +
                     " c " + shape_str(cr, cc));
  }
}

template <typename T>
void check_attention(const AttentionShape& s, const Matrix<T>& q, const Matrix<T>& k,
                     const Matrix<T>& v) {
  const auto ok = [&](const Matrix<T>& m) { return m.rows() == s.rows() && m.cols() == s.width(); };
  if (!ok(q) || !ok(k) || !ok(v) || s.seq_len == 0) {
    throw ShapeError("attention: q/k/v must be " + shape_str(s.rows(), s.width()));
  }
}

}  // namespace

// ---------------------------------------------------------------------------
// serial reference
// ---------------------------------------------------------------------------
namespace serial {

template <typename T>
void gemm(Trans ta, Trans tb, T alpha, const Matrix<T>& a, const Matrix<T>& b, T beta,
          Matrix<T>& c) {
  const bool at = ta == Trans::yes;
  const bool bt = tb == Trans::yes;
  const std::size_t m = at ? a.cols() : a.rows();
  const std::size_t k = at ? a.rows() : a.cols();
  const std::size_t kb = bt ? b.cols() : b.rows();
  const std::size_t n = bt ? b.rows() : b.cols();
  check_gemm_shapes(m, k, kb, n, c.rows(), c.cols());
  for (std::size_t i = 0; i < m; ++i) {
    for (std::size_t j = 0; j < n; ++j) {
      T acc = T(0);
      for (std::size_t p = 0; p < k; ++p) {
        acc += (at ? a(p, i) : a(i, p)) * (bt ? b(j, p) : b(p, j));
      }
      c(i, j) = (beta == T(0) ? T(0) : beta * c(i, j)) + alpha * acc;
    }
  }
}

template <typename T>
void softmax_rows(const Matrix<T>& x, Matrix<T>& out) {
  out = Matrix<T>(x.rows(), x.cols());
  for (std::size_t r = 0; r < x.rows(); ++r) {
    T mx = -std::numeric_limits<T>::infinity();
    for (std::size_t c = 0; c < x.cols(); ++c) mx = std::max(mx, x(r, c));
    T sum = T(0);
    for (std::size_t c = 0; c < x.cols(); ++c) {
      out(r, c) = std::exp(x(r, c) - mx);
      sum += out(r, c);
    }
    for (std::size_t c = 0; c < x.cols(); ++c) out(r, c) /= sum;
  }
}

template <typename T>
void layer_norm_rows(const Matrix<T>& x, std::span<const T> gain, std::span<const T> bias, T eps,
                     Matrix<T>& out, std::vector<T>& mean, std::vector<T>& rstd) {
  const std::size_t n = x.cols();
  out = Matrix<T>(x.rows(), n);
  mean.assign(x.rows(), T(0));
  rstd.assign(x.rows(), T(0));
  for (std::size_t r = 0; r < x.rows(); ++r) {
    T mu = T(0);
    for (std::size_t c = 0; c < n; ++c) mu += x(r, c);
    mu /= static_cast<T>(n);
    T var = T(0);
    for (std::size_t c = 0; c < n; ++c) var += (x(r, c) - mu) * (x(r, c) - mu);
    var /= static_cast<T>(n);
    const T rs = T(1) / std::sqrt(var + eps);
    mean[r] = mu;
    rstd[r] = rs;
    for (std::size_t c = 0; c < n; ++c) out(r, c) = (x(r, c) - mu) * rs * gain[c] + bias[c];
  }
}

template <typename T>
void layer_norm_rows_backward(const Matrix<T>& x, std::span<const T> gain,
                              const std::vector<T>& mean, const std::vector<T>& rstd,
                              const Matrix<T>& dy, Matrix<T>* dx, std::span<T> dgain,
                              std::span<T> dbias) {
  const std::size_t n = x.cols();
  for (std::size_t r = 0; r < x.rows(); ++r) {
    T sum_g = T(0);
    T sum_gx = T(0);
    for (std::size_t c = 0; c < n; ++c) {
      const T xhat = (x(r, c) - mean[r]) * rstd[r];
      const T g = dy(r, c) * gain[c];
      sum_g += g;
      sum_gx += g * xhat;
      if (!dgain.empty()) dgain[c] += dy(r, c) * xhat;
      if (!dbias.empty()) dbias[c] += dy(r, c);
    }
    if (dx == nullptr) continue;
    for (std::size_t c = 0; c < n; ++c) {
      const T xhat = (x(r, c) - mean[r]) * rstd[r];
      const T g = dy(r, c) * gain[c];
      (*dx)(r, c) += rstd[r] * (g - sum_g / static_cast<T>(n) - xhat * sum_gx / static_cast<T>(n));
    }
  }
}

template <typename T>
void attention_forward(const AttentionShape& s, const Matrix<T>& q, const Matrix<T>& k,
                       const Matrix<T>& v, const Matrix<T>* keep, Matrix<T>& probs,
                       Matrix<T>& out) {
  check_attention(s, q, k, v);
  const T scale = T(1) / std::sqrt(static_cast<T>(s.head_dim));
  const std::size_t L = s.seq_len;
  probs = Matrix<T>(s.prob_rows(), L);
  out = Matrix<T>(s.rows(), s.width());
  for (std::size_t b = 0; b < s.batch; ++b) {
    for (std::size_t h = 0; h < s.heads; ++h) {
      const std::size_t c0 = h * s.head_dim;
      const std::size_t p0 = (b * s.heads + h) * L;
      for (std::size_t i = 0; i < L; ++i) {
        std::vector<T> scores(L);
        T mx = -std::numeric_limits<T>::infinity();
        for (std::size_t j = 0; j < L; ++j) {
          T acc = T(0);
          for (std::size_t d = 0; d < s.head_dim; ++d) acc += q(b * L + i, c0 + d) * k(b * L + j, c0 + d);
          scores[j] = acc * scale;
          mx = std::max(mx, scores[j]);
        }
        T sum = T(0);
        for (std::size_t j = 0; j < L; ++j) {
          scores[j] = std::exp(scores[j] - mx);
          sum += scores[j];
        }
        for (std::size_t j = 0; j < L; ++j) probs(p0 + i, j) = scores[j] / sum;
        for (std::size_t d = 0; d < s.head_dim; ++d) {
          T acc = T(0);
          for (std::size_t j = 0; j < L; ++j) {
            const T w = probs(p0 + i, j) * (keep ? (*keep)(p0 + i, j) : T(1));
            acc += w * v(b * L + j, c0 + d);
          }
          out(b * L + i, c0 + d) = acc;
        }
      }
    }
  }
}

template <typename T>
void attention_backward(const AttentionShape& s, const Matrix<T>& q, const Matrix<T>& k,
                        const Matrix<T>& v, const Matrix<T>* keep, const Matrix<T>& probs,
                        const Matrix<T>& dout, Matrix<T>* dq, Matrix<T>* dk, Matrix<T>* dv) {
  check_attention(s, q, k, v);
  const T scale = T(1) / std::sqrt(static_cast<T>(s.head_dim));
  const std::size_t L = s.seq_len;
  for (std::size_t b = 0; b < s.batch; ++b) {
    for (std::size_t h = 0; h < s.heads; ++h) {
      const std::size_t c0 = h * s.head_dim;
      const std::size_t p0 = (b * s.heads + h) * L;
      Matrix<T> dscore(L, L);
      for (std::size_t i = 0; i < L; ++i) {
        std::vector<T> dp(L);
        T dot = T(0);
        for (std::size_t j = 0; j < L; ++j) {
          T acc = T(0);
          for (std::size_t d = 0; d < s.head_dim; ++d) acc += dout(b * L + i, c0 + d) * v(b * L + j, c0 + d);
          dp[j] = acc * (keep ? (*keep)(p0 + i, j) : T(1));
          dot += dp[j] * probs(p0 + i, j);
        }
        for (std::size_t j = 0; j < L; ++j) dscore(i, j) = probs(p0 + i, j) * (dp[j] - dot) * scale;
      }
      for (std::size_t i = 0; i < L; ++i) {
        for (std::size_t d = 0; d < s.head_dim; ++d) {
          if (dq) {
            T acc = T(0);
            for (std::size_t j = 0; j < L; ++j) acc += dscore(i, j) * k(b * L + j, c0 + d);
            (*dq)(b * L + i, c0 + d) += acc;
          }
          if (dk) {
            T acc = T(0);
            for (std::size_t j = 0; j < L; ++j) acc += dscore(j, i) * q(b * L + j, c0 + d);
            (*dk)(b * L + i, c0 + d) += acc;
          }
          if (dv) {
            T acc = T(0);
            for (std::size_t j = 0; j < L; ++j) {
              acc += probs(p0 + j, i) * (keep ? (*keep)(p0 + j, i) : T(1)) * dout(b * L + j, c0 + d);
            }
            (*dv)(b * L + i, c0 + d) += acc;
          }
        }
      }
    }
  }
}

void co_rated_cosine(const Matrix<double>& centered, const Matrix<double>& mask,
                     std::size_t min_overlap, Matrix<double>& sim, Matrix<double>& overlap) {
  if (!centered.same_shape(mask)) throw ShapeError("co_rated_cosine: mask shape mismatch");
  const std::size_t n = centered.rows();
  sim = Matrix<double>(n, n);
  overlap = Matrix<double>(n, n);
  for (std::size_t a = 0; a < n; ++a) {
    for (std::size_t b = a; b < n; ++b) {
      double num = 0.0, na = 0.0, nb = 0.0;
      std::size_t count = 0;
      for (std::size_t j = 0; j < centered.cols(); ++j) {
        if (mask(a, j) == 0.0 || mask(b, j) == 0.0) continue;
        num += centered(a, j) * centered(b, j);
        na += centered(a, j) * centered(a, j);
        nb += centered(b, j) * centered(b, j);
        ++count;
      }
      const double value = (count >= min_overlap && na > 0.0 && nb > 0.0) ? num / std::sqrt(na * nb) : 0.0;
      sim(a, b) = sim(b, a) = value;
      overlap(a, b) = overlap(b, a) = static_cast<double>(count);
    }
  }
}

}  // namespace serial

// ---------------------------------------------------------------------------
// OpenMP / Eigen
// ---------------------------------------------------------------------------
namespace parallel {

namespace {
template <typename T>
using RowMat = Eigen::Matrix<T, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;
template <typename T>
using CMap = Eigen::Map<const RowMat<T>>;
template <typename T>
using MMap = Eigen::Map<RowMat<T>>;

template <typename T>
CMap<T> cmap(const Matrix<T>& m) {
  return CMap<T>(m.data(), static_cast<Eigen::Index>(m.rows()), static_cast<Eigen::Index>(m.cols()));
}
template <typename T>
MMap<T> mmap(Matrix<T>& m) {
  return MMap<T>(m.data(), static_cast<Eigen::Index>(m.rows()), static_cast<Eigen::Index>(m.cols()));
}

template <typename T, typename A, typename B>
void gemm_into(T alpha, const A& a, const B& b, T beta, MMap<T>& c) {
  if (beta == T(0)) {
    c.noalias() = alpha * (a * b);
  } else {
    if (beta != T(1)) c *= beta;
    c.noalias() += alpha * (a * b);
  }
}
}  // namespace

template <typename T>
void gemm(Trans ta, Trans tb, T alpha, const Matrix<T>& a, const Matrix<T>& b, T beta,
          Matrix<T>& c) {
  const bool at = ta == Trans::yes;
  const bool bt = tb == Trans::yes;
  check_gemm_shapes(at ? a.cols() : a.rows(), at ? a.rows() : a.cols(), bt ? b.cols() : b.rows(),
                    bt ? b.rows() : b.cols(), c.rows(), c.cols());
  if (c.empty()) return;
  auto cm = mmap(c);
  if (a.empty() || b.empty()) {
    // inner dimension 0: product is zero
    if (beta == T(0)) cm.setZero(); else cm *= beta;
    return;
  }
  const auto am = cmap(a);
  const auto bm = cmap(b);
  if (!at && !bt) gemm_into(alpha, am, bm, beta, cm);
  else if (at && !bt) gemm_into(alpha, am.transpose(), bm, beta, cm);
  else if (!at && bt) gemm_into(alpha, am, bm.transpose(), beta, cm);
  else gemm_into(alpha, am.transpose(), bm.transpose(), beta, cm);
}

template <typename T>
void softmax_rows(const Matrix<T>& x, Matrix<T>& out) {
  out = Matrix<T>(x.rows(), x.cols());
  const auto rows = static_cast<std::ptrdiff_t>(x.rows());
#pragma omp parallel for schedule(static)
  for (std::ptrdiff_t r = 0; r < rows; ++r) {
    const auto in = x.row(r);
    auto o = out.row(r);
    if (in.empty()) continue;
    const T mx = *std::max_element(in.begin(), in.end());
    T sum = T(0);
    for (std::size_t c = 0; c < in.size(); ++c) {
      o[c] = std::exp(in[c] - mx);
      sum += o[c];
    }
    const T inv = T(1) / sum;
    for (auto& e : o) e *= inv;
  }
}

template <typename T>
void layer_norm_rows(const Matrix<T>& x, std::span<const T> gain, std::span<const T> bias, T eps,
                     Matrix<T>& out, std::vector<T>& mean, std::vector<T>& rstd) {
  const std::size_t n = x.cols();
  out = Matrix<T>(x.rows(), n);
  mean.assign(x.rows(), T(0));
  rstd.assign(x.rows(), T(0));
  const auto rows = static_cast<std::ptrdiff_t>(x.rows());
#pragma omp parallel for schedule(static)
  for (std::ptrdiff_t r = 0; r < rows; ++r) {
    const auto in = x.row(r);
    T mu = T(0);
    for (const T v : in) mu += v;
    mu /= static_cast<T>(n);
    T var = T(0);
    for (const T v : in) var += (v - mu) * (v - mu);
    var /= static_cast<T>(n);
    const T rs = T(1) / std::sqrt(var + eps);
    mean[r] = mu;
    rstd[r] = rs;
    auto o = out.row(r);
    for (std::size_t c = 0; c < n; ++c) o[c] = (in[c] - mu) * rs * gain[c] + bias[c];
  }
}

template <typename T>
void layer_norm_rows_backward(const Matrix<T>& x, std::span<const T> gain,
                              const std::vector<T>& mean, const std::vector<T>& rstd,
                              const Matrix<T>& dy, Matrix<T>* dx, std::span<T> dgain,
                              std::span<T> dbias) {
  const std::size_t n = x.cols();
  const auto rows = static_cast<std::ptrdiff_t>(x.rows());
  if (dx != nullptr) {
#pragma omp parallel for schedule(static)
    for (std::ptrdiff_t r = 0; r < rows; ++r) {
      T sum_g = T(0);
      T sum_gx = T(0);
      for (std::size_t c = 0; c < n; ++c) {
        const T xhat = (x(r, c) - mean[r]) * rstd[r];
        const T g = dy(r, c) * gain[c];
        sum_g += g;
        sum_gx += g * xhat;
      }
      const T inv_n = T(1) / static_cast<T>(n);
      for (std::size_t c = 0; c < n; ++c) {
        const T xhat = (x(r, c) - mean[r]) * rstd[r];
        (*dx)(r, c) += rstd[r] * (dy(r, c) * gain[c] - sum_g * inv_n - xhat * sum_gx * inv_n);
      }
    }
  }
  if (dgain.empty() && dbias.empty()) return;
  // column sums, one thread per column block
  const auto cols = static_cast<std::ptrdiff_t>(n);
#pragma omp parallel for schedule(static)
  for (std::ptrdiff_t c = 0; c < cols; ++c) {
    T sg = T(0);
    T sb = T(0);
    for (std::ptrdiff_t r = 0; r < rows; ++r) {
      const T xhat = (x(r, c) - mean[r]) * rstd[r];
      sg += dy(r, c) * xhat;
      sb += dy(r, c);
    }
    if (!dgain.empty()) dgain[c] += sg;
    if (!dbias.empty()) dbias[c] += sb;
  }
}

template <typename T>
void attention_forward(const AttentionShape& s, const Matrix<T>& q, const Matrix<T>& k,
                       const Matrix<T>& v, const Matrix<T>* keep, Matrix<T>& probs,
                       Matrix<T>& out) {
  check_attention(s, q, k, v);
  const T scale = T(1) / std::sqrt(static_cast<T>(s.head_dim));
  const std::size_t L = s.seq_len;
  const std::size_t hd = s.head_dim;
  probs = Matrix<T>(s.prob_rows(), L);
  out = Matrix<T>(s.rows(), s.width());
  const auto blocks = static_cast<std::ptrdiff_t>(s.batch * s.heads);
#pragma omp parallel for schedule(static)
  for (std::ptrdiff_t blk = 0; blk < blocks; ++blk) {
    const std::size_t b = static_cast<std::size_t>(blk) / s.heads;
    const std::size_t h = static_cast<std::size_t>(blk) % s.heads;
    const std::size_t c0 = h * hd;
    const std::size_t p0 = static_cast<std::size_t>(blk) * L;
    for (std::size_t i = 0; i < L; ++i) {
      const T* qi = q.data() + (b * L + i) * q.cols() + c0;
      T* pr = probs.data() + (p0 + i) * L;
      T mx = -std::numeric_limits<T>::infinity();
      for (std::size_t j = 0; j < L; ++j) {
        const T* kj = k.data() + (b * L + j) * k.cols() + c0;
        T acc = T(0);
        for (std::size_t d = 0; d < hd; ++d) acc += qi[d] * kj[d];
        pr[j] = acc * scale;
        mx = std::max(mx, pr[j]);
      }
      T sum = T(0);
      for (std::size_t j = 0; j < L; ++j) {
        pr[j] = std::exp(pr[j] - mx);
        sum += pr[j];
      }
      const T inv = T(1) / sum;
      for (std::size_t j = 0; j < L; ++j) pr[j] *= inv;
      T* oi = out.data() + (b * L + i) * out.cols() + c0;
      const T* kp = keep ? keep->data() + (p0 + i) * L : nullptr;
      for (std::size_t j = 0; j < L; ++j) {
        const T w = kp ? pr[j] * kp[j] : pr[j];
        const T* vj = v.data() + (b * L + j) * v.cols() + c0;
        for (std::size_t d = 0; d < hd; ++d) oi[d] += w * vj[d];
      }
    }
  }
}

template <typename T>
void attention_backward(const AttentionShape& s, const Matrix<T>& q, const Matrix<T>& k,
                        const Matrix<T>& v, const Matrix<T>* keep, const Matrix<T>& probs,
                        const Matrix<T>& dout, Matrix<T>* dq, Matrix<T>* dk, Matrix<T>* dv) {
  check_attention(s, q, k, v);
  const T scale = T(1) / std::sqrt(static_cast<T>(s.head_dim));
  const std::size_t L = s.seq_len;
  const std::size_t hd = s.head_dim;
  const std::size_t w = s.width();
  const auto blocks = static_cast<std::ptrdiff_t>(s.batch * s.heads);
#pragma omp parallel for schedule(static)
  for (std::ptrdiff_t blk = 0; blk < blocks; ++blk) {
    const std::size_t b = static_cast<std::size_t>(blk) / s.heads;
    const std::size_t h = static_cast<std::size_t>(blk) % s.heads;
    const std::size_t c0 = h * hd;
    const std::size_t p0 = static_cast<std::size_t>(blk) * L;
    std::vector<T> dscore(L * L);
    for (std::size_t i = 0; i < L; ++i) {
      const T* doi = dout.data() + (b * L + i) * w + c0;
      const T* pr = probs.data() + (p0 + i) * L;
      const T* kp = keep ? keep->data() + (p0 + i) * L : nullptr;
      T dot = T(0);
      for (std::size_t j = 0; j < L; ++j) {
        const T* vj = v.data() + (b * L + j) * w + c0;
        T acc = T(0);
        for (std::size_t d = 0; d < hd; ++d) acc += doi[d] * vj[d];
        if (kp) acc *= kp[j];
        dscore[i * L + j] = acc;
        dot += acc * pr[j];
      }
      for (std::size_t j = 0; j < L; ++j) dscore[i * L + j] = pr[j] * (dscore[i * L + j] - dot) * scale;
      if (dv) {
        for (std::size_t j = 0; j < L; ++j) {
          const T wgt = kp ? pr[j] * kp[j] : pr[j];
          T* dvj = dv->data() + (b * L + j) * w + c0;
          for (std::size_t d = 0; d < hd; ++d) dvj[d] += wgt * doi[d];
        }
      }
    }
    for (std::size_t i = 0; i < L; ++i) {
      for (std::size_t j = 0; j < L; ++j) {
        const T ds = dscore[i * L + j];
        if (dq) {
          T* dqi = dq->data() + (b * L + i) * w + c0;
          const T* kj = k.data() + (b * L + j) * w + c0;
          for (std::size_t d = 0; d < hd; ++d) dqi[d] += ds * kj[d];
        }
        if (dk) {
          T* dkj = dk->data() + (b * L + j) * w + c0;
          const T* qi = q.data() + (b * L + i) * w + c0;
          for (std::size_t d = 0; d < hd; ++d) dkj[d] += ds * qi[d];
        }
      }
    }
  }
}

void co_rated_cosine(const Matrix<double>& centered, const Matrix<double>& mask,
                     std::size_t min_overlap, Matrix<double>& sim, Matrix<double>& overlap) {
  if (!centered.same_shape(mask)) throw ShapeError("co_rated_cosine: mask shape mismatch");
  const std::size_t n = centered.rows();
  // centered is zero wherever mask is zero, so x x^T already sums over co-rated columns
  Matrix<double> squares(centered.rows(), centered.cols());
  for (std::size_t i = 0; i < squares.size(); ++i) squares.data()[i] = centered.data()[i] * centered.data()[i];
  Matrix<double> num(n, n), norms(n, n);
  overlap = Matrix<double>(n, n);
  gemm(Trans::no, Trans::yes, 1.0, centered, centered, 0.0, num);
  gemm(Trans::no, Trans::yes, 1.0, squares, mask, 0.0, norms);  // norms(a,b): sum over b's support of x_a^2
  gemm(Trans::no, Trans::yes, 1.0, mask, mask, 0.0, overlap);
  sim = Matrix<double>(n, n);
  const auto rows = static_cast<std::ptrdiff_t>(n);
#pragma omp parallel for schedule(dynamic, 16)
  for (std::ptrdiff_t a = 0; a < rows; ++a) {
    for (std::size_t b = static_cast<std::size_t>(a); b < n; ++b) {
      const double na = norms(a, b);
      const double nb = norms(b, a);
      const double count = overlap(a, b);
      sim(a, b) = (count >= static_cast<double>(min_overlap) && na > 0.0 && nb > 0.0)
                      ? num(a, b) / std::sqrt(na * nb)
                      : 0.0;
    }
  }
  for (std::size_t a = 0; a < n; ++a) {
    for (std::size_t b = a + 1; b < n; ++b) {
      sim(b, a) = sim(a, b);
      overlap(b, a) = overlap(a, b);
    }
  }
}

}  // namespace parallel

#define FUSIONREC_INSTANTIATE(NS, T)                                                          \
  template void NS::gemm<T>(Trans, Trans, T, const Matrix<T>&, const Matrix<T>&, T, Matrix<T>&); \
  template void NS::softmax_rows<T>(const Matrix<T>&, Matrix<T>&);                             \
  template void NS::layer_norm_rows<T>(const Matrix<T>&, std::span<const T>, std::span<const T>, T, \
                                       Matrix<T>&, std::vector<T>&, std::vector<T>&);          \
  template void NS::layer_norm_rows_backward<T>(const Matrix<T>&, std::span<const T>,          \
                                                const std::vector<T>&, const std::vector<T>&,  \
                                                const Matrix<T>&, Matrix<T>*, std::span<T>,    \
                                                std::span<T>);                                 \
  template void NS::attention_forward<T>(const AttentionShape&, const Matrix<T>&,              \
                                         const Matrix<T>&, const Matrix<T>&, const Matrix<T>*, \
                                         Matrix<T>&, Matrix<T>&);                              \
  template void NS::attention_backward<T>(const AttentionShape&, const Matrix<T>&,             \
                                          const Matrix<T>&, const Matrix<T>&, const Matrix<T>*, \
                                          const Matrix<T>&, const Matrix<T>&, Matrix<T>*,      \
                                          Matrix<T>*, Matrix<T>*);

FUSIONREC_INSTANTIATE(serial, float)
FUSIONREC_INSTANTIATE(serial, double)
FUSIONREC_INSTANTIATE(parallel, float)
FUSIONREC_INSTANTIATE(parallel, double)

#undef FUSIONREC_INSTANTIATE

}  // namespace fusionrec::kernels
