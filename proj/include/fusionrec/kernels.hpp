#pragma once

// Numerical kernels behind the autodiff ops and the neighbourhood baselines.
//
// Two implementations with identical signatures:
//   kernels::serial    straightforward loops, kept as the reference for tests
//   kernels::parallel  OpenMP over independent rows/blocks; GEMM goes through
//                      Eigen (which itself uses the OpenMP thread pool)
//
// Every parallel kernel assigns each output element to exactly one thread, so
// results do not depend on the thread count.

#include <cstddef>
#include <span>
#include <vector>

#include "fusionrec/matrix.hpp"

namespace fusionrec::kernels {

enum class Trans { no, yes };

/// Geometry of a batch of equal-length sequences stacked row-wise: row
/// `b * seq_len + t` is token t of sequence b; head h owns columns
/// [h * head_dim, (h + 1) * head_dim).
struct AttentionShape {
  std::size_t batch = 0;
  std::size_t seq_len = 0;
  std::size_t heads = 0;
  std::size_t head_dim = 0;

  std::size_t rows() const { return batch * seq_len; }
  std::size_t width() const { return heads * head_dim; }
  /// probs matrix is (batch * heads * seq_len) x seq_len
  std::size_t prob_rows() const { return batch * heads * seq_len; }
};

/// Caps worker threads for the parallel kernels (0 = OpenMP default).
void set_num_threads(int n);
int num_threads();

#define FUSIONREC_KERNEL_DECLS                                                              \
  /* c = alpha * op(a) * op(b) + beta * c ; c must already have the result shape */        \
  template <typename T>                                                                     \
  void gemm(Trans ta, Trans tb, T alpha, const Matrix<T>& a, const Matrix<T>& b, T beta,   \
            Matrix<T>& c);                                                                  \
                                                                                            \
  /* numerically stable row softmax (max subtraction) */                                    \
  template <typename T>                                                                     \
  void softmax_rows(const Matrix<T>& x, Matrix<T>& out);                                    \
                                                                                            \
  template <typename T>                                                                     \
  void layer_norm_rows(const Matrix<T>& x, std::span<const T> gain, std::span<const T> bias, \
                       T eps, Matrix<T>& out, std::vector<T>& mean, std::vector<T>& rstd);  \
                                                                                            \
  /* accumulates into dx, dgain, dbias */                                                   \
  template <typename T>                                                                     \
  void layer_norm_rows_backward(const Matrix<T>& x, std::span<const T> gain,               \
                                const std::vector<T>& mean, const std::vector<T>& rstd,    \
                                const Matrix<T>& dy, Matrix<T>* dx, std::span<T> dgain,    \
                                std::span<T> dbias);                                        \
                                                                                            \
  /* out = softmax(q k^T / sqrt(head_dim)) [* keep] v per sequence and head */              \
  template <typename T>                                                                     \
  void attention_forward(const AttentionShape& s, const Matrix<T>& q, const Matrix<T>& k,  \
                         const Matrix<T>& v, const Matrix<T>* keep, Matrix<T>& probs,      \
                         Matrix<T>& out);                                                   \
                                                                                            \
  /* accumulates into dq, dk, dv (any of them may be null) */                               \
  template <typename T>                                                                     \
  void attention_backward(const AttentionShape& s, const Matrix<T>& q, const Matrix<T>& k, \
                          const Matrix<T>& v, const Matrix<T>* keep, const Matrix<T>& probs, \
                          const Matrix<T>& dout, Matrix<T>* dq, Matrix<T>* dk, Matrix<T>* dv); \
                                                                                            \
  /* Cosine similarity between rows of `centered` restricted to columns where both rows     \
     are observed (mask != 0). Pairs with fewer than min_overlap shared columns, or a zero   \
     norm on the shared support, get similarity 0. `overlap` receives the shared counts. */  \
  void co_rated_cosine(const Matrix<double>& centered, const Matrix<double>& mask,          \
                       std::size_t min_overlap, Matrix<double>& sim, Matrix<double>& overlap);

namespace serial {
FUSIONREC_KERNEL_DECLS
}  // namespace serial

namespace parallel {
FUSIONREC_KERNEL_DECLS
}  // namespace parallel

#undef FUSIONREC_KERNEL_DECLS

}  // namespace fusionrec::kernels
