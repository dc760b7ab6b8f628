// Serial reference kernels against their OpenMP/Eigen counterparts at the
// shapes the model and the baselines actually use.

#include <benchmark/benchmark.h>

#include "fusionrec/kernels.hpp"
#include "fusionrec/rng.hpp"

using namespace fusionrec;
using namespace fusionrec::kernels;

namespace {

Matrix<float> random_f(std::size_t r, std::size_t c, std::uint64_t seed) {
  Rng rng(seed);
  Matrix<float> m(r, c);
  for (auto& v : m.values()) v = static_cast<float>(uniform(rng, -1.0, 1.0));
  return m;
}

template <bool Parallel>
void BM_gemm(benchmark::State& state) {
  // a batch of 64 sequences (768 rows) times a d x d projection
  const auto n = static_cast<std::size_t>(state.range(0));
  const auto a = random_f(768, n, 1), b = random_f(n, n, 2);
  Matrix<float> c(768, n);
  for (auto _ : state) {
    if constexpr (Parallel) {
      parallel::gemm(Trans::no, Trans::no, 1.0f, a, b, 0.0f, c);
    } else {
      serial::gemm(Trans::no, Trans::no, 1.0f, a, b, 0.0f, c);
    }
    benchmark::DoNotOptimize(c.data());
  }
  state.SetItemsProcessed(state.iterations() * static_cast<std::int64_t>(768 * n * n));
}

template <bool Parallel>
void BM_attention(benchmark::State& state) {
  const AttentionShape s{static_cast<std::size_t>(state.range(0)), 12, 8, 96};
  const auto q = random_f(s.rows(), s.width(), 1), k = random_f(s.rows(), s.width(), 2),
             v = random_f(s.rows(), s.width(), 3), dout = random_f(s.rows(), s.width(), 4);
  const Matrix<float>* no_mask = nullptr;
  Matrix<float> probs, out, dq(q.rows(), q.cols()), dk(q.rows(), q.cols()), dv(q.rows(), q.cols());
  for (auto _ : state) {
    if constexpr (Parallel) {
      parallel::attention_forward(s, q, k, v, no_mask, probs, out);
      parallel::attention_backward(s, q, k, v, no_mask, probs, dout, &dq, &dk, &dv);
    } else {
      serial::attention_forward(s, q, k, v, no_mask, probs, out);
      serial::attention_backward(s, q, k, v, no_mask, probs, dout, &dq, &dk, &dv);
    }
    benchmark::DoNotOptimize(dq.data());
  }
}

template <bool Parallel>
void BM_co_rated_cosine(benchmark::State& state) {
  // user-user similarity at the 100K shape: 944 x 1683, about 6% observed
  Rng rng(5);
  Matrix<double> centered(944, 1683), mask(944, 1683);
  for (std::size_t i = 0; i < centered.size(); ++i) {
    if (uniform01(rng) < 0.063) {
      mask.data()[i] = 1.0;
      centered.data()[i] = uniform(rng, -2.0, 2.0);
    }
  }
  Matrix<double> sim, overlap;
  for (auto _ : state) {
    if constexpr (Parallel) {
      parallel::co_rated_cosine(centered, mask, 2, sim, overlap);
    } else {
      serial::co_rated_cosine(centered, mask, 2, sim, overlap);
    }
    benchmark::DoNotOptimize(sim.data());
  }
}

}  // namespace

BENCHMARK(BM_gemm<false>)->Name("gemm/serial")->Arg(64)->Arg(256)->Arg(768)->Unit(benchmark::kMillisecond);
BENCHMARK(BM_gemm<true>)->Name("gemm/parallel")->Arg(64)->Arg(256)->Arg(768)->Unit(benchmark::kMillisecond);
BENCHMARK(BM_attention<false>)->Name("attention/serial")->Arg(64)->Unit(benchmark::kMillisecond);
BENCHMARK(BM_attention<true>)->Name("attention/parallel")->Arg(64)->Unit(benchmark::kMillisecond);
BENCHMARK(BM_co_rated_cosine<false>)->Name("co_rated_cosine/serial")->Unit(benchmark::kMillisecond);
BENCHMARK(BM_co_rated_cosine<true>)->Name("co_rated_cosine/parallel")->Unit(benchmark::kMillisecond);

BENCHMARK_MAIN();
