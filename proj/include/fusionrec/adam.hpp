#pragma once

#include <cstdint>
#include <span>
#include <vector>

#include "fusionrec/autodiff.hpp"

namespace fusionrec::ad {

struct AdamConfig {
  double lr = 1e-3;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double eps = 1e-8;
};

/// Moment accumulators for one parameter list, in the same order.
template <typename T>
struct AdamState {
  AdamConfig config;
  std::uint64_t step = 0;
  std::vector<Matrix<T>> first;
  std::vector<Matrix<T>> second;

  AdamState() = default;
  AdamState(std::span<Parameter<T>* const> params, AdamConfig cfg);
};

/// Bias-corrected Adam update from each parameter's accumulated grad.
///
/// Entries whose gradient is exactly zero are left alone (value and moments),
/// so rows of an embedding table absent from a batch do not drift on stale
/// momentum. Throws NumericError on a non-finite gradient before touching any
/// parameter.
template <typename T>
void adam_step(std::span<Parameter<T>* const> params, AdamState<T>& state);

template <typename T>
void zero_grads(std::span<Parameter<T>* const> params) {
  for (auto* p : params) p->zero_grad();
}

}  // namespace fusionrec::ad
