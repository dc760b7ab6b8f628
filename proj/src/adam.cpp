#include "fusionrec/adam.hpp"

#include <cmath>
#include <stdexcept>

namespace fusionrec::ad {

template <typename T>
AdamState<T>::AdamState(std::span<Parameter<T>* const> params, AdamConfig cfg) : config(cfg) {
  first.reserve(params.size());
  second.reserve(params.size());
  for (const auto* p : params) {
    first.emplace_back(p->value.rows(), p->value.cols());
    second.emplace_back(p->value.rows(), p->value.cols());
  }
}

template <typename T>
void adam_step(std::span<Parameter<T>* const> params, AdamState<T>& state) {
  const auto& cfg = state.config;
  if (!(cfg.lr >= 0.0)) throw std::invalid_argument("adam_step: learning rate must be >= 0");
  if (state.first.size() != params.size() || state.second.size() != params.size()) {
    throw ShapeError("adam_step: state holds " + std::to_string(state.first.size()) +
                     " moments for " + std::to_string(params.size()) + " parameters");
  }
  for (std::size_t i = 0; i < params.size(); ++i) {
    const auto& p = *params[i];
    if (!p.grad.same_shape(p.value) || !state.first[i].same_shape(p.value) ||
        !state.second[i].same_shape(p.value)) {
      throw ShapeError("adam_step: shape mismatch for parameter '" + p.name + "'");
    }
    if (!p.grad.all_finite()) throw NumericError("adam_step: non-finite gradient for '" + p.name + "'");
  }

  ++state.step;
  const double t = static_cast<double>(state.step);
  const double c1 = 1.0 - std::pow(cfg.beta1, t);
  const double c2 = 1.0 - std::pow(cfg.beta2, t);
  const T b1 = static_cast<T>(cfg.beta1);
  const T b2 = static_cast<T>(cfg.beta2);
  const T step_size = static_cast<T>(cfg.lr / c1);
  const T inv_sqrt_c2 = static_cast<T>(1.0 / std::sqrt(c2));
  const T eps = static_cast<T>(cfg.eps);

  for (std::size_t i = 0; i < params.size(); ++i) {
    auto& p = *params[i];
    T* w = p.value.data();
    const T* g = p.grad.data();
    T* m = state.first[i].data();
    T* v = state.second[i].data();
    const auto n = static_cast<std::ptrdiff_t>(p.value.size());
#pragma omp parallel for schedule(static) if (n > 65536)
    for (std::ptrdiff_t j = 0; j < n; ++j) {
      if (g[j] == T(0)) continue;
      m[j] = b1 * m[j] + (T(1) - b1) * g[j];
      v[j] = b2 * v[j] + (T(1) - b2) * g[j] * g[j];
      // lr * mhat / (sqrt(vhat) + eps)
      w[j] -= step_size * m[j] / (std::sqrt(v[j]) * inv_sqrt_c2 + eps);
    }
  }
}

template struct AdamState<float>;
template struct AdamState<double>;
template void adam_step(std::span<Parameter<float>* const>, AdamState<float>&);
template void adam_step(std::span<Parameter<double>* const>, AdamState<double>&);

}  // namespace fusionrec::ad
