#pragma once

// Central finite-difference gradient checks (64-bit only).
//
// Error metric: max over checked coordinates of
//   |analytic - numeric| / max(1, |analytic|)

#include <cstdint>
#include <functional>
#include <vector>

#include "fusionrec/autodiff.hpp"

namespace fusionrec::ad {

using ScalarFn = std::function<Var<double>(Tape<double>&, Var<double>)>;
using LossFn = std::function<Var<double>(Tape<double>&)>;

double grad_check(const ScalarFn& f, const Matrix<double>& point, double h = 1e-5);

struct GradCheckOptions {
  double h = 1e-5;
  /// 0 checks every coordinate; otherwise a seeded random subset per parameter.
  std::size_t max_coords_per_param = 0;
  std::uint64_t seed = 7;
};

/// Checks d(loss)/d(p) for every parameter in `params`; `loss` must be a pure
/// function of the parameter values.
double grad_check_params(const LossFn& loss, const std::vector<Parameter<double>*>& params,
                         const GradCheckOptions& options = {});

}  // namespace fusionrec::ad
