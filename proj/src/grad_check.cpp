#include "fusionrec/grad_check.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <random>

namespace fusionrec::ad {

namespace {

double evaluate(const LossFn& loss) {
  Tape<double> tape;
  const double v = tape.value(loss(tape))(0, 0);
  if (!std::isfinite(v)) throw NumericError("grad_check: non-finite loss");
  return v;
}

double rel_error(double analytic, double numeric) {
  return std::abs(analytic - numeric) / std::max(1.0, std::abs(analytic));
}

}  // namespace

double grad_check(const ScalarFn& f, const Matrix<double>& point, double h) {
  Matrix<double> analytic;
  {
    Tape<double> tape;
    auto x = tape.variable(point);
    auto y = f(tape, x);
    tape.backward(y);
    analytic = tape.grad(x);
  }
  if (!analytic.all_finite()) throw NumericError("grad_check: non-finite analytic gradient");
  Matrix<double> probe = point;
  auto at = [&](const Matrix<double>& m) {
    Tape<double> tape;
    const double v = tape.value(f(tape, tape.constant(m)))(0, 0);
    if (!std::isfinite(v)) throw NumericError("grad_check: non-finite function value");
    return v;
  };
  double worst = 0.0;
  for (std::size_t i = 0; i < point.size(); ++i) {
    const double orig = probe.data()[i];
    probe.data()[i] = orig + h;
    const double up = at(probe);
    probe.data()[i] = orig - h;
    const double down = at(probe);
    probe.data()[i] = orig;
    worst = std::max(worst, rel_error(analytic.data()[i], (up - down) / (2 * h)));
  }
  return worst;
}

double grad_check_params(const LossFn& loss, const std::vector<Parameter<double>*>& params,
                         const GradCheckOptions& options) {
  for (auto* p : params) p->zero_grad();
  {
    Tape<double> tape;
    tape.backward(loss(tape));
  }
  std::mt19937_64 rng(options.seed);
  double worst = 0.0;
  for (auto* p : params) {
    const Matrix<double> analytic = p->grad;
    if (!analytic.all_finite()) throw NumericError("grad_check: non-finite gradient for " + p->name);
    std::vector<std::size_t> coords(p->value.size());
    std::iota(coords.begin(), coords.end(), std::size_t{0});
    if (options.max_coords_per_param != 0 && coords.size() > options.max_coords_per_param) {
      std::shuffle(coords.begin(), coords.end(), rng);
      coords.resize(options.max_coords_per_param);
    }
    for (const std::size_t i : coords) {
      double& w = p->value.data()[i];
      const double orig = w;
      w = orig + options.h;
      const double up = evaluate(loss);
      w = orig - options.h;
      const double down = evaluate(loss);
      w = orig;
      worst = std::max(worst, rel_error(analytic.data()[i], (up - down) / (2 * options.h)));
    }
  }
  for (auto* p : params) p->zero_grad();
  return worst;
}

}  // namespace fusionrec::ad
