#pragma once

#include <algorithm>
#include <cmath>
#include <functional>
#include <vector>

#include "cgre/tensor.hpp"

namespace cgre {

// Central-difference gradient verification. `loss` must be a pure function of
// the parameter values: it is re-evaluated with each coordinate nudged by
// +/- eps, and the numeric slope is compared against the supplied analytic
// gradients. Returns the worst relative error
//   |analytic - numeric| / max(1e-8, |analytic| + |numeric|)
// over all coordinates. Parameters are restored exactly before returning.
inline double finite_diff_check(
    const std::function<double(const std::vector<Tensor>&)>& loss,
    const std::vector<Tensor>& params, const std::vector<Tensor>& analytic,
    double eps) {
  if (eps < 1e-6 || eps > 1e-3)
    throw DomainError("finite_diff_check: eps outside [1e-6, 1e-3]");
  if (params.size() != analytic.size())
    throw ShapeError("finite_diff_check: params/analytic count mismatch");
  for (std::size_t p = 0; p < params.size(); ++p)
    if (params[p].shape != analytic[p].shape)
      throw ShapeError("finite_diff_check: shape mismatch at parameter " +
                       std::to_string(p));

  double worst = 0.0;
  for (std::size_t p = 0; p < params.size(); ++p) {
    const Tensor& t = params[p];
    for (std::size_t i = 0; i < t.numel(); ++i) {
      const double orig = t.at(i);
      const_cast<Tensor&>(t).at(i) = orig + eps;
      const double up = loss(params);
      const_cast<Tensor&>(t).at(i) = orig - eps;
      const double down = loss(params);
      const_cast<Tensor&>(t).at(i) = orig;
      if (!std::isfinite(up) || !std::isfinite(down))
        throw NumericError("finite_diff_check: loss not finite near parameter " +
                           std::to_string(p));
      const double numeric = (up - down) / (2.0 * eps);
      const double a = analytic[p].at(i);
      const double err =
          std::abs(a - numeric) / std::max(1e-8, std::abs(a) + std::abs(numeric));
      worst = std::max(worst, err);
    }
  }
  return worst;
}

}  // namespace cgre
