#pragma once

#include <cmath>

#include "cgre/ops.hpp"
#include "cgre/rng.hpp"
#include "cgre/tensor.hpp"

namespace cgre {

// Uniform Xavier initialization for a (fan_in, fan_out) matrix: entries drawn
// from [-b, b] with b = sqrt(6 / (fan_in + fan_out)).
inline Tensor xavier_init(std::vector<int> shape, Rng& rng) {
  if (shape.size() != 2)
    throw ShapeError("xavier_init: expected matrix shape, got " +
                     Tensor::shape_string(shape));
  Tensor t = Tensor::zeros(std::move(shape));
  const double bound =
      std::sqrt(6.0 / (static_cast<double>(t.shape[0]) + t.shape[1]));
  for (std::size_t i = 0; i < t.numel(); ++i) t.at(i) = rng.uniform(-bound, bound);
  return t;
}

// Inverted dropout mask: entries are 0 with probability p and 1/(1-p)
// otherwise, so the expected value of mask*x equals x. Outside training (or
// with p == 0) the mask is all ones and consumes no randomness.
inline Tensor dropout_mask(const std::vector<int>& shape, double p, Rng& rng,
                           bool training) {
  if (p < 0.0 || p >= 1.0)
    throw DomainError("dropout_mask: rate must lie in [0,1)");
  Tensor mask = Tensor::full(shape, 1.0);
  if (!training || p == 0.0) return mask;
  const double keep = 1.0 / (1.0 - p);
  for (std::size_t i = 0; i < mask.numel(); ++i)
    mask.at(i) = rng.uniform() < p ? 0.0 : keep;
  return mask;
}

// One plain SGD update, returned as a fresh leaf: out = param - lr * grad.
// Never taped. The result keeps the parameter's requires_grad marking with a
// zeroed gradient buffer.
inline Tensor sgd_step(const Tensor& param, const Tensor& grad, double lr) {
  if (param.shape != grad.shape)
    throw ShapeError("sgd_step: param " + param.shape_str() + " vs grad " +
                     grad.shape_str());
  Tensor out;
  out.shape = param.shape;
  out.data = std::make_shared<std::vector<double>>(param.numel());
  for (std::size_t i = 0; i < param.numel(); ++i) {
    const double v = param.at(i) - lr * grad.at(i);
    if (!std::isfinite(v))
      throw NumericError("sgd_step: non-finite parameter after update");
    (*out.data)[i] = v;
  }
  out.set_requires_grad(param.requires_grad);
  return out;
}

}  // namespace cgre
