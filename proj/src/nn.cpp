// Copyright 2026 The mvprompt Authors
// SPDX-License-Identifier: Apache-2.0

#include "mvp/nn.hpp"

#include <algorithm>
#include <cmath>

namespace mvp {

std::size_t count_values(const ParamList& params) {
  std::size_t n = 0;
  for (const auto& p : params) n += p.tensor.numel();
  return n;
}

std::size_t count_values(const ParamList& params, ParamRole role) {
  std::size_t n = 0;
  for (const auto& p : params) {
    if (p.role == role) n += p.tensor.numel();
  }
  return n;
}

Tensor fan_in_uniform(Shape shape, std::size_t fan_in, Rng& rng, bool requires_grad) {
  const double bound = 1.0 / std::sqrt(static_cast<double>(std::max<std::size_t>(fan_in, 1)));
  std::uniform_real_distribution<double> dist(-bound, bound);
  std::vector<double> v(shape_numel(shape));
  for (auto& x : v) x = dist(rng);
  Tensor t(std::move(shape), std::move(v));
  t.set_requires_grad(requires_grad);
  return t;
}

void fill(Tensor& t, double v) { std::fill(t.values().begin(), t.values().end(), v); }

Linear::Linear(std::size_t in, std::size_t out, Rng& rng)
    : weight(fan_in_uniform({out, in}, in, rng)), bias(fan_in_uniform({out}, in, rng)) {}

void Linear::collect(const std::string& prefix, ParamList& out) const {
  out.push_back({prefix + ".weight", weight, ParamRole::trainable});
  out.push_back({prefix + ".bias", bias, ParamRole::trainable});
}

Conv2d::Conv2d(std::size_t in, std::size_t out, std::size_t kernel, ops::Conv2dOptions opts,
               Rng& rng, bool with_bias)
    : weight(fan_in_uniform({out, in, kernel, kernel}, in * kernel * kernel, rng)),
      options(opts) {
  if (with_bias) bias = fan_in_uniform({out}, in * kernel * kernel, rng);
}

void Conv2d::collect(const std::string& prefix, ParamList& out) const {
  out.push_back({prefix + ".weight", weight, ParamRole::trainable});
  if (bias.defined()) out.push_back({prefix + ".bias", bias, ParamRole::trainable});
}

PointwiseMlp::PointwiseMlp(std::size_t in, std::size_t hidden, std::size_t out, Rng& rng)
    : first(in, hidden, rng), second(hidden, out, rng) {}

void PointwiseMlp::collect(const std::string& prefix, ParamList& out) const {
  first.collect(prefix + ".0", out);
  second.collect(prefix + ".1", out);
}

}  // namespace mvp
