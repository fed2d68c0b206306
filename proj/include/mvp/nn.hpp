// Copyright 2026 The mvprompt Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <cstdint>
#include <random>
#include <string>
#include <vector>

#include "mvp/ops.hpp"
#include "mvp/tensor.hpp"

namespace mvp {

using Rng = std::mt19937_64;

/// How the optimizer and checkpointing treat a tensor.
enum class ParamRole {
  trainable,  // receives gradients and optimizer updates
  frozen,     // loaded once, never changes
  buffer,     // mutable state without gradients (normalization running stats)
};

struct NamedTensor {
  std::string name;
  Tensor tensor;
  ParamRole role = ParamRole::trainable;
};

using ParamList = std::vector<NamedTensor>;

std::size_t count_values(const ParamList& params);
std::size_t count_values(const ParamList& params, ParamRole role);

/// U(-1/sqrt(fan_in), 1/sqrt(fan_in)) initialization.
Tensor fan_in_uniform(Shape shape, std::size_t fan_in, Rng& rng, bool requires_grad = true);

/// Fully connected layer y = x W^T + b over rows of a [n, in] matrix.
struct Linear {
  Tensor weight;  // [out, in]
  Tensor bias;    // [out]

  Linear() = default;
  Linear(std::size_t in, std::size_t out, Rng& rng);
  Tensor operator()(const Tensor& x) const { return ops::linear(x, weight, bias); }
  void collect(const std::string& prefix, ParamList& out) const;
};

struct Conv2d {
  Tensor weight;  // [out, in, k, k]
  Tensor bias;    // [out], may be undefined
  ops::Conv2dOptions options;

  Conv2d() = default;
  Conv2d(std::size_t in, std::size_t out, std::size_t kernel, ops::Conv2dOptions opts, Rng& rng,
         bool with_bias = true);
  Tensor operator()(const Tensor& x) const { return ops::conv2d(x, weight, bias, options); }
  void collect(const std::string& prefix, ParamList& out) const;
};

/// Two pointwise layers with GELU in between: in -> hidden -> out.
struct PointwiseMlp {
  Linear first;
  Linear second;

  PointwiseMlp() = default;
  PointwiseMlp(std::size_t in, std::size_t hidden, std::size_t out, Rng& rng);
  Tensor operator()(const Tensor& x) const { return second(ops::gelu(first(x))); }
  void collect(const std::string& prefix, ParamList& out) const;
};

/// Overwrites every value with `v`; used to build degenerate parameter sets.
void fill(Tensor& t, double v);

}  // namespace mvp
