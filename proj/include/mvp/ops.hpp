// Copyright 2026 The mvprompt Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <cstddef>
#include <vector>

#include "mvp/tensor.hpp"

/// Differentiable tensor operations. Images are NCHW; matrices are row-major.
namespace mvp::ops {

Tensor add(const Tensor& a, const Tensor& b);
Tensor sub(const Tensor& a, const Tensor& b);
Tensor mul(const Tensor& a, const Tensor& b);
Tensor scale(const Tensor& a, double s);

Tensor sum(const Tensor& a);
Tensor mean(const Tensor& a);
/// Σ_i w_i a_i with constant weights; used to reduce to a scalar in tests.
Tensor weighted_sum(const Tensor& a, const std::vector<double>& weights);

/// [m,k] x [k,n] -> [m,n]
Tensor matmul(const Tensor& a, const Tensor& b);
Tensor transpose(const Tensor& a);
/// x[n,in] * w[out,in]^T + b[out]; `b` may be undefined.
Tensor linear(const Tensor& x, const Tensor& w, const Tensor& b);

double gelu_value(double x);
Tensor gelu(const Tensor& x);
Tensor relu(const Tensor& x);

Tensor softmax_rows(const Tensor& x);
Tensor log_softmax_rows(const Tensor& x);
/// Row-wise normalization over the last axis of a [n,c] matrix.
Tensor layer_norm_rows(const Tensor& x, const Tensor& gamma, const Tensor& beta,
                       double eps = 1e-5);

struct Conv2dOptions {
  std::size_t stride = 1;
  std::size_t pad = 0;
};
std::size_t conv_out_size(std::size_t in, std::size_t kernel, std::size_t stride, std::size_t pad);
/// x[B,C,H,W] (*) w[O,C,kh,kw] + b[O]; `b` may be undefined.
Tensor conv2d(const Tensor& x, const Tensor& w, const Tensor& b, Conv2dOptions opts = {});

/// Running statistics are updated in place when `train` is true.
Tensor batch_norm2d(const Tensor& x, const Tensor& gamma, const Tensor& beta,
                    Tensor& running_mean, Tensor& running_var, bool train,
                    double momentum = 0.1, double eps = 1e-5);

Tensor max_pool2d(const Tensor& x, std::size_t kernel, std::size_t stride, std::size_t pad = 0);
/// [B,C,H,W] -> [B,C]
Tensor global_avg_pool(const Tensor& x);

/// Concatenate along `axis`; all other extents must agree.
Tensor concat(const std::vector<Tensor>& parts, std::size_t axis);
/// Half-open range [begin, end) along `axis`.
Tensor slice(const Tensor& x, std::size_t axis, std::size_t begin, std::size_t end);

/// Corner-aligned bilinear resize of [B,C,h,w] to [B,C,out_h,out_w].
Tensor upsample_bilinear(const Tensor& x, std::size_t out_h, std::size_t out_w);

/// Zero-mean, unit-variance per (batch, channel) plane of a [B,C,H,W] tensor.
Tensor instance_standardize(const Tensor& x, double eps = 1e-5);

}  // namespace mvp::ops
