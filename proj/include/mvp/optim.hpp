// Copyright 2026 The mvprompt Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <cstdint>
#include <vector>

#include "mvp/nn.hpp"

namespace mvp {

struct AdamWOptions {
  double lr = 5e-4;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double eps = 1e-8;
  double weight_decay = 5e-2;
};

/// Adam with decoupled weight decay. Each step first shrinks the weights by
/// (1 - lr * weight_decay) and then applies the bias-corrected Adam update.
class AdamW {
 public:
  AdamW(std::vector<Tensor> params, AdamWOptions options);

  void set_lr(double lr) { options_.lr = lr; }
  double lr() const { return options_.lr; }
  std::uint64_t steps() const { return step_; }

  /// Skips parameters that have no accumulated gradient.
  void step();
  void zero_grad();

  /// Moment estimates, one per parameter, in constructor order.
  std::vector<std::vector<double>>& first_moments() { return m_; }
  std::vector<std::vector<double>>& second_moments() { return v_; }
  const std::vector<std::vector<double>>& first_moments() const { return m_; }
  const std::vector<std::vector<double>>& second_moments() const { return v_; }
  const std::vector<Tensor>& params() const { return params_; }
  void set_steps(std::uint64_t step) { step_ = step; }

 private:
  std::vector<Tensor> params_;
  AdamWOptions options_;
  std::vector<std::vector<double>> m_;
  std::vector<std::vector<double>> v_;
  std::uint64_t step_ = 0;
};

/// lr_min + (lr_max - lr_min) * (1 + cos(pi * epoch / period)) / 2, no restarts.
double cosine_lr(double lr_max, double lr_min, std::size_t epoch, std::size_t period);

}  // namespace mvp
