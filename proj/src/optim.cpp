// Copyright 2026 The mvprompt Authors
// SPDX-License-Identifier: Apache-2.0

#include "mvp/optim.hpp"

#include <cmath>
#include <numbers>

#include "mvp/errors.hpp"

namespace mvp {

AdamW::AdamW(std::vector<Tensor> params, AdamWOptions options)
    : params_(std::move(params)), options_(options) {
  if (!(options_.lr >= 0.0) || !(options_.weight_decay >= 0.0) || !(options_.eps > 0.0)) {
    throw ValidationError("AdamW: lr and weight decay must be non-negative, eps positive");
  }
  for (const auto& p : params_) {
    if (!p.requires_grad()) throw ValidationError("AdamW: parameter does not require grad");
    m_.emplace_back(p.numel(), 0.0);
    v_.emplace_back(p.numel(), 0.0);
  }
}

void AdamW::step() {
  ++step_;
  const double t = static_cast<double>(step_);
  const double bc1 = 1.0 - std::pow(options_.beta1, t);
  const double bc2 = 1.0 - std::pow(options_.beta2, t);
  const double decay = 1.0 - options_.lr * options_.weight_decay;
  for (std::size_t i = 0; i < params_.size(); ++i) {
    Tensor& p = params_[i];
    if (!p.has_grad()) continue;
    auto w = p.values();
    auto g = std::as_const(p).grad();
    auto& m = m_[i];
    auto& v = v_[i];
    for (std::size_t j = 0; j < w.size(); ++j) {
      m[j] = options_.beta1 * m[j] + (1.0 - options_.beta1) * g[j];
      v[j] = options_.beta2 * v[j] + (1.0 - options_.beta2) * g[j] * g[j];
      const double denom = std::sqrt(v[j] / bc2) + options_.eps;
      w[j] = w[j] * decay - options_.lr * (m[j] / bc1) / denom;
    }
  }
}

void AdamW::zero_grad() {
  for (auto& p : params_) p.zero_grad();
}

double cosine_lr(double lr_max, double lr_min, std::size_t epoch, std::size_t period) {
  if (period == 0) return lr_max;
  const double e = static_cast<double>(std::min(epoch, period));
  return lr_min + 0.5 * (lr_max - lr_min) * (1.0 + std::cos(std::numbers::pi * e / static_cast<double>(period)));
}

}  // namespace mvp
