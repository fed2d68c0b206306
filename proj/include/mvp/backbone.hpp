// Copyright 2026 The mvprompt Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <cstdint>
#include <filesystem>
#include <memory>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "mvp/nn.hpp"
#include "mvp/prompt_fusion.hpp"
#include "mvp/weights.hpp"

namespace mvp {

struct BackboneFeatures {
  Tensor data;  // [M, C3, H1, W1]
};

/// Batch normalization over [B, C, H, W]. Scale and shift are trainable;
/// running statistics are buffers.
struct BatchNorm {
  Tensor gamma;
  Tensor beta;
  Tensor running_mean;
  Tensor running_var;

  BatchNorm() = default;
  explicit BatchNorm(std::size_t channels);
  Tensor operator()(const Tensor& x, bool train);
  void collect(const std::string& prefix, ParamList& out) const;
};

/// A pretrained 2D trunk (classification head removed) whose convolution
/// weights are frozen. Only normalization layers adapt during training.
class FrozenBackbone {
 public:
  FrozenBackbone(FrozenBackbone&&) noexcept;
  FrozenBackbone& operator=(FrozenBackbone&&) noexcept;
  ~FrozenBackbone();

  const std::string& arch() const;
  std::size_t out_channels() const;
  /// Total spatial reduction factor; inputs must be a multiple of it.
  std::size_t downsample() const;
  std::size_t output_size(std::size_t input) const { return input / downsample(); }

  /// Per-image forward of [B, 3, H, W] prompts. `train_mode` only controls
  /// whether normalization uses and updates batch statistics.
  BackboneFeatures extract(const VisionPrompt& prompts, bool train_mode);

  /// Every tensor with its partition (frozen / trainable / buffer).
  ParamList parameters() const;
  std::size_t parameter_count() const;

  WeightFile state() const;
  /// Copies tensors from `file`; the manifest must match exactly.
  void load_state(const WeightFile& file, const std::string& source = "weights");

  struct Impl;  // architecture internals, defined in backbone.cpp

 private:
  explicit FrozenBackbone(std::unique_ptr<Impl> impl);
  std::unique_ptr<Impl> impl_;

  friend FrozenBackbone load_backbone(std::string_view, const std::optional<std::filesystem::path>&,
                                      std::uint64_t);
};

std::vector<std::string> available_architectures();

/// Builds `arch` and loads `weights_path` when given. Without weights the
/// trunk is randomly initialized from `seed`, which only makes sense for
/// desk-scale experiments.
FrozenBackbone load_backbone(std::string_view arch,
                             const std::optional<std::filesystem::path>& weights_path,
                             std::uint64_t seed = 0);

}  // namespace mvp
