// Copyright 2026 The mvprompt Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <cstdint>
#include <filesystem>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "mvp/backbone.hpp"
#include "mvp/classify.hpp"
#include "mvp/geometry.hpp"
#include "mvp/projection.hpp"
#include "mvp/prompt_fusion.hpp"

namespace mvp {

struct ModelConfig {
  std::size_t num_classes = 2;
  std::size_t views = 4;
  std::size_t grid = 224;  // H = W
  std::size_t k_neighbors = 32;
  FusionConfig fusion;
  FusionMode mode = FusionMode::full;
  std::string backbone = "resnet18-like";
  std::optional<std::filesystem::path> backbone_weights;
  std::uint64_t seed = 0;

  void validate() const;
};

/// The whole classifier: point encoder, multi-view projection with
/// densification, prompt fusion, frozen backbone, and classification head.
class MvNet {
 public:
  explicit MvNet(const ModelConfig& config);

  const ModelConfig& config() const { return config_; }
  const ViewSet& views() const { return views_; }
  PointEncoder& encoder() { return encoder_; }
  FusionParams& fusion() { return fusion_; }
  FrozenBackbone& backbone() { return backbone_; }
  ClassificationHead& head() { return head_; }

  /// Multi-view feature maps I1 after the densification shift.
  MultiViewFeatureMap feature_maps(const PointCloud& cloud) const;
  /// Vision prompts [M, 3, H, W] for one cloud.
  VisionPrompt prompts(const PointCloud& cloud) const;

  /// Scores for a batch of clouds. `train` switches normalization layers to
  /// batch statistics; gradients are recorded whenever grad mode is on.
  ClassScores forward(std::span<const PointCloud> batch, bool train);

  /// Every tensor with its role. Backbone names carry a "backbone." prefix.
  ParamList parameters() const;
  /// Tensors the optimizer updates, in parameters() order.
  std::vector<Tensor> trainable() const;

 private:
  ModelConfig config_;
  ViewSet views_;
  PointEncoder encoder_;
  FusionParams fusion_;
  FrozenBackbone backbone_;
  ClassificationHead head_;
};

}  // namespace mvp
