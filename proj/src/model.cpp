// Copyright 2026 The mvprompt Authors
// SPDX-License-Identifier: Apache-2.0

#include "mvp/model.hpp"

#include <string>

#include "mvp/errors.hpp"
#include "mvp/ops.hpp"

namespace mvp {

void ModelConfig::validate() const {
  if (num_classes < 2) throw ValidationError("model needs at least 2 classes");
  if (views < 1) throw ValidationError("model needs at least one view");
  if (grid < 1) throw ValidationError("grid size must be positive");
  if (k_neighbors < 1) throw ValidationError("k_neighbors must be positive");
  if (mode != FusionMode::baseline && grid < fusion.tokenizer_kernel) {
    throw ValidationError("grid " + std::to_string(grid) + " is smaller than the tokenizer kernel " +
                          std::to_string(fusion.tokenizer_kernel));
  }
}

namespace {

// Separate streams so changing one component's size leaves the others' init unchanged.
Rng component_rng(std::uint64_t seed, std::uint64_t salt) {
  std::seed_seq seq{seed, salt};
  return Rng(seq);
}

FrozenBackbone make_backbone(const ModelConfig& cfg) {
  cfg.validate();
  return load_backbone(cfg.backbone, cfg.backbone_weights, cfg.seed);
}

}  // namespace

MvNet::MvNet(const ModelConfig& config)
    : config_(config), views_(make_view_set(config.views)), backbone_(make_backbone(config)) {
  Rng enc_rng = component_rng(config.seed, 1);
  Rng fusion_rng = component_rng(config.seed, 2);
  Rng head_rng = component_rng(config.seed, 3);
  encoder_ = PointEncoder(config.fusion.c1, config.k_neighbors, enc_rng);
  fusion_ = FusionParams(config.fusion, fusion_rng);
  const std::size_t f = backbone_.downsample();
  if (config.grid % f != 0) {
    throw ValidationError("grid " + std::to_string(config.grid) + " must be a multiple of " +
                          std::to_string(f) + " for backbone " + backbone_.arch());
  }
  head_ = ClassificationHead(config.views, backbone_.out_channels(), config.num_classes, head_rng);
}

MultiViewFeatureMap MvNet::feature_maps(const PointCloud& cloud) const {
  const PointFeatureSet feats = encoder_.encode(cloud);
  return densify_shift(grid_project(cloud, feats, views_, config_.grid, config_.grid));
}

VisionPrompt MvNet::prompts(const PointCloud& cloud) const {
  return fuse_pipeline(feature_maps(cloud), fusion_, config_.mode);
}

ClassScores MvNet::forward(std::span<const PointCloud> batch, bool train) {
  if (batch.empty()) throw ValidationError("forward: empty batch");
  std::vector<Tensor> images;
  images.reserve(batch.size());
  for (const auto& cloud : batch) images.push_back(prompts(cloud).images);
  VisionPrompt stacked{images.size() == 1 ? images.front() : ops::concat(images, 0)};
  return head_.forward(backbone_.extract(stacked, train));
}

ParamList MvNet::parameters() const {
  ParamList out;
  encoder_.collect("encoder", out);
  fusion_.collect("fusion", out);
  for (auto& p : backbone_.parameters()) {
    p.name = "backbone." + p.name;
    out.push_back(std::move(p));
  }
  head_.collect("head", out);
  return out;
}

std::vector<Tensor> MvNet::trainable() const {
  std::vector<Tensor> out;
  for (const auto& p : parameters()) {
    if (p.role == ParamRole::trainable) out.push_back(p.tensor);
  }
  return out;
}

}  // namespace mvp
