// Copyright 2026 The mvprompt Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <string>
#include <string_view>

#include "mvp/nn.hpp"
#include "mvp/projection.hpp"
#include "mvp/tensor.hpp"

namespace mvp {

/// Patch tokens of all views in one sequence, view-major then row-major.
struct TokenSequence {
  Tensor tokens;  // [M * P * P, C2]
  std::size_t patch_side = 0;
  std::size_t views = 0;

  std::size_t length() const { return tokens.dim(0); }
  std::size_t channels() const { return tokens.dim(1); }
};

struct VisionPrompt {
  Tensor images;  // [M, 3, H, W]

  std::size_t views() const { return images.dim(0); }
};

struct FusionConfig {
  std::size_t c1 = 64;
  std::size_t c2 = 256;
  std::size_t tokenizer_kernel = 7;
  std::size_t tokenizer_stride = 16;
  bool attention_residual = true;
  bool standardize_prompts = true;
};

/// Learnable weights of the multi-view prompt module.
struct FusionParams {
  FusionConfig config;
  Conv2d tokenizer;      // C1 -> C2, 7x7, strided, no padding
  Tensor norm_gamma;     // [C2]
  Tensor norm_beta;      // [C2]
  Linear query;          // C2 -> C2
  Linear key;
  Linear value;
  Conv2d upsample_conv;  // C2 -> C1, 3x3 same padding
  Conv2d fuse_conv;      // 2*C1 -> C1, 1x1
  Conv2d prompt_conv;    // C1 -> 3, 3x3 same padding

  FusionParams() = default;
  FusionParams(const FusionConfig& cfg, Rng& rng);

  void collect(const std::string& prefix, ParamList& out) const;
  /// Only the parameters fuse_pipeline touches in `baseline` mode.
  void collect_prompt_head(const std::string& prefix, ParamList& out) const;
};

enum class FusionMode { baseline, attention_only, full };

FusionMode parse_fusion_mode(std::string_view name);
std::string to_string(FusionMode mode);

/// Number of patches per side for an input of `size` pixels.
std::size_t patch_side_for(std::size_t size, const FusionConfig& cfg);

/// Per-view strided 7x7 convolution, flattened into one token sequence.
TokenSequence tokenize(const MultiViewFeatureMap& maps, const FusionParams& params);

struct AttentionOutput {
  TokenSequence tokens;
  Tensor weights;  // [T, T], rows sum to 1
};

/// Single-head self-attention over every token of every view:
/// normalize, project to Q/K/V, softmax(Q K^T / sqrt(C2)) V, plus the input
/// when the residual is enabled.
AttentionOutput attend(const TokenSequence& seq, const FusionParams& params);

/// Tokens back to [M, C2, P, P], corner-aligned bilinear resize to h x w, then
/// a 3x3 convolution to C1 channels.
MultiViewFeatureMap detokenize_upsample(const TokenSequence& seq, const FusionParams& params,
                                        std::size_t h, std::size_t w);

/// GELU(conv1x1(concat(original, complement))).
MultiViewFeatureMap conv_fuse(const MultiViewFeatureMap& original,
                              const MultiViewFeatureMap& complement, const FusionParams& params);

/// GELU(conv3x3(fused)) with 3 output channels, before standardization.
Tensor prompt_activations(const MultiViewFeatureMap& fused, const FusionParams& params);
/// prompt_activations followed by per-view, per-channel standardization.
VisionPrompt generate_prompts(const MultiViewFeatureMap& fused, const FusionParams& params);

/// baseline:       generate_prompts(maps)
/// attention_only: generate_prompts(maps + complement)
/// full:           generate_prompts(conv_fuse(maps, complement))
/// where complement = detokenize_upsample(attend(tokenize(maps))).
VisionPrompt fuse_pipeline(const MultiViewFeatureMap& maps, const FusionParams& params,
                           FusionMode mode);

/// Reorders [M, C, P, P] into [M*P*P, C] and back.
Tensor maps_to_tokens(const Tensor& maps);
Tensor tokens_to_maps(const Tensor& tokens, std::size_t views, std::size_t side);

}  // namespace mvp
