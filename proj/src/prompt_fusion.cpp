// Copyright 2026 The mvprompt Authors
// SPDX-License-Identifier: Apache-2.0

#include "mvp/prompt_fusion.hpp"

#include <cmath>

#include "mvp/errors.hpp"
#include "mvp/ops.hpp"

namespace mvp {

namespace {

void require_maps(const MultiViewFeatureMap& maps, std::size_t channels, const char* op) {
  const Tensor& t = maps.data;
  if (t.rank() != 4 || t.dim(1) != channels) {
    throw ValidationError(std::string(op) + ": expected [M," + std::to_string(channels) +
                          ",H,W], got " + shape_str(t.shape()));
  }
}

// out[(m*S + s), c] = in[m, c, s] or the reverse, with S spatial positions.
Tensor permute_channels_last(const Tensor& in, std::size_t m, std::size_t c, std::size_t s,
                             bool to_tokens, Shape out_shape) {
  std::vector<double> out(in.numel());
  auto src_index = [=](std::size_t v, std::size_t ch, std::size_t p) {
    return to_tokens ? (v * c + ch) * s + p : (v * s + p) * c + ch;
  };
  auto dst_index = [=](std::size_t v, std::size_t ch, std::size_t p) {
    return to_tokens ? (v * s + p) * c + ch : (v * c + ch) * s + p;
  };
  for (std::size_t v = 0; v < m; ++v)
    for (std::size_t ch = 0; ch < c; ++ch)
      for (std::size_t p = 0; p < s; ++p) out[dst_index(v, ch, p)] = in[src_index(v, ch, p)];
  return Tensor::make_result(std::move(out_shape), std::move(out), {in},
                             [=](detail::Node& self) {
    if (double* g = detail::parent_grad(self, 0)) {
      for (std::size_t v = 0; v < m; ++v)
        for (std::size_t ch = 0; ch < c; ++ch)
          for (std::size_t p = 0; p < s; ++p) g[src_index(v, ch, p)] += self.grad[dst_index(v, ch, p)];
    }
  });
}

}  // namespace

FusionParams::FusionParams(const FusionConfig& cfg, Rng& rng) : config(cfg) {
  if (cfg.c1 < 1 || cfg.c2 < 1) throw ValidationError("fusion channel counts must be positive");
  if (cfg.tokenizer_stride < 1) throw ValidationError("tokenizer stride must be positive");
  tokenizer = Conv2d(cfg.c1, cfg.c2, cfg.tokenizer_kernel, {cfg.tokenizer_stride, 0}, rng);
  norm_gamma = Tensor::parameter({cfg.c2}, std::vector<double>(cfg.c2, 1.0));
  norm_beta = Tensor::parameter({cfg.c2}, std::vector<double>(cfg.c2, 0.0));
  query = Linear(cfg.c2, cfg.c2, rng);
  key = Linear(cfg.c2, cfg.c2, rng);
  value = Linear(cfg.c2, cfg.c2, rng);
  upsample_conv = Conv2d(cfg.c2, cfg.c1, 3, {1, 1}, rng);
  fuse_conv = Conv2d(2 * cfg.c1, cfg.c1, 1, {1, 0}, rng);
  prompt_conv = Conv2d(cfg.c1, 3, 3, {1, 1}, rng);
}

void FusionParams::collect(const std::string& prefix, ParamList& out) const {
  tokenizer.collect(prefix + ".tokenizer", out);
  out.push_back({prefix + ".norm.weight", norm_gamma, ParamRole::trainable});
  out.push_back({prefix + ".norm.bias", norm_beta, ParamRole::trainable});
  query.collect(prefix + ".query", out);
  key.collect(prefix + ".key", out);
  value.collect(prefix + ".value", out);
  upsample_conv.collect(prefix + ".upsample_conv", out);
  fuse_conv.collect(prefix + ".fuse_conv", out);
  prompt_conv.collect(prefix + ".prompt_conv", out);
}

void FusionParams::collect_prompt_head(const std::string& prefix, ParamList& out) const {
  prompt_conv.collect(prefix + ".prompt_conv", out);
}

FusionMode parse_fusion_mode(std::string_view name) {
  if (name == "baseline") return FusionMode::baseline;
  if (name == "attention_only" || name == "attention-only") return FusionMode::attention_only;
  if (name == "full") return FusionMode::full;
  throw ValidationError("unknown fusion mode '" + std::string(name) +
                        "' (expected baseline, attention_only, or full)");
}

std::string to_string(FusionMode mode) {
  switch (mode) {
    case FusionMode::baseline: return "baseline";
    case FusionMode::attention_only: return "attention_only";
    case FusionMode::full: return "full";
  }
  return "full";
}

std::size_t patch_side_for(std::size_t size, const FusionConfig& cfg) {
  return ops::conv_out_size(size, cfg.tokenizer_kernel, cfg.tokenizer_stride, 0);
}

Tensor maps_to_tokens(const Tensor& maps) {
  const std::size_t m = maps.dim(0), c = maps.dim(1), s = maps.dim(2) * maps.dim(3);
  return permute_channels_last(maps, m, c, s, true, {m * s, c});
}

Tensor tokens_to_maps(const Tensor& tokens, std::size_t views, std::size_t side) {
  const std::size_t s = side * side, c = tokens.dim(1);
  if (tokens.dim(0) != views * s) {
    throw ValidationError("tokens_to_maps: " + std::to_string(tokens.dim(0)) + " tokens do not form " +
                          std::to_string(views) + " views of " + std::to_string(side) + "x" +
                          std::to_string(side));
  }
  return permute_channels_last(tokens, views, c, s, false, {views, c, side, side});
}

TokenSequence tokenize(const MultiViewFeatureMap& maps, const FusionParams& params) {
  const FusionConfig& cfg = params.config;
  require_maps(maps, cfg.c1, "tokenize");
  if (maps.height() < cfg.tokenizer_kernel || maps.width() < cfg.tokenizer_kernel) {
    throw ValidationError("tokenize: " + std::to_string(maps.height()) + "x" +
                          std::to_string(maps.width()) + " maps are smaller than the " +
                          std::to_string(cfg.tokenizer_kernel) + "x" +
                          std::to_string(cfg.tokenizer_kernel) + " tokenizer kernel");
  }
  if (maps.height() != maps.width()) throw ValidationError("tokenize: maps must be square");
  Tensor patches = params.tokenizer(maps.data);
  const std::size_t side = patches.dim(2);
  return {maps_to_tokens(patches), side, maps.views()};
}

AttentionOutput attend(const TokenSequence& seq, const FusionParams& params) {
  const Tensor& x = seq.tokens;
  if (x.rank() != 2 || x.dim(0) == 0) throw ValidationError("attend: empty token sequence");
  const std::size_t c2 = x.dim(1);
  Tensor normed = ops::layer_norm_rows(x, params.norm_gamma, params.norm_beta);
  Tensor q = params.query(normed);
  Tensor k = params.key(normed);
  Tensor v = params.value(normed);
  Tensor logits = ops::scale(ops::matmul(q, ops::transpose(k)), 1.0 / std::sqrt(static_cast<double>(c2)));
  Tensor weights = ops::softmax_rows(logits);
  Tensor mixed = ops::matmul(weights, v);
  if (params.config.attention_residual) mixed = ops::add(x, mixed);
  return {{mixed, seq.patch_side, seq.views}, weights};
}

MultiViewFeatureMap detokenize_upsample(const TokenSequence& seq, const FusionParams& params,
                                        std::size_t h, std::size_t w) {
  Tensor grid = tokens_to_maps(seq.tokens, seq.views, seq.patch_side);
  if (grid.dim(1) != params.config.c2) {
    throw ValidationError("detokenize_upsample: tokens have " + std::to_string(grid.dim(1)) +
                          " channels, expected " + std::to_string(params.config.c2));
  }
  return {params.upsample_conv(ops::upsample_bilinear(grid, h, w))};
}

MultiViewFeatureMap conv_fuse(const MultiViewFeatureMap& original,
                              const MultiViewFeatureMap& complement, const FusionParams& params) {
  require_maps(original, params.config.c1, "conv_fuse");
  if (original.data.shape() != complement.data.shape()) {
    throw ValidationError("conv_fuse: shape mismatch " + shape_str(original.data.shape()) + " vs " +
                          shape_str(complement.data.shape()));
  }
  return {ops::gelu(params.fuse_conv(ops::concat({original.data, complement.data}, 1)))};
}

Tensor prompt_activations(const MultiViewFeatureMap& fused, const FusionParams& params) {
  require_maps(fused, params.config.c1, "generate_prompts");
  return ops::gelu(params.prompt_conv(fused.data));
}

VisionPrompt generate_prompts(const MultiViewFeatureMap& fused, const FusionParams& params) {
  Tensor act = prompt_activations(fused, params);
  if (!params.config.standardize_prompts) return {act};
  return {ops::instance_standardize(act)};
}

VisionPrompt fuse_pipeline(const MultiViewFeatureMap& maps, const FusionParams& params,
                           FusionMode mode) {
  require_maps(maps, params.config.c1, "fuse_pipeline");
  if (mode == FusionMode::baseline) return generate_prompts(maps, params);

  const TokenSequence tokens = tokenize(maps, params);
  const AttentionOutput attended = attend(tokens, params);
  const MultiViewFeatureMap complement =
      detokenize_upsample(attended.tokens, params, maps.height(), maps.width());
  if (mode == FusionMode::attention_only) {
    return generate_prompts({ops::add(maps.data, complement.data)}, params);
  }
  return generate_prompts(conv_fuse(maps, complement, params), params);
}

}  // namespace mvp
