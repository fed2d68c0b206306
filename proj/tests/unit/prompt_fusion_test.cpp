// Copyright 2026 The mvprompt Authors
// SPDX-License-Identifier: Apache-2.0

#include <gtest/gtest.h>

#include <random>

#include "mvp/errors.hpp"
#include "mvp/ops.hpp"
#include "mvp/prompt_fusion.hpp"
#include "support/oracles.hpp"

namespace {

using mvp::FusionConfig;
using mvp::FusionMode;
using mvp::FusionParams;
using mvp::Tensor;

FusionConfig small_config(std::size_t c1 = 3, std::size_t c2 = 4) {
  FusionConfig cfg;
  cfg.c1 = c1;
  cfg.c2 = c2;
  cfg.tokenizer_kernel = 3;
  cfg.tokenizer_stride = 2;
  return cfg;
}

std::vector<Tensor> tensors(const FusionParams& p) {
  mvp::ParamList list;
  p.collect("fusion", list);
  std::vector<Tensor> out;
  for (auto& n : list) out.push_back(n.tensor);
  return out;
}

TEST(Tokenize, MatchesConvolutionLoop) {
  std::mt19937_64 rng(51);
  for (int trial = 0; trial < 100; ++trial) {
    auto cfg = small_config(1 + trial % 3, 1 + trial % 5);
    cfg.tokenizer_kernel = 1 + trial % 3;
    cfg.tokenizer_stride = 1 + trial % 3;
    const std::size_t m = 1 + trial % 4, side = cfg.tokenizer_kernel + trial % 6;
    FusionParams params(cfg, rng);
    const Tensor maps = oracle::random_tensor({m, cfg.c1, side, side}, rng);
    const auto seq = mvp::tokenize({maps}, params);
    std::size_t oh = 0, ow = 0;
    const auto bias = oracle::values(params.tokenizer.bias);
    const auto conv = oracle::conv2d(oracle::values(maps), m, cfg.c1, side, side, oracle::values(params.tokenizer.weight),
                                     &bias, cfg.c2, cfg.tokenizer_kernel, cfg.tokenizer_stride, 0, &oh, &ow);
    ASSERT_EQ(seq.patch_side, oh);
    ASSERT_EQ(seq.length(), m * oh * ow);
    for (std::size_t v = 0; v < m; ++v) {
      for (std::size_t p = 0; p < oh * ow; ++p) {
        for (std::size_t c = 0; c < cfg.c2; ++c) {
          ASSERT_NEAR(seq.tokens[(v * oh * ow + p) * cfg.c2 + c], conv[(v * cfg.c2 + c) * oh * ow + p], 1e-9);
        }
      }
    }
  }
}

TEST(Tokenize, PatchSideFollowsKernelAndStride) {
  FusionConfig cfg;
  EXPECT_EQ(mvp::patch_side_for(224, cfg), 14u);
  cfg.tokenizer_stride = 4;
  EXPECT_EQ(mvp::patch_side_for(32, cfg), 7u);
}

TEST(Tokenize, RejectsMapsSmallerThanKernel) {
  std::mt19937_64 rng(52);
  FusionParams params(small_config(), rng);
  EXPECT_THROW(mvp::tokenize({Tensor({1, 3, 2, 2})}, params), mvp::ValidationError);
  EXPECT_THROW(mvp::tokenize({Tensor({1, 2, 8, 8})}, params), mvp::ValidationError);
}

TEST(TokenLayout, RoundTrips) {
  std::mt19937_64 rng(53);
  const Tensor maps = oracle::random_tensor({3, 5, 4, 4}, rng);
  const Tensor back = mvp::tokens_to_maps(mvp::maps_to_tokens(maps), 3, 4);
  EXPECT_EQ(oracle::max_abs_diff(oracle::values(back), oracle::values(maps)), 0.0);
}

TEST(Attention, MatchesLoopAndRowsSumToOne) {
  std::mt19937_64 rng(54);
  for (int trial = 0; trial < 100; ++trial) {
    auto cfg = small_config(2, 1 + trial % 6);
    cfg.attention_residual = trial % 2 == 0;
    FusionParams params(cfg, rng);
    oracle::randomize(params.norm_gamma, rng, 0.5, 1.5);
    oracle::randomize(params.norm_beta, rng);
    const std::size_t t = 2 + trial % 9;
    const Tensor tokens = oracle::random_tensor({t, cfg.c2}, rng, -2.0, 2.0);
    const auto out = mvp::attend({tokens, 1, t}, params);
    const auto want = oracle::attention(oracle::values(tokens), t, cfg.c2, params.norm_gamma, params.norm_beta,
                                        params.query, params.key, params.value, cfg.attention_residual);
    ASSERT_LT(oracle::max_abs_diff(oracle::values(out.tokens.tokens), want.out), 1e-9) << "trial " << trial;
    ASSERT_LT(oracle::max_abs_diff(oracle::values(out.weights), want.weights), 1e-9);
    for (std::size_t r = 0; r < t; ++r) {
      double s = 0.0;
      for (std::size_t c = 0; c < t; ++c) s += out.weights[r * t + c];
      ASSERT_NEAR(s, 1.0, 1e-6);
    }
  }
}

TEST(Attention, SpansTokensOfEveryView) {
  // Tokens from different views must be able to exchange information.
  std::mt19937_64 rng(55);
  FusionParams params(small_config(), rng);
  Tensor tokens = oracle::random_tensor({8, 4}, rng);  // two views of 2x2 patches
  const auto before = mvp::attend({tokens, 2, 2}, params);
  tokens[7 * 4] += 1.0;  // touch a token of view 1
  const auto after = mvp::attend({tokens, 2, 2}, params);
  EXPECT_GT(std::abs(after.tokens.tokens[0] - before.tokens.tokens[0]), 1e-9);  // token 0 sits in view 0
}

TEST(Upsample, MatchesBilinearThenConvolution) {
  std::mt19937_64 rng(56);
  for (int trial = 0; trial < 100; ++trial) {
    const auto cfg = small_config(1 + trial % 3, 1 + trial % 4);
    FusionParams params(cfg, rng);
    const std::size_t m = 1 + trial % 3, side = 1 + trial % 4, out = side + trial % 7;
    const Tensor tokens = oracle::random_tensor({m * side * side, cfg.c2}, rng);
    const auto up = mvp::detokenize_upsample({tokens, side, m}, params, out, out);
    const Tensor grid = mvp::tokens_to_maps(tokens, m, side);
    oracle::Vec resized;
    for (std::size_t v = 0; v < m; ++v) {
      const oracle::Vec one(grid.values().begin() + static_cast<std::ptrdiff_t>(v * cfg.c2 * side * side),
                            grid.values().begin() + static_cast<std::ptrdiff_t>((v + 1) * cfg.c2 * side * side));
      const auto r = oracle::bilinear(one, cfg.c2, side, side, out, out);
      resized.insert(resized.end(), r.begin(), r.end());
    }
    const auto bias = oracle::values(params.upsample_conv.bias);
    const auto want = oracle::conv2d(resized, m, cfg.c2, out, out, oracle::values(params.upsample_conv.weight), &bias,
                                     cfg.c1, 3, 1, 1);
    ASSERT_LT(oracle::max_abs_diff(oracle::values(up.data), want), 1e-9) << "trial " << trial;
  }
}

TEST(ConvFuse, MatchesGeluOfPointwiseConvolution) {
  std::mt19937_64 rng(57);
  for (int trial = 0; trial < 100; ++trial) {
    const auto cfg = small_config(1 + trial % 4);
    FusionParams params(cfg, rng);
    const std::size_t m = 1 + trial % 3, h = 2 + trial % 5;
    const Tensor a = oracle::random_tensor({m, cfg.c1, h, h}, rng), b = oracle::random_tensor({m, cfg.c1, h, h}, rng);
    const auto fused = mvp::conv_fuse({a}, {b}, params);
    auto want = oracle::conv2d(mvp::ops::concat({a, b}, 1), params.fuse_conv);
    for (auto& v : want) v = oracle::gelu(v);
    ASSERT_LT(oracle::max_abs_diff(oracle::values(fused.data), want), 1e-9);
  }
}

TEST(Prompts, AreStandardizedPerViewAndChannel) {
  std::mt19937_64 rng(58);
  FusionParams params(small_config(), rng);
  const Tensor maps = oracle::random_tensor({2, 3, 6, 6}, rng);
  const auto prompts = mvp::generate_prompts({maps}, params);
  auto act = oracle::conv2d(maps, params.prompt_conv);
  for (auto& v : act) v = oracle::gelu(v);
  for (std::size_t plane = 0; plane < 6; ++plane) {
    double m = 0.0, var = 0.0;
    for (std::size_t i = 0; i < 36; ++i) m += act[plane * 36 + i];
    m /= 36.0;
    for (std::size_t i = 0; i < 36; ++i) var += (act[plane * 36 + i] - m) * (act[plane * 36 + i] - m);
    var /= 36.0;
    for (std::size_t i = 0; i < 36; ++i) {
      ASSERT_NEAR(prompts.images[plane * 36 + i], (act[plane * 36 + i] - m) / std::sqrt(var + 1e-5), 1e-9);
    }
  }
  EXPECT_EQ(prompts.images.dim(1), 3u);
}

TEST(Prompts, RawActivationsWhenStandardizationIsOff) {
  std::mt19937_64 rng(59);
  auto cfg = small_config();
  cfg.standardize_prompts = false;
  FusionParams params(cfg, rng);
  const Tensor maps = oracle::random_tensor({1, 3, 5, 5}, rng);
  EXPECT_EQ(oracle::values(mvp::generate_prompts({maps}, params).images),
            oracle::values(mvp::prompt_activations({maps}, params)));
}

TEST(Pipeline, BaselineSkipsFusion) {
  std::mt19937_64 rng(60);
  FusionParams params(small_config(), rng);
  const Tensor maps = oracle::random_tensor({2, 3, 7, 7}, rng);
  EXPECT_EQ(oracle::values(mvp::fuse_pipeline({maps}, params, FusionMode::baseline).images),
            oracle::values(mvp::generate_prompts({maps}, params).images));
}

TEST(Pipeline, FullEqualsAttentionOnlyWhenFuseConvIsIdentitySum) {
  // With fuse weights [I | I], zero bias, and inputs deep in the linear part of
  // GELU, conv_fuse(a, b) reduces to a + b.
  std::mt19937_64 rng(61);
  const auto cfg = small_config();
  FusionParams params(cfg, rng);
  mvp::fill(params.fuse_conv.bias, 0.0);
  mvp::fill(params.fuse_conv.weight, 0.0);
  for (std::size_t o = 0; o < cfg.c1; ++o) {
    params.fuse_conv.weight[o * 2 * cfg.c1 + o] = 1.0;
    params.fuse_conv.weight[o * 2 * cfg.c1 + cfg.c1 + o] = 1.0;
  }
  for (auto& v : params.upsample_conv.weight.values()) v *= 1e-3;
  mvp::fill(params.upsample_conv.bias, 0.0);
  const Tensor maps = oracle::random_tensor({2, 3, 7, 7}, rng, 20.0, 30.0);
  const auto full = mvp::fuse_pipeline({maps}, params, FusionMode::full);
  const auto attn = mvp::fuse_pipeline({maps}, params, FusionMode::attention_only);
  EXPECT_LT(oracle::max_abs_diff(oracle::values(full.images), oracle::values(attn.images)), 1e-9);
}

TEST(Pipeline, ModesDifferInGeneral) {
  std::mt19937_64 rng(62);
  FusionParams params(small_config(), rng);
  const Tensor maps = oracle::random_tensor({2, 3, 7, 7}, rng);
  const auto a = oracle::values(mvp::fuse_pipeline({maps}, params, FusionMode::full).images);
  const auto b = oracle::values(mvp::fuse_pipeline({maps}, params, FusionMode::attention_only).images);
  EXPECT_GT(oracle::max_abs_diff(a, b), 1e-6);
}

TEST(Pipeline, GradientsMatchFiniteDifferences) {
  std::mt19937_64 rng(63);
  for (FusionMode mode : {FusionMode::baseline, FusionMode::attention_only, FusionMode::full}) {
    FusionParams params(small_config(2, 3), rng);
    oracle::randomize(params.norm_gamma, rng, 0.5, 1.5);
    oracle::randomize(params.norm_beta, rng);
    auto maps = oracle::random_tensor({2, 2, 7, 7}, rng, -1.0, 1.0, true);
    auto ts = tensors(params);
    if (mode == FusionMode::baseline) ts = {params.prompt_conv.weight, params.prompt_conv.bias};
    ts.push_back(maps);
    const auto r = oracle::grad_check(
        [&] { return oracle::random_readout(mvp::fuse_pipeline({maps}, params, mode).images, 10); }, ts);
    EXPECT_LT(r.worst_rel, 1e-4) << mvp::to_string(mode);
    EXPECT_FALSE(r.all_zero);
  }
}

TEST(Pipeline, AttentionWithoutResidualHasGradients) {
  std::mt19937_64 rng(64);
  auto cfg = small_config(2, 3);
  cfg.attention_residual = false;
  FusionParams params(cfg, rng);
  const Tensor maps = oracle::random_tensor({2, 2, 7, 7}, rng);
  const auto r = oracle::grad_check(
      [&] { return oracle::random_readout(mvp::fuse_pipeline({maps}, params, FusionMode::full).images, 11); },
      tensors(params));
  EXPECT_LT(r.worst_rel, 1e-4);
}

TEST(FusionMode, ParsesNames) {
  EXPECT_EQ(mvp::parse_fusion_mode("attention-only"), FusionMode::attention_only);
  EXPECT_EQ(mvp::parse_fusion_mode(mvp::to_string(FusionMode::full)), FusionMode::full);
  EXPECT_THROW(mvp::parse_fusion_mode("nope"), mvp::ValidationError);
}

}  // namespace
