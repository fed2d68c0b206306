// Copyright 2026 The mvprompt Authors
// SPDX-License-Identifier: Apache-2.0

#include <gtest/gtest.h>

#include <cmath>
#include <random>

#include "mvp/nn.hpp"
#include "mvp/ops.hpp"
#include "mvp/tensor.hpp"
#include "support/oracles.hpp"

namespace {

using mvp::Tensor;
namespace ops = mvp::ops;

constexpr double kGradTol = 1e-4;

TEST(Tensor, CopiesAliasStorage) {
  Tensor a({2, 2}, 1.0);
  Tensor b = a;
  b[3] = 5.0;
  EXPECT_EQ(a[3], 5.0);
  EXPECT_TRUE(a.same_storage(b));
  Tensor c = a.clone();
  c[0] = -1.0;
  EXPECT_EQ(a[0], 1.0);
}

TEST(Tensor, BackwardAccumulatesIntoLeaves) {
  auto x = Tensor::parameter({3}, {1.0, 2.0, 3.0});
  ops::sum(ops::mul(x, x)).backward();
  EXPECT_DOUBLE_EQ(x.grad()[0], 2.0);
  EXPECT_DOUBLE_EQ(x.grad()[2], 6.0);
  ops::sum(x).backward();
  EXPECT_DOUBLE_EQ(x.grad()[0], 3.0);
  x.zero_grad();
  EXPECT_DOUBLE_EQ(x.grad()[1], 0.0);
}

TEST(Tensor, NoGradGuardStopsRecording) {
  auto x = Tensor::parameter({2}, {1.0, 2.0});
  Tensor y;
  {
    mvp::NoGradGuard guard;
    y = ops::scale(x, 2.0);
  }
  EXPECT_FALSE(y.requires_grad());
  EXPECT_TRUE(mvp::grad_enabled());
}

TEST(Ops, Conv2dMatchesDirectLoop) {
  std::mt19937_64 rng(11);
  std::uniform_int_distribution<std::size_t> dim(1, 3), side(3, 9), kern(1, 3), str(1, 2), pd(0, 1);
  for (int trial = 0; trial < 100; ++trial) {
    const std::size_t b = dim(rng), c = dim(rng), o = dim(rng), h = side(rng), w = side(rng), k = kern(rng);
    mvp::Conv2d layer(c, o, k, {str(rng), pd(rng)}, rng, trial % 2 == 0);
    const Tensor x = oracle::random_tensor({b, c, h, w}, rng);
    EXPECT_LT(oracle::max_abs_diff(oracle::values(layer(x)), oracle::conv2d(x, layer)), 1e-9);
  }
}

TEST(Ops, BilinearMatchesLoop) {
  std::mt19937_64 rng(12);
  std::uniform_int_distribution<std::size_t> small(1, 5), big(1, 12);
  for (int trial = 0; trial < 100; ++trial) {
    const std::size_t c = small(rng), h = small(rng), w = small(rng), oh = big(rng), ow = big(rng);
    const Tensor x = oracle::random_tensor({1, c, h, w}, rng);
    const Tensor y = ops::upsample_bilinear(x, oh, ow);
    EXPECT_LT(oracle::max_abs_diff(oracle::values(y), oracle::bilinear(oracle::values(x), c, h, w, oh, ow)), 1e-12);
  }
}

TEST(Ops, BilinearKeepsCorners) {
  std::mt19937_64 rng(13);
  const Tensor x = oracle::random_tensor({1, 1, 3, 4}, rng);
  const Tensor y = ops::upsample_bilinear(x, 7, 10);
  EXPECT_DOUBLE_EQ(y[0], x[0]);
  EXPECT_DOUBLE_EQ(y[9], x[3]);
  EXPECT_DOUBLE_EQ(y[69], x[11]);
}

TEST(Ops, SoftmaxRowsSumToOne) {
  std::mt19937_64 rng(14);
  const Tensor x = oracle::random_tensor({6, 9}, rng, -30.0, 30.0);
  const Tensor p = ops::softmax_rows(x);
  const Tensor lp = ops::log_softmax_rows(x);
  for (std::size_t r = 0; r < 6; ++r) {
    double s = 0.0;
    for (std::size_t c = 0; c < 9; ++c) {
      s += p[r * 9 + c];
      EXPECT_NEAR(std::exp(lp[r * 9 + c]), p[r * 9 + c], 1e-12);
    }
    EXPECT_NEAR(s, 1.0, 1e-12);
  }
}

TEST(Ops, SoftmaxSurvivesLargeLogits) {
  const Tensor x({1, 3}, std::vector<double>{1000.0, 1000.0, -1000.0});
  const Tensor p = ops::softmax_rows(x);
  EXPECT_NEAR(p[0], 0.5, 1e-12);
  EXPECT_TRUE(std::isfinite(ops::log_softmax_rows(x)[2]));
}

TEST(Ops, InstanceStandardizeGivesZeroMeanUnitVariance) {
  std::mt19937_64 rng(15);
  const Tensor x = oracle::random_tensor({2, 3, 5, 5}, rng, -4.0, 9.0);
  const Tensor y = ops::instance_standardize(x);
  for (std::size_t plane = 0; plane < 6; ++plane) {
    double m = 0.0, v = 0.0;
    for (std::size_t i = 0; i < 25; ++i) m += y[plane * 25 + i];
    m /= 25.0;
    for (std::size_t i = 0; i < 25; ++i) v += (y[plane * 25 + i] - m) * (y[plane * 25 + i] - m);
    EXPECT_NEAR(m, 0.0, 1e-12);
    EXPECT_NEAR(v / 25.0, 1.0, 1e-3);
  }
}

TEST(Ops, ShapeMismatchThrows) {
  EXPECT_ANY_THROW(ops::add(Tensor({2, 3}), Tensor({3, 2})));
  EXPECT_ANY_THROW(ops::matmul(Tensor({2, 3}), Tensor({2, 3})));
  EXPECT_ANY_THROW(ops::conv2d(Tensor({1, 2, 4, 4}), Tensor({1, 3, 3, 3}), Tensor()));
}

// ---------------------------------------------------------- gradients ----

class OpGradient : public ::testing::Test {
 protected:
  std::mt19937_64 rng{21};
  Tensor param(mvp::Shape s, double lo = -1.0, double hi = 1.0) {
    return oracle::random_tensor(std::move(s), rng, lo, hi, true);
  }
  void check(const std::function<Tensor()>& f, std::vector<Tensor> params) {
    const auto r = oracle::grad_check([&] { return oracle::random_readout(f(), 99); }, std::move(params));
    EXPECT_LT(r.worst_rel, kGradTol);
    EXPECT_FALSE(r.all_zero);
  }
};

TEST_F(OpGradient, Elementwise) {
  auto a = param({3, 4}), b = param({3, 4});
  check([&] { return ops::add(a, b); }, {a, b});
  check([&] { return ops::sub(a, b); }, {a, b});
  check([&] { return ops::mul(a, b); }, {a, b});
  check([&] { return ops::scale(a, -1.7); }, {a});
  check([&] { return ops::gelu(a); }, {a});
  auto away = param({3, 4}, 0.2, 1.0);
  check([&] { return ops::relu(away); }, {away});
}

TEST_F(OpGradient, Reductions) {
  auto a = param({2, 5});
  check([&] { return ops::scale(ops::sum(a), 1.0); }, {a});
  check([&] { return ops::mean(a); }, {a});
}

TEST_F(OpGradient, Matrix) {
  auto a = param({3, 4}), b = param({4, 2}), w = param({5, 4}), bias = param({5});
  check([&] { return ops::matmul(a, b); }, {a, b});
  check([&] { return ops::transpose(a); }, {a});
  check([&] { return ops::linear(a, w, bias); }, {a, w, bias});
}

TEST_F(OpGradient, RowNormalizers) {
  auto x = param({4, 6}, -3.0, 3.0), g = param({6}), b = param({6});
  check([&] { return ops::softmax_rows(x); }, {x});
  check([&] { return ops::log_softmax_rows(x); }, {x});
  check([&] { return ops::layer_norm_rows(x, g, b); }, {x, g, b});
}

TEST_F(OpGradient, Convolution) {
  auto x = param({2, 3, 6, 5}), w = param({4, 3, 3, 3}), b = param({4});
  check([&] { return ops::conv2d(x, w, b, {1, 1}); }, {x, w, b});
  check([&] { return ops::conv2d(x, w, Tensor(), {2, 0}); }, {x, w});
}

TEST_F(OpGradient, BatchNormTrainMode) {
  auto x = param({3, 2, 3, 3}), g = param({2}), b = param({2});
  Tensor rm({2}, 0.0), rv({2}, 1.0);
  check([&] { return ops::batch_norm2d(x, g, b, rm, rv, true); }, {x, g, b});
  check([&] { return ops::batch_norm2d(x, g, b, rm, rv, false); }, {x, g, b});
}

TEST_F(OpGradient, Pooling) {
  // Distinct, well separated values keep max pooling away from ties.
  std::vector<double> v(2 * 2 * 5 * 5);
  for (std::size_t i = 0; i < v.size(); ++i) v[i] = static_cast<double>((i * 37) % v.size()) * 0.1;
  auto x = Tensor::parameter({2, 2, 5, 5}, v);
  check([&] { return ops::max_pool2d(x, 3, 2, 1); }, {x});
  check([&] { return ops::global_avg_pool(x); }, {x});
}

TEST_F(OpGradient, Reshaping) {
  auto a = param({2, 3, 2}), b = param({2, 1, 2});
  check([&] { return ops::concat({a, b}, 1); }, {a, b});
  check([&] { return ops::slice(a, 1, 1, 3); }, {a});
  check([&] { return a.reshape({3, 4}); }, {a});
}

TEST_F(OpGradient, ResizeAndStandardize) {
  auto x = param({1, 2, 3, 4});
  check([&] { return ops::upsample_bilinear(x, 5, 7); }, {x});
  check([&] { return ops::instance_standardize(x); }, {x});
}

}  // namespace
