// Copyright 2026 The mvprompt Authors
// SPDX-License-Identifier: Apache-2.0

#include <gtest/gtest.h>

#include <cmath>
#include <numbers>
#include <random>

#include "mvp/errors.hpp"
#include "mvp/geometry.hpp"
#include "mvp/ops.hpp"
#include "support/oracles.hpp"

namespace {

using mvp::PointCloud;
using mvp::Tensor;

TEST(Knn, MatchesBruteForceOnRandomClouds) {
  std::mt19937_64 rng(31);
  std::uniform_int_distribution<std::size_t> size(5, 60);
  for (int trial = 0; trial < 100; ++trial) {
    const auto cloud = oracle::random_cloud(size(rng), rng);
    const std::size_t k = 1 + trial % (cloud.size() - 1);
    const auto graph = mvp::knn(cloud, k);
    const auto expected = oracle::knn(cloud.coords, k);
    for (std::size_t i = 0; i < cloud.size(); ++i) {
      const auto row = graph.row(i);
      ASSERT_EQ(std::vector<std::size_t>(row.begin(), row.end()), expected[i]) << "trial " << trial << " point " << i;
    }
  }
}

TEST(Knn, TiesGoToLowerIndexAndSelfIsExcluded) {
  // Points 1..4 all sit at distance 1 from point 0.
  PointCloud pc;
  pc.coords.resize(5, 3);
  pc.coords << 0, 0, 0, 1, 0, 0, 0, 1, 0, -1, 0, 0, 0, -1, 0;
  const auto g = mvp::knn(pc, 2);
  EXPECT_EQ(g.row(0)[0], 1u);
  EXPECT_EQ(g.row(0)[1], 2u);
  for (std::size_t i = 0; i < 5; ++i) {
    for (auto j : g.row(i)) EXPECT_NE(j, i);
  }
}

TEST(Knn, RejectsBadK) {
  std::mt19937_64 rng(32);
  const auto cloud = oracle::random_cloud(8, rng);
  EXPECT_THROW(mvp::knn(cloud, 8), mvp::ValidationError);
  EXPECT_THROW(mvp::knn(cloud, 0), mvp::ValidationError);
}

TEST(PointEncoder, EdgeEmbedMatchesLoop) {
  std::mt19937_64 rng(33);
  for (int trial = 0; trial < 100; ++trial) {
    const std::size_t n = 6 + trial % 20, c1 = 2 * (1 + trial % 4), k = 1 + trial % 5;
    mvp::PointEncoder enc(c1, k, rng);
    const auto cloud = oracle::random_cloud(n, rng);
    const auto lifted = enc.lift_features(cloud);
    const auto graph = mvp::knn(cloud, k);
    const auto got = enc.edge_embed(lifted, graph);
    const auto want = oracle::edge_embed(oracle::values(lifted.features), c1, oracle::knn(cloud.coords, k), enc.phi());
    ASSERT_LT(oracle::max_abs_diff(oracle::values(got.features), want), 1e-9) << "trial " << trial;
  }
}

TEST(PointEncoder, LiftIsPointwiseMlp) {
  std::mt19937_64 rng(34);
  mvp::PointEncoder enc(8, 4, rng);
  const auto cloud = oracle::random_cloud(10, rng);
  const auto lifted = enc.lift_features(cloud);
  ASSERT_EQ(lifted.channels(), 8u);
  for (std::size_t i = 0; i < 10; ++i) {
    const oracle::Vec p{cloud.coords(static_cast<Eigen::Index>(i), 0), cloud.coords(static_cast<Eigen::Index>(i), 1),
                        cloud.coords(static_cast<Eigen::Index>(i), 2)};
    const auto want = oracle::mlp(p, enc.lift());
    for (std::size_t c = 0; c < 8; ++c) EXPECT_NEAR(lifted.features[i * 8 + c], want[c], 1e-12);
  }
}

TEST(PointEncoder, PermutingPointsPermutesFeatures) {
  std::mt19937_64 rng(35);
  mvp::PointEncoder enc(6, 3, rng);
  const auto cloud = oracle::random_cloud(12, rng);
  PointCloud rev = cloud;
  rev.coords = cloud.coords.colwise().reverse();
  const auto a = enc.encode(cloud), b = enc.encode(rev);
  for (std::size_t i = 0; i < 12; ++i) {
    for (std::size_t c = 0; c < 6; ++c) EXPECT_NEAR(a.features[i * 6 + c], b.features[(11 - i) * 6 + c], 1e-12);
  }
}

TEST(PointEncoder, GradientsMatchFiniteDifferences) {
  std::mt19937_64 rng(36);
  mvp::PointEncoder enc(4, 3, rng);
  const auto cloud = oracle::random_cloud(9, rng);
  mvp::ParamList params;
  enc.collect("enc", params);
  std::vector<Tensor> ts;
  for (auto& p : params) ts.push_back(p.tensor);
  const auto r = oracle::grad_check([&] { return oracle::random_readout(enc.encode(cloud).features, 5); }, ts);
  EXPECT_LT(r.worst_rel, 1e-4);
  EXPECT_FALSE(r.all_zero);
}

TEST(EdgeOps, GradientsMatchFiniteDifferences) {
  std::mt19937_64 rng(37);
  const auto cloud = oracle::random_cloud(7, rng);
  const auto graph = mvp::knn(cloud, 3);
  auto feats = oracle::random_tensor({7, 3}, rng, -1.0, 1.0, true);
  const auto r1 = oracle::grad_check(
      [&] { return oracle::random_readout(mvp::edge_features(feats, graph), 6); }, {feats});
  EXPECT_LT(r1.worst_rel, 1e-4);
  auto edges = oracle::random_tensor({21, 3}, rng, -1.0, 1.0, true);
  const auto r2 = oracle::grad_check([&] { return oracle::random_readout(mvp::neighbor_max(edges, 3), 7); }, {edges});
  EXPECT_LT(r2.worst_rel, 1e-4);
}

TEST(Rotation, IsOrthonormalWithUnitDeterminant) {
  mvp::RotationSpec spec;
  std::mt19937_64 rng(38);
  std::uniform_real_distribution<double> a(spec.alpha.lo, spec.alpha.hi), b(spec.beta.lo, spec.beta.hi);
  for (int i = 0; i < 200; ++i) {
    const auto r = mvp::rotation_from_angles(a(rng), b(rng));
    EXPECT_LT((r * r.transpose() - Eigen::Matrix3d::Identity()).cwiseAbs().maxCoeff(), 1e-12);
    EXPECT_NEAR(r.determinant(), 1.0, 1e-12);
  }
}

TEST(Rotation, ComposesZAfterX) {
  const double alpha = 0.3, beta = -0.9;
  const Eigen::Matrix3d rz = Eigen::AngleAxisd(alpha, Eigen::Vector3d::UnitZ()).toRotationMatrix();
  const Eigen::Matrix3d rx = Eigen::AngleAxisd(beta, Eigen::Vector3d::UnitX()).toRotationMatrix();
  EXPECT_LT((mvp::rotation_from_angles(alpha, beta) - rz * rx).cwiseAbs().maxCoeff(), 1e-12);
}

TEST(Rotation, SampledAnglesStayInRange) {
  mvp::RotationSpec spec;
  spec.seed = 3;
  const auto r = mvp::sample_rotation(spec);
  // beta is recoverable from R = Rz Rx: R(2,1) = sin(beta), R(2,2) = cos(beta).
  const double beta = std::atan2(r(2, 1), r(2, 2));
  EXPECT_GE(beta, spec.beta.lo - 1e-12);
  EXPECT_LE(beta, spec.beta.hi + 1e-12);
  EXPECT_LT((mvp::sample_rotation(spec) - r).cwiseAbs().maxCoeff(), 0.0 + 1e-15);
}

TEST(Rotation, RejectsInvertedRange) {
  mvp::RotationSpec spec;
  spec.alpha = {1.0, -1.0};
  EXPECT_THROW(spec.validate(), mvp::ValidationError);
}

TEST(Normalize, CentersAndScalesToUnitBall) {
  std::mt19937_64 rng(39);
  auto cloud = oracle::random_cloud(50, rng);
  cloud.coords = (cloud.coords * 7.0).rowwise() + Eigen::RowVector3d(3, -2, 10);
  const auto n = mvp::normalize_cloud(cloud);
  EXPECT_LT(n.coords.colwise().mean().cwiseAbs().maxCoeff(), 1e-12);
  EXPECT_NEAR(n.coords.rowwise().norm().maxCoeff(), 1.0, 1e-12);
}

TEST(PointCloud, ValidateRejectsEmptyAndNonFinite) {
  PointCloud empty;
  EXPECT_THROW(empty.validate(), mvp::ValidationError);
  PointCloud bad;
  bad.coords = mvp::Coords::Zero(3, 3);
  bad.coords(1, 2) = std::nan("");
  EXPECT_THROW(bad.validate(), mvp::ValidationError);
}

}  // namespace
