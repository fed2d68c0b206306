// Copyright 2026 The mvprompt Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <Eigen/Dense>
#include <cstdint>
#include <numbers>
#include <optional>
#include <span>
#include <vector>

#include "mvp/nn.hpp"
#include "mvp/tensor.hpp"

namespace mvp {

using Coords = Eigen::Matrix<double, Eigen::Dynamic, 3, Eigen::RowMajor>;

struct PointCloud {
  Coords coords;
  std::optional<int> label;

  std::size_t size() const { return static_cast<std::size_t>(coords.rows()); }
  /// Throws ValidationError when empty or when any coordinate is non-finite.
  void validate() const;
};

/// Per-point features, one row per point of the source cloud.
struct PointFeatureSet {
  Tensor features;  // [N, C1]

  std::size_t size() const { return features.dim(0); }
  std::size_t channels() const { return features.dim(1); }
};

struct Interval {
  double lo = 0.0;
  double hi = 0.0;
};

/// Rotation augmentation ranges. Angles are drawn uniformly from each interval.
struct RotationSpec {
  Interval alpha{-std::numbers::pi, std::numbers::pi};
  Interval beta{-0.4 * std::numbers::pi, -0.2 * std::numbers::pi};
  std::uint64_t seed = 0;

  void validate() const;
};

struct KnnGraph {
  std::size_t n = 0;
  std::size_t k = 0;
  std::vector<std::size_t> indices;  // row-major [n, k]

  std::span<const std::size_t> row(std::size_t i) const { return {indices.data() + i * k, k}; }
};

/// Centers on the centroid and scales so the farthest point has norm 1.
PointCloud normalize_cloud(const PointCloud& cloud);

/// R = Rz(alpha) * Rx(beta). Points are rotated as row vectors: coords * R^T.
Eigen::Matrix3d rotation_from_angles(double alpha, double beta);
Eigen::Matrix3d sample_rotation(const RotationSpec& spec);
PointCloud rotate_cloud(const PointCloud& cloud, const Eigen::Matrix3d& rotation);

/// k nearest neighbors by Euclidean distance over coordinates. A point is never
/// its own neighbor; equal distances resolve to the lower index.
KnnGraph knn(const PointCloud& cloud, std::size_t k);

/// Builds the [N*k, 2C] edge matrix whose row (i, j) is concat(e_i, e_j - e_i).
Tensor edge_features(const Tensor& features, const KnnGraph& graph);
/// Coordinate-wise max over each consecutive group of k rows: [N*k, C] -> [N, C].
Tensor neighbor_max(const Tensor& edges, std::size_t k);

/// Point-cloud encoder: a pointwise lift to C1 channels followed by the
/// neighborhood edge embedding E_i = max_j phi(concat(e_i, e_j - e_i)).
class PointEncoder {
 public:
  PointEncoder() = default;
  PointEncoder(std::size_t c1, std::size_t k_neighbors, Rng& rng);

  std::size_t channels() const { return c1_; }
  std::size_t k_neighbors() const { return k_; }

  /// 3 -> C1/2 -> C1 pointwise network.
  PointFeatureSet lift_features(const PointCloud& cloud) const;
  /// Edge embedding with the shared 2*C1 -> C1 -> C1 network phi.
  PointFeatureSet edge_embed(const PointFeatureSet& lifted, const KnnGraph& graph) const;
  /// lift -> knn over coordinates -> edge embed.
  PointFeatureSet encode(const PointCloud& cloud) const;

  PointwiseMlp& lift() { return lift_; }
  PointwiseMlp& phi() { return phi_; }
  void collect(const std::string& prefix, ParamList& out) const;

 private:
  std::size_t c1_ = 0;
  std::size_t k_ = 0;
  PointwiseMlp lift_;
  PointwiseMlp phi_;
};

}  // namespace mvp
