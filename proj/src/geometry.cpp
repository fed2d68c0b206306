// Copyright 2026 The mvprompt Authors
// SPDX-License-Identifier: Apache-2.0

#include "mvp/geometry.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <string>

#include "mvp/errors.hpp"

namespace mvp {

void PointCloud::validate() const {
  if (coords.rows() == 0) throw ValidationError("point cloud is empty");
  if (!coords.allFinite()) throw ValidationError("point cloud has non-finite coordinates");
}

void RotationSpec::validate() const {
  constexpr double pi = std::numbers::pi;
  for (const Interval& iv : {alpha, beta}) {
    if (!(iv.lo <= iv.hi) || iv.lo < -pi - 1e-12 || iv.hi > pi + 1e-12) {
      throw ValidationError("rotation range [" + std::to_string(iv.lo) + ", " +
                            std::to_string(iv.hi) + "] is not a non-empty subset of [-pi, pi]");
    }
  }
}

PointCloud normalize_cloud(const PointCloud& cloud) {
  cloud.validate();
  PointCloud out = cloud;
  const Eigen::RowVector3d centroid = cloud.coords.colwise().mean();
  out.coords.rowwise() -= centroid;
  const double max_norm = out.coords.rowwise().norm().maxCoeff();
  if (max_norm > 0.0) out.coords /= max_norm;
  return out;
}

Eigen::Matrix3d rotation_from_angles(double alpha, double beta) {
  const Eigen::Matrix3d rz = Eigen::AngleAxisd(alpha, Eigen::Vector3d::UnitZ()).toRotationMatrix();
  const Eigen::Matrix3d rx = Eigen::AngleAxisd(beta, Eigen::Vector3d::UnitX()).toRotationMatrix();
  return rz * rx;
}

Eigen::Matrix3d sample_rotation(const RotationSpec& spec) {
  spec.validate();
  Rng rng(spec.seed);
  auto draw = [&rng](const Interval& iv) {
    if (iv.lo == iv.hi) return iv.lo;
    return std::uniform_real_distribution<double>(iv.lo, iv.hi)(rng);
  };
  const double alpha = draw(spec.alpha);
  const double beta = draw(spec.beta);
  return rotation_from_angles(alpha, beta);
}

PointCloud rotate_cloud(const PointCloud& cloud, const Eigen::Matrix3d& rotation) {
  PointCloud out = cloud;
  out.coords = cloud.coords * rotation.transpose();
  return out;
}

KnnGraph knn(const PointCloud& cloud, std::size_t k) {
  cloud.validate();
  const std::size_t n = cloud.size();
  if (k < 1 || k >= n) {
    throw ValidationError("knn: need 1 <= k < N, got k=" + std::to_string(k) +
                          " for N=" + std::to_string(n));
  }
  KnnGraph g{n, k, std::vector<std::size_t>(n * k)};
  std::vector<std::pair<double, std::size_t>> cand(n - 1);
  for (std::size_t i = 0; i < n; ++i) {
    const Eigen::RowVector3d pi = cloud.coords.row(static_cast<Eigen::Index>(i));
    std::size_t c = 0;
    for (std::size_t j = 0; j < n; ++j) {
      if (j == i) continue;
      cand[c++] = {(cloud.coords.row(static_cast<Eigen::Index>(j)) - pi).squaredNorm(), j};
    }
    std::partial_sort(cand.begin(), cand.begin() + static_cast<std::ptrdiff_t>(k), cand.end());
    for (std::size_t r = 0; r < k; ++r) g.indices[i * k + r] = cand[r].second;
  }
  return g;
}

Tensor edge_features(const Tensor& features, const KnnGraph& graph) {
  if (features.rank() != 2 || features.dim(0) != graph.n) {
    throw ValidationError("edge_features: features " + shape_str(features.shape()) +
                          " do not match a graph over " + std::to_string(graph.n) + " points");
  }
  const std::size_t n = graph.n, k = graph.k, c = features.dim(1);
  std::vector<double> out(n * k * 2 * c);
  for (std::size_t i = 0; i < n; ++i) {
    const double* ei = features.data() + i * c;
    for (std::size_t r = 0; r < k; ++r) {
      const double* ej = features.data() + graph.indices[i * k + r] * c;
      double* row = out.data() + (i * k + r) * 2 * c;
      for (std::size_t ch = 0; ch < c; ++ch) {
        row[ch] = ei[ch];
        row[c + ch] = ej[ch] - ei[ch];
      }
    }
  }
  return Tensor::make_result({n * k, 2 * c}, std::move(out), {features},
                             [n, k, c, idx = graph.indices](detail::Node& self) {
    double* g = detail::parent_grad(self, 0);
    if (!g) return;
    for (std::size_t i = 0; i < n; ++i) {
      for (std::size_t r = 0; r < k; ++r) {
        const double* row = self.grad.data() + (i * k + r) * 2 * c;
        double* gi = g + i * c;
        double* gj = g + idx[i * k + r] * c;
        for (std::size_t ch = 0; ch < c; ++ch) {
          gi[ch] += row[ch] - row[c + ch];
          gj[ch] += row[c + ch];
        }
      }
    }
  });
}

Tensor neighbor_max(const Tensor& edges, std::size_t k) {
  if (edges.rank() != 2 || k == 0 || edges.dim(0) % k != 0) {
    throw ValidationError("neighbor_max: " + shape_str(edges.shape()) + " is not grouped by k=" +
                          std::to_string(k));
  }
  const std::size_t n = edges.dim(0) / k, c = edges.dim(1);
  std::vector<double> out(n * c, -std::numeric_limits<double>::infinity());
  std::vector<std::size_t> arg(n * c);
  for (std::size_t i = 0; i < n; ++i) {
    for (std::size_t r = 0; r < k; ++r) {
      const double* row = edges.data() + (i * k + r) * c;
      for (std::size_t ch = 0; ch < c; ++ch) {
        if (row[ch] > out[i * c + ch]) {
          out[i * c + ch] = row[ch];
          arg[i * c + ch] = (i * k + r) * c + ch;
        }
      }
    }
  }
  return Tensor::make_result({n, c}, std::move(out), {edges},
                             [arg = std::move(arg)](detail::Node& self) {
    if (double* g = detail::parent_grad(self, 0)) {
      for (std::size_t i = 0; i < arg.size(); ++i) g[arg[i]] += self.grad[i];
    }
  });
}

PointEncoder::PointEncoder(std::size_t c1, std::size_t k_neighbors, Rng& rng)
    : c1_(c1), k_(k_neighbors) {
  if (c1 < 2) throw ValidationError("point encoder needs at least 2 feature channels");
  if (k_neighbors < 1) throw ValidationError("point encoder needs k >= 1");
  lift_ = PointwiseMlp(3, c1 / 2, c1, rng);
  phi_ = PointwiseMlp(2 * c1, c1, c1, rng);
}

PointFeatureSet PointEncoder::lift_features(const PointCloud& cloud) const {
  cloud.validate();
  const std::size_t n = cloud.size();
  Tensor xyz({n, 3}, std::vector<double>(cloud.coords.data(), cloud.coords.data() + 3 * n));
  return {lift_(xyz)};
}

PointFeatureSet PointEncoder::edge_embed(const PointFeatureSet& lifted, const KnnGraph& graph) const {
  if (lifted.channels() != c1_) {
    throw ValidationError("edge_embed: expected " + std::to_string(c1_) + " channels, got " +
                          std::to_string(lifted.channels()));
  }
  return {neighbor_max(phi_(edge_features(lifted.features, graph)), graph.k)};
}

PointFeatureSet PointEncoder::encode(const PointCloud& cloud) const {
  const KnnGraph graph = knn(cloud, k_);
  return edge_embed(lift_features(cloud), graph);
}

void PointEncoder::collect(const std::string& prefix, ParamList& out) const {
  lift_.collect(prefix + ".lift", out);
  phi_.collect(prefix + ".phi", out);
}

}  // namespace mvp
