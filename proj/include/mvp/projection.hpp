// Copyright 2026 The mvprompt Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <Eigen/Dense>
#include <vector>

#include "mvp/geometry.hpp"
#include "mvp/tensor.hpp"

namespace mvp {

/// World-to-view rotations. Each view looks down its own z axis; the image
/// plane is the rotated (x, y) plane with y as the up direction.
struct ViewSet {
  std::vector<Eigen::Matrix3d> rotations;

  std::size_t size() const { return rotations.size(); }
  void validate() const;
};

struct MultiViewFeatureMap {
  Tensor data;  // [M, C, H, W]

  std::size_t views() const { return data.dim(0); }
  std::size_t channels() const { return data.dim(1); }
  std::size_t height() const { return data.dim(2); }
  std::size_t width() const { return data.dim(3); }
};

/// Canonical view sets:
///   1 -> identity
///   2 -> azimuth 0 and 180 degrees about the up axis
///   4 -> azimuths 0, 90, 180, 270
///   6 -> the four azimuths plus top and bottom
///   8 -> the four azimuths at elevation +30 and at -30 degrees
/// Any other count gets evenly spaced azimuths.
ViewSet make_view_set(std::size_t n_views);

/// Grid cell of every point in every view, flattened as row * W + col.
struct CellAssignment {
  std::size_t views = 0;
  std::size_t points = 0;
  std::vector<std::size_t> cells;  // [views, points]

  std::size_t at(std::size_t view, std::size_t point) const { return cells[view * points + point]; }
};

/// Rotates into each view, min-max normalizes (x, y) over the view's own
/// bounding box, and floors into an h x w grid. A collapsed axis maps to the
/// middle cell.
CellAssignment assign_cells(const PointCloud& cloud, const ViewSet& views, std::size_t h,
                            std::size_t w);

/// Sums each point's features into its cell; empty cells stay zero.
/// Differentiable with respect to the features.
MultiViewFeatureMap scatter_to_grid(const PointFeatureSet& feats, const CellAssignment& cells,
                                    std::size_t h, std::size_t w);

MultiViewFeatureMap grid_project(const PointCloud& cloud, const PointFeatureSet& feats,
                                 const ViewSet& views, std::size_t h, std::size_t w);

/// One pass: every empty cell with at least one occupied 8-neighbor takes the
/// mean of those neighbors. A cell is occupied when any channel is nonzero.
MultiViewFeatureMap densify_shift(const MultiViewFeatureMap& maps);

}  // namespace mvp
