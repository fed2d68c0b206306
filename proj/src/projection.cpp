// Copyright 2026 The mvprompt Authors
// SPDX-License-Identifier: Apache-2.0

#include "mvp/projection.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>
#include <string>

#include "mvp/errors.hpp"

namespace mvp {

namespace {

Eigen::Matrix3d about_y(double deg) {
  return Eigen::AngleAxisd(deg * std::numbers::pi / 180.0, Eigen::Vector3d::UnitY()).toRotationMatrix();
}

Eigen::Matrix3d about_x(double deg) {
  return Eigen::AngleAxisd(deg * std::numbers::pi / 180.0, Eigen::Vector3d::UnitX()).toRotationMatrix();
}

std::size_t to_cell(double v, double lo, double hi, std::size_t bins) {
  const double extent = hi - lo;
  if (!(extent > 1e-12)) return bins / 2;
  const double u = (v - lo) / extent;
  const auto idx = static_cast<long>(std::floor(u * static_cast<double>(bins)));
  return static_cast<std::size_t>(std::clamp(idx, 0L, static_cast<long>(bins) - 1));
}

}  // namespace

void ViewSet::validate() const {
  if (rotations.empty()) throw ValidationError("view set is empty");
  for (const auto& r : rotations) {
    if (!(r.transpose() * r).isApprox(Eigen::Matrix3d::Identity(), 1e-6) ||
        std::abs(r.determinant() - 1.0) > 1e-6) {
      throw ValidationError("view set contains a matrix that is not a proper rotation");
    }
  }
}

ViewSet make_view_set(std::size_t n_views) {
  if (n_views < 1) throw ValidationError("need at least one view");
  ViewSet vs;
  const std::vector<double> quarter{0.0, 90.0, 180.0, 270.0};
  switch (n_views) {
    case 1:
      vs.rotations.push_back(Eigen::Matrix3d::Identity());
      break;
    case 2:
      vs.rotations = {about_y(0.0), about_y(180.0)};
      break;
    case 4:
      for (double a : quarter) vs.rotations.push_back(about_y(a));
      break;
    case 6:
      for (double a : quarter) vs.rotations.push_back(about_y(a));
      vs.rotations.push_back(about_x(90.0));
      vs.rotations.push_back(about_x(-90.0));
      break;
    case 8:
      for (double elev : {30.0, -30.0}) {
        for (double a : quarter) vs.rotations.push_back(about_x(elev) * about_y(a));
      }
      break;
    default:
      for (std::size_t i = 0; i < n_views; ++i) {
        vs.rotations.push_back(about_y(360.0 * static_cast<double>(i) / static_cast<double>(n_views)));
      }
  }
  return vs;
}

CellAssignment assign_cells(const PointCloud& cloud, const ViewSet& views, std::size_t h,
                            std::size_t w) {
  cloud.validate();
  views.validate();
  if (h == 0 || w == 0) throw ValidationError("projection grid must be non-empty");
  const std::size_t n = cloud.size();
  CellAssignment ca{views.size(), n, std::vector<std::size_t>(views.size() * n)};
  for (std::size_t m = 0; m < views.size(); ++m) {
    const Coords rotated = cloud.coords * views.rotations[m].transpose();
    const double xmin = rotated.col(0).minCoeff(), xmax = rotated.col(0).maxCoeff();
    const double ymin = rotated.col(1).minCoeff(), ymax = rotated.col(1).maxCoeff();
    for (std::size_t p = 0; p < n; ++p) {
      const auto row = to_cell(rotated(static_cast<Eigen::Index>(p), 1), ymin, ymax, h);
      const auto col = to_cell(rotated(static_cast<Eigen::Index>(p), 0), xmin, xmax, w);
      ca.cells[m * n + p] = row * w + col;
    }
  }
  return ca;
}

MultiViewFeatureMap scatter_to_grid(const PointFeatureSet& feats, const CellAssignment& cells,
                                    std::size_t h, std::size_t w) {
  const std::size_t n = feats.size(), c = feats.channels(), m = cells.views;
  if (n != cells.points) {
    throw ValidationError("grid_project: " + std::to_string(n) + " feature rows for " +
                          std::to_string(cells.points) + " points");
  }
  const std::size_t plane = h * w;
  std::vector<double> out(m * c * plane, 0.0);
  const double* f = feats.features.data();
  for (std::size_t v = 0; v < m; ++v) {
    for (std::size_t p = 0; p < n; ++p) {
      const std::size_t cell = cells.at(v, p);
      for (std::size_t ch = 0; ch < c; ++ch) out[(v * c + ch) * plane + cell] += f[p * c + ch];
    }
  }
  return {Tensor::make_result({m, c, h, w}, std::move(out), {feats.features},
                              [m, n, c, plane, idx = cells.cells](detail::Node& self) {
    double* g = detail::parent_grad(self, 0);
    if (!g) return;
    for (std::size_t v = 0; v < m; ++v) {
      for (std::size_t p = 0; p < n; ++p) {
        const std::size_t cell = idx[v * n + p];
        for (std::size_t ch = 0; ch < c; ++ch) g[p * c + ch] += self.grad[(v * c + ch) * plane + cell];
      }
    }
  })};
}

MultiViewFeatureMap grid_project(const PointCloud& cloud, const PointFeatureSet& feats,
                                 const ViewSet& views, std::size_t h, std::size_t w) {
  return scatter_to_grid(feats, assign_cells(cloud, views, h, w), h, w);
}

MultiViewFeatureMap densify_shift(const MultiViewFeatureMap& maps) {
  const Tensor& x = maps.data;
  if (x.rank() != 4) throw ValidationError("densify_shift: expected [M,C,H,W], got " + shape_str(x.shape()));
  const std::size_t m = x.dim(0), c = x.dim(1), h = x.dim(2), w = x.dim(3), plane = h * w;

  // Source list per filled cell: out[v, :, cell] = mean of x[v, :, src] over the listed sources.
  struct Fill {
    std::size_t view, cell;
    std::vector<std::size_t> sources;
  };
  std::vector<Fill> fills;
  std::vector<char> occupied(plane);
  for (std::size_t v = 0; v < m; ++v) {
    for (std::size_t cell = 0; cell < plane; ++cell) {
      occupied[cell] = 0;
      for (std::size_t ch = 0; ch < c && !occupied[cell]; ++ch) {
        occupied[cell] = x[(v * c + ch) * plane + cell] != 0.0;
      }
    }
    for (std::size_t r = 0; r < h; ++r) {
      for (std::size_t col = 0; col < w; ++col) {
        if (occupied[r * w + col]) continue;
        Fill fill{v, r * w + col, {}};
        for (long dr = -1; dr <= 1; ++dr) {
          for (long dc = -1; dc <= 1; ++dc) {
            if (dr == 0 && dc == 0) continue;
            const long rr = static_cast<long>(r) + dr, cc = static_cast<long>(col) + dc;
            if (rr < 0 || cc < 0 || rr >= static_cast<long>(h) || cc >= static_cast<long>(w)) continue;
            const auto src = static_cast<std::size_t>(rr) * w + static_cast<std::size_t>(cc);
            if (occupied[src]) fill.sources.push_back(src);
          }
        }
        if (!fill.sources.empty()) fills.push_back(std::move(fill));
      }
    }
  }

  std::vector<double> out(x.values().begin(), x.values().end());
  for (const auto& f : fills) {
    const double inv = 1.0 / static_cast<double>(f.sources.size());
    for (std::size_t ch = 0; ch < c; ++ch) {
      const std::size_t base = (f.view * c + ch) * plane;
      double s = 0.0;
      for (std::size_t src : f.sources) s += x[base + src];
      out[base + f.cell] = s * inv;
    }
  }
  return {Tensor::make_result(x.shape(), std::move(out), {x},
                              [c, plane, fills = std::move(fills)](detail::Node& self) {
    double* g = detail::parent_grad(self, 0);
    if (!g) return;
    // Filled cells were empty on input, so their own upstream gradient stops here.
    std::vector<double> dy(self.grad);
    for (const auto& f : fills) {
      for (std::size_t ch = 0; ch < c; ++ch) dy[(f.view * c + ch) * plane + f.cell] = 0.0;
    }
    for (std::size_t i = 0; i < dy.size(); ++i) g[i] += dy[i];
    for (const auto& f : fills) {
      const double inv = 1.0 / static_cast<double>(f.sources.size());
      for (std::size_t ch = 0; ch < c; ++ch) {
        const std::size_t base = (f.view * c + ch) * plane;
        const double d = self.grad[base + f.cell] * inv;
        for (std::size_t src : f.sources) g[base + src] += d;
      }
    }
  })};
}

}  // namespace mvp
