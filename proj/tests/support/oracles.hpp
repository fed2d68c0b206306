// Copyright 2026 The mvprompt Authors
// SPDX-License-Identifier: Apache-2.0

// Slow, literal reference implementations used only by tests. They share no
// code with the library beyond plain data types.

#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <functional>
#include <limits>
#include <random>
#include <utility>
#include <vector>

#include "mvp/geometry.hpp"
#include "mvp/nn.hpp"
#include "mvp/tensor.hpp"

namespace oracle {

using Vec = std::vector<double>;

inline double gelu(double x) { return 0.5 * x * (1.0 + std::erf(x / std::sqrt(2.0))); }

inline Vec values(const mvp::Tensor& t) { return {t.values().begin(), t.values().end()}; }

// ------------------------------------------------------------- random ----

inline mvp::Tensor random_tensor(mvp::Shape shape, std::mt19937_64& rng, double lo = -1.0,
                                 double hi = 1.0, bool requires_grad = false) {
  std::uniform_real_distribution<double> u(lo, hi);
  std::vector<double> v(mvp::shape_numel(shape));
  for (auto& x : v) x = u(rng);
  return requires_grad ? mvp::Tensor::parameter(std::move(shape), std::move(v))
                       : mvp::Tensor(std::move(shape), std::move(v));
}

inline mvp::PointCloud random_cloud(std::size_t n, std::mt19937_64& rng) {
  std::uniform_real_distribution<double> u(-1.0, 1.0);
  mvp::PointCloud pc;
  pc.coords.resize(static_cast<Eigen::Index>(n), 3);
  for (Eigen::Index i = 0; i < pc.coords.size(); ++i) pc.coords.data()[i] = u(rng);
  return pc;
}

inline void randomize(mvp::Tensor& t, std::mt19937_64& rng, double lo = -1.0, double hi = 1.0) {
  std::uniform_real_distribution<double> u(lo, hi);
  for (auto& v : t.values()) v = u(rng);
}

inline double max_abs_diff(const Vec& a, const Vec& b) {
  if (a.size() != b.size()) return std::numeric_limits<double>::infinity();
  double m = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) m = std::max(m, std::abs(a[i] - b[i]));
  return m;
}

// ---------------------------------------------------------------- knn ----

// Full sort of every other point by (distance, index).
inline std::vector<std::vector<std::size_t>> knn(const mvp::Coords& pts, std::size_t k) {
  const auto n = static_cast<std::size_t>(pts.rows());
  std::vector<std::vector<std::size_t>> out(n);
  for (std::size_t i = 0; i < n; ++i) {
    std::vector<std::pair<double, std::size_t>> all;
    for (std::size_t j = 0; j < n; ++j) {
      if (j == i) continue;
      double d = 0.0;
      for (int a = 0; a < 3; ++a) {
        const double diff = pts(static_cast<Eigen::Index>(i), a) - pts(static_cast<Eigen::Index>(j), a);
        d += diff * diff;
      }
      all.emplace_back(d, j);
    }
    std::sort(all.begin(), all.end());
    for (std::size_t r = 0; r < k; ++r) out[i].push_back(all[r].second);
  }
  return out;
}

// ---------------------------------------------------------- pointwise ----

// y = W x + b with W stored [out, in].
inline Vec affine(const Vec& x, const mvp::Linear& l) {
  const std::size_t out = l.weight.dim(0), in = l.weight.dim(1);
  Vec y(out);
  for (std::size_t o = 0; o < out; ++o) {
    double s = l.bias.defined() ? l.bias[o] : 0.0;
    for (std::size_t i = 0; i < in; ++i) s += l.weight[o * in + i] * x[i];
    y[o] = s;
  }
  return y;
}

inline Vec mlp(const Vec& x, const mvp::PointwiseMlp& net) {
  Vec h = affine(x, net.first);
  for (auto& v : h) v = gelu(v);
  return affine(h, net.second);
}

// E_i = max_j phi(concat(e_i, e_j - e_i)) over the listed neighbors.
inline Vec edge_embed(const Vec& lifted, std::size_t c, const std::vector<std::vector<std::size_t>>& nbrs,
                      const mvp::PointwiseMlp& phi) {
  const std::size_t n = nbrs.size();
  Vec out(n * c, -std::numeric_limits<double>::infinity());
  for (std::size_t i = 0; i < n; ++i) {
    for (std::size_t j : nbrs[i]) {
      Vec edge(2 * c);
      for (std::size_t ch = 0; ch < c; ++ch) {
        edge[ch] = lifted[i * c + ch];
        edge[c + ch] = lifted[j * c + ch] - lifted[i * c + ch];
      }
      const Vec y = mlp(edge, phi);
      for (std::size_t ch = 0; ch < c; ++ch) out[i * c + ch] = std::max(out[i * c + ch], y[ch]);
    }
  }
  return out;
}

// --------------------------------------------------------- projection ----

inline std::size_t bin(double v, double lo, double hi, std::size_t bins) {
  if (hi - lo <= 1e-12) return bins / 2;
  const double cell = std::floor((v - lo) / (hi - lo) * static_cast<double>(bins));
  return static_cast<std::size_t>(std::min(std::max(cell, 0.0), static_cast<double>(bins - 1)));
}

// One view: rotate, bin (row from y, column from x), sum features. Returns
// [C, H, W] and the cell of every point.
inline std::pair<Vec, std::vector<std::size_t>> project(const mvp::Coords& pts, const Vec& feats, std::size_t c,
                                                        const Eigen::Matrix3d& r, std::size_t h, std::size_t w) {
  const auto n = static_cast<std::size_t>(pts.rows());
  std::vector<double> xs(n), ys(n);
  for (std::size_t p = 0; p < n; ++p) {
    const Eigen::Vector3d q = r * pts.row(static_cast<Eigen::Index>(p)).transpose();
    xs[p] = q.x();
    ys[p] = q.y();
  }
  const auto [xlo, xhi] = std::minmax_element(xs.begin(), xs.end());
  const auto [ylo, yhi] = std::minmax_element(ys.begin(), ys.end());
  Vec grid(c * h * w, 0.0);
  std::vector<std::size_t> cells(n);
  for (std::size_t p = 0; p < n; ++p) {
    const std::size_t row = bin(ys[p], *ylo, *yhi, h), col = bin(xs[p], *xlo, *xhi, w);
    cells[p] = row * w + col;
    for (std::size_t ch = 0; ch < c; ++ch) grid[ch * h * w + cells[p]] += feats[p * c + ch];
  }
  return {grid, cells};
}

// One densification pass over [M, C, H, W]: an all-zero cell with occupied
// 8-neighbors becomes their mean; nothing else changes.
inline Vec densify(const Vec& x, std::size_t m, std::size_t c, std::size_t h, std::size_t w) {
  Vec y = x;
  auto occupied = [&](std::size_t v, long r, long q) {
    if (r < 0 || q < 0 || r >= static_cast<long>(h) || q >= static_cast<long>(w)) return false;
    for (std::size_t ch = 0; ch < c; ++ch) {
      if (x[((v * c + ch) * h + static_cast<std::size_t>(r)) * w + static_cast<std::size_t>(q)] != 0.0) return true;
    }
    return false;
  };
  for (std::size_t v = 0; v < m; ++v) {
    for (long r = 0; r < static_cast<long>(h); ++r) {
      for (long q = 0; q < static_cast<long>(w); ++q) {
        if (occupied(v, r, q)) continue;
        for (std::size_t ch = 0; ch < c; ++ch) {
          double s = 0.0;
          int count = 0;
          for (long dr = -1; dr <= 1; ++dr) {
            for (long dq = -1; dq <= 1; ++dq) {
              if ((dr != 0 || dq != 0) && occupied(v, r + dr, q + dq)) {
                s += x[((v * c + ch) * h + static_cast<std::size_t>(r + dr)) * w + static_cast<std::size_t>(q + dq)];
                ++count;
              }
            }
          }
          if (count > 0) y[((v * c + ch) * h + static_cast<std::size_t>(r)) * w + static_cast<std::size_t>(q)] = s / count;
        }
      }
    }
  }
  return y;
}

// ------------------------------------------------------------- images ----

// Direct sliding-window convolution of x[B,C,H,W] with w[O,C,k,k].
inline Vec conv2d(const Vec& x, std::size_t b, std::size_t c, std::size_t h, std::size_t wd, const Vec& w,
                  const Vec* bias, std::size_t o, std::size_t k, std::size_t stride, std::size_t pad,
                  std::size_t* oh_out = nullptr, std::size_t* ow_out = nullptr) {
  const std::size_t oh = (h + 2 * pad - k) / stride + 1, ow = (wd + 2 * pad - k) / stride + 1;
  if (oh_out) *oh_out = oh;
  if (ow_out) *ow_out = ow;
  Vec y(b * o * oh * ow, 0.0);
  for (std::size_t n = 0; n < b; ++n) {
    for (std::size_t oc = 0; oc < o; ++oc) {
      for (std::size_t r = 0; r < oh; ++r) {
        for (std::size_t q = 0; q < ow; ++q) {
          double s = bias ? (*bias)[oc] : 0.0;
          for (std::size_t ic = 0; ic < c; ++ic) {
            for (std::size_t i = 0; i < k; ++i) {
              for (std::size_t j = 0; j < k; ++j) {
                const long yy = static_cast<long>(r * stride + i) - static_cast<long>(pad);
                const long xx = static_cast<long>(q * stride + j) - static_cast<long>(pad);
                if (yy < 0 || xx < 0 || yy >= static_cast<long>(h) || xx >= static_cast<long>(wd)) continue;
                s += w[((oc * c + ic) * k + i) * k + j] *
                     x[((n * c + ic) * h + static_cast<std::size_t>(yy)) * wd + static_cast<std::size_t>(xx)];
              }
            }
          }
          y[((n * o + oc) * oh + r) * ow + q] = s;
        }
      }
    }
  }
  return y;
}

inline Vec conv2d(const mvp::Tensor& x, const mvp::Conv2d& layer) {
  const Vec w = values(layer.weight);
  const Vec bias = layer.bias.defined() ? values(layer.bias) : Vec{};
  return conv2d(values(x), x.dim(0), x.dim(1), x.dim(2), x.dim(3), w, layer.bias.defined() ? &bias : nullptr,
                layer.weight.dim(0), layer.weight.dim(2), layer.options.stride, layer.options.pad);
}

// Corner-aligned bilinear resize of one [C, h, w] stack to [C, H, W].
inline Vec bilinear(const Vec& x, std::size_t c, std::size_t h, std::size_t w, std::size_t oh, std::size_t ow) {
  Vec y(c * oh * ow);
  for (std::size_t ch = 0; ch < c; ++ch) {
    for (std::size_t i = 0; i < oh; ++i) {
      for (std::size_t j = 0; j < ow; ++j) {
        const double sy = oh > 1 ? static_cast<double>(i) * static_cast<double>(h - 1) / static_cast<double>(oh - 1) : 0.0;
        const double sx = ow > 1 ? static_cast<double>(j) * static_cast<double>(w - 1) / static_cast<double>(ow - 1) : 0.0;
        const auto y0 = static_cast<std::size_t>(std::floor(sy)), x0 = static_cast<std::size_t>(std::floor(sx));
        const std::size_t y1 = std::min(y0 + 1, h - 1), x1 = std::min(x0 + 1, w - 1);
        const double fy = sy - static_cast<double>(y0), fx = sx - static_cast<double>(x0);
        auto at = [&](std::size_t r, std::size_t q) { return x[(ch * h + r) * w + q]; };
        y[(ch * oh + i) * ow + j] = (1 - fy) * ((1 - fx) * at(y0, x0) + fx * at(y0, x1)) +
                                    fy * ((1 - fx) * at(y1, x0) + fx * at(y1, x1));
      }
    }
  }
  return y;
}

// ---------------------------------------------------------- attention ----

struct AttentionResult {
  Vec out;      // [T, C]
  Vec weights;  // [T, T]
};

// Layer norm per token, Q/K/V projections, softmax(QK^T / sqrt(C)) V, optional residual.
inline AttentionResult attention(const Vec& tokens, std::size_t t, std::size_t c, const mvp::Tensor& gamma,
                                 const mvp::Tensor& beta, const mvp::Linear& wq, const mvp::Linear& wk,
                                 const mvp::Linear& wv, bool residual) {
  std::vector<Vec> q(t), k(t), v(t);
  for (std::size_t i = 0; i < t; ++i) {
    double mean = 0.0, var = 0.0;
    for (std::size_t ch = 0; ch < c; ++ch) mean += tokens[i * c + ch];
    mean /= static_cast<double>(c);
    for (std::size_t ch = 0; ch < c; ++ch) var += (tokens[i * c + ch] - mean) * (tokens[i * c + ch] - mean);
    var /= static_cast<double>(c);
    Vec normed(c);
    for (std::size_t ch = 0; ch < c; ++ch) {
      normed[ch] = (tokens[i * c + ch] - mean) / std::sqrt(var + 1e-5) * gamma[ch] + beta[ch];
    }
    q[i] = affine(normed, wq);
    k[i] = affine(normed, wk);
    v[i] = affine(normed, wv);
  }
  AttentionResult r{Vec(t * c, 0.0), Vec(t * t, 0.0)};
  for (std::size_t i = 0; i < t; ++i) {
    Vec logits(t);
    for (std::size_t j = 0; j < t; ++j) {
      double s = 0.0;
      for (std::size_t ch = 0; ch < c; ++ch) s += q[i][ch] * k[j][ch];
      logits[j] = s / std::sqrt(static_cast<double>(c));
    }
    const double mx = *std::max_element(logits.begin(), logits.end());
    double z = 0.0;
    for (auto& l : logits) z += std::exp(l - mx);
    for (std::size_t j = 0; j < t; ++j) {
      const double a = std::exp(logits[j] - mx) / z;
      r.weights[i * t + j] = a;
      for (std::size_t ch = 0; ch < c; ++ch) r.out[i * c + ch] += a * v[j][ch];
    }
    if (residual) {
      for (std::size_t ch = 0; ch < c; ++ch) r.out[i * c + ch] += tokens[i * c + ch];
    }
  }
  return r;
}

// ----------------------------------------------------------- classify ----

// Mean-pool each [C3, H1, W1] map, concatenate the M views of an object, then fc.
inline Vec head_logits(const Vec& feats, std::size_t objects, std::size_t views, std::size_t c3, std::size_t plane,
                       const mvp::Linear& fc) {
  const std::size_t classes = fc.weight.dim(0);
  Vec logits;
  for (std::size_t b = 0; b < objects; ++b) {
    Vec flat(views * c3);
    for (std::size_t m = 0; m < views; ++m) {
      for (std::size_t ch = 0; ch < c3; ++ch) {
        double s = 0.0;
        for (std::size_t p = 0; p < plane; ++p) s += feats[((b * views + m) * c3 + ch) * plane + p];
        flat[m * c3 + ch] = s / static_cast<double>(plane);
      }
    }
    const Vec y = affine(flat, fc);
    logits.insert(logits.end(), y.begin(), y.begin() + static_cast<std::ptrdiff_t>(classes));
  }
  return logits;
}

// Mean of -log(softmax) at the labels, summed term by term.
inline double xent(const Vec& logits, std::size_t classes, const std::vector<int>& labels) {
  double total = 0.0;
  for (std::size_t r = 0; r < labels.size(); ++r) {
    double z = 0.0;
    for (std::size_t c = 0; c < classes; ++c) z += std::exp(logits[r * classes + c]);
    total += -std::log(std::exp(logits[r * classes + static_cast<std::size_t>(labels[r])]) / z);
  }
  return total / static_cast<double>(labels.size());
}

// ------------------------------------------------------ finite diffs ----

constexpr double kZeroGradient = 1e-8;

struct GradCheck {
  double worst_rel = 0.0;  // max over tensors of ||a - n|| / max(||a||, ||n||)
  bool all_zero = true;    // analytic gradients were identically zero
};

// Central differences of a scalar `loss` w.r.t. every entry of `params`,
// compared per tensor against the analytic gradient from backward().
inline GradCheck grad_check(const std::function<mvp::Tensor()>& loss, std::vector<mvp::Tensor> params,
                            double h = 1e-6) {
  for (auto& p : params) p.zero_grad();
  loss().backward();
  GradCheck out;
  for (auto& p : params) {
    const Vec analytic(p.grad().begin(), p.grad().end());
    Vec numeric(analytic.size());
    for (std::size_t i = 0; i < p.numel(); ++i) {
      const double keep = p[i];
      p[i] = keep + h;
      const double up = loss().item();
      p[i] = keep - h;
      const double down = loss().item();
      p[i] = keep;
      numeric[i] = (up - down) / (2.0 * h);
    }
    double diff = 0.0, na = 0.0, nn = 0.0;
    for (std::size_t i = 0; i < analytic.size(); ++i) {
      diff += (analytic[i] - numeric[i]) * (analytic[i] - numeric[i]);
      na += analytic[i] * analytic[i];
      nn += numeric[i] * numeric[i];
      if (analytic[i] != 0.0) out.all_zero = false;
    }
    // Both below the difference noise floor: the true gradient is zero (for
    // example a key bias, which softmax cancels), so there is nothing to compare.
    const double scale = std::max(std::sqrt(na), std::sqrt(nn));
    if (scale > kZeroGradient) out.worst_rel = std::max(out.worst_rel, std::sqrt(diff) / scale);
  }
  return out;
}

// Fixed random projection to a scalar so that no gradient direction cancels.
inline mvp::Tensor random_readout(const mvp::Tensor& y, std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<double> u(-1.0, 1.0);
  std::vector<double> w(y.numel());
  for (auto& v : w) v = u(rng);
  return mvp::ops::weighted_sum(y, w);
}

}  // namespace oracle
