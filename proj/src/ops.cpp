// Copyright 2026 The mvprompt Authors
// SPDX-License-Identifier: Apache-2.0

#include "mvp/ops.hpp"

#include <Eigen/Dense>
#include <algorithm>
#include <cmath>
#include <limits>
#include <numbers>

#include "mvp/errors.hpp"

namespace mvp::ops {

namespace {

using RowMat = Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;
using MapMat = Eigen::Map<RowMat>;
using ConstMapMat = Eigen::Map<const RowMat>;

void require(bool cond, const std::string& msg) {
  if (!cond) throw ValidationError(msg);
}

void require_same_shape(const Tensor& a, const Tensor& b, const char* op) {
  require(a.shape() == b.shape(), std::string(op) + ": shape mismatch " + shape_str(a.shape()) +
                                      " vs " + shape_str(b.shape()));
}

void require_rank(const Tensor& t, std::size_t rank, const char* op) {
  require(t.rank() == rank, std::string(op) + ": expected rank " + std::to_string(rank) +
                                ", got " + shape_str(t.shape()));
}

const std::vector<double>& parent_value(detail::Node& self, std::size_t i) {
  return self.parents[i]->value;
}

// Unfolds one image [C,H,W] into columns [C*kh*kw, Ho*Wo].
void im2col(const double* img, std::size_t c, std::size_t h, std::size_t w, std::size_t kh,
            std::size_t kw, std::size_t stride, std::size_t pad, std::size_t oh, std::size_t ow,
            double* col) {
  const std::size_t plane = oh * ow;
  for (std::size_t ci = 0; ci < c; ++ci) {
    for (std::size_t i = 0; i < kh; ++i) {
      for (std::size_t j = 0; j < kw; ++j) {
        double* row = col + ((ci * kh + i) * kw + j) * plane;
        for (std::size_t oy = 0; oy < oh; ++oy) {
          const long iy = static_cast<long>(oy * stride + i) - static_cast<long>(pad);
          double* dst = row + oy * ow;
          if (iy < 0 || iy >= static_cast<long>(h)) {
            std::fill(dst, dst + ow, 0.0);
            continue;
          }
          const double* src = img + (ci * h + static_cast<std::size_t>(iy)) * w;
          for (std::size_t ox = 0; ox < ow; ++ox) {
            const long ix = static_cast<long>(ox * stride + j) - static_cast<long>(pad);
            dst[ox] = (ix < 0 || ix >= static_cast<long>(w)) ? 0.0 : src[ix];
          }
        }
      }
    }
  }
}

void col2im_add(const double* col, std::size_t c, std::size_t h, std::size_t w, std::size_t kh,
                std::size_t kw, std::size_t stride, std::size_t pad, std::size_t oh,
                std::size_t ow, double* img) {
  const std::size_t plane = oh * ow;
  for (std::size_t ci = 0; ci < c; ++ci) {
    for (std::size_t i = 0; i < kh; ++i) {
      for (std::size_t j = 0; j < kw; ++j) {
        const double* row = col + ((ci * kh + i) * kw + j) * plane;
        for (std::size_t oy = 0; oy < oh; ++oy) {
          const long iy = static_cast<long>(oy * stride + i) - static_cast<long>(pad);
          if (iy < 0 || iy >= static_cast<long>(h)) continue;
          double* dst = img + (ci * h + static_cast<std::size_t>(iy)) * w;
          const double* src = row + oy * ow;
          for (std::size_t ox = 0; ox < ow; ++ox) {
            const long ix = static_cast<long>(ox * stride + j) - static_cast<long>(pad);
            if (ix >= 0 && ix < static_cast<long>(w)) dst[ix] += src[ox];
          }
        }
      }
    }
  }
}

// Splits a shape around `axis` into (outer, extent, inner).
struct AxisSplit {
  std::size_t outer = 1, extent = 1, inner = 1;
};

AxisSplit split_axis(const Shape& shape, std::size_t axis) {
  AxisSplit s;
  for (std::size_t i = 0; i < axis; ++i) s.outer *= shape[i];
  s.extent = shape[axis];
  for (std::size_t i = axis + 1; i < shape.size(); ++i) s.inner *= shape[i];
  return s;
}

}  // namespace

Tensor add(const Tensor& a, const Tensor& b) {
  require_same_shape(a, b, "add");
  std::vector<double> out(a.numel());
  for (std::size_t i = 0; i < out.size(); ++i) out[i] = a[i] + b[i];
  return Tensor::make_result(a.shape(), std::move(out), {a, b}, [](detail::Node& self) {
    for (std::size_t p = 0; p < 2; ++p) {
      if (double* g = detail::parent_grad(self, p)) {
        for (std::size_t i = 0; i < self.grad.size(); ++i) g[i] += self.grad[i];
      }
    }
  });
}

Tensor sub(const Tensor& a, const Tensor& b) {
  require_same_shape(a, b, "sub");
  std::vector<double> out(a.numel());
  for (std::size_t i = 0; i < out.size(); ++i) out[i] = a[i] - b[i];
  return Tensor::make_result(a.shape(), std::move(out), {a, b}, [](detail::Node& self) {
    if (double* g = detail::parent_grad(self, 0)) {
      for (std::size_t i = 0; i < self.grad.size(); ++i) g[i] += self.grad[i];
    }
    if (double* g = detail::parent_grad(self, 1)) {
      for (std::size_t i = 0; i < self.grad.size(); ++i) g[i] -= self.grad[i];
    }
  });
}

Tensor mul(const Tensor& a, const Tensor& b) {
  require_same_shape(a, b, "mul");
  std::vector<double> out(a.numel());
  for (std::size_t i = 0; i < out.size(); ++i) out[i] = a[i] * b[i];
  return Tensor::make_result(a.shape(), std::move(out), {a, b}, [](detail::Node& self) {
    const auto& av = parent_value(self, 0);
    const auto& bv = parent_value(self, 1);
    if (double* g = detail::parent_grad(self, 0)) {
      for (std::size_t i = 0; i < self.grad.size(); ++i) g[i] += self.grad[i] * bv[i];
    }
    if (double* g = detail::parent_grad(self, 1)) {
      for (std::size_t i = 0; i < self.grad.size(); ++i) g[i] += self.grad[i] * av[i];
    }
  });
}

Tensor scale(const Tensor& a, double s) {
  std::vector<double> out(a.values().begin(), a.values().end());
  for (auto& v : out) v *= s;
  return Tensor::make_result(a.shape(), std::move(out), {a}, [s](detail::Node& self) {
    if (double* g = detail::parent_grad(self, 0)) {
      for (std::size_t i = 0; i < self.grad.size(); ++i) g[i] += s * self.grad[i];
    }
  });
}

Tensor sum(const Tensor& a) {
  double total = 0.0;
  for (double v : a.values()) total += v;
  return Tensor::make_result({1}, {total}, {a}, [](detail::Node& self) {
    if (double* g = detail::parent_grad(self, 0)) {
      const std::size_t n = self.parents[0]->value.size();
      for (std::size_t i = 0; i < n; ++i) g[i] += self.grad[0];
    }
  });
}

Tensor mean(const Tensor& a) {
  require(a.numel() > 0, "mean: empty tensor");
  return scale(sum(a), 1.0 / static_cast<double>(a.numel()));
}

Tensor weighted_sum(const Tensor& a, const std::vector<double>& weights) {
  require(weights.size() == a.numel(), "weighted_sum: weight count mismatch");
  double total = 0.0;
  for (std::size_t i = 0; i < weights.size(); ++i) total += weights[i] * a[i];
  return Tensor::make_result({1}, {total}, {a}, [weights](detail::Node& self) {
    if (double* g = detail::parent_grad(self, 0)) {
      for (std::size_t i = 0; i < weights.size(); ++i) g[i] += self.grad[0] * weights[i];
    }
  });
}

Tensor matmul(const Tensor& a, const Tensor& b) {
  require_rank(a, 2, "matmul");
  require_rank(b, 2, "matmul");
  const std::size_t m = a.dim(0), k = a.dim(1), n = b.dim(1);
  require(b.dim(0) == k, "matmul: inner dims " + shape_str(a.shape()) + " x " + shape_str(b.shape()));
  std::vector<double> out(m * n);
  MapMat(out.data(), m, n).noalias() = ConstMapMat(a.data(), m, k) * ConstMapMat(b.data(), k, n);
  return Tensor::make_result({m, n}, std::move(out), {a, b}, [m, k, n](detail::Node& self) {
    ConstMapMat dy(self.grad.data(), m, n);
    if (double* g = detail::parent_grad(self, 0)) {
      MapMat(g, m, k).noalias() += dy * ConstMapMat(parent_value(self, 1).data(), k, n).transpose();
    }
    if (double* g = detail::parent_grad(self, 1)) {
      MapMat(g, k, n).noalias() += ConstMapMat(parent_value(self, 0).data(), m, k).transpose() * dy;
    }
  });
}

Tensor transpose(const Tensor& a) {
  require_rank(a, 2, "transpose");
  const std::size_t m = a.dim(0), n = a.dim(1);
  std::vector<double> out(m * n);
  MapMat(out.data(), n, m) = ConstMapMat(a.data(), m, n).transpose();
  return Tensor::make_result({n, m}, std::move(out), {a}, [m, n](detail::Node& self) {
    if (double* g = detail::parent_grad(self, 0)) {
      MapMat(g, m, n) += ConstMapMat(self.grad.data(), n, m).transpose();
    }
  });
}

Tensor linear(const Tensor& x, const Tensor& w, const Tensor& b) {
  require_rank(x, 2, "linear");
  require_rank(w, 2, "linear");
  const std::size_t n = x.dim(0), in = x.dim(1), out_dim = w.dim(0);
  require(w.dim(1) == in, "linear: input has " + std::to_string(in) + " features, weight expects " +
                              std::to_string(w.dim(1)));
  const bool has_bias = b.defined();
  if (has_bias) require(b.numel() == out_dim, "linear: bias size mismatch");
  std::vector<double> out(n * out_dim);
  MapMat y(out.data(), n, out_dim);
  y.noalias() = ConstMapMat(x.data(), n, in) * ConstMapMat(w.data(), out_dim, in).transpose();
  if (has_bias) y.rowwise() += Eigen::Map<const Eigen::RowVectorXd>(b.data(), out_dim);

  std::vector<Tensor> parents{x, w};
  if (has_bias) parents.push_back(b);
  return Tensor::make_result({n, out_dim}, std::move(out), parents,
                             [n, in, out_dim, has_bias](detail::Node& self) {
    ConstMapMat dy(self.grad.data(), n, out_dim);
    if (double* g = detail::parent_grad(self, 0)) {
      MapMat(g, n, in).noalias() += dy * ConstMapMat(parent_value(self, 1).data(), out_dim, in);
    }
    if (double* g = detail::parent_grad(self, 1)) {
      MapMat(g, out_dim, in).noalias() += dy.transpose() * ConstMapMat(parent_value(self, 0).data(), n, in);
    }
    if (has_bias) {
      if (double* g = detail::parent_grad(self, 2)) {
        Eigen::Map<Eigen::RowVectorXd>(g, out_dim) += dy.colwise().sum();
      }
    }
  });
}

double gelu_value(double x) { return 0.5 * x * (1.0 + std::erf(x * std::numbers::sqrt2 / 2.0)); }

Tensor gelu(const Tensor& x) {
  std::vector<double> out(x.numel());
  for (std::size_t i = 0; i < out.size(); ++i) out[i] = gelu_value(x[i]);
  return Tensor::make_result(x.shape(), std::move(out), {x}, [](detail::Node& self) {
    if (double* g = detail::parent_grad(self, 0)) {
      const auto& xv = parent_value(self, 0);
      const double inv_sqrt_2pi = 1.0 / std::sqrt(2.0 * std::numbers::pi);
      for (std::size_t i = 0; i < xv.size(); ++i) {
        const double v = xv[i];
        const double cdf = 0.5 * (1.0 + std::erf(v * std::numbers::sqrt2 / 2.0));
        const double pdf = inv_sqrt_2pi * std::exp(-0.5 * v * v);
        g[i] += self.grad[i] * (cdf + v * pdf);
      }
    }
  });
}

Tensor relu(const Tensor& x) {
  std::vector<double> out(x.numel());
  for (std::size_t i = 0; i < out.size(); ++i) out[i] = x[i] > 0.0 ? x[i] : 0.0;
  return Tensor::make_result(x.shape(), std::move(out), {x}, [](detail::Node& self) {
    if (double* g = detail::parent_grad(self, 0)) {
      const auto& xv = parent_value(self, 0);
      for (std::size_t i = 0; i < xv.size(); ++i) {
        if (xv[i] > 0.0) g[i] += self.grad[i];
      }
    }
  });
}

Tensor softmax_rows(const Tensor& x) {
  require_rank(x, 2, "softmax_rows");
  const std::size_t m = x.dim(0), n = x.dim(1);
  std::vector<double> out(m * n);
  for (std::size_t r = 0; r < m; ++r) {
    const double* in = x.data() + r * n;
    double* y = out.data() + r * n;
    const double mx = *std::max_element(in, in + n);
    double z = 0.0;
    for (std::size_t c = 0; c < n; ++c) z += (y[c] = std::exp(in[c] - mx));
    for (std::size_t c = 0; c < n; ++c) y[c] /= z;
  }
  return Tensor::make_result({m, n}, std::move(out), {x}, [m, n](detail::Node& self) {
    if (double* g = detail::parent_grad(self, 0)) {
      for (std::size_t r = 0; r < m; ++r) {
        const double* y = self.value.data() + r * n;
        const double* dy = self.grad.data() + r * n;
        double dot = 0.0;
        for (std::size_t c = 0; c < n; ++c) dot += dy[c] * y[c];
        for (std::size_t c = 0; c < n; ++c) g[r * n + c] += y[c] * (dy[c] - dot);
      }
    }
  });
}

Tensor log_softmax_rows(const Tensor& x) {
  require_rank(x, 2, "log_softmax_rows");
  const std::size_t m = x.dim(0), n = x.dim(1);
  std::vector<double> out(m * n);
  for (std::size_t r = 0; r < m; ++r) {
    const double* in = x.data() + r * n;
    const double mx = *std::max_element(in, in + n);
    double z = 0.0;
    for (std::size_t c = 0; c < n; ++c) z += std::exp(in[c] - mx);
    const double lse = mx + std::log(z);
    for (std::size_t c = 0; c < n; ++c) out[r * n + c] = in[c] - lse;
  }
  return Tensor::make_result({m, n}, std::move(out), {x}, [m, n](detail::Node& self) {
    if (double* g = detail::parent_grad(self, 0)) {
      for (std::size_t r = 0; r < m; ++r) {
        const double* y = self.value.data() + r * n;
        const double* dy = self.grad.data() + r * n;
        double total = 0.0;
        for (std::size_t c = 0; c < n; ++c) total += dy[c];
        for (std::size_t c = 0; c < n; ++c) g[r * n + c] += dy[c] - std::exp(y[c]) * total;
      }
    }
  });
}

Tensor layer_norm_rows(const Tensor& x, const Tensor& gamma, const Tensor& beta, double eps) {
  require_rank(x, 2, "layer_norm_rows");
  const std::size_t m = x.dim(0), n = x.dim(1);
  require(gamma.numel() == n && beta.numel() == n, "layer_norm_rows: affine size mismatch");
  std::vector<double> xhat(m * n), inv_std(m), out(m * n);
  for (std::size_t r = 0; r < m; ++r) {
    const double* in = x.data() + r * n;
    double mu = 0.0;
    for (std::size_t c = 0; c < n; ++c) mu += in[c];
    mu /= static_cast<double>(n);
    double var = 0.0;
    for (std::size_t c = 0; c < n; ++c) var += (in[c] - mu) * (in[c] - mu);
    var /= static_cast<double>(n);
    inv_std[r] = 1.0 / std::sqrt(var + eps);
    for (std::size_t c = 0; c < n; ++c) {
      xhat[r * n + c] = (in[c] - mu) * inv_std[r];
      out[r * n + c] = xhat[r * n + c] * gamma[c] + beta[c];
    }
  }
  return Tensor::make_result({m, n}, std::move(out), {x, gamma, beta},
                             [m, n, xhat = std::move(xhat), inv_std = std::move(inv_std)](detail::Node& self) {
    const auto& gv = parent_value(self, 1);
    double* gx = detail::parent_grad(self, 0);
    double* gg = detail::parent_grad(self, 1);
    double* gb = detail::parent_grad(self, 2);
    std::vector<double> dxhat(n);
    for (std::size_t r = 0; r < m; ++r) {
      const double* dy = self.grad.data() + r * n;
      const double* xh = xhat.data() + r * n;
      double s1 = 0.0, s2 = 0.0;
      for (std::size_t c = 0; c < n; ++c) {
        dxhat[c] = dy[c] * gv[c];
        s1 += dxhat[c];
        s2 += dxhat[c] * xh[c];
        if (gg) gg[c] += dy[c] * xh[c];
        if (gb) gb[c] += dy[c];
      }
      if (gx) {
        const double inv_n = 1.0 / static_cast<double>(n);
        for (std::size_t c = 0; c < n; ++c) {
          gx[r * n + c] += inv_std[r] * (dxhat[c] - inv_n * s1 - xh[c] * inv_n * s2);
        }
      }
    }
  });
}

std::size_t conv_out_size(std::size_t in, std::size_t kernel, std::size_t stride, std::size_t pad) {
  if (in + 2 * pad < kernel || stride == 0) return 0;
  return (in + 2 * pad - kernel) / stride + 1;
}

Tensor conv2d(const Tensor& x, const Tensor& w, const Tensor& b, Conv2dOptions opts) {
  require_rank(x, 4, "conv2d");
  require_rank(w, 4, "conv2d");
  const std::size_t batch = x.dim(0), c = x.dim(1), h = x.dim(2), wd = x.dim(3);
  const std::size_t o = w.dim(0), kh = w.dim(2), kw = w.dim(3);
  require(w.dim(1) == c, "conv2d: input has " + std::to_string(c) + " channels, kernel " +
                             shape_str(w.shape()));
  const std::size_t oh = conv_out_size(h, kh, opts.stride, opts.pad);
  const std::size_t ow = conv_out_size(wd, kw, opts.stride, opts.pad);
  require(oh > 0 && ow > 0, "conv2d: input " + shape_str(x.shape()) + " too small for kernel " +
                                shape_str(w.shape()));
  const bool has_bias = b.defined();
  if (has_bias) require(b.numel() == o, "conv2d: bias size mismatch");

  const std::size_t kdim = c * kh * kw, plane = oh * ow;
  const bool pointwise = kh == 1 && kw == 1 && opts.stride == 1 && opts.pad == 0;
  std::vector<double> out(batch * o * plane);
  std::vector<double> col(pointwise ? 0 : kdim * plane);
  ConstMapMat wm(w.data(), o, kdim);
  for (std::size_t n = 0; n < batch; ++n) {
    const double* img = x.data() + n * c * h * wd;
    const double* cols = img;
    if (!pointwise) {
      im2col(img, c, h, wd, kh, kw, opts.stride, opts.pad, oh, ow, col.data());
      cols = col.data();
    }
    MapMat y(out.data() + n * o * plane, o, plane);
    y.noalias() = wm * ConstMapMat(cols, kdim, plane);
    if (has_bias) y.colwise() += Eigen::Map<const Eigen::VectorXd>(b.data(), o);
  }

  std::vector<Tensor> parents{x, w};
  if (has_bias) parents.push_back(b);
  const std::size_t stride = opts.stride, pad = opts.pad;
  return Tensor::make_result({batch, o, oh, ow}, std::move(out), parents,
                             [=](detail::Node& self) {
    double* gx = detail::parent_grad(self, 0);
    double* gw = detail::parent_grad(self, 1);
    double* gb = has_bias ? detail::parent_grad(self, 2) : nullptr;
    const auto& xv = parent_value(self, 0);
    ConstMapMat wmat(parent_value(self, 1).data(), o, kdim);
    std::vector<double> colbuf(pointwise ? 0 : kdim * plane);
    std::vector<double> dcol(gx && !pointwise ? kdim * plane : 0);
    for (std::size_t n = 0; n < batch; ++n) {
      ConstMapMat dy(self.grad.data() + n * o * plane, o, plane);
      const double* img = xv.data() + n * c * h * wd;
      if (gw) {
        const double* cols = img;
        if (!pointwise) {
          im2col(img, c, h, wd, kh, kw, stride, pad, oh, ow, colbuf.data());
          cols = colbuf.data();
        }
        MapMat(gw, o, kdim).noalias() += dy * ConstMapMat(cols, kdim, plane).transpose();
      }
      if (gb) Eigen::Map<Eigen::VectorXd>(gb, o) += dy.rowwise().sum();
      if (gx) {
        double* gimg = gx + n * c * h * wd;
        if (pointwise) {
          MapMat(gimg, kdim, plane).noalias() += wmat.transpose() * dy;
        } else {
          MapMat(dcol.data(), kdim, plane).noalias() = wmat.transpose() * dy;
          col2im_add(dcol.data(), c, h, wd, kh, kw, stride, pad, oh, ow, gimg);
        }
      }
    }
  });
}

Tensor batch_norm2d(const Tensor& x, const Tensor& gamma, const Tensor& beta,
                    Tensor& running_mean, Tensor& running_var, bool train, double momentum,
                    double eps) {
  require_rank(x, 4, "batch_norm2d");
  const std::size_t batch = x.dim(0), c = x.dim(1), plane = x.dim(2) * x.dim(3);
  require(gamma.numel() == c && beta.numel() == c && running_mean.numel() == c &&
              running_var.numel() == c,
          "batch_norm2d: parameter size mismatch for " + shape_str(x.shape()));
  const std::size_t count = batch * plane;
  std::vector<double> mu(c), inv_std(c);
  if (train) {
    require(count > 1, "batch_norm2d: training needs more than one value per channel");
    for (std::size_t ch = 0; ch < c; ++ch) {
      double s = 0.0;
      for (std::size_t n = 0; n < batch; ++n) {
        const double* p = x.data() + (n * c + ch) * plane;
        for (std::size_t i = 0; i < plane; ++i) s += p[i];
      }
      mu[ch] = s / static_cast<double>(count);
      double v = 0.0;
      for (std::size_t n = 0; n < batch; ++n) {
        const double* p = x.data() + (n * c + ch) * plane;
        for (std::size_t i = 0; i < plane; ++i) v += (p[i] - mu[ch]) * (p[i] - mu[ch]);
      }
      const double biased = v / static_cast<double>(count);
      inv_std[ch] = 1.0 / std::sqrt(biased + eps);
      const double unbiased = v / static_cast<double>(count - 1);
      running_mean[ch] = (1.0 - momentum) * running_mean[ch] + momentum * mu[ch];
      running_var[ch] = (1.0 - momentum) * running_var[ch] + momentum * unbiased;
    }
  } else {
    for (std::size_t ch = 0; ch < c; ++ch) {
      mu[ch] = running_mean[ch];
      inv_std[ch] = 1.0 / std::sqrt(running_var[ch] + eps);
    }
  }

  std::vector<double> xhat(x.numel()), out(x.numel());
  for (std::size_t n = 0; n < batch; ++n) {
    for (std::size_t ch = 0; ch < c; ++ch) {
      const std::size_t off = (n * c + ch) * plane;
      for (std::size_t i = 0; i < plane; ++i) {
        xhat[off + i] = (x[off + i] - mu[ch]) * inv_std[ch];
        out[off + i] = gamma[ch] * xhat[off + i] + beta[ch];
      }
    }
  }
  return Tensor::make_result(x.shape(), std::move(out), {x, gamma, beta},
                             [=, xhat = std::move(xhat)](detail::Node& self) {
    const auto& gv = parent_value(self, 1);
    double* gx = detail::parent_grad(self, 0);
    double* gg = detail::parent_grad(self, 1);
    double* gb = detail::parent_grad(self, 2);
    const double inv_count = 1.0 / static_cast<double>(count);
    for (std::size_t ch = 0; ch < c; ++ch) {
      double sdy = 0.0, sdy_xhat = 0.0;
      for (std::size_t n = 0; n < batch; ++n) {
        const std::size_t off = (n * c + ch) * plane;
        for (std::size_t i = 0; i < plane; ++i) {
          sdy += self.grad[off + i];
          sdy_xhat += self.grad[off + i] * xhat[off + i];
        }
      }
      if (gg) gg[ch] += sdy_xhat;
      if (gb) gb[ch] += sdy;
      if (!gx) continue;
      const double k = gv[ch] * inv_std[ch];
      for (std::size_t n = 0; n < batch; ++n) {
        const std::size_t off = (n * c + ch) * plane;
        for (std::size_t i = 0; i < plane; ++i) {
          if (train) {
            gx[off + i] += k * (self.grad[off + i] - inv_count * sdy -
                                xhat[off + i] * inv_count * sdy_xhat);
          } else {
            gx[off + i] += k * self.grad[off + i];
          }
        }
      }
    }
  });
}

Tensor max_pool2d(const Tensor& x, std::size_t kernel, std::size_t stride, std::size_t pad) {
  require_rank(x, 4, "max_pool2d");
  const std::size_t batch = x.dim(0), c = x.dim(1), h = x.dim(2), w = x.dim(3);
  const std::size_t oh = conv_out_size(h, kernel, stride, pad);
  const std::size_t ow = conv_out_size(w, kernel, stride, pad);
  require(oh > 0 && ow > 0, "max_pool2d: input " + shape_str(x.shape()) + " too small");
  std::vector<double> out(batch * c * oh * ow);
  std::vector<std::size_t> arg(out.size());
  for (std::size_t plane_idx = 0; plane_idx < batch * c; ++plane_idx) {
    const double* src = x.data() + plane_idx * h * w;
    for (std::size_t oy = 0; oy < oh; ++oy) {
      for (std::size_t ox = 0; ox < ow; ++ox) {
        double best = -std::numeric_limits<double>::infinity();
        std::size_t best_idx = 0;
        for (std::size_t i = 0; i < kernel; ++i) {
          const long iy = static_cast<long>(oy * stride + i) - static_cast<long>(pad);
          if (iy < 0 || iy >= static_cast<long>(h)) continue;
          for (std::size_t j = 0; j < kernel; ++j) {
            const long ix = static_cast<long>(ox * stride + j) - static_cast<long>(pad);
            if (ix < 0 || ix >= static_cast<long>(w)) continue;
            const std::size_t idx = static_cast<std::size_t>(iy) * w + static_cast<std::size_t>(ix);
            if (src[idx] > best) {
              best = src[idx];
              best_idx = idx;
            }
          }
        }
        const std::size_t o = (plane_idx * oh + oy) * ow + ox;
        out[o] = best;
        arg[o] = plane_idx * h * w + best_idx;
      }
    }
  }
  return Tensor::make_result({batch, c, oh, ow}, std::move(out), {x},
                             [arg = std::move(arg)](detail::Node& self) {
    if (double* g = detail::parent_grad(self, 0)) {
      for (std::size_t i = 0; i < arg.size(); ++i) g[arg[i]] += self.grad[i];
    }
  });
}

Tensor global_avg_pool(const Tensor& x) {
  require_rank(x, 4, "global_avg_pool");
  const std::size_t batch = x.dim(0), c = x.dim(1), plane = x.dim(2) * x.dim(3);
  std::vector<double> out(batch * c);
  for (std::size_t i = 0; i < batch * c; ++i) {
    const double* p = x.data() + i * plane;
    double s = 0.0;
    for (std::size_t j = 0; j < plane; ++j) s += p[j];
    out[i] = s / static_cast<double>(plane);
  }
  return Tensor::make_result({batch, c}, std::move(out), {x}, [plane](detail::Node& self) {
    if (double* g = detail::parent_grad(self, 0)) {
      const double inv = 1.0 / static_cast<double>(plane);
      for (std::size_t i = 0; i < self.grad.size(); ++i) {
        for (std::size_t j = 0; j < plane; ++j) g[i * plane + j] += self.grad[i] * inv;
      }
    }
  });
}

Tensor concat(const std::vector<Tensor>& parts, std::size_t axis) {
  require(!parts.empty(), "concat: no inputs");
  const Shape& ref = parts.front().shape();
  require(axis < ref.size(), "concat: axis out of range");
  Shape out_shape = ref;
  out_shape[axis] = 0;
  for (const auto& p : parts) {
    require(p.rank() == ref.size(), "concat: rank mismatch");
    for (std::size_t d = 0; d < ref.size(); ++d) {
      if (d != axis) require(p.dim(d) == ref[d], "concat: extent mismatch on axis " + std::to_string(d));
    }
    out_shape[axis] += p.dim(axis);
  }
  const AxisSplit total = split_axis(out_shape, axis);
  std::vector<double> out(shape_numel(out_shape));
  std::vector<std::size_t> offsets;
  std::size_t offset = 0;
  for (const auto& p : parts) {
    const std::size_t chunk = p.dim(axis) * total.inner;
    for (std::size_t o = 0; o < total.outer; ++o) {
      std::copy_n(p.data() + o * chunk, chunk,
                  out.data() + o * total.extent * total.inner + offset * total.inner);
    }
    offsets.push_back(offset);
    offset += p.dim(axis);
  }
  return Tensor::make_result(out_shape, std::move(out), parts,
                             [total, offsets](detail::Node& self) {
    for (std::size_t k = 0; k < self.parents.size(); ++k) {
      double* g = detail::parent_grad(self, k);
      if (!g) continue;
      const std::size_t extent = self.parents[k]->value.size() / (total.outer * total.inner);
      const std::size_t chunk = extent * total.inner;
      for (std::size_t o = 0; o < total.outer; ++o) {
        const double* src = self.grad.data() + o * total.extent * total.inner + offsets[k] * total.inner;
        for (std::size_t i = 0; i < chunk; ++i) g[o * chunk + i] += src[i];
      }
    }
  });
}

Tensor slice(const Tensor& x, std::size_t axis, std::size_t begin, std::size_t end) {
  require(axis < x.rank(), "slice: axis out of range");
  require(begin < end && end <= x.dim(axis), "slice: bad range");
  const AxisSplit s = split_axis(x.shape(), axis);
  Shape out_shape = x.shape();
  out_shape[axis] = end - begin;
  const std::size_t chunk = (end - begin) * s.inner;
  std::vector<double> out(s.outer * chunk);
  for (std::size_t o = 0; o < s.outer; ++o) {
    std::copy_n(x.data() + (o * s.extent + begin) * s.inner, chunk, out.data() + o * chunk);
  }
  return Tensor::make_result(out_shape, std::move(out), {x}, [s, begin, chunk](detail::Node& self) {
    if (double* g = detail::parent_grad(self, 0)) {
      for (std::size_t o = 0; o < s.outer; ++o) {
        double* dst = g + (o * s.extent + begin) * s.inner;
        for (std::size_t i = 0; i < chunk; ++i) dst[i] += self.grad[o * chunk + i];
      }
    }
  });
}

Tensor upsample_bilinear(const Tensor& x, std::size_t out_h, std::size_t out_w) {
  require_rank(x, 4, "upsample_bilinear");
  require(out_h > 0 && out_w > 0, "upsample_bilinear: empty output");
  const std::size_t planes = x.dim(0) * x.dim(1), h = x.dim(2), w = x.dim(3);

  struct Tap {
    std::size_t lo, hi;
    double frac;
  };
  auto taps = [](std::size_t in, std::size_t out) {
    std::vector<Tap> t(out);
    for (std::size_t i = 0; i < out; ++i) {
      const double src = out > 1 ? static_cast<double>(i) * static_cast<double>(in - 1) /
                                       static_cast<double>(out - 1)
                                 : 0.0;
      const auto lo = std::min(static_cast<std::size_t>(std::floor(src)), in - 1);
      t[i] = {lo, std::min(lo + 1, in - 1), src - static_cast<double>(lo)};
    }
    return t;
  };
  auto ty = taps(h, out_h), tx = taps(w, out_w);

  std::vector<double> out(planes * out_h * out_w);
  for (std::size_t p = 0; p < planes; ++p) {
    const double* src = x.data() + p * h * w;
    double* dst = out.data() + p * out_h * out_w;
    for (std::size_t i = 0; i < out_h; ++i) {
      const Tap& a = ty[i];
      for (std::size_t j = 0; j < out_w; ++j) {
        const Tap& b = tx[j];
        dst[i * out_w + j] = (1 - a.frac) * ((1 - b.frac) * src[a.lo * w + b.lo] + b.frac * src[a.lo * w + b.hi]) +
                             a.frac * ((1 - b.frac) * src[a.hi * w + b.lo] + b.frac * src[a.hi * w + b.hi]);
      }
    }
  }
  return Tensor::make_result({x.dim(0), x.dim(1), out_h, out_w}, std::move(out), {x},
                             [=](detail::Node& self) {
    double* g = detail::parent_grad(self, 0);
    if (!g) return;
    for (std::size_t p = 0; p < planes; ++p) {
      const double* dy = self.grad.data() + p * out_h * out_w;
      double* dst = g + p * h * w;
      for (std::size_t i = 0; i < out_h; ++i) {
        const Tap& a = ty[i];
        for (std::size_t j = 0; j < out_w; ++j) {
          const Tap& b = tx[j];
          const double d = dy[i * out_w + j];
          dst[a.lo * w + b.lo] += (1 - a.frac) * (1 - b.frac) * d;
          dst[a.lo * w + b.hi] += (1 - a.frac) * b.frac * d;
          dst[a.hi * w + b.lo] += a.frac * (1 - b.frac) * d;
          dst[a.hi * w + b.hi] += a.frac * b.frac * d;
        }
      }
    }
  });
}

Tensor instance_standardize(const Tensor& x, double eps) {
  require_rank(x, 4, "instance_standardize");
  const std::size_t planes = x.dim(0) * x.dim(1), n = x.dim(2) * x.dim(3);
  std::vector<double> out(x.numel()), inv_std(planes);
  for (std::size_t p = 0; p < planes; ++p) {
    const double* src = x.data() + p * n;
    double mu = 0.0;
    for (std::size_t i = 0; i < n; ++i) mu += src[i];
    mu /= static_cast<double>(n);
    double var = 0.0;
    for (std::size_t i = 0; i < n; ++i) var += (src[i] - mu) * (src[i] - mu);
    var /= static_cast<double>(n);
    inv_std[p] = 1.0 / std::sqrt(var + eps);
    for (std::size_t i = 0; i < n; ++i) out[p * n + i] = (src[i] - mu) * inv_std[p];
  }
  return Tensor::make_result(x.shape(), std::move(out), {x},
                             [planes, n, inv_std = std::move(inv_std)](detail::Node& self) {
    double* g = detail::parent_grad(self, 0);
    if (!g) return;
    const double inv_n = 1.0 / static_cast<double>(n);
    for (std::size_t p = 0; p < planes; ++p) {
      const double* dy = self.grad.data() + p * n;
      const double* xh = self.value.data() + p * n;
      double s1 = 0.0, s2 = 0.0;
      for (std::size_t i = 0; i < n; ++i) {
        s1 += dy[i];
        s2 += dy[i] * xh[i];
      }
      for (std::size_t i = 0; i < n; ++i) {
        g[p * n + i] += inv_std[p] * (dy[i] - inv_n * s1 - xh[i] * inv_n * s2);
      }
    }
  });
}

}  // namespace mvp::ops
