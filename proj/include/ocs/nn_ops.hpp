// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <limits>
#include <vector>

#include "ocs/tensor.hpp"

namespace ocs {

// Layer kernels on NCHW tensors. Forward/backward pairs are free functions
// so they can be exercised (and finite-difference checked) without any graph
// or tape around them. All GEMM work goes through Eigen maps.

struct ConvGeom {
  int stride = 1;
  int padding = 0;
  int groups = 1;
};

inline int conv_out_extent(int in, int kernel, int stride, int padding) {
  return (in + 2 * padding - kernel) / stride + 1;
}

namespace detail {

/// im2col for one sample and one channel group into a wider matrix whose rows
/// hold several samples side by side. Row r starts at col + r*ld; this
/// sample's block is out_h*out_w wide. Row index r = (c_local*K + kh)*K + kw.
template <typename Scalar>
void im2col(const Scalar* x, int channels, int height, int width, int kernel,
            int stride, int padding, int out_h, int out_w, Scalar* col,
            std::int64_t ld) {
  for (int c = 0; c < channels; ++c) {
    for (int kh = 0; kh < kernel; ++kh) {
      for (int kw = 0; kw < kernel; ++kw) {
        Scalar* row = col + ((static_cast<std::int64_t>(c) * kernel + kh) *
                                 kernel +
                             kw) *
                                ld;
        for (int oh = 0; oh < out_h; ++oh) {
          const int ih = oh * stride - padding + kh;
          if (ih < 0 || ih >= height) {
            for (int ow = 0; ow < out_w; ++ow) row[oh * out_w + ow] = Scalar(0);
            continue;
          }
          for (int ow = 0; ow < out_w; ++ow) {
            const int iw = ow * stride - padding + kw;
            row[oh * out_w + ow] =
                (iw < 0 || iw >= width)
                    ? Scalar(0)
                    : x[(static_cast<std::int64_t>(c) * height + ih) * width +
                        iw];
          }
        }
      }
    }
  }
}

/// Scatter-add transpose of im2col, reading one sample's block from the wide
/// matrix (row stride ld).
template <typename Scalar>
void col2im(const Scalar* col, std::int64_t ld, int channels, int height,
            int width, int kernel, int stride, int padding, int out_h,
            int out_w, Scalar* x) {
  for (int c = 0; c < channels; ++c) {
    for (int kh = 0; kh < kernel; ++kh) {
      for (int kw = 0; kw < kernel; ++kw) {
        const Scalar* row =
            col + ((static_cast<std::int64_t>(c) * kernel + kh) * kernel + kw) *
                      ld;
        for (int oh = 0; oh < out_h; ++oh) {
          const int ih = oh * stride - padding + kh;
          if (ih < 0 || ih >= height) continue;
          for (int ow = 0; ow < out_w; ++ow) {
            const int iw = ow * stride - padding + kw;
            if (iw < 0 || iw >= width) continue;
            x[(static_cast<std::int64_t>(c) * height + ih) * width + iw] +=
                row[oh * out_w + ow];
          }
        }
      }
    }
  }
}

/// Samples per GEMM chunk so the column buffer stays under ~64 MB. Depends
/// only on shapes, so replays are deterministic.
inline int conv_chunk(std::int64_t col_rows, std::int64_t spatial,
                      std::size_t scalar_size, int batch) {
  const std::int64_t budget = std::int64_t(1) << 26;
  const std::int64_t per_sample =
      col_rows * spatial * static_cast<std::int64_t>(scalar_size);
  const std::int64_t fit = per_sample > 0 ? budget / per_sample : batch;
  return static_cast<int>(std::max<std::int64_t>(1, std::min<std::int64_t>(
                                                        batch, fit)));
}

}  // namespace detail

template <typename Scalar>
Tensor<Scalar> conv2d_forward(const Tensor<Scalar>& x, const Tensor<Scalar>& w,
                              const Tensor<Scalar>* bias,
                              const ConvGeom& geom) {
  const int batch = x.dim(0), in_c = x.dim(1), h = x.dim(2), wd = x.dim(3);
  const int out_c = w.dim(0), in_per_group = w.dim(1), k = w.dim(2);
  if (in_c != in_per_group * geom.groups || out_c % geom.groups != 0)
    throw ShapeError("conv2d: weight " + shape_str(w.shape()) +
                     " incompatible with input " + shape_str(x.shape()));
  const int oh = conv_out_extent(h, k, geom.stride, geom.padding);
  const int ow = conv_out_extent(wd, k, geom.stride, geom.padding);
  const int out_per_group = out_c / geom.groups;
  const std::int64_t col_rows = static_cast<std::int64_t>(in_per_group) * k * k;

  const std::int64_t spatial = static_cast<std::int64_t>(oh) * ow;
  const int chunk = detail::conv_chunk(col_rows, spatial, sizeof(Scalar),
                                       batch);

  Tensor<Scalar> y({batch, out_c, oh, ow});
  std::vector<Scalar> col(static_cast<std::size_t>(col_rows) * spatial *
                          chunk);
  std::vector<Scalar> ybuf(static_cast<std::size_t>(out_per_group) * spatial *
                           chunk);
  for (int n0 = 0; n0 < batch; n0 += chunk) {
    const int nc = std::min(chunk, batch - n0);
    const std::int64_t wide = static_cast<std::int64_t>(nc) * spatial;
    for (int g = 0; g < geom.groups; ++g) {
      for (int i = 0; i < nc; ++i) {
        const Scalar* xg =
            x.data() + (static_cast<std::int64_t>(n0 + i) * in_c +
                        g * in_per_group) *
                           h * wd;
        detail::im2col(xg, in_per_group, h, wd, k, geom.stride, geom.padding,
                       oh, ow, col.data() + static_cast<std::int64_t>(i) *
                                                spatial,
                       wide);
      }
      Eigen::Map<const MatrixX<Scalar>> wmat(
          w.data() + static_cast<std::int64_t>(g) * out_per_group * col_rows,
          out_per_group, col_rows);
      Eigen::Map<const MatrixX<Scalar>> cmat(col.data(), col_rows, wide);
      Eigen::Map<MatrixX<Scalar>> ymat(ybuf.data(), out_per_group, wide);
      ymat.noalias() = wmat * cmat;
      for (int c = 0; c < out_per_group; ++c)
        for (int i = 0; i < nc; ++i)
          std::copy_n(ybuf.data() + static_cast<std::int64_t>(c) * wide +
                          static_cast<std::int64_t>(i) * spatial,
                      spatial,
                      y.data() + ((static_cast<std::int64_t>(n0 + i) * out_c +
                                   g * out_per_group + c)) *
                                     spatial);
    }
  }
  if (bias) {
    for (int n = 0; n < batch; ++n)
      for (int c = 0; c < out_c; ++c) {
        Scalar* yc =
            y.data() + (static_cast<std::int64_t>(n) * out_c + c) * spatial;
        const Scalar b = (*bias)[c];
        for (std::int64_t i = 0; i < spatial; ++i) yc[i] += b;
      }
  }
  return y;
}

template <typename Scalar>
struct Conv2dGrads {
  Tensor<Scalar> dx, dw, db;
};

template <typename Scalar>
Conv2dGrads<Scalar> conv2d_backward(const Tensor<Scalar>& x,
                                    const Tensor<Scalar>& w, bool has_bias,
                                    const ConvGeom& geom,
                                    const Tensor<Scalar>& dy) {
  const int batch = x.dim(0), in_c = x.dim(1), h = x.dim(2), wd = x.dim(3);
  const int out_c = w.dim(0), in_per_group = w.dim(1), k = w.dim(2);
  const int oh = dy.dim(2), ow = dy.dim(3);
  const int out_per_group = out_c / geom.groups;
  const std::int64_t col_rows = static_cast<std::int64_t>(in_per_group) * k * k;
  const std::int64_t spatial = static_cast<std::int64_t>(oh) * ow;

  Conv2dGrads<Scalar> grads;
  grads.dx = Tensor<Scalar>(x.shape());
  grads.dw = Tensor<Scalar>(w.shape());
  if (has_bias) grads.db = Tensor<Scalar>({out_c});

  const int chunk = detail::conv_chunk(col_rows, spatial, sizeof(Scalar),
                                       batch);
  std::vector<Scalar> col(static_cast<std::size_t>(col_rows) * spatial *
                          chunk);
  std::vector<Scalar> dcol(col.size());
  std::vector<Scalar> dybuf(static_cast<std::size_t>(out_per_group) * spatial *
                            chunk);
  for (int n0 = 0; n0 < batch; n0 += chunk) {
    const int nc = std::min(chunk, batch - n0);
    const std::int64_t wide = static_cast<std::int64_t>(nc) * spatial;
    for (int g = 0; g < geom.groups; ++g) {
      for (int i = 0; i < nc; ++i) {
        const Scalar* xg =
            x.data() + (static_cast<std::int64_t>(n0 + i) * in_c +
                        g * in_per_group) *
                           h * wd;
        detail::im2col(xg, in_per_group, h, wd, k, geom.stride, geom.padding,
                       oh, ow, col.data() + static_cast<std::int64_t>(i) *
                                                spatial,
                       wide);
      }
      for (int c = 0; c < out_per_group; ++c)
        for (int i = 0; i < nc; ++i)
          std::copy_n(dy.data() + ((static_cast<std::int64_t>(n0 + i) * out_c +
                                    g * out_per_group + c)) *
                                      spatial,
                      spatial,
                      dybuf.data() + static_cast<std::int64_t>(c) * wide +
                          static_cast<std::int64_t>(i) * spatial);
      Eigen::Map<const MatrixX<Scalar>> cmat(col.data(), col_rows, wide);
      Eigen::Map<const MatrixX<Scalar>> dymat(dybuf.data(), out_per_group,
                                              wide);
      Eigen::Map<MatrixX<Scalar>> dwmat(
          grads.dw.data() +
              static_cast<std::int64_t>(g) * out_per_group * col_rows,
          out_per_group, col_rows);
      dwmat.noalias() += dymat * cmat.transpose();

      Eigen::Map<const MatrixX<Scalar>> wmat(
          w.data() + static_cast<std::int64_t>(g) * out_per_group * col_rows,
          out_per_group, col_rows);
      Eigen::Map<MatrixX<Scalar>> dcmat(dcol.data(), col_rows, wide);
      dcmat.noalias() = wmat.transpose() * dymat;
      for (int i = 0; i < nc; ++i) {
        Scalar* dxg =
            grads.dx.data() + (static_cast<std::int64_t>(n0 + i) * in_c +
                               g * in_per_group) *
                                  h * wd;
        detail::col2im(dcol.data() + static_cast<std::int64_t>(i) * spatial,
                       wide, in_per_group, h, wd, k, geom.stride, geom.padding,
                       oh, ow, dxg);
      }
    }
  }
  if (has_bias) {
    for (int n = 0; n < batch; ++n)
      for (int c = 0; c < out_c; ++c) {
        const Scalar* dyc =
            dy.data() + (static_cast<std::int64_t>(n) * out_c + c) * spatial;
        Scalar acc(0);
        for (std::int64_t i = 0; i < spatial; ++i) acc += dyc[i];
        grads.db[c] += acc;
      }
  }
  return grads;
}

// ---------------------------------------------------------------------------
// Batch normalization (2d, per channel over N*H*W).

template <typename Scalar>
struct BnCache {
  Tensor<Scalar> mean;     // [C]
  Tensor<Scalar> inv_std;  // [C]
};

namespace detail {

template <typename Scalar>
void check_bn_lengths(int channels, const Tensor<Scalar>& gamma,
                      const Tensor<Scalar>& beta, const Tensor<Scalar>& mean,
                      const Tensor<Scalar>& var) {
  if (gamma.size() != channels || beta.size() != channels ||
      mean.size() != channels || var.size() != channels)
    throw ShapeError("batchnorm: parameter lengths " +
                     std::to_string(gamma.size()) + "/" +
                     std::to_string(beta.size()) + "/" +
                     std::to_string(mean.size()) + "/" +
                     std::to_string(var.size()) + " do not match " +
                     std::to_string(channels) + " channels");
}

}  // namespace detail

template <typename Scalar>
Tensor<Scalar> batchnorm2d_forward_train(
    const Tensor<Scalar>& x, const Tensor<Scalar>& gamma,
    const Tensor<Scalar>& beta, Tensor<Scalar>& running_mean,
    Tensor<Scalar>& running_var, Scalar momentum, Scalar eps,
    BnCache<Scalar>* cache) {
  const int batch = x.dim(0), channels = x.dim(1), h = x.dim(2), w = x.dim(3);
  detail::check_bn_lengths(channels, gamma, beta, running_mean, running_var);
  const std::int64_t plane = static_cast<std::int64_t>(h) * w;
  const Scalar m = static_cast<Scalar>(static_cast<std::int64_t>(batch) *
                                       plane);

  Tensor<Scalar> y(x.shape());
  Tensor<Scalar> mean({channels});
  Tensor<Scalar> inv_std({channels});
  for (int c = 0; c < channels; ++c) {
    Scalar sum(0), sumsq(0);
    for (int n = 0; n < batch; ++n) {
      const Scalar* xc =
          x.data() + (static_cast<std::int64_t>(n) * channels + c) * plane;
      for (std::int64_t i = 0; i < plane; ++i) {
        sum += xc[i];
        sumsq += xc[i] * xc[i];
      }
    }
    const Scalar mu = sum / m;
    // Biased (population) variance, also used for the running estimate.
    const Scalar var = sumsq / m - mu * mu;
    const Scalar istd = Scalar(1) / std::sqrt(var + eps);
    mean[c] = mu;
    inv_std[c] = istd;
    running_mean[c] = (Scalar(1) - momentum) * running_mean[c] + momentum * mu;
    running_var[c] = (Scalar(1) - momentum) * running_var[c] + momentum * var;
    const Scalar g = gamma[c], b = beta[c];
    for (int n = 0; n < batch; ++n) {
      const Scalar* xc =
          x.data() + (static_cast<std::int64_t>(n) * channels + c) * plane;
      Scalar* yc =
          y.data() + (static_cast<std::int64_t>(n) * channels + c) * plane;
      for (std::int64_t i = 0; i < plane; ++i)
        yc[i] = g * (xc[i] - mu) * istd + b;
    }
  }
  if (cache) {
    cache->mean = std::move(mean);
    cache->inv_std = std::move(inv_std);
  }
  return y;
}

template <typename Scalar>
Tensor<Scalar> batchnorm2d_forward_eval(const Tensor<Scalar>& x,
                                        const Tensor<Scalar>& gamma,
                                        const Tensor<Scalar>& beta,
                                        const Tensor<Scalar>& running_mean,
                                        const Tensor<Scalar>& running_var,
                                        Scalar eps) {
  const int batch = x.dim(0), channels = x.dim(1), h = x.dim(2), w = x.dim(3);
  detail::check_bn_lengths(channels, gamma, beta, running_mean, running_var);
  const std::int64_t plane = static_cast<std::int64_t>(h) * w;
  Tensor<Scalar> y(x.shape());
  for (int c = 0; c < channels; ++c) {
    const Scalar istd = Scalar(1) / std::sqrt(running_var[c] + eps);
    const Scalar g = gamma[c], b = beta[c], mu = running_mean[c];
    for (int n = 0; n < batch; ++n) {
      const Scalar* xc =
          x.data() + (static_cast<std::int64_t>(n) * channels + c) * plane;
      Scalar* yc =
          y.data() + (static_cast<std::int64_t>(n) * channels + c) * plane;
      for (std::int64_t i = 0; i < plane; ++i)
        yc[i] = g * (xc[i] - mu) * istd + b;
    }
  }
  return y;
}

template <typename Scalar>
struct BnGrads {
  Tensor<Scalar> dx, dgamma, dbeta;
};

template <typename Scalar>
BnGrads<Scalar> batchnorm2d_backward_train(const Tensor<Scalar>& x,
                                           const Tensor<Scalar>& gamma,
                                           const BnCache<Scalar>& cache,
                                           const Tensor<Scalar>& dy) {
  const int batch = x.dim(0), channels = x.dim(1), h = x.dim(2), w = x.dim(3);
  const std::int64_t plane = static_cast<std::int64_t>(h) * w;
  const Scalar m = static_cast<Scalar>(static_cast<std::int64_t>(batch) *
                                       plane);

  BnGrads<Scalar> grads;
  grads.dx = Tensor<Scalar>(x.shape());
  grads.dgamma = Tensor<Scalar>({channels});
  grads.dbeta = Tensor<Scalar>({channels});
  for (int c = 0; c < channels; ++c) {
    const Scalar mu = cache.mean[c], istd = cache.inv_std[c], g = gamma[c];
    Scalar sum_dy(0), sum_dy_xhat(0);
    for (int n = 0; n < batch; ++n) {
      const Scalar* xc =
          x.data() + (static_cast<std::int64_t>(n) * channels + c) * plane;
      const Scalar* dyc =
          dy.data() + (static_cast<std::int64_t>(n) * channels + c) * plane;
      for (std::int64_t i = 0; i < plane; ++i) {
        sum_dy += dyc[i];
        sum_dy_xhat += dyc[i] * (xc[i] - mu) * istd;
      }
    }
    grads.dgamma[c] = sum_dy_xhat;
    grads.dbeta[c] = sum_dy;
    const Scalar scale = g * istd / m;
    for (int n = 0; n < batch; ++n) {
      const Scalar* xc =
          x.data() + (static_cast<std::int64_t>(n) * channels + c) * plane;
      const Scalar* dyc =
          dy.data() + (static_cast<std::int64_t>(n) * channels + c) * plane;
      Scalar* dxc = grads.dx.data() +
                    (static_cast<std::int64_t>(n) * channels + c) * plane;
      for (std::int64_t i = 0; i < plane; ++i) {
        const Scalar xhat = (xc[i] - mu) * istd;
        dxc[i] = scale * (m * dyc[i] - sum_dy - xhat * sum_dy_xhat);
      }
    }
  }
  return grads;
}

/// Eval-mode backward treats the running statistics as constants.
template <typename Scalar>
BnGrads<Scalar> batchnorm2d_backward_eval(const Tensor<Scalar>& x,
                                          const Tensor<Scalar>& gamma,
                                          const Tensor<Scalar>& running_mean,
                                          const Tensor<Scalar>& running_var,
                                          Scalar eps, const Tensor<Scalar>& dy) {
  const int batch = x.dim(0), channels = x.dim(1), h = x.dim(2), w = x.dim(3);
  const std::int64_t plane = static_cast<std::int64_t>(h) * w;
  BnGrads<Scalar> grads;
  grads.dx = Tensor<Scalar>(x.shape());
  grads.dgamma = Tensor<Scalar>({channels});
  grads.dbeta = Tensor<Scalar>({channels});
  for (int c = 0; c < channels; ++c) {
    const Scalar istd = Scalar(1) / std::sqrt(running_var[c] + eps);
    const Scalar mu = running_mean[c];
    const Scalar gi = gamma[c] * istd;
    Scalar sum_dy(0), sum_dy_xhat(0);
    for (int n = 0; n < batch; ++n) {
      const Scalar* xc =
          x.data() + (static_cast<std::int64_t>(n) * channels + c) * plane;
      const Scalar* dyc =
          dy.data() + (static_cast<std::int64_t>(n) * channels + c) * plane;
      Scalar* dxc = grads.dx.data() +
                    (static_cast<std::int64_t>(n) * channels + c) * plane;
      for (std::int64_t i = 0; i < plane; ++i) {
        sum_dy += dyc[i];
        sum_dy_xhat += dyc[i] * (xc[i] - mu) * istd;
        dxc[i] = dyc[i] * gi;
      }
    }
    grads.dgamma[c] = sum_dy_xhat;
    grads.dbeta[c] = sum_dy;
  }
  return grads;
}

// ---------------------------------------------------------------------------
// Dense, activations, pooling, add.

template <typename Scalar>
Tensor<Scalar> dense_forward(const Tensor<Scalar>& x, const Tensor<Scalar>& w,
                             const Tensor<Scalar>* bias) {
  const int batch = x.dim(0);
  const int in = x.dim(1), out = w.dim(0);
  if (w.dim(1) != in)
    throw ShapeError("dense: weight " + shape_str(w.shape()) +
                     " incompatible with input " + shape_str(x.shape()));
  Tensor<Scalar> y({batch, out});
  y.mat(batch, out).noalias() = x.mat(batch, in) * w.mat(out, in).transpose();
  if (bias)
    y.mat(batch, out).rowwise() += bias->vec().transpose();
  return y;
}

template <typename Scalar>
struct DenseGrads {
  Tensor<Scalar> dx, dw, db;
};

template <typename Scalar>
DenseGrads<Scalar> dense_backward(const Tensor<Scalar>& x,
                                  const Tensor<Scalar>& w, bool has_bias,
                                  const Tensor<Scalar>& dy) {
  const int batch = x.dim(0), in = x.dim(1), out = w.dim(0);
  DenseGrads<Scalar> grads;
  grads.dx = Tensor<Scalar>(x.shape());
  grads.dw = Tensor<Scalar>(w.shape());
  grads.dx.mat(batch, in).noalias() = dy.mat(batch, out) * w.mat(out, in);
  grads.dw.mat(out, in).noalias() =
      dy.mat(batch, out).transpose() * x.mat(batch, in);
  if (has_bias) {
    grads.db = Tensor<Scalar>({out});
    grads.db.vec() = dy.mat(batch, out).colwise().sum().transpose();
  }
  return grads;
}

template <typename Scalar>
Tensor<Scalar> relu_forward(const Tensor<Scalar>& x) {
  Tensor<Scalar> y(x.shape());
  for (std::int64_t i = 0; i < x.size(); ++i)
    y[i] = x[i] > Scalar(0) ? x[i] : Scalar(0);
  return y;
}

template <typename Scalar>
Tensor<Scalar> relu_backward(const Tensor<Scalar>& x, const Tensor<Scalar>& dy) {
  Tensor<Scalar> dx(x.shape());
  for (std::int64_t i = 0; i < x.size(); ++i)
    dx[i] = x[i] > Scalar(0) ? dy[i] : Scalar(0);
  return dx;
}

template <typename Scalar>
Tensor<Scalar> maxpool2d_forward(const Tensor<Scalar>& x, int kernel,
                                 int stride, int padding,
                                 std::vector<std::int32_t>* argmax) {
  const int batch = x.dim(0), channels = x.dim(1), h = x.dim(2), w = x.dim(3);
  const int oh = conv_out_extent(h, kernel, stride, padding);
  const int ow = conv_out_extent(w, kernel, stride, padding);
  Tensor<Scalar> y({batch, channels, oh, ow});
  if (argmax) argmax->assign(static_cast<std::size_t>(y.size()), -1);
  std::int64_t o = 0;
  for (int n = 0; n < batch; ++n)
    for (int c = 0; c < channels; ++c) {
      const Scalar* xc =
          x.data() + (static_cast<std::int64_t>(n) * channels + c) * h * w;
      for (int i = 0; i < oh; ++i)
        for (int j = 0; j < ow; ++j, ++o) {
          Scalar best = -std::numeric_limits<Scalar>::infinity();
          std::int32_t best_at = -1;
          for (int kh = 0; kh < kernel; ++kh) {
            const int ih = i * stride - padding + kh;
            if (ih < 0 || ih >= h) continue;
            for (int kw = 0; kw < kernel; ++kw) {
              const int iw = j * stride - padding + kw;
              if (iw < 0 || iw >= w) continue;
              const Scalar v = xc[ih * w + iw];
              if (v > best) {
                best = v;
                best_at = static_cast<std::int32_t>(ih * w + iw);
              }
            }
          }
          y[o] = best;
          if (argmax) (*argmax)[static_cast<std::size_t>(o)] = best_at;
        }
    }
  return y;
}

template <typename Scalar>
Tensor<Scalar> maxpool2d_backward(const std::vector<int>& x_shape,
                                  const std::vector<std::int32_t>& argmax,
                                  const Tensor<Scalar>& dy) {
  const int batch = x_shape[0], channels = x_shape[1];
  const std::int64_t plane =
      static_cast<std::int64_t>(x_shape[2]) * x_shape[3];
  const std::int64_t out_plane = static_cast<std::int64_t>(dy.dim(2)) *
                                 dy.dim(3);
  Tensor<Scalar> dx(x_shape);
  std::int64_t o = 0;
  for (int n = 0; n < batch; ++n)
    for (int c = 0; c < channels; ++c) {
      Scalar* dxc =
          dx.data() + (static_cast<std::int64_t>(n) * channels + c) * plane;
      for (std::int64_t i = 0; i < out_plane; ++i, ++o)
        if (argmax[static_cast<std::size_t>(o)] >= 0)
          dxc[argmax[static_cast<std::size_t>(o)]] += dy[o];
    }
  return dx;
}

/// Global average pool collapses [N,C,H,W] to [N,C].
template <typename Scalar>
Tensor<Scalar> global_avg_pool_forward(const Tensor<Scalar>& x) {
  const int batch = x.dim(0), channels = x.dim(1);
  const std::int64_t plane = static_cast<std::int64_t>(x.dim(2)) * x.dim(3);
  Tensor<Scalar> y({batch, channels});
  for (int n = 0; n < batch; ++n)
    for (int c = 0; c < channels; ++c) {
      const Scalar* xc =
          x.data() + (static_cast<std::int64_t>(n) * channels + c) * plane;
      Scalar acc(0);
      for (std::int64_t i = 0; i < plane; ++i) acc += xc[i];
      y[static_cast<std::int64_t>(n) * channels + c] =
          acc / static_cast<Scalar>(plane);
    }
  return y;
}

template <typename Scalar>
Tensor<Scalar> global_avg_pool_backward(const std::vector<int>& x_shape,
                                        const Tensor<Scalar>& dy) {
  const int batch = x_shape[0], channels = x_shape[1];
  const std::int64_t plane =
      static_cast<std::int64_t>(x_shape[2]) * x_shape[3];
  Tensor<Scalar> dx(x_shape);
  for (int n = 0; n < batch; ++n)
    for (int c = 0; c < channels; ++c) {
      const Scalar g =
          dy[static_cast<std::int64_t>(n) * channels + c] /
          static_cast<Scalar>(plane);
      Scalar* dxc =
          dx.data() + (static_cast<std::int64_t>(n) * channels + c) * plane;
      for (std::int64_t i = 0; i < plane; ++i) dxc[i] = g;
    }
  return dx;
}

template <typename Scalar>
Tensor<Scalar> add_forward(const Tensor<Scalar>& a, const Tensor<Scalar>& b) {
  if (!a.same_shape(b))
    throw ShapeError("add: branch shapes differ: " + shape_str(a.shape()) +
                     " vs " + shape_str(b.shape()));
  Tensor<Scalar> y(a.shape());
  y.vec() = a.vec() + b.vec();
  return y;
}

// ---------------------------------------------------------------------------
// Softmax cross-entropy head.

template <typename Scalar>
struct SoftmaxXentResult {
  Scalar loss = Scalar(0);    // mean over the batch
  Tensor<Scalar> dlogits;     // d(mean loss)/d(logits)
  int correct = 0;            // argmax == label count
};

template <typename Scalar>
SoftmaxXentResult<Scalar> softmax_cross_entropy(
    const Tensor<Scalar>& logits, const std::vector<int>& labels) {
  const int batch = logits.dim(0), classes = logits.dim(1);
  if (static_cast<int>(labels.size()) != batch)
    throw ShapeError("softmax_cross_entropy: label count mismatch");
  SoftmaxXentResult<Scalar> result;
  result.dlogits = Tensor<Scalar>(logits.shape());
  Scalar total(0);
  for (int n = 0; n < batch; ++n) {
    const Scalar* z = logits.data() + static_cast<std::int64_t>(n) * classes;
    Scalar* dz =
        result.dlogits.data() + static_cast<std::int64_t>(n) * classes;
    const int label = labels[static_cast<std::size_t>(n)];
    if (label < 0 || label >= classes)
      throw Error("label out of range: " + std::to_string(label));
    Scalar zmax = z[0];
    int arg = 0;
    for (int c = 1; c < classes; ++c)
      if (z[c] > zmax) {
        zmax = z[c];
        arg = c;
      }
    Scalar denom(0);
    for (int c = 0; c < classes; ++c) denom += std::exp(z[c] - zmax);
    const Scalar log_denom = std::log(denom);
    total += log_denom - (z[label] - zmax);
    const Scalar inv_batch = Scalar(1) / static_cast<Scalar>(batch);
    for (int c = 0; c < classes; ++c) {
      const Scalar p = std::exp(z[c] - zmax) / denom;
      dz[c] = (p - (c == label ? Scalar(1) : Scalar(0))) * inv_batch;
    }
    if (arg == label) ++result.correct;
  }
  result.loss = total / static_cast<Scalar>(batch);
  return result;
}

}  // namespace ocs
