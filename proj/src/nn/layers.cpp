/* Copyright 2026 The CLFD Authors. All Rights Reserved.

Licensed under the Apache License, Version 2.0 (the "License");
you may not use this file except in compliance with the License.
You may obtain a copy of the License at

    http://www.apache.org/licenses/LICENSE-2.0

Unless required by applicable law or agreed to in writing, software
distributed under the License is distributed on an "AS IS" BASIS,
WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
See the License for the specific language governing permissions and
limitations under the License.
==============================================================================*/

#include "clfd/nn/layers.hpp"

#include <cmath>
#include <cstring>

#include <Eigen/Core>

#include "clfd/errors.hpp"

namespace clfd::nn {
namespace {

template <typename T>
using RowMat = Eigen::Matrix<T, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;

// cols[(c*k + ky)*k + kx][n*oh*ow + oy*ow + ox] = x[c][n][oy*s - p + ky][ox*s - p + kx]
template <typename T>
void im2col(const Tensor<T>& x, int k, int stride, int pad, int oh, int ow, std::vector<T>& cols) {
  const std::size_t S = static_cast<std::size_t>(x.n) * oh * ow;
  cols.resize(static_cast<std::size_t>(x.c) * k * k * S);
  T* dst = cols.data();
  for (int c = 0; c < x.c; ++c) {
    const T* src_c = x.row(c);
    for (int ky = 0; ky < k; ++ky) {
      for (int kx = 0; kx < k; ++kx) {
        for (int n = 0; n < x.n; ++n) {
          const T* src = src_c + static_cast<std::size_t>(n) * x.h * x.w;
          for (int oy = 0; oy < oh; ++oy) {
            const int iy = oy * stride - pad + ky;
            if (iy < 0 || iy >= x.h) {
              std::memset(dst, 0, sizeof(T) * ow);
              dst += ow;
              continue;
            }
            const T* line = src + static_cast<std::size_t>(iy) * x.w;
            if (stride == 1) {
              // valid ox range: 0 <= ox - pad + kx < w
              const int lo = std::max(0, pad - kx);
              const int hi = std::min(ow, x.w + pad - kx);
              for (int ox = 0; ox < lo; ++ox) dst[ox] = T(0);
              if (hi > lo) std::memcpy(dst + lo, line + lo - pad + kx, sizeof(T) * (hi - lo));
              for (int ox = std::max(hi, lo); ox < ow; ++ox) dst[ox] = T(0);
            } else {
              for (int ox = 0; ox < ow; ++ox) {
                const int ix = ox * stride - pad + kx;
                dst[ox] = (ix >= 0 && ix < x.w) ? line[ix] : T(0);
              }
            }
            dst += ow;
          }
        }
      }
    }
  }
}

template <typename T>
void col2im(const std::vector<T>& cols, int k, int stride, int pad, int oh, int ow, Tensor<T>& dx) {
  std::fill(dx.data.begin(), dx.data.end(), T(0));
  const T* src = cols.data();
  for (int c = 0; c < dx.c; ++c) {
    T* dst_c = dx.row(c);
    for (int ky = 0; ky < k; ++ky) {
      for (int kx = 0; kx < k; ++kx) {
        for (int n = 0; n < dx.n; ++n) {
          T* dst = dst_c + static_cast<std::size_t>(n) * dx.h * dx.w;
          for (int oy = 0; oy < oh; ++oy) {
            const int iy = oy * stride - pad + ky;
            if (iy < 0 || iy >= dx.h) {
              src += ow;
              continue;
            }
            T* line = dst + static_cast<std::size_t>(iy) * dx.w;
            if (stride == 1) {
              const int lo = std::max(0, pad - kx);
              const int hi = std::min(ow, dx.w + pad - kx);
              T* out = line - pad + kx;
              for (int ox = lo; ox < hi; ++ox) out[ox] += src[ox];
            } else {
              for (int ox = 0; ox < ow; ++ox) {
                const int ix = ox * stride - pad + kx;
                if (ix >= 0 && ix < dx.w) line[ix] += src[ox];
              }
            }
            src += ow;
          }
        }
      }
    }
  }
}

}  // namespace

template <typename T>
Conv2d<T>::Conv2d(const std::string& name, int in_channels, int out_channels, int kernel,
                  int stride, int pad)
    : weight(name + ".weight", {out_channels, in_channels, kernel, kernel}),
      cin_(in_channels), cout_(out_channels), kernel_(kernel), stride_(stride), pad_(pad) {}

template <typename T>
void Conv2d<T>::init(Rng& rng) {
  const double bound = 1.0 / std::sqrt(static_cast<double>(cin_ * kernel_ * kernel_));
  for (auto& v : weight.value) v = static_cast<T>(rng.uniform(-bound, bound));
}

template <typename T>
void Conv2d<T>::forward(const Tensor<T>& x, Tensor<T>& y) {
  if (x.c != cin_) {
    throw ShapeError(weight.name + ": expected " + std::to_string(cin_) + " input channels, got " +
                     std::to_string(x.c));
  }
  in_n_ = x.n;
  in_h_ = x.h;
  in_w_ = x.w;
  out_h_ = out_size(x.h);
  out_w_ = out_size(x.w);
  im2col(x, kernel_, stride_, pad_, out_h_, out_w_, cols_);
  y.resize(cout_, x.n, out_h_, out_w_);
  const Eigen::Index K = static_cast<Eigen::Index>(cin_) * kernel_ * kernel_;
  const Eigen::Index S = static_cast<Eigen::Index>(y.spatial());
  Eigen::Map<const RowMat<T>> w(weight.value.data(), cout_, K);
  Eigen::Map<const RowMat<T>> c(cols_.data(), K, S);
  Eigen::Map<RowMat<T>> out(y.data.data(), cout_, S);
  out.noalias() = w * c;
}

template <typename T>
void Conv2d<T>::backward(const Tensor<T>& dy, Tensor<T>* dx) {
  const Eigen::Index K = static_cast<Eigen::Index>(cin_) * kernel_ * kernel_;
  const Eigen::Index S = static_cast<Eigen::Index>(dy.spatial());
  Eigen::Map<const RowMat<T>> g(dy.data.data(), cout_, S);
  Eigen::Map<const RowMat<T>> c(cols_.data(), K, S);
  Eigen::Map<RowMat<T>> gw(weight.grad.data(), cout_, K);
  gw.noalias() += g * c.transpose();
  if (dx == nullptr) return;
  dcols_.resize(static_cast<std::size_t>(K * S));
  Eigen::Map<const RowMat<T>> w(weight.value.data(), cout_, K);
  Eigen::Map<RowMat<T>> gc(dcols_.data(), K, S);
  gc.noalias() = w.transpose() * g;
  dx->resize(cin_, in_n_, in_h_, in_w_);
  col2im(dcols_, kernel_, stride_, pad_, out_h_, out_w_, *dx);
}

template <typename T>
BatchNorm2d<T>::BatchNorm2d(const std::string& name, int channels)
    : gamma(name + ".gamma", {channels}), beta(name + ".beta", {channels}),
      running_mean{name + ".running_mean", std::vector<T>(channels, T(0))},
      running_var{name + ".running_var", std::vector<T>(channels, T(1))} {
  std::fill(gamma.value.begin(), gamma.value.end(), T(1));
}

template <typename T>
void BatchNorm2d<T>::forward(const Tensor<T>& x, Tensor<T>& y, bool training) {
  y.resize(x.c, x.n, x.h, x.w);
  const std::size_t m = x.spatial();
  last_training_ = training;
  inv_std_.resize(x.c);
  if (training) xhat_.resize(x.size());
  for (int ch = 0; ch < x.c; ++ch) {
    const T* in = x.row(ch);
    T* out = y.row(ch);
    double mean, var;
    if (training) {
      double s = 0.0;
      for (std::size_t i = 0; i < m; ++i) s += in[i];
      mean = s / static_cast<double>(m);
      double sq = 0.0;
      for (std::size_t i = 0; i < m; ++i) {
        const double d = in[i] - mean;
        sq += d * d;
      }
      var = sq / static_cast<double>(m);
      const double unbiased = m > 1 ? sq / static_cast<double>(m - 1) : var;
      running_mean.value[ch] =
          static_cast<T>((1.0 - kMomentum) * running_mean.value[ch] + kMomentum * mean);
      running_var.value[ch] =
          static_cast<T>((1.0 - kMomentum) * running_var.value[ch] + kMomentum * unbiased);
    } else {
      mean = running_mean.value[ch];
      var = running_var.value[ch];
    }
    const T inv = static_cast<T>(1.0 / std::sqrt(var + kEps));
    inv_std_[ch] = inv;
    const T mu = static_cast<T>(mean);
    const T g = gamma.value[ch];
    const T b = beta.value[ch];
    if (training) {
      T* xh = xhat_.data() + ch * m;
      for (std::size_t i = 0; i < m; ++i) {
        xh[i] = (in[i] - mu) * inv;
        out[i] = g * xh[i] + b;
      }
    } else {
      for (std::size_t i = 0; i < m; ++i) out[i] = g * (in[i] - mu) * inv + b;
    }
  }
}

template <typename T>
void BatchNorm2d<T>::backward(const Tensor<T>& dy, Tensor<T>& dx) {
  dx.resize(dy.c, dy.n, dy.h, dy.w);
  const std::size_t m = dy.spatial();
  if (!last_training_) {
    throw PreconditionError(gamma.name + ": backward requires a training-mode forward");
  }
  for (int ch = 0; ch < dy.c; ++ch) {
    const T* g = dy.row(ch);
    const T* xh = xhat_.data() + ch * m;
    double sum_g = 0.0, sum_gx = 0.0;
    for (std::size_t i = 0; i < m; ++i) {
      sum_g += g[i];
      sum_gx += static_cast<double>(g[i]) * xh[i];
    }
    gamma.grad[ch] += static_cast<T>(sum_gx);
    beta.grad[ch] += static_cast<T>(sum_g);
    const double scale = gamma.value[ch] * inv_std_[ch] / static_cast<double>(m);
    const T a = static_cast<T>(scale * static_cast<double>(m));
    const T b = static_cast<T>(scale * sum_g);
    const T c = static_cast<T>(scale * sum_gx);
    T* out = dx.row(ch);
    for (std::size_t i = 0; i < m; ++i) out[i] = a * g[i] - b - c * xh[i];
  }
}

template <typename T>
void relu_inplace(Tensor<T>& x) {
  for (auto& v : x.data) v = v > T(0) ? v : T(0);
}

template <typename T>
void relu_backward_inplace(const Tensor<T>& y, Tensor<T>& dy) {
  for (std::size_t i = 0; i < dy.data.size(); ++i) {
    if (!(y.data[i] > T(0))) dy.data[i] = T(0);
  }
}

template <typename T>
BasicBlock<T>::BasicBlock(const std::string& name, int in_channels, int out_channels, int stride)
    : conv1_(name + ".conv1", in_channels, out_channels, 3, stride, 1),
      conv2_(name + ".conv2", out_channels, out_channels, 3, 1, 1),
      bn1_(name + ".bn1", out_channels), bn2_(name + ".bn2", out_channels),
      project_(stride != 1 || in_channels != out_channels),
      proj_conv_(name + ".shortcut.conv", in_channels, out_channels, 1, stride, 0),
      proj_bn_(name + ".shortcut.bn", out_channels) {}

template <typename T>
void BasicBlock<T>::init(Rng& rng) {
  conv1_.init(rng);
  conv2_.init(rng);
  if (project_) proj_conv_.init(rng);
}

template <typename T>
void BasicBlock<T>::forward(const Tensor<T>& x, Tensor<T>& y, bool training) {
  conv1_.forward(x, c1_);
  bn1_.forward(c1_, a1_, training);
  relu_inplace(a1_);
  conv2_.forward(a1_, c2_);
  bn2_.forward(c2_, out_, training);
  if (project_) {
    proj_conv_.forward(x, pc_);
    proj_bn_.forward(pc_, pb_, training);
    for (std::size_t i = 0; i < out_.data.size(); ++i) out_.data[i] += pb_.data[i];
  } else {
    for (std::size_t i = 0; i < out_.data.size(); ++i) out_.data[i] += x.data[i];
  }
  relu_inplace(out_);
  y = out_;
}

template <typename T>
void BasicBlock<T>::backward(const Tensor<T>& dy, Tensor<T>& dx) {
  g_b2_ = dy;
  relu_backward_inplace(out_, g_b2_);
  bn2_.backward(g_b2_, c2_);  // c2_ reused as scratch for d(conv2 out)
  conv2_.backward(c2_, &g_a1_);
  relu_backward_inplace(a1_, g_a1_);
  bn1_.backward(g_a1_, g_c1_);
  conv1_.backward(g_c1_, &dx);
  if (project_) {
    proj_bn_.backward(g_b2_, g_pc_);
    proj_conv_.backward(g_pc_, &g_x_short_);
    for (std::size_t i = 0; i < dx.data.size(); ++i) dx.data[i] += g_x_short_.data[i];
  } else {
    for (std::size_t i = 0; i < dx.data.size(); ++i) dx.data[i] += g_b2_.data[i];
  }
}

template <typename T>
void BasicBlock<T>::collect(std::vector<Param<T>*>& params, std::vector<Buffer<T>*>& buffers) {
  params.push_back(&conv1_.weight);
  params.push_back(&bn1_.gamma);
  params.push_back(&bn1_.beta);
  params.push_back(&conv2_.weight);
  params.push_back(&bn2_.gamma);
  params.push_back(&bn2_.beta);
  buffers.push_back(&bn1_.running_mean);
  buffers.push_back(&bn1_.running_var);
  buffers.push_back(&bn2_.running_mean);
  buffers.push_back(&bn2_.running_var);
  if (project_) {
    params.push_back(&proj_conv_.weight);
    params.push_back(&proj_bn_.gamma);
    params.push_back(&proj_bn_.beta);
    buffers.push_back(&proj_bn_.running_mean);
    buffers.push_back(&proj_bn_.running_var);
  }
}

template class Conv2d<float>;
template class Conv2d<double>;
template class BatchNorm2d<float>;
template class BatchNorm2d<double>;
template class BasicBlock<float>;
template class BasicBlock<double>;
template void relu_inplace(Tensor<float>&);
template void relu_inplace(Tensor<double>&);
template void relu_backward_inplace(const Tensor<float>&, Tensor<float>&);
template void relu_backward_inplace(const Tensor<double>&, Tensor<double>&);

}  // namespace clfd::nn
