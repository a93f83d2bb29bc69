// Copyright 2026 The FRP Authors. All Rights Reserved.
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//     http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

// Dense building blocks for the toy backbones.  Feature maps are planar
// [C][H][W] arrays; every backward routine accumulates (+=) into its outputs.

#ifndef FRP_SRC_NN_OPS_HPP_
#define FRP_SRC_NN_OPS_HPP_

#include <algorithm>
#include <cmath>
#include <cstddef>

namespace frp::nn {

struct ConvShape {
  int in_channels;
  int out_channels;
  int kernel;
  int stride;
  int pad;
  int in_h;
  int in_w;

  int out_h() const { return (in_h + 2 * pad - kernel) / stride + 1; }
  int out_w() const { return (in_w + 2 * pad - kernel) / stride + 1; }
};

namespace detail {

// Range of output columns/rows whose input tap (o * stride + k - pad) is in
// bounds.
inline void valid_range(int k, int stride, int pad, int in_size, int out_size, int& lo, int& hi) {
  lo = 0;
  while (lo < out_size && lo * stride + k - pad < 0) ++lo;
  hi = out_size;
  while (hi > lo && (hi - 1) * stride + k - pad >= in_size) --hi;
}

}  // namespace detail

template <typename Real>
void conv2d_forward(const ConvShape& s, const Real* in, const Real* weight, const Real* bias, Real* out) {
  const int oh = s.out_h(), ow = s.out_w();
  const size_t out_plane = static_cast<size_t>(oh) * ow;
  for (int o = 0; o < s.out_channels; ++o) {
    Real* dst = out + o * out_plane;
    std::fill(dst, dst + out_plane, bias ? bias[o] : Real(0));
    for (int i = 0; i < s.in_channels; ++i) {
      const Real* src = in + static_cast<size_t>(i) * s.in_h * s.in_w;
      for (int ky = 0; ky < s.kernel; ++ky) {
        int y_lo, y_hi;
        detail::valid_range(ky, s.stride, s.pad, s.in_h, oh, y_lo, y_hi);
        for (int kx = 0; kx < s.kernel; ++kx) {
          int x_lo, x_hi;
          detail::valid_range(kx, s.stride, s.pad, s.in_w, ow, x_lo, x_hi);
          const Real w = weight[((static_cast<size_t>(o) * s.in_channels + i) * s.kernel + ky) * s.kernel + kx];
          for (int oy = y_lo; oy < y_hi; ++oy) {
            Real* drow = dst + static_cast<size_t>(oy) * ow;
            const Real* srow = src + static_cast<size_t>(oy * s.stride + ky - s.pad) * s.in_w + (kx - s.pad);
            if (s.stride == 1) {
#pragma omp simd
              for (int ox = x_lo; ox < x_hi; ++ox) drow[ox] += w * srow[ox];
            } else {
              for (int ox = x_lo; ox < x_hi; ++ox) drow[ox] += w * srow[ox * s.stride];
            }
          }
        }
      }
    }
  }
}

/// grad_in may be null when the input gradient is not needed.
template <typename Real>
void conv2d_backward(const ConvShape& s, const Real* in, const Real* weight, const Real* grad_out,
                     Real* grad_in, Real* grad_weight, Real* grad_bias) {
  const int oh = s.out_h(), ow = s.out_w();
  const size_t out_plane = static_cast<size_t>(oh) * ow;
  for (int o = 0; o < s.out_channels; ++o) {
    const Real* g = grad_out + o * out_plane;
    if (grad_bias) {
      Real acc = 0;
#pragma omp simd reduction(+ : acc)
      for (size_t p = 0; p < out_plane; ++p) acc += g[p];
      grad_bias[o] += acc;
    }
    for (int i = 0; i < s.in_channels; ++i) {
      const size_t in_off = static_cast<size_t>(i) * s.in_h * s.in_w;
      for (int ky = 0; ky < s.kernel; ++ky) {
        int y_lo, y_hi;
        detail::valid_range(ky, s.stride, s.pad, s.in_h, oh, y_lo, y_hi);
        for (int kx = 0; kx < s.kernel; ++kx) {
          int x_lo, x_hi;
          detail::valid_range(kx, s.stride, s.pad, s.in_w, ow, x_lo, x_hi);
          const size_t widx = ((static_cast<size_t>(o) * s.in_channels + i) * s.kernel + ky) * s.kernel + kx;
          const Real w = weight[widx];
          Real acc = 0;
          for (int oy = y_lo; oy < y_hi; ++oy) {
            const Real* grow = g + static_cast<size_t>(oy) * ow;
            const size_t row_off = in_off + static_cast<size_t>(oy * s.stride + ky - s.pad) * s.in_w + (kx - s.pad);
            const Real* srow = in + row_off;
            if (s.stride == 1) {
#pragma omp simd reduction(+ : acc)
              for (int ox = x_lo; ox < x_hi; ++ox) acc += grow[ox] * srow[ox];
              if (grad_in) {
                Real* girow = grad_in + row_off;
#pragma omp simd
                for (int ox = x_lo; ox < x_hi; ++ox) girow[ox] += w * grow[ox];
              }
            } else {
              for (int ox = x_lo; ox < x_hi; ++ox) acc += grow[ox] * srow[ox * s.stride];
              if (grad_in) {
                Real* girow = grad_in + row_off;
                for (int ox = x_lo; ox < x_hi; ++ox) girow[ox * s.stride] += w * grow[ox];
              }
            }
          }
          grad_weight[widx] += acc;
        }
      }
    }
  }
}

template <typename Real>
void relu_inplace(Real* x, size_t n) {
#pragma omp simd
  for (size_t i = 0; i < n; ++i) x[i] = x[i] > Real(0) ? x[i] : Real(0);
}

/// Zeroes grad where the ReLU output was not positive.
template <typename Real>
void relu_backward(const Real* out, Real* grad, size_t n) {
#pragma omp simd
  for (size_t i = 0; i < n; ++i) grad[i] = out[i] > Real(0) ? grad[i] : Real(0);
}

/// Nearest-neighbour upsampling of [C][h][w] by an integer factor.
template <typename Real>
void upsample_forward(const Real* in, int channels, int h, int w, int factor, Real* out) {
  const int H = h * factor, W = w * factor;
  for (int c = 0; c < channels; ++c)
    for (int y = 0; y < H; ++y) {
      const Real* srow = in + (static_cast<size_t>(c) * h + y / factor) * w;
      Real* drow = out + (static_cast<size_t>(c) * H + y) * W;
      for (int x = 0; x < W; ++x) drow[x] = srow[x / factor];
    }
}

template <typename Real>
void upsample_backward(const Real* grad_out, int channels, int h, int w, int factor, Real* grad_in) {
  const int H = h * factor, W = w * factor;
  for (int c = 0; c < channels; ++c)
    for (int y = 0; y < H; ++y) {
      const Real* grow = grad_out + (static_cast<size_t>(c) * H + y) * W;
      Real* drow = grad_in + (static_cast<size_t>(c) * h + y / factor) * w;
      for (int x = 0; x < W; ++x) drow[x / factor] += grow[x];
    }
}

template <typename Real>
Real sigmoid(Real x) {
  return Real(1) / (Real(1) + std::exp(-x));
}

}  // namespace frp::nn

#endif  // FRP_SRC_NN_OPS_HPP_
