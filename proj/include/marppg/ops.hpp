// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <array>
#include <vector>

#include "marppg/tensor.hpp"

namespace marppg::nn {

// Elementwise (operands must have identical shapes unless noted).
TensorPtr add(const TensorPtr& a, const TensorPtr& b);
TensorPtr sub(const TensorPtr& a, const TensorPtr& b);
TensorPtr mul(const TensorPtr& a, const TensorPtr& b);
TensorPtr div_elem(const TensorPtr& a, const TensorPtr& b);
TensorPtr neg(const TensorPtr& a);
TensorPtr scale(const TensorPtr& a, double c);
TensorPtr add_scalar(const TensorPtr& a, double c);
TensorPtr abs_elem(const TensorPtr& a);  // subgradient 0 at 0
TensorPtr sqrt_elem(const TensorPtr& a); // requires strictly positive input
TensorPtr relu(const TensorPtr& a);
TensorPtr tanh_elem(const TensorPtr& a);

// Reductions.
TensorPtr sum_all(const TensorPtr& a);  // -> shape (1)
TensorPtr mean_all(const TensorPtr& a); // -> shape (1)

// Linear algebra.
TensorPtr matmul(const TensorPtr& a, const TensorPtr& b); // (M,K)x(K,N) -> (M,N)
/// y = x * w^T + b with x (N,Cin), w (Cout,Cin), b (Cout) -> (N,Cout)
TensorPtr linear(const TensorPtr& x, const TensorPtr& w, const TensorPtr& b);

/// Batched 2-D convolution: x (T,Cin,H,W), w (Cout,Cin,k,k) with k odd,
/// b (Cout). Zero padding (k-1)/2, stride 1, kernel shared across T.
TensorPtr conv2d(const TensorPtr& x, const TensorPtr& w, const TensorPtr& b);

/// 2x2 average pooling over the trailing spatial dims of (T,C,H,W).
TensorPtr avgpool2x2(const TensorPtr& x);

/// Softmax jointly over the last `n_last` dims, batched over the rest.
TensorPtr softmax_lastdims(const TensorPtr& x, int n_last);

// Shape manipulation.
TensorPtr reshape(const TensorPtr& x, std::vector<int> new_shape);
/// Spatial window [h0,h1) x [w0,w1) of (T,C,H,W).
TensorPtr slice_spatial(const TensorPtr& x, int h0, int h1, int w0, int w1);
/// Reassemble (T,C,H,W) from its four spatial quadrants.
TensorPtr concat_quadrants(const TensorPtr& tl, const TensorPtr& tr, const TensorPtr& bl,
                           const TensorPtr& br);
/// Reverse the last (width) axis.
TensorPtr hflip(const TensorPtr& x);
/// Swap the expert axis pairs 0<->1 and 2<->3 of (T,4,H,W).
TensorPtr swap_expert_pairs(const TensorPtr& x);
/// Stack four (T,H,W) maps into (T,4,H,W).
TensorPtr stack_expert_maps(const std::array<TensorPtr, 4>& maps);

// Attention plumbing.
/// m[t,h,w] = sum_c w[t,c] * f[t,c,h,w] with f (T,C,H,W), w (T,C) -> (T,H,W).
TensorPtr cam_weighted_sum(const TensorPtr& f, const TensorPtr& w);
/// p[t,c] = sum_{h,w} a[t,h,w] * f[t,c,h,w] with f (T,C,H,W), a (T,H,W) -> (T,C).
TensorPtr spatial_weighted_pool(const TensorPtr& f, const TensorPtr& a);
/// Per-channel mean over (T,H,W) of (T,C,H,W) -> (C).
TensorPtr global_avg_pool(const TensorPtr& f);
/// out[t] = sum_e alpha[e] * signals[e][t], signals each (T,), alpha (E,).
TensorPtr convex_combine(const std::vector<TensorPtr>& signals, const TensorPtr& alpha);
/// Sum over (t,e) of the spatial L2 norms of (T,E,H,W) -> shape (1).
/// Gradient is the subgradient 0 where a map norm is exactly zero.
TensorPtr sum_spatial_l2(const TensorPtr& x);

// Raw GEMM kernels (row-major, accumulate into C). Exposed for reuse.
void gemm_nn(const double* a, const double* b, double* c, int m, int k, int n);
void gemm_nt(const double* a, const double* b, double* c, int m, int k, int n); // C += A * B^T, B is (n,k)
void gemm_tn(const double* a, const double* b, double* c, int m, int k, int n); // C += A^T * B, A is (k,m)

} // namespace marppg::nn
