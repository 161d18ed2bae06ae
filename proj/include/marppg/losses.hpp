// SPDX-License-Identifier: Apache-2.0
#pragma once

#include "marppg/tensor.hpp"

namespace marppg {

using nn::TensorPtr;

/// Mean absolute difference of two equal-length signals.
TensorPtr l1_loss(const TensorPtr& y, const TensorPtr& z);

/// 1 - Pearson correlation, computed from raw sums. A small epsilon inside
/// the square root's radicand keeps the loss differentiable when one signal
/// is (near-)constant; for signals with variance the value is in [0, 2].
TensorPtr neg_pearson_loss(const TensorPtr& y, const TensorPtr& z);

/// (1-alpha) * l1 + alpha * neg_pearson.
TensorPtr regression_loss(const TensorPtr& y, const TensorPtr& z, double alpha);

/// Mean over (t, e) of the spatial L2 norms of m - flip_align(m_flipped),
/// normalized by T*E*H*W. m and m_flipped are (T,4,H,W) attention map sets;
/// m_flipped comes from the horizontally flipped input and is aligned here.
TensorPtr attention_consistency_loss(const TensorPtr& m, const TensorPtr& m_flipped);

/// (1-beta) * (reg_orig + reg_flip)/2 + beta * ac. The two regression passes
/// are weighted symmetrically.
TensorPtr total_loss(const TensorPtr& reg_orig, const TensorPtr& reg_flip, const TensorPtr& ac,
                     double beta);

} // namespace marppg
