// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <array>
#include <string>
#include <utility>
#include <vector>

#include "marppg/rng.hpp"
#include "marppg/tensor.hpp"

namespace marppg {

using nn::TensorPtr;

struct ModelConfig {
    int chunk_len = 60;  // frames per chunk, also the cam weight rows
    int frame_h = 64;
    int frame_w = 64;
    int in_channels = 3;
    int enc_channels = 32; // channel width of the deeper encoder blocks
    int feat_hw = 8;       // encoder output spatial size (quadrant-splittable)

    static constexpr int experts = 4;

    int stem_channels() const { return enc_channels / 2 > 0 ? enc_channels / 2 : 1; }
    int quadrant_hw() const { return feat_hw / 2; }
    /// Number of 2x2 pooling stages needed to reach feat_hw.
    int pool_stages() const;
    void validate() const;
};

struct ModelOutput {
    TensorPtr signal; // (T)
    TensorPtr maps;   // (T, 4, Hq, Wq), expert order TL, TR, BL, BR
};

/// Expert-aggregation pulse extractor: a time-shared conv encoder, four
/// spatial-quadrant experts producing per-timestep attention maps and
/// candidate signals, and a softmax gate combining the candidates.
class EreaModel {
public:
    explicit EreaModel(ModelConfig cfg);

    /// Uniform +-sqrt(1/fan_in) init. Draws follow parameter order, each
    /// tensor filled row-major.
    void init_params(Rng& rng);

    const ModelConfig& config() const { return cfg_; }

    /// Stable parameter order: encoder blocks, experts 0..3 (refine w/b, cam,
    /// head w/b), gate w/b. Both forward passes of a training step share these
    /// tensors by reference.
    std::vector<TensorPtr> parameters() const;
    std::vector<std::pair<std::string, TensorPtr>> named_parameters() const;
    std::int64_t parameter_count() const;

    /// frames: (T, H, W, C_in) in [0, 1] -> features (T, C, feat_hw, feat_hw).
    TensorPtr encode(const TensorPtr& frames_nhwc) const;

    /// TL, TR, BL, BR spatial quadrants of (T, C, H, W); H, W must be even.
    static std::array<TensorPtr, 4> split_quadrants(const TensorPtr& f);

    /// One expert on its quadrant: refine conv, CAM maps, softmax-attention
    /// pooling, per-timestep linear head. Returns (signal (T), maps (T,Hq,Wq)).
    std::pair<TensorPtr, TensorPtr> expert_forward(int expert, const TensorPtr& quad) const;

    /// Softmax gate over the four candidate signals, conditioned on the
    /// global-average-pooled feature vector.
    TensorPtr gate_aggregate(const std::vector<TensorPtr>& signals, const TensorPtr& f) const;

    ModelOutput forward(const TensorPtr& frames_nhwc) const;

private:
    ModelConfig cfg_;
    struct ConvBlock {
        TensorPtr w, b;
    };
    std::vector<ConvBlock> enc_;
    struct Expert {
        ConvBlock refine;
        TensorPtr cam;    // (T, C)
        TensorPtr head_w; // (1, C)
        TensorPtr head_b; // (1)
    };
    std::array<Expert, ModelConfig::experts> experts_;
    TensorPtr gate_w_; // (4, C)
    TensorPtr gate_b_; // (4)
};

/// Per-timestep channel-weighted sum of feature maps: f (T,C,H,W) with
/// weights (T,C) -> maps (T,H,W).
TensorPtr cam_attention(const TensorPtr& f, const TensorPtr& w);

/// Align the attention maps of a horizontally flipped input with the
/// original's: mirror each map and swap the expert slots TL<->TR, BL<->BR.
/// Involution.
TensorPtr flip_align(const TensorPtr& maps);

} // namespace marppg
