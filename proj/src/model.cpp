// SPDX-License-Identifier: Apache-2.0
#include "marppg/model.hpp"

#include <cmath>

#include "marppg/errors.hpp"
#include "marppg/ops.hpp"

namespace marppg {

using namespace nn;

int ModelConfig::pool_stages() const {
    int size = frame_h, stages = 0;
    while (size > feat_hw) {
        size /= 2;
        ++stages;
    }
    return stages;
}

void ModelConfig::validate() const {
    if (chunk_len < 2) throw ValueError("model config: chunk_len must be >= 2");
    if (in_channels < 1) throw ValueError("model config: in_channels must be >= 1");
    if (enc_channels < 2) throw ValueError("model config: enc_channels must be >= 2");
    if (feat_hw < 2 || (feat_hw % 2) != 0) {
        throw ValueError("model config: feat_hw must be even and >= 2");
    }
    if (frame_h != frame_w) throw ValueError("model config: frames must be square");
    int size = frame_h, stages = 0;
    while (size > feat_hw && (size % 2) == 0) {
        size /= 2;
        ++stages;
    }
    if (size != feat_hw) {
        throw ValueError("model config: frame size " + std::to_string(frame_h) +
                         " cannot be pooled down to " + std::to_string(feat_hw));
    }
    if (stages > 4) {
        throw ValueError("model config: frame size needs more than 4 pooling stages");
    }
}

EreaModel::EreaModel(ModelConfig cfg) : cfg_(cfg) {
    cfg_.validate();
    const int c = cfg_.enc_channels;
    const int stem = cfg_.stem_channels();
    const int chans[5] = {cfg_.in_channels, stem, c, c, c};
    for (int i = 0; i < 4; ++i) {
        enc_.push_back({Tensor::zeros({chans[i + 1], chans[i], 3, 3}, true),
                        Tensor::zeros({chans[i + 1]}, true)});
    }
    for (auto& ex : experts_) {
        ex.refine = {Tensor::zeros({c, c, 3, 3}, true), Tensor::zeros({c}, true)};
        ex.cam = Tensor::zeros({cfg_.chunk_len, c}, true);
        ex.head_w = Tensor::zeros({1, c}, true);
        ex.head_b = Tensor::zeros({1}, true);
    }
    gate_w_ = Tensor::zeros({ModelConfig::experts, c}, true);
    gate_b_ = Tensor::zeros({ModelConfig::experts}, true);
}

void EreaModel::init_params(Rng& rng) {
    auto fill = [&rng](const TensorPtr& t, int fan_in) {
        const double bound = std::sqrt(1.0 / static_cast<double>(fan_in));
        for (auto& v : t->data) v = rng.uniform(-bound, bound);
    };
    const int c = cfg_.enc_channels;
    for (auto& block : enc_) {
        const int fan_in = block.w->dim(1) * 9;
        fill(block.w, fan_in);
        fill(block.b, fan_in);
    }
    for (auto& ex : experts_) {
        fill(ex.refine.w, c * 9);
        fill(ex.refine.b, c * 9);
        fill(ex.cam, c);
        fill(ex.head_w, c);
        fill(ex.head_b, c);
    }
    fill(gate_w_, c);
    fill(gate_b_, c);
}

std::vector<TensorPtr> EreaModel::parameters() const {
    std::vector<TensorPtr> out;
    for (const auto& [name, t] : named_parameters()) out.push_back(t);
    return out;
}

std::vector<std::pair<std::string, TensorPtr>> EreaModel::named_parameters() const {
    std::vector<std::pair<std::string, TensorPtr>> out;
    for (std::size_t i = 0; i < enc_.size(); ++i) {
        const std::string base = "enc" + std::to_string(i + 1);
        out.emplace_back(base + ".w", enc_[i].w);
        out.emplace_back(base + ".b", enc_[i].b);
    }
    for (std::size_t e = 0; e < experts_.size(); ++e) {
        const std::string base = "expert" + std::to_string(e);
        out.emplace_back(base + ".refine.w", experts_[e].refine.w);
        out.emplace_back(base + ".refine.b", experts_[e].refine.b);
        out.emplace_back(base + ".cam", experts_[e].cam);
        out.emplace_back(base + ".head.w", experts_[e].head_w);
        out.emplace_back(base + ".head.b", experts_[e].head_b);
    }
    out.emplace_back("gate.w", gate_w_);
    out.emplace_back("gate.b", gate_b_);
    return out;
}

std::int64_t EreaModel::parameter_count() const {
    std::int64_t n = 0;
    for (const auto& p : parameters()) n += p->numel();
    return n;
}

TensorPtr EreaModel::encode(const TensorPtr& frames_nhwc) const {
    if (frames_nhwc->rank() != 4 || frames_nhwc->dim(0) != cfg_.chunk_len ||
        frames_nhwc->dim(1) != cfg_.frame_h || frames_nhwc->dim(2) != cfg_.frame_w ||
        frames_nhwc->dim(3) != cfg_.in_channels) {
        throw ShapeError("encode: expected frames (" + std::to_string(cfg_.chunk_len) + "," +
                         std::to_string(cfg_.frame_h) + "," + std::to_string(cfg_.frame_w) + "," +
                         std::to_string(cfg_.in_channels) + "), got " +
                         shape_str(frames_nhwc->shape));
    }
    // NHWC -> NCHW; the input carries no gradient, so this is a plain copy.
    const int t = cfg_.chunk_len, h = cfg_.frame_h, w = cfg_.frame_w, ci = cfg_.in_channels;
    std::vector<double> nchw(frames_nhwc->data.size());
    for (int ti = 0; ti < t; ++ti)
        for (int i = 0; i < h; ++i)
            for (int j = 0; j < w; ++j) {
                const double* src =
                    frames_nhwc->data.data() +
                    ((static_cast<std::size_t>(ti) * h + i) * w + j) * ci;
                for (int cc = 0; cc < ci; ++cc)
                    nchw[((static_cast<std::size_t>(ti) * ci + cc) * h + i) * w + j] = src[cc];
            }
    TensorPtr x = Tensor::make({t, ci, h, w}, std::move(nchw));

    const int pools = cfg_.pool_stages();
    for (std::size_t b = 0; b < enc_.size(); ++b) {
        x = tanh_elem(conv2d(x, enc_[b].w, enc_[b].b));
        if (static_cast<int>(b) < pools) x = avgpool2x2(x);
    }
    return x;
}

std::array<TensorPtr, 4> EreaModel::split_quadrants(const TensorPtr& f) {
    if (f->rank() != 4) throw ShapeError("split_quadrants: expected (T,C,H,W), got " +
                                         shape_str(f->shape));
    const int h = f->dim(2), w = f->dim(3);
    if ((h % 2) != 0 || (w % 2) != 0) {
        throw ShapeError("split_quadrants: spatial dims must be even, got " + shape_str(f->shape));
    }
    const int hh = h / 2, wh = w / 2;
    return {slice_spatial(f, 0, hh, 0, wh), slice_spatial(f, 0, hh, wh, w),
            slice_spatial(f, hh, h, 0, wh), slice_spatial(f, hh, h, wh, w)};
}

std::pair<TensorPtr, TensorPtr> EreaModel::expert_forward(int expert,
                                                          const TensorPtr& quad) const {
    const auto& ex = experts_[static_cast<std::size_t>(expert)];
    auto g = tanh_elem(conv2d(quad, ex.refine.w, ex.refine.b));
    auto maps = cam_attention(g, ex.cam);
    auto att = softmax_lastdims(maps, 2);
    auto pooled = spatial_weighted_pool(g, att);           // (T, C)
    auto sig = reshape(linear(pooled, ex.head_w, ex.head_b), {quad->dim(0)});
    return {sig, maps};
}

TensorPtr EreaModel::gate_aggregate(const std::vector<TensorPtr>& signals,
                                    const TensorPtr& f) const {
    if (signals.size() != ModelConfig::experts) {
        throw ShapeError("gate_aggregate: expected 4 signals, got " +
                         std::to_string(signals.size()));
    }
    auto pooled = reshape(global_avg_pool(f), {1, cfg_.enc_channels});
    auto logits = reshape(linear(pooled, gate_w_, gate_b_), {ModelConfig::experts});
    auto alpha = softmax_lastdims(logits, 1);
    return convex_combine(signals, alpha);
}

ModelOutput EreaModel::forward(const TensorPtr& frames_nhwc) const {
    auto feat = encode(frames_nhwc);
    auto quads = split_quadrants(feat);
    std::vector<TensorPtr> signals;
    std::array<TensorPtr, 4> maps;
    for (int e = 0; e < ModelConfig::experts; ++e) {
        auto [sig, m] = expert_forward(e, quads[static_cast<std::size_t>(e)]);
        signals.push_back(sig);
        maps[static_cast<std::size_t>(e)] = m;
    }
    return {gate_aggregate(signals, feat), stack_expert_maps(maps)};
}

TensorPtr cam_attention(const TensorPtr& f, const TensorPtr& w) {
    return cam_weighted_sum(f, w);
}

TensorPtr flip_align(const TensorPtr& maps) {
    return swap_expert_pairs(hflip(maps));
}

} // namespace marppg
