// SPDX-License-Identifier: Apache-2.0
#include "marppg/train.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

#include "marppg/csvio.hpp"
#include "marppg/errors.hpp"
#include "marppg/losses.hpp"
#include "marppg/ops.hpp"

namespace marppg {

using namespace nn;

void TrainConfig::validate(int frame_h, int frame_w) const {
    if (alpha < 0.0 || alpha > 1.0) throw ValueError("train config: alpha must be in [0, 1]");
    if (beta < 0.0 || beta >= 1.0) throw ValueError("train config: beta must be in [0, 1)");
    if (chunk_len < 2) throw ValueError("train config: chunk_len must be >= 2");
    if (mask_size < 0 || mask_size > std::min(frame_h, frame_w)) {
        throw ValueError("train config: mask_size must fit inside the frame");
    }
    if (batch_size < 1) throw ValueError("train config: batch_size must be >= 1");
    if (epochs < 0) throw ValueError("train config: epochs must be >= 0");
    if (!(max_lr > 0.0)) throw ValueError("train config: max_lr must be positive");
}

VideoChunk horizontal_flip(const VideoChunk& chunk) {
    VideoChunk out = chunk;
    const int w = chunk.w, c = chunk.c;
    const std::size_t row_elems = static_cast<std::size_t>(w) * c;
    const std::size_t rows = chunk.frames.size() / row_elems;
    for (std::size_t r = 0; r < rows; ++r) {
        const float* src = chunk.frames.data() + r * row_elems;
        float* dst = out.frames.data() + r * row_elems;
        for (int j = 0; j < w; ++j)
            for (int k = 0; k < c; ++k)
                dst[static_cast<std::size_t>(j) * c + k] =
                    src[static_cast<std::size_t>(w - 1 - j) * c + k];
    }
    return out;
}

VideoChunk apply_mask(const VideoChunk& chunk, int row, int col, int size, double fill) {
    if (size < 0 || size > chunk.h || size > chunk.w) {
        throw ValueError("apply_mask: mask size " + std::to_string(size) +
                         " does not fit a " + std::to_string(chunk.h) + "x" +
                         std::to_string(chunk.w) + " frame");
    }
    VideoChunk out = chunk;
    if (size == 0) return out;
    if (row < 0 || col < 0 || row + size > chunk.h || col + size > chunk.w) {
        throw ValueError("apply_mask: mask position out of range");
    }
    const auto fv = static_cast<float>(fill);
    for (int ti = 0; ti < chunk.t; ++ti) {
        float* frame = out.frames.data() + static_cast<std::size_t>(ti) * chunk.frame_elems();
        for (int i = row; i < row + size; ++i)
            for (int j = col; j < col + size; ++j) {
                float* px = frame + (static_cast<std::size_t>(i) * chunk.w + j) * chunk.c;
                for (int k = 0; k < chunk.c; ++k) px[k] = fv;
            }
    }
    return out;
}

VideoChunk random_mask(const VideoChunk& chunk, int size, Rng& rng, double fill) {
    if (size < 0 || size > chunk.h || size > chunk.w) {
        throw ValueError("random_mask: mask size " + std::to_string(size) +
                         " does not fit a " + std::to_string(chunk.h) + "x" +
                         std::to_string(chunk.w) + " frame");
    }
    const int row = static_cast<int>(rng.uniform_int(static_cast<std::uint64_t>(chunk.h - size + 1)));
    const int col = static_cast<int>(rng.uniform_int(static_cast<std::uint64_t>(chunk.w - size + 1)));
    return apply_mask(chunk, row, col, size, fill);
}

TensorPtr frames_to_tensor(const VideoChunk& chunk) {
    std::vector<double> data(chunk.frames.begin(), chunk.frames.end());
    return Tensor::make({chunk.t, chunk.h, chunk.w, chunk.c}, std::move(data));
}

TensorPtr ppg_to_tensor(const VideoChunk& chunk) {
    std::vector<double> data(chunk.ppg.begin(), chunk.ppg.end());
    return Tensor::make({chunk.t}, std::move(data));
}

TrainStepRecord train_step(const std::vector<const VideoChunk*>& batch, EreaModel& model,
                           AdamState& opt, double lr, const TrainConfig& cfg, Rng& rng,
                           std::int64_t step_index) {
    if (batch.empty()) throw ValueError("train_step: empty batch");
    const auto params = model.parameters();
    zero_grads(params);

    TrainStepRecord rec;
    rec.step = step_index;
    rec.lr = lr;
    const double inv_batch = 1.0 / static_cast<double>(batch.size());

    for (const VideoChunk* chunk : batch) {
        const VideoChunk masked = random_mask(*chunk, cfg.mask_size, rng, cfg.mask_fill);
        const VideoChunk flipped = horizontal_flip(masked);

        auto z = ppg_to_tensor(*chunk);
        auto orig = model.forward(frames_to_tensor(masked));
        auto flip = model.forward(frames_to_tensor(flipped));

        auto reg_orig = regression_loss(orig.signal, z, cfg.alpha);
        auto reg_flip = regression_loss(flip.signal, z, cfg.alpha);
        auto ac = attention_consistency_loss(orig.maps, flip.maps);
        auto total = total_loss(reg_orig, reg_flip, ac, cfg.beta);

        const double lt = total->item();
        const double lo = reg_orig->item(), lf = reg_flip->item(), lac = ac->item();
        if (!std::isfinite(lt) || !std::isfinite(lo) || !std::isfinite(lf) ||
            !std::isfinite(lac)) {
            throw ValueError("train_step: non-finite loss at step " + std::to_string(step_index) +
                             " (lr=" + std::to_string(lr) + ", reg_orig=" + std::to_string(lo) +
                             ", reg_flip=" + std::to_string(lf) + ", ac=" + std::to_string(lac) +
                             ", chunk=" + chunk->source_id + ")");
        }

        backward(scale(total, inv_batch));

        rec.loss_total += lt * inv_batch;
        rec.loss_reg_orig += lo * inv_batch;
        rec.loss_reg_flip += lf * inv_batch;
        rec.loss_ac += lac * inv_batch;
    }

    adam_step(params, opt, lr);
    return rec;
}

std::vector<TrainStepRecord> train(const TrainConfig& cfg, EreaModel& model,
                                   const std::vector<VideoChunk>& chunks) {
    if (chunks.empty()) throw ValueError("train: no training chunks");
    cfg.validate(chunks.front().h, chunks.front().w);
    for (const auto& c : chunks) {
        if (c.t != cfg.chunk_len) {
            throw ValueError("train: chunk " + c.source_id + " has length " + std::to_string(c.t) +
                             ", expected " + std::to_string(cfg.chunk_len));
        }
    }

    const auto n = static_cast<std::int64_t>(chunks.size());
    const std::int64_t steps_per_epoch = (n + cfg.batch_size - 1) / cfg.batch_size;
    const std::int64_t total_steps = static_cast<std::int64_t>(cfg.epochs) * steps_per_epoch;

    std::vector<TrainStepRecord> log;
    if (total_steps == 0) return log;

    OneCycleSchedule sched{cfg.max_lr, total_steps, cfg.warmup_fraction, cfg.start_div,
                           cfg.final_div};
    AdamState opt;
    // stream 0 of the run seed belongs to parameter init, stream 1 to the loop
    Rng rng = Rng::derive(cfg.seed, 1);
    std::vector<std::size_t> order(chunks.size());
    std::iota(order.begin(), order.end(), 0);

    std::int64_t step = 0;
    for (int epoch = 0; epoch < cfg.epochs; ++epoch) {
        rng.shuffle(order);
        for (std::size_t start = 0; start < order.size(); start += cfg.batch_size) {
            std::vector<const VideoChunk*> batch;
            const std::size_t end = std::min(order.size(), start + cfg.batch_size);
            for (std::size_t i = start; i < end; ++i) batch.push_back(&chunks[order[i]]);
            log.push_back(train_step(batch, model, opt, onecycle_lr(step, sched), cfg, rng, step));
            ++step;
        }
    }
    return log;
}

void write_training_log(const std::string& path, const std::vector<TrainStepRecord>& records,
                        bool deterministic) {
    CsvWriter csv(path, deterministic);
    csv.row("step,lr,loss_total,loss_reg_orig,loss_reg_flip,loss_ac");
    for (const auto& r : records) {
        csv.raw(std::to_string(r.step));
        csv.raw(",");
        csv.raw(format_g17(r.lr));
        csv.raw(",");
        csv.raw(format_g17(r.loss_total));
        csv.raw(",");
        csv.raw(format_g17(r.loss_reg_orig));
        csv.raw(",");
        csv.raw(format_g17(r.loss_reg_flip));
        csv.raw(",");
        csv.raw(format_g17(r.loss_ac));
        csv.raw("\n");
    }
}

} // namespace marppg
