// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <cstdint>
#include <vector>

#include "marppg/chunk.hpp"
#include "marppg/model.hpp"
#include "marppg/optim.hpp"
#include "marppg/rng.hpp"
#include "marppg/tensor.hpp"

namespace marppg {

struct TrainConfig {
    double alpha = 0.3; // l1 vs negative-Pearson tradeoff
    double beta = 0.5;  // regression vs attention-consistency tradeoff
    int chunk_len = 60;
    int mask_size = 16;
    int batch_size = 4;
    int epochs = 30;
    double max_lr = 1e-3;
    std::uint64_t seed = 42;
    double mask_fill = 0.0;
    double warmup_fraction = 0.3;
    double start_div = 25.0;
    double final_div = 1e4;

    void validate(int frame_h, int frame_w) const;
};

struct TrainStepRecord {
    std::int64_t step = 0;
    double lr = 0.0;
    double loss_total = 0.0;
    double loss_reg_orig = 0.0;
    double loss_reg_flip = 0.0;
    double loss_ac = 0.0;
};

// Augmentation (copy-on-write: the input chunk is never modified).
/// Mirror every frame about the vertical axis; PPG label unchanged.
VideoChunk horizontal_flip(const VideoChunk& chunk);
/// Zero one size x size square at (row, col) in every frame.
VideoChunk apply_mask(const VideoChunk& chunk, int row, int col, int size, double fill = 0.0);
/// Mask at a position drawn uniformly over valid top-left corners
/// (row drawn first, then col).
VideoChunk random_mask(const VideoChunk& chunk, int size, Rng& rng, double fill = 0.0);

// Data -> tensor bridges.
TensorPtr frames_to_tensor(const VideoChunk& chunk); // (T,H,W,C) float64
TensorPtr ppg_to_tensor(const VideoChunk& chunk);    // (T)

/// One optimization step over a batch of chunks. Per chunk: draw a mask, run
/// the masked chunk and its horizontal flip through the same weights, combine
/// the two regression losses and the attention-consistency loss, and
/// accumulate gradients of the batch-mean loss; then a single Adam update at
/// the given learning rate. Returns the batch-averaged loss components.
/// Throws ValueError with diagnostics if any loss component is non-finite.
TrainStepRecord train_step(const std::vector<const VideoChunk*>& batch, EreaModel& model,
                           nn::AdamState& opt, double lr, const TrainConfig& cfg, Rng& rng,
                           std::int64_t step_index = 0);

/// Full training loop: epochs x batches of train_step with a one-cycle
/// schedule over the whole horizon; chunk order reshuffled per epoch from the
/// run RNG. Returns one record per step.
std::vector<TrainStepRecord> train(const TrainConfig& cfg, EreaModel& model,
                                   const std::vector<VideoChunk>& chunks);

/// Training log CSV: step,lr,loss_total,loss_reg_orig,loss_reg_flip,loss_ac.
/// A `# generated ...` comment header is written unless deterministic is set.
void write_training_log(const std::string& path, const std::vector<TrainStepRecord>& records,
                        bool deterministic);

} // namespace marppg
