// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <cstdint>
#include <vector>

#include "marppg/tensor.hpp"

namespace marppg::nn {

/// Adam with bias correction. Moment buffers are laid out to match the
/// parameter list handed to the first step; later steps must pass the same
/// list (checked by shape).
struct AdamState {
    double lr = 1e-3;
    double beta1 = 0.9;
    double beta2 = 0.999;
    double eps = 1e-8;
    std::int64_t step = 0;
    std::vector<std::vector<double>> m;
    std::vector<std::vector<double>> v;
};

/// One bias-corrected Adam update, in place. Gradients are read from each
/// parameter's grad buffer (zero when absent). `lr` overrides state.lr for
/// this step so a schedule can drive it.
void adam_step(const std::vector<TensorPtr>& params, AdamState& state, double lr);
inline void adam_step(const std::vector<TensorPtr>& params, AdamState& state) {
    adam_step(params, state, state.lr);
}

void zero_grads(const std::vector<TensorPtr>& params);

/// One-cycle learning-rate policy: cosine warmup from max_lr/start_div up to
/// max_lr at step round(warmup_fraction*total_steps), then cosine decay down
/// to max_lr/final_div at the last step.
struct OneCycleSchedule {
    double max_lr = 1e-3;
    std::int64_t total_steps = 1;
    double warmup_fraction = 0.3;
    double start_div = 25.0;
    double final_div = 1e4;
};

double onecycle_lr(std::int64_t step, const OneCycleSchedule& sched);

} // namespace marppg::nn
