// SPDX-License-Identifier: Apache-2.0
#include "marppg/optim.hpp"

#include <cmath>

#include "marppg/errors.hpp"

namespace marppg::nn {

void adam_step(const std::vector<TensorPtr>& params, AdamState& state, double lr) {
    if (state.m.empty()) {
        state.m.resize(params.size());
        state.v.resize(params.size());
        for (std::size_t i = 0; i < params.size(); ++i) {
            state.m[i].assign(params[i]->data.size(), 0.0);
            state.v[i].assign(params[i]->data.size(), 0.0);
        }
    }
    if (state.m.size() != params.size()) {
        throw ShapeError("adam_step: parameter count changed (" + std::to_string(params.size()) +
                         " vs state " + std::to_string(state.m.size()) + ")");
    }
    state.step += 1;
    const double bc1 = 1.0 - std::pow(state.beta1, static_cast<double>(state.step));
    const double bc2 = 1.0 - std::pow(state.beta2, static_cast<double>(state.step));
    for (std::size_t i = 0; i < params.size(); ++i) {
        Tensor& p = *params[i];
        if (state.m[i].size() != p.data.size()) {
            throw ShapeError("adam_step: parameter " + std::to_string(i) + " shape changed");
        }
        auto& m = state.m[i];
        auto& v = state.v[i];
        const bool has_grad = p.grad.size() == p.data.size();
        for (std::size_t j = 0; j < p.data.size(); ++j) {
            const double g = has_grad ? p.grad[j] : 0.0;
            m[j] = state.beta1 * m[j] + (1.0 - state.beta1) * g;
            v[j] = state.beta2 * v[j] + (1.0 - state.beta2) * g * g;
            const double mhat = m[j] / bc1;
            const double vhat = v[j] / bc2;
            p.data[j] -= lr * mhat / (std::sqrt(vhat) + state.eps);
        }
    }
}

void zero_grads(const std::vector<TensorPtr>& params) {
    for (const auto& p : params) p->zero_grad();
}

double onecycle_lr(std::int64_t step, const OneCycleSchedule& sched) {
    if (step < 0 || step >= sched.total_steps) {
        throw ValueError("onecycle_lr: step " + std::to_string(step) + " outside [0, " +
                         std::to_string(sched.total_steps) + ")");
    }
    const double start_lr = sched.max_lr / sched.start_div;
    const double final_lr = sched.max_lr / sched.final_div;
    const std::int64_t peak =
        static_cast<std::int64_t>(std::llround(sched.warmup_fraction * static_cast<double>(sched.total_steps)));
    constexpr double pi = 3.14159265358979323846;
    if (step <= peak) {
        if (peak == 0) return sched.max_lr;
        const double u = static_cast<double>(step) / static_cast<double>(peak);
        return start_lr + (sched.max_lr - start_lr) * 0.5 * (1.0 - std::cos(pi * u));
    }
    const std::int64_t span = sched.total_steps - 1 - peak;
    if (span <= 0) return final_lr;
    const double u = static_cast<double>(step - peak) / static_cast<double>(span);
    return final_lr + (sched.max_lr - final_lr) * 0.5 * (1.0 + std::cos(pi * u));
}

} // namespace marppg::nn
