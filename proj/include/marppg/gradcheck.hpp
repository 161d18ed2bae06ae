// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <cstdint>
#include <functional>
#include <string>
#include <vector>

#include "marppg/rng.hpp"
#include "marppg/tensor.hpp"

namespace marppg::nn {

using ScalarFn = std::function<TensorPtr(const TensorPtr&)>;

/// Compares the reverse-mode gradient of the scalar function f at `point`
/// against central finite differences, componentwise. Returns the maximum
/// relative error with denominator max(|a|, |n|, 1e-8). Throws ValueError if
/// either gradient contains NaN.
double grad_check(const ScalarFn& f, const TensorPtr& point, double eps = 1e-5);

struct GradCheckResult {
    std::string name;
    double max_rel_err = 0.0;
};

/// Names of every registered differentiable primitive and loss, each checked
/// once per registry run.
std::vector<std::string> gradcheck_case_names();

/// Runs `points` seeded random checks per registry case and reports the worst
/// relative error per case. `corrupt_case`, when non-empty, routes that case
/// through grad_tamper (a deliberately wrong backward rule) as a negative
/// control; it must name a registered case.
std::vector<GradCheckResult> run_gradcheck(std::uint64_t seed, int points,
                                           const std::string& corrupt_case = "");

/// Test fixture: identity forward with an intentionally corrupted backward
/// rule. Exists so the checking harness itself can be validated.
TensorPtr grad_tamper(const TensorPtr& x);

} // namespace marppg::nn
