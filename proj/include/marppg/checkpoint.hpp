// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <string>
#include <utility>
#include <vector>

#include "marppg/tensor.hpp"

namespace marppg::nn {

// Parameter checkpoint, little-endian:
//   magic "MARW", u32 version, u32 tensor count, then per tensor:
//   u32 name length, UTF-8 name, u32 rank, u64 dims, f64 payload.
void save_checkpoint(const std::string& path,
                     const std::vector<std::pair<std::string, TensorPtr>>& tensors);

std::vector<std::pair<std::string, TensorPtr>> load_checkpoint(const std::string& path);

/// Loads into existing tensors; throws ValueError on any missing/extra name
/// or shape mismatch.
void load_checkpoint_into(const std::string& path,
                          const std::vector<std::pair<std::string, TensorPtr>>& tensors);

} // namespace marppg::nn
