// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <cstdint>
#include <functional>
#include <memory>
#include <string>
#include <vector>

namespace marppg::nn {

class Tensor;
using TensorPtr = std::shared_ptr<Tensor>;

/// Dense row-major float64 tensor, optionally hooked into a define-by-run
/// gradient tape. Ops record parent links and a local backward rule on the
/// output tensor; backward() runs the reverse sweep and then releases the
/// tape so intermediates can be freed.
class Tensor {
public:
    std::vector<int> shape;
    std::vector<double> data;
    std::vector<double> grad; // allocated on first accumulation; same length as data
    bool requires_grad = false;

    // Tape edges, set by the producing op. Empty for leaves.
    std::vector<TensorPtr> parents;
    std::function<void(const Tensor&)> backward_fn;
    const char* op = "";

    Tensor() = default;
    Tensor(std::vector<int> shape_in, std::vector<double> data_in, bool req_grad = false);

    static TensorPtr make(std::vector<int> shape, std::vector<double> data, bool req_grad = false);
    static TensorPtr zeros(std::vector<int> shape, bool req_grad = false);
    static TensorPtr full(std::vector<int> shape, double value, bool req_grad = false);
    static TensorPtr scalar(double value, bool req_grad = false);

    std::int64_t numel() const { return static_cast<std::int64_t>(data.size()); }
    int rank() const { return static_cast<int>(shape.size()); }
    int dim(int i) const { return shape[static_cast<std::size_t>(i)]; }
    bool is_leaf() const { return parents.empty(); }

    /// Value of a single-element tensor. Throws ShapeError otherwise.
    double item() const;

    void ensure_grad();
    void zero_grad() { grad.assign(data.size(), 0.0); }

    /// Throws ValueError naming `what` if any stored value is NaN/Inf.
    void check_finite(const char* what) const;
};

std::int64_t shape_numel(const std::vector<int>& shape);
std::string shape_str(const std::vector<int>& shape);

/// Reverse-mode sweep from a scalar loss. Visits each recorded node exactly
/// once in reverse topological order and accumulates into every reachable
/// requires_grad tensor, then drops the tape edges.
void backward(const TensorPtr& loss);

} // namespace marppg::nn
