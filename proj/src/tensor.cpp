// SPDX-License-Identifier: Apache-2.0
#include "marppg/tensor.hpp"

#include <cmath>
#include <sstream>
#include <unordered_set>

#include "marppg/errors.hpp"

namespace marppg::nn {

std::int64_t shape_numel(const std::vector<int>& shape) {
    std::int64_t n = 1;
    for (int d : shape) n *= d;
    return n;
}

std::string shape_str(const std::vector<int>& shape) {
    std::ostringstream os;
    os << "(";
    for (std::size_t i = 0; i < shape.size(); ++i) {
        if (i) os << ",";
        os << shape[i];
    }
    os << ")";
    return os.str();
}

Tensor::Tensor(std::vector<int> shape_in, std::vector<double> data_in, bool req_grad)
    : shape(std::move(shape_in)), data(std::move(data_in)), requires_grad(req_grad) {
    if (shape_numel(shape) != static_cast<std::int64_t>(data.size())) {
        throw ShapeError("tensor: shape " + shape_str(shape) + " does not match data length " +
                         std::to_string(data.size()));
    }
    for (int d : shape) {
        if (d <= 0) throw ShapeError("tensor: non-positive extent in shape " + shape_str(shape));
    }
}

TensorPtr Tensor::make(std::vector<int> shape, std::vector<double> data, bool req_grad) {
    return std::make_shared<Tensor>(std::move(shape), std::move(data), req_grad);
}

TensorPtr Tensor::zeros(std::vector<int> shape, bool req_grad) {
    const auto n = static_cast<std::size_t>(shape_numel(shape));
    return std::make_shared<Tensor>(std::move(shape), std::vector<double>(n, 0.0), req_grad);
}

TensorPtr Tensor::full(std::vector<int> shape, double value, bool req_grad) {
    const auto n = static_cast<std::size_t>(shape_numel(shape));
    return std::make_shared<Tensor>(std::move(shape), std::vector<double>(n, value), req_grad);
}

TensorPtr Tensor::scalar(double value, bool req_grad) {
    return std::make_shared<Tensor>(std::vector<int>{1}, std::vector<double>{value}, req_grad);
}

double Tensor::item() const {
    if (numel() != 1) {
        throw ShapeError("item: tensor of shape " + shape_str(shape) + " is not a scalar");
    }
    return data[0];
}

void Tensor::ensure_grad() {
    if (grad.size() != data.size()) grad.assign(data.size(), 0.0);
}

void Tensor::check_finite(const char* what) const {
    for (double v : data) {
        if (!std::isfinite(v)) {
            throw ValueError(std::string(what) + ": non-finite value in tensor of shape " +
                             shape_str(shape));
        }
    }
}

void backward(const TensorPtr& loss) {
    if (!loss) throw ValueError("backward: null tensor");
    if (loss->numel() != 1) {
        throw ShapeError("backward: loss must be scalar, got shape " + shape_str(loss->shape));
    }

    // Iterative DFS post-order; each node enters `order` exactly once.
    std::vector<Tensor*> order;
    std::unordered_set<Tensor*> seen;
    struct Frame {
        Tensor* node;
        std::size_t next_parent;
    };
    std::vector<Frame> stack;
    stack.push_back({loss.get(), 0});
    seen.insert(loss.get());
    while (!stack.empty()) {
        Frame& f = stack.back();
        if (f.next_parent < f.node->parents.size()) {
            Tensor* p = f.node->parents[f.next_parent++].get();
            if (seen.insert(p).second) stack.push_back({p, 0});
        } else {
            order.push_back(f.node);
            stack.pop_back();
        }
    }

    loss->ensure_grad();
    loss->grad[0] = 1.0;

    for (auto it = order.rbegin(); it != order.rend(); ++it) {
        Tensor* node = *it;
        if (node->backward_fn && node->grad.size() == node->data.size()) {
            node->backward_fn(*node);
        }
    }

    // Release the tape. Leaves keep their grads; intermediates become collectible.
    for (Tensor* node : order) {
        if (!node->parents.empty()) {
            node->backward_fn = nullptr;
            node->parents.clear();
        }
    }
}

} // namespace marppg::nn
