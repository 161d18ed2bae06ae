// SPDX-License-Identifier: Apache-2.0
#include "marppg/losses.hpp"

#include "marppg/errors.hpp"
#include "marppg/model.hpp"
#include "marppg/ops.hpp"

namespace marppg {

using namespace nn;

namespace {

void require_signal_pair(const char* op, const TensorPtr& y, const TensorPtr& z) {
    if (y->shape != z->shape || y->rank() != 1) {
        throw ShapeError(std::string(op) + ": signals must share a 1-D shape, got " +
                         shape_str(y->shape) + " vs " + shape_str(z->shape));
    }
}

} // namespace

TensorPtr l1_loss(const TensorPtr& y, const TensorPtr& z) {
    require_signal_pair("l1_loss", y, z);
    return mean_all(abs_elem(sub(y, z)));
}

TensorPtr neg_pearson_loss(const TensorPtr& y, const TensorPtr& z) {
    require_signal_pair("neg_pearson_loss", y, z);
    const auto t = static_cast<double>(y->dim(0));
    if (t < 2) throw ShapeError("neg_pearson_loss: need length >= 2");
    constexpr double eps = 1e-8;

    auto sy = sum_all(y);
    auto sz = sum_all(z);
    auto syy = sum_all(mul(y, y));
    auto szz = sum_all(mul(z, z));
    auto syz = sum_all(mul(y, z));

    auto num = sub(scale(syz, t), mul(sy, sz));
    auto vary = sub(scale(syy, t), mul(sy, sy));
    auto varz = sub(scale(szz, t), mul(sz, sz));
    auto den = sqrt_elem(add_scalar(mul(vary, varz), eps));
    auto rho = div_elem(num, den);
    return add_scalar(neg(rho), 1.0);
}

TensorPtr regression_loss(const TensorPtr& y, const TensorPtr& z, double alpha) {
    if (alpha < 0.0 || alpha > 1.0) {
        throw ValueError("regression_loss: alpha must be in [0, 1]");
    }
    return add(scale(l1_loss(y, z), 1.0 - alpha), scale(neg_pearson_loss(y, z), alpha));
}

TensorPtr attention_consistency_loss(const TensorPtr& m, const TensorPtr& m_flipped) {
    if (m->shape != m_flipped->shape || m->rank() != 4) {
        throw ShapeError("attention_consistency_loss: map sets must share a (T,E,H,W) shape, got " +
                         shape_str(m->shape) + " vs " + shape_str(m_flipped->shape));
    }
    auto diff = sub(m, flip_align(m_flipped));
    const double denom = static_cast<double>(m->numel());
    return scale(sum_spatial_l2(diff), 1.0 / denom);
}

TensorPtr total_loss(const TensorPtr& reg_orig, const TensorPtr& reg_flip, const TensorPtr& ac,
                     double beta) {
    if (beta < 0.0 || beta >= 1.0) {
        throw ValueError("total_loss: beta must be in [0, 1)");
    }
    auto reg_mean = scale(add(reg_orig, reg_flip), 0.5);
    return add(scale(reg_mean, 1.0 - beta), scale(ac, beta));
}

} // namespace marppg
