// SPDX-License-Identifier: Apache-2.0
#include <doctest.h>

#include <cmath>

#include "marppg/errors.hpp"
#include "marppg/gradcheck.hpp"
#include "marppg/losses.hpp"
#include "marppg/model.hpp"
#include "marppg/ops.hpp"
#include "marppg/rng.hpp"

using namespace marppg;
using namespace marppg::nn;

namespace {

TensorPtr vec(std::vector<double> v) {
    const auto n = static_cast<int>(v.size());
    return Tensor::make({n}, std::move(v));
}

TensorPtr random_vec(Rng& rng, int n, double lo = -1.0, double hi = 1.0) {
    auto t = Tensor::zeros({n});
    for (auto& v : t->data) v = rng.uniform(lo, hi);
    return t;
}

TensorPtr random_maps(Rng& rng, int t = 3, int h = 2, int w = 4) {
    auto m = Tensor::zeros({t, 4, h, w});
    for (auto& v : m->data) v = rng.uniform(-1, 1);
    return m;
}

} // namespace

TEST_CASE("l1_loss basics") {
    auto z = vec({0.5, -0.25, 1.5});
    CHECK(l1_loss(z, z)->item() == 0.0);
    CHECK(l1_loss(add_scalar(z, 0.7), z)->item() == doctest::Approx(0.7));
    CHECK(l1_loss(vec({0, 2}), vec({1, 1}))->item() == doctest::Approx(1.0));
    CHECK_THROWS_AS(l1_loss(vec({1, 2}), vec({1, 2, 3})), ShapeError);
}

TEST_CASE("neg_pearson_loss: endpoints and affine invariance") {
    Rng rng(31);
    auto y = random_vec(rng, 60);
    auto z = random_vec(rng, 60);

    CHECK(neg_pearson_loss(y, y)->item() == doctest::Approx(0.0).epsilon(1e-9));
    CHECK(neg_pearson_loss(neg(y), y)->item() == doctest::Approx(2.0).epsilon(1e-9));
    CHECK(neg_pearson_loss(add_scalar(scale(z, 2.0), 3.0), z)->item() ==
          doctest::Approx(0.0).epsilon(1e-9));

    SUBCASE("invariance under positive affine maps of y") {
        const double base = neg_pearson_loss(y, z)->item();
        for (double a : {0.5, 2.0, 7.3}) {
            for (double b : {-2.0, 0.0, 1.1}) {
                const double v = neg_pearson_loss(add_scalar(scale(y, a), b), z)->item();
                CHECK(std::fabs(v - base) < 1e-9);
            }
        }
    }
    SUBCASE("negating y reflects the loss around 1") {
        const double base = neg_pearson_loss(y, z)->item();
        const double neg_loss = neg_pearson_loss(neg(y), z)->item();
        CHECK(std::fabs(neg_loss - (2.0 - base)) < 1e-9);
    }
    SUBCASE("in range [0, 2] for signals with variance") {
        for (int i = 0; i < 20; ++i) {
            auto a = random_vec(rng, 17);
            auto b = random_vec(rng, 17);
            const double v = neg_pearson_loss(a, b)->item();
            CHECK(v >= 0.0);
            CHECK(v <= 2.0);
        }
    }
    SUBCASE("degenerate constant input stays finite") {
        auto c = Tensor::full({10}, 0.4);
        const double v = neg_pearson_loss(c, z)->item();
        CHECK(std::isfinite(v));
    }
    CHECK_THROWS_AS(neg_pearson_loss(vec({1, 2}), vec({1, 2, 3})), ShapeError);
}

TEST_CASE("regression_loss endpoints reduce exactly to the component losses") {
    Rng rng(32);
    auto y = random_vec(rng, 24);
    auto z = random_vec(rng, 24);
    CHECK(regression_loss(y, z, 0.0)->item() == l1_loss(y, z)->item());
    CHECK(regression_loss(y, z, 1.0)->item() == neg_pearson_loss(y, z)->item());
    CHECK(regression_loss(z, z, 0.37)->item() == doctest::Approx(0.0).epsilon(1e-9));
    CHECK_THROWS_AS(regression_loss(y, z, 1.5), ValueError);
}

TEST_CASE("attention_consistency_loss: exact zero on the aligned preimage") {
    Rng rng(33);
    auto m = random_maps(rng);
    // the maps of a flipped input that are perfectly consistent with m
    auto m_flipped = flip_align(m); // involution: flip_align(m_flipped) == m
    CHECK(attention_consistency_loss(m, m_flipped)->item() == 0.0);
}

TEST_CASE("attention_consistency_loss: hand-computed fixture") {
    // m zero, aligned m' all ones, 4x4 maps: each per-map L2 norm is 4,
    // and the normalization divides by Hq*Wq = 16 after the (t,e) mean
    auto m = Tensor::zeros({2, 4, 4, 4});
    auto ones = Tensor::full({2, 4, 4, 4}, 1.0);
    CHECK(attention_consistency_loss(m, ones)->item() == doctest::Approx(0.25).epsilon(1e-12));
}

TEST_CASE("attention_consistency_loss: nonnegative and role-symmetric") {
    Rng rng(34);
    for (int i = 0; i < 10; ++i) {
        auto m = random_maps(rng);
        auto mf = random_maps(rng);
        const double a = attention_consistency_loss(m, mf)->item();
        const double b = attention_consistency_loss(mf, m)->item();
        CHECK(a >= 0.0);
        CHECK(std::fabs(a - b) < 1e-12);
    }
    CHECK_THROWS_AS(
        attention_consistency_loss(Tensor::zeros({2, 4, 2, 2}), Tensor::zeros({2, 4, 2, 4})),
        ShapeError);
}

TEST_CASE("total_loss endpoints and fixture") {
    auto r1 = Tensor::scalar(1.0);
    auto ac1 = Tensor::scalar(1.0);
    CHECK(total_loss(r1, r1, ac1, 0.5)->item() == doctest::Approx(1.0));

    Rng rng(35);
    auto ro = Tensor::scalar(rng.uniform());
    auto rf = Tensor::scalar(rng.uniform());
    auto ac = Tensor::scalar(rng.uniform());
    SUBCASE("beta = 0 drops the attention term exactly") {
        CHECK(total_loss(ro, rf, ac, 0.0)->item() == 0.5 * (ro->item() + rf->item()));
    }
    SUBCASE("zero components give zero") {
        auto z = Tensor::scalar(0.0);
        CHECK(total_loss(z, z, z, 0.5)->item() == 0.0);
    }
    CHECK_THROWS_AS(total_loss(ro, rf, ac, 1.0), ValueError);
}

TEST_CASE("losses are differentiable at random points (spot check)") {
    Rng rng(36);
    auto z = random_vec(rng, 10);
    auto mf = random_maps(rng);

    auto y_point = random_vec(rng, 10);
    const double err_reg = grad_check(
        [&z](const TensorPtr& y) { return regression_loss(y, z, 0.3); }, y_point);
    // regression includes |.|; points were drawn away from ties
    CHECK(err_reg < 1e-3);

    auto m_point = random_maps(rng);
    const double err_ac = grad_check(
        [&mf](const TensorPtr& m) { return attention_consistency_loss(m, mf); }, m_point);
    CHECK(err_ac < 1e-4);
}
