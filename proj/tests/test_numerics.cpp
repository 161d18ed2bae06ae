// SPDX-License-Identifier: Apache-2.0
#include <doctest.h>

#include <cmath>
#include <cstdio>
#include <filesystem>

#include "marppg/checkpoint.hpp"
#include "marppg/errors.hpp"
#include "marppg/gradcheck.hpp"
#include "marppg/losses.hpp"
#include "marppg/ops.hpp"
#include "marppg/optim.hpp"
#include "marppg/rng.hpp"
#include "marppg/tensor.hpp"

using namespace marppg;
using namespace marppg::nn;

TEST_CASE("tensor shape/data consistency is enforced") {
    CHECK_THROWS_AS(Tensor::make({2, 2}, {1.0, 2.0, 3.0}), ShapeError);
    CHECK_THROWS_AS(Tensor::make({0}, {}), ShapeError);
    auto t = Tensor::make({2, 3}, {1, 2, 3, 4, 5, 6});
    CHECK(t->numel() == 6);
    CHECK_THROWS_AS(t->item(), ShapeError);
    auto bad = Tensor::make({2}, {1.0, std::nan("")});
    CHECK_THROWS_AS(bad->check_finite("test"), ValueError);
}

TEST_CASE("elementwise add") {
    auto a = Tensor::make({2}, {1, 2});
    auto b = Tensor::make({2}, {3, 4});
    auto c = add(a, b);
    CHECK(c->data[0] == 4.0);
    CHECK(c->data[1] == 6.0);
    CHECK_THROWS_AS(add(a, Tensor::make({3}, {1, 2, 3})), ShapeError);
}

TEST_CASE("matmul of 2x3 by 3x1 ones gives row sums") {
    auto a = Tensor::make({2, 3}, {1, 2, 3, 4, 5, 6});
    auto ones = Tensor::full({3, 1}, 1.0);
    auto c = matmul(a, ones);
    CHECK(c->data[0] == doctest::Approx(6.0));
    CHECK(c->data[1] == doctest::Approx(15.0));
    CHECK_THROWS_AS(matmul(a, Tensor::full({2, 1}, 1.0)), ShapeError);
}

TEST_CASE("conv2d identity kernel leaves the image unchanged") {
    Rng rng(7);
    auto x = Tensor::zeros({1, 1, 6, 6});
    for (auto& v : x->data) v = rng.uniform();
    auto w = Tensor::zeros({1, 1, 3, 3});
    w->data[4] = 1.0; // center tap
    auto b = Tensor::zeros({1});
    auto y = conv2d(x, w, b);
    for (std::size_t i = 0; i < x->data.size(); ++i) CHECK(y->data[i] == x->data[i]);
}

TEST_CASE("backward: d(x^2)/dx = 2x") {
    auto x = Tensor::make({1}, {3.0}, true);
    auto loss = mul(x, x);
    backward(loss);
    CHECK(x->grad[0] == doctest::Approx(6.0));
}

TEST_CASE("backward: sum gradient is ones") {
    auto x = Tensor::make({4}, {1, 2, 3, 4}, true);
    backward(sum_all(x));
    for (double g : x->grad) CHECK(g == 1.0);
}

TEST_CASE("backward: mean(relu(x)) gates the negative branch") {
    auto x = Tensor::make({2}, {-1.0, 2.0}, true);
    backward(mean_all(relu(x)));
    CHECK(x->grad[0] == 0.0);
    CHECK(x->grad[1] == doctest::Approx(0.5));
}

TEST_CASE("backward requires a scalar loss") {
    auto x = Tensor::make({2}, {1.0, 2.0}, true);
    auto y = add(x, x);
    CHECK_THROWS_AS(backward(y), ShapeError);
}

TEST_CASE("backward visits shared subexpressions once (full gradient)") {
    // y = x * x reused twice: loss = (x*x) + (x*x), d/dx = 4x
    auto x = Tensor::make({1}, {1.5}, true);
    auto sq = mul(x, x);
    backward(add(sq, sq));
    CHECK(x->grad[0] == doctest::Approx(6.0));
}

TEST_CASE("grad_check: sum of squares") {
    auto point = Tensor::make({3}, {1, 2, 3});
    const double err = grad_check([](const TensorPtr& x) { return sum_all(mul(x, x)); }, point);
    CHECK(err < 1e-6);
}

TEST_CASE("grad_check: negative Pearson loss against finite differences") {
    Rng rng(11);
    auto z = Tensor::zeros({12});
    for (auto& v : z->data) v = rng.uniform(-1, 1);
    auto point = Tensor::zeros({12});
    for (auto& v : point->data) v = rng.uniform(-1, 1);
    const double err =
        grad_check([z](const TensorPtr& y) { return neg_pearson_loss(y, z); }, point);
    CHECK(err < 1e-4);
}

TEST_CASE("grad_check flags a corrupted backward rule") {
    auto point = Tensor::make({3}, {1, 2, 3});
    const double err = grad_check(
        [](const TensorPtr& x) { return sum_all(mul(grad_tamper(x), x)); }, point);
    CHECK(err > 1e-3);
}

TEST_CASE("registry gradcheck passes for every primitive and loss") {
    for (const auto& r : run_gradcheck(2024, 3)) {
        INFO(r.name);
        CHECK(r.max_rel_err < 1e-4);
    }
}

TEST_CASE("registry gradcheck catches an injected corruption") {
    const auto results = run_gradcheck(2024, 2, "tanh");
    bool found = false;
    for (const auto& r : results) {
        if (r.name == "tanh") {
            found = true;
            CHECK(r.max_rel_err > 1e-4);
        } else {
            CHECK(r.max_rel_err < 1e-4);
        }
    }
    CHECK(found);
}

TEST_CASE("adam: zero gradient leaves parameters unchanged") {
    auto p = Tensor::make({3}, {1.0, -2.0, 0.5}, true);
    p->zero_grad();
    AdamState st;
    adam_step({p}, st, 0.1);
    CHECK(p->data[0] == 1.0);
    CHECK(p->data[1] == -2.0);
    CHECK(p->data[2] == 0.5);
    CHECK(st.step == 1);
}

TEST_CASE("adam: bias-corrected first step moves by ~lr * sign(g)") {
    auto p = Tensor::make({1}, {0.7}, true);
    p->ensure_grad();
    p->grad[0] = 1.0;
    AdamState st;
    adam_step({p}, st, 0.1);
    CHECK(p->data[0] == doctest::Approx(0.6).epsilon(1e-6));
}

TEST_CASE("adam: constant gradient drives per-step displacement toward lr") {
    // independent oracle: simulate the recurrence directly for 1000 steps and
    // confirm the displacement magnitude settles at lr
    const double lr = 0.01, g = 3.7;
    auto p = Tensor::make({1}, {0.0}, true);
    p->ensure_grad();
    AdamState st;
    double prev = p->data[0];
    double last_disp = 0.0;
    for (int i = 0; i < 1000; ++i) {
        p->grad[0] = g;
        adam_step({p}, st, lr);
        last_disp = std::fabs(p->data[0] - prev);
        prev = p->data[0];
    }
    CHECK(last_disp == doctest::Approx(lr).epsilon(1e-3));
}

TEST_CASE("adam rejects a changed parameter list") {
    auto p = Tensor::make({2}, {0.0, 0.0}, true);
    AdamState st;
    adam_step({p}, st, 0.1);
    auto q = Tensor::make({3}, {0.0, 0.0, 0.0}, true);
    CHECK_THROWS_AS(adam_step({q}, st, 0.1), ShapeError);
}

TEST_CASE("one-cycle schedule endpoints and peak") {
    OneCycleSchedule sched{1e-3, 200, 0.3, 25.0, 1e4};
    CHECK(onecycle_lr(0, sched) == doctest::Approx(1e-3 / 25.0));
    CHECK(onecycle_lr(60, sched) == doctest::Approx(1e-3)); // round(0.3 * 200)
    CHECK(onecycle_lr(199, sched) == doctest::Approx(1e-3 / 1e4));
    for (int s = 0; s < 200; ++s) CHECK(onecycle_lr(s, sched) > 0.0);
    CHECK_THROWS_AS(onecycle_lr(200, sched), ValueError);
    CHECK_THROWS_AS(onecycle_lr(-1, sched), ValueError);
}

TEST_CASE("forward is deterministic bit-for-bit") {
    Rng rng(5);
    auto x = Tensor::zeros({2, 3, 8, 8});
    for (auto& v : x->data) v = rng.uniform();
    auto w = Tensor::zeros({4, 3, 3, 3});
    for (auto& v : w->data) v = rng.uniform(-0.5, 0.5);
    auto b = Tensor::zeros({4});
    auto y1 = tanh_elem(conv2d(x, w, b));
    auto y2 = tanh_elem(conv2d(x, w, b));
    CHECK(y1->data == y2->data);
}

TEST_CASE("backward of a sum of losses equals the sum of separate gradients") {
    Rng rng(13);
    auto make_x = [&] {
        auto x = Tensor::zeros({6});
        return x;
    };
    auto x0 = make_x();
    for (auto& v : x0->data) v = rng.uniform(-1, 1);

    auto z = Tensor::zeros({6});
    for (auto& v : z->data) v = rng.uniform(-1, 1);

    auto xa = Tensor::make(x0->shape, x0->data, true);
    backward(add(l1_loss(xa, z), neg_pearson_loss(xa, z)));

    auto xb = Tensor::make(x0->shape, x0->data, true);
    backward(l1_loss(xb, z));
    auto xc = Tensor::make(x0->shape, x0->data, true);
    backward(neg_pearson_loss(xc, z));

    for (std::size_t i = 0; i < x0->data.size(); ++i) {
        CHECK(std::fabs(xa->grad[i] - (xb->grad[i] + xc->grad[i])) < 1e-10);
    }
}

TEST_CASE("checkpoint round-trips names, shapes and payload bitwise") {
    Rng rng(17);
    std::vector<std::pair<std::string, TensorPtr>> tensors;
    auto a = Tensor::zeros({3, 4});
    auto b = Tensor::zeros({7});
    for (auto& v : a->data) v = rng.normal();
    for (auto& v : b->data) v = rng.normal();
    tensors.emplace_back("layer.w", a);
    tensors.emplace_back("layer.b", b);

    const auto path = (std::filesystem::temp_directory_path() / "marppg_ckpt_test.marw").string();
    save_checkpoint(path, tensors);
    const auto loaded = load_checkpoint(path);
    REQUIRE(loaded.size() == 2);
    CHECK(loaded[0].first == "layer.w");
    CHECK(loaded[0].second->shape == a->shape);
    CHECK(loaded[0].second->data == a->data);
    CHECK(loaded[1].second->data == b->data);

    auto a2 = Tensor::zeros({3, 4});
    auto b2 = Tensor::zeros({7});
    load_checkpoint_into(path, {{"layer.w", a2}, {"layer.b", b2}});
    CHECK(a2->data == a->data);
    CHECK(b2->data == b->data);

    auto wrong = Tensor::zeros({4, 3});
    CHECK_THROWS_AS(load_checkpoint_into(path, {{"layer.w", wrong}, {"layer.b", b2}}),
                    ValueError);
    std::filesystem::remove(path);
}

TEST_CASE("checkpoint loader rejects garbage") {
    const auto path = (std::filesystem::temp_directory_path() / "marppg_bad.marw").string();
    {
        std::FILE* f = std::fopen(path.c_str(), "wb");
        std::fputs("WRONG---", f);
        std::fclose(f);
    }
    CHECK_THROWS_AS(load_checkpoint(path), ParseError);
    std::filesystem::remove(path);
}

TEST_CASE("rng reproducibility and stream independence") {
    Rng a(99), b(99);
    for (int i = 0; i < 100; ++i) CHECK(a.next_u64() == b.next_u64());
    Rng s0 = Rng::derive(99, 0), s1 = Rng::derive(99, 1);
    bool differ = false;
    for (int i = 0; i < 16; ++i) differ = differ || (s0.next_u64() != s1.next_u64());
    CHECK(differ);
}
