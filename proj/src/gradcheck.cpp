// SPDX-License-Identifier: Apache-2.0
#include "marppg/gradcheck.hpp"

#include <algorithm>
#include <cmath>

#include "marppg/errors.hpp"
#include "marppg/losses.hpp"
#include "marppg/model.hpp"
#include "marppg/ops.hpp"

namespace marppg::nn {

double grad_check(const ScalarFn& f, const TensorPtr& point, double eps) {
    auto leaf = Tensor::make(point->shape, point->data, true);
    auto loss = f(leaf);
    if (loss->numel() != 1) {
        throw ShapeError("grad_check: function output must be scalar, got " +
                         shape_str(loss->shape));
    }
    backward(loss);
    std::vector<double> analytic(leaf->data.size(), 0.0);
    if (leaf->grad.size() == leaf->data.size()) analytic = leaf->grad;

    double max_err = 0.0;
    std::vector<double> probe = point->data;
    for (std::size_t i = 0; i < probe.size(); ++i) {
        const double saved = probe[i];
        probe[i] = saved + eps;
        const double up = f(Tensor::make(point->shape, probe))->item();
        probe[i] = saved - eps;
        const double dn = f(Tensor::make(point->shape, probe))->item();
        probe[i] = saved;
        const double numeric = (up - dn) / (2.0 * eps);
        if (std::isnan(analytic[i]) || std::isnan(numeric)) {
            throw ValueError("grad_check: NaN gradient at component " + std::to_string(i));
        }
        const double denom = std::max({std::fabs(analytic[i]), std::fabs(numeric), 1e-8});
        max_err = std::max(max_err, std::fabs(analytic[i] - numeric) / denom);
    }
    return max_err;
}

TensorPtr grad_tamper(const TensorPtr& x) {
    auto r = Tensor::make(x->shape, x->data);
    r->op = "grad_tamper";
    r->requires_grad = x->requires_grad;
    r->parents = {x};
    if (r->requires_grad) {
        r->backward_fn = [x](const Tensor& self) {
            x->ensure_grad();
            // wrong on purpose: scaled and shifted
            for (std::size_t i = 0; i < self.grad.size(); ++i)
                x->grad[i] += 1.05 * self.grad[i] + 0.01;
        };
    }
    return r;
}

namespace {

struct Case {
    std::string name;
    // builds a (point, f) pair from the rng and runs grad_check
    std::function<double(Rng&, bool corrupt)> run;
};

TensorPtr rand_tensor(Rng& rng, std::vector<int> shape, double lo, double hi) {
    auto t = Tensor::zeros(std::move(shape));
    for (auto& v : t->data) v = rng.uniform(lo, hi);
    return t;
}

/// Values with |v| in [margin, margin + span], random sign. Keeps points away
/// from relu/abs kinks.
TensorPtr rand_offset_tensor(Rng& rng, std::vector<int> shape, double margin, double span) {
    auto t = Tensor::zeros(std::move(shape));
    for (auto& v : t->data) {
        const double mag = margin + span * rng.uniform();
        v = rng.uniform() < 0.5 ? -mag : mag;
    }
    return t;
}

/// Projects an op output to a scalar with fixed random weights so the check
/// exercises general output cotangents.
TensorPtr project(const TensorPtr& out, const TensorPtr& proj) {
    return sum_all(mul(out, proj));
}

ScalarFn maybe_tamper(ScalarFn f, bool corrupt) {
    if (!corrupt) return f;
    return [f](const TensorPtr& x) { return f(grad_tamper(x)); };
}

const std::vector<Case>& registry() {
    static const std::vector<Case> cases = [] {
        std::vector<Case> cs;
        auto add_case = [&cs](std::string name, std::function<double(Rng&, bool)> run) {
            cs.push_back({std::move(name), std::move(run)});
        };

        add_case("add", [](Rng& rng, bool corrupt) {
            auto point = rand_tensor(rng, {2, 3}, -1, 1);
            auto other = rand_tensor(rng, {2, 3}, -1, 1);
            auto proj = rand_tensor(rng, {2, 3}, -1, 1);
            return grad_check(maybe_tamper(
                [other, proj](const TensorPtr& x) { return project(add(x, other), proj); },
                corrupt), point);
        });
        add_case("sub", [](Rng& rng, bool corrupt) {
            auto point = rand_tensor(rng, {2, 3}, -1, 1);
            auto other = rand_tensor(rng, {2, 3}, -1, 1);
            auto proj = rand_tensor(rng, {2, 3}, -1, 1);
            return grad_check(maybe_tamper(
                [other, proj](const TensorPtr& x) { return project(sub(other, x), proj); },
                corrupt), point);
        });
        add_case("mul", [](Rng& rng, bool corrupt) {
            auto point = rand_tensor(rng, {2, 3}, -1, 1);
            auto other = rand_tensor(rng, {2, 3}, -1, 1);
            auto proj = rand_tensor(rng, {2, 3}, -1, 1);
            return grad_check(maybe_tamper(
                [other, proj](const TensorPtr& x) { return project(mul(x, other), proj); },
                corrupt), point);
        });
        add_case("div", [](Rng& rng, bool corrupt) {
            auto point = rand_offset_tensor(rng, {2, 3}, 0.5, 1.0);
            auto numer = rand_tensor(rng, {2, 3}, -1, 1);
            auto proj = rand_tensor(rng, {2, 3}, -1, 1);
            return grad_check(maybe_tamper(
                [numer, proj](const TensorPtr& x) { return project(div_elem(numer, x), proj); },
                corrupt), point);
        });
        add_case("scale", [](Rng& rng, bool corrupt) {
            auto point = rand_tensor(rng, {4}, -1, 1);
            auto proj = rand_tensor(rng, {4}, -1, 1);
            return grad_check(maybe_tamper(
                [proj](const TensorPtr& x) { return project(scale(x, -1.7), proj); }, corrupt),
                point);
        });
        add_case("abs", [](Rng& rng, bool corrupt) {
            auto point = rand_offset_tensor(rng, {2, 3}, 0.2, 1.0);
            auto proj = rand_tensor(rng, {2, 3}, -1, 1);
            return grad_check(maybe_tamper(
                [proj](const TensorPtr& x) { return project(abs_elem(x), proj); }, corrupt),
                point);
        });
        add_case("sqrt", [](Rng& rng, bool corrupt) {
            auto point = rand_tensor(rng, {2, 3}, 0.5, 2.0);
            auto proj = rand_tensor(rng, {2, 3}, -1, 1);
            return grad_check(maybe_tamper(
                [proj](const TensorPtr& x) { return project(sqrt_elem(x), proj); }, corrupt),
                point);
        });
        add_case("relu", [](Rng& rng, bool corrupt) {
            auto point = rand_offset_tensor(rng, {2, 4}, 0.2, 1.0);
            auto proj = rand_tensor(rng, {2, 4}, -1, 1);
            return grad_check(maybe_tamper(
                [proj](const TensorPtr& x) { return project(relu(x), proj); }, corrupt), point);
        });
        add_case("tanh", [](Rng& rng, bool corrupt) {
            auto point = rand_tensor(rng, {2, 4}, -2, 2);
            auto proj = rand_tensor(rng, {2, 4}, -1, 1);
            return grad_check(maybe_tamper(
                [proj](const TensorPtr& x) { return project(tanh_elem(x), proj); }, corrupt),
                point);
        });
        add_case("sum", [](Rng& rng, bool corrupt) {
            auto point = rand_tensor(rng, {3, 3}, -1, 1);
            return grad_check(maybe_tamper(
                [](const TensorPtr& x) { return sum_all(x); }, corrupt), point);
        });
        add_case("softmax_vec", [](Rng& rng, bool corrupt) {
            auto point = rand_tensor(rng, {6}, -2, 2);
            auto proj = rand_tensor(rng, {6}, -1, 1);
            return grad_check(maybe_tamper(
                [proj](const TensorPtr& x) { return project(softmax_lastdims(x, 1), proj); },
                corrupt), point);
        });
        add_case("softmax_spatial", [](Rng& rng, bool corrupt) {
            auto point = rand_tensor(rng, {2, 3, 4}, -2, 2);
            auto proj = rand_tensor(rng, {2, 3, 4}, -1, 1);
            return grad_check(maybe_tamper(
                [proj](const TensorPtr& x) { return project(softmax_lastdims(x, 2), proj); },
                corrupt), point);
        });
        add_case("matmul_left", [](Rng& rng, bool corrupt) {
            auto point = rand_tensor(rng, {3, 4}, -1, 1);
            auto other = rand_tensor(rng, {4, 2}, -1, 1);
            auto proj = rand_tensor(rng, {3, 2}, -1, 1);
            return grad_check(maybe_tamper(
                [other, proj](const TensorPtr& x) { return project(matmul(x, other), proj); },
                corrupt), point);
        });
        add_case("matmul_right", [](Rng& rng, bool corrupt) {
            auto point = rand_tensor(rng, {4, 2}, -1, 1);
            auto other = rand_tensor(rng, {3, 4}, -1, 1);
            auto proj = rand_tensor(rng, {3, 2}, -1, 1);
            return grad_check(maybe_tamper(
                [other, proj](const TensorPtr& x) { return project(matmul(other, x), proj); },
                corrupt), point);
        });
        add_case("linear_input", [](Rng& rng, bool corrupt) {
            auto point = rand_tensor(rng, {5, 3}, -1, 1);
            auto w = rand_tensor(rng, {2, 3}, -1, 1);
            auto b = rand_tensor(rng, {2}, -1, 1);
            auto proj = rand_tensor(rng, {5, 2}, -1, 1);
            return grad_check(maybe_tamper(
                [w, b, proj](const TensorPtr& x) { return project(linear(x, w, b), proj); },
                corrupt), point);
        });
        add_case("linear_weight", [](Rng& rng, bool corrupt) {
            auto point = rand_tensor(rng, {2, 3}, -1, 1);
            auto x = rand_tensor(rng, {5, 3}, -1, 1);
            auto b = rand_tensor(rng, {2}, -1, 1);
            auto proj = rand_tensor(rng, {5, 2}, -1, 1);
            return grad_check(maybe_tamper(
                [x, b, proj](const TensorPtr& w) { return project(linear(x, w, b), proj); },
                corrupt), point);
        });
        add_case("linear_bias", [](Rng& rng, bool corrupt) {
            auto point = rand_tensor(rng, {2}, -1, 1);
            auto x = rand_tensor(rng, {5, 3}, -1, 1);
            auto w = rand_tensor(rng, {2, 3}, -1, 1);
            auto proj = rand_tensor(rng, {5, 2}, -1, 1);
            return grad_check(maybe_tamper(
                [x, w, proj](const TensorPtr& b) { return project(linear(x, w, b), proj); },
                corrupt), point);
        });
        add_case("conv2d_input", [](Rng& rng, bool corrupt) {
            auto point = rand_tensor(rng, {2, 2, 5, 5}, -1, 1);
            auto w = rand_tensor(rng, {3, 2, 3, 3}, -1, 1);
            auto b = rand_tensor(rng, {3}, -1, 1);
            auto proj = rand_tensor(rng, {2, 3, 5, 5}, -1, 1);
            return grad_check(maybe_tamper(
                [w, b, proj](const TensorPtr& x) { return project(conv2d(x, w, b), proj); },
                corrupt), point);
        });
        add_case("conv2d_weight", [](Rng& rng, bool corrupt) {
            auto point = rand_tensor(rng, {3, 2, 3, 3}, -1, 1);
            auto x = rand_tensor(rng, {2, 2, 5, 5}, -1, 1);
            auto b = rand_tensor(rng, {3}, -1, 1);
            auto proj = rand_tensor(rng, {2, 3, 5, 5}, -1, 1);
            return grad_check(maybe_tamper(
                [x, b, proj](const TensorPtr& w) { return project(conv2d(x, w, b), proj); },
                corrupt), point);
        });
        add_case("conv2d_bias", [](Rng& rng, bool corrupt) {
            auto point = rand_tensor(rng, {3}, -1, 1);
            auto x = rand_tensor(rng, {2, 2, 5, 5}, -1, 1);
            auto w = rand_tensor(rng, {3, 2, 3, 3}, -1, 1);
            auto proj = rand_tensor(rng, {2, 3, 5, 5}, -1, 1);
            return grad_check(maybe_tamper(
                [x, w, proj](const TensorPtr& b) { return project(conv2d(x, w, b), proj); },
                corrupt), point);
        });
        add_case("avgpool", [](Rng& rng, bool corrupt) {
            auto point = rand_tensor(rng, {2, 2, 4, 4}, -1, 1);
            auto proj = rand_tensor(rng, {2, 2, 2, 2}, -1, 1);
            return grad_check(maybe_tamper(
                [proj](const TensorPtr& x) { return project(avgpool2x2(x), proj); }, corrupt),
                point);
        });
        add_case("slice_concat", [](Rng& rng, bool corrupt) {
            auto point = rand_tensor(rng, {2, 2, 4, 4}, -1, 1);
            auto proj = rand_tensor(rng, {2, 2, 4, 4}, -1, 1);
            return grad_check(maybe_tamper(
                [proj](const TensorPtr& x) {
                    auto q = EreaModel::split_quadrants(x);
                    return project(concat_quadrants(q[0], q[1], q[2], q[3]), proj);
                },
                corrupt), point);
        });
        add_case("hflip", [](Rng& rng, bool corrupt) {
            auto point = rand_tensor(rng, {2, 4, 2, 3}, -1, 1);
            auto proj = rand_tensor(rng, {2, 4, 2, 3}, -1, 1);
            return grad_check(maybe_tamper(
                [proj](const TensorPtr& x) { return project(hflip(x), proj); }, corrupt), point);
        });
        add_case("flip_align", [](Rng& rng, bool corrupt) {
            auto point = rand_tensor(rng, {2, 4, 2, 2}, -1, 1);
            auto proj = rand_tensor(rng, {2, 4, 2, 2}, -1, 1);
            return grad_check(maybe_tamper(
                [proj](const TensorPtr& x) { return project(flip_align(x), proj); }, corrupt),
                point);
        });
        add_case("cam_features", [](Rng& rng, bool corrupt) {
            auto point = rand_tensor(rng, {2, 3, 2, 2}, -1, 1);
            auto w = rand_tensor(rng, {2, 3}, -1, 1);
            auto proj = rand_tensor(rng, {2, 2, 2}, -1, 1);
            return grad_check(maybe_tamper(
                [w, proj](const TensorPtr& f) { return project(cam_attention(f, w), proj); },
                corrupt), point);
        });
        add_case("cam_weights", [](Rng& rng, bool corrupt) {
            auto point = rand_tensor(rng, {2, 3}, -1, 1);
            auto f = rand_tensor(rng, {2, 3, 2, 2}, -1, 1);
            auto proj = rand_tensor(rng, {2, 2, 2}, -1, 1);
            return grad_check(maybe_tamper(
                [f, proj](const TensorPtr& w) { return project(cam_attention(f, w), proj); },
                corrupt), point);
        });
        add_case("weighted_pool_features", [](Rng& rng, bool corrupt) {
            auto point = rand_tensor(rng, {2, 3, 2, 2}, -1, 1);
            auto a = rand_tensor(rng, {2, 2, 2}, -1, 1);
            auto proj = rand_tensor(rng, {2, 3}, -1, 1);
            return grad_check(maybe_tamper(
                [a, proj](const TensorPtr& f) {
                    return project(spatial_weighted_pool(f, a), proj);
                },
                corrupt), point);
        });
        add_case("weighted_pool_attention", [](Rng& rng, bool corrupt) {
            auto point = rand_tensor(rng, {2, 2, 2}, -1, 1);
            auto f = rand_tensor(rng, {2, 3, 2, 2}, -1, 1);
            auto proj = rand_tensor(rng, {2, 3}, -1, 1);
            return grad_check(maybe_tamper(
                [f, proj](const TensorPtr& a) {
                    return project(spatial_weighted_pool(f, a), proj);
                },
                corrupt), point);
        });
        add_case("global_avg_pool", [](Rng& rng, bool corrupt) {
            auto point = rand_tensor(rng, {2, 3, 2, 2}, -1, 1);
            auto proj = rand_tensor(rng, {3}, -1, 1);
            return grad_check(maybe_tamper(
                [proj](const TensorPtr& f) { return project(global_avg_pool(f), proj); },
                corrupt), point);
        });
        add_case("convex_combine_signals", [](Rng& rng, bool corrupt) {
            auto point = rand_tensor(rng, {5}, -1, 1);
            auto s2 = rand_tensor(rng, {5}, -1, 1);
            auto s3 = rand_tensor(rng, {5}, -1, 1);
            auto s4 = rand_tensor(rng, {5}, -1, 1);
            auto alpha = softmax_lastdims(rand_tensor(rng, {4}, -1, 1), 1);
            auto proj = rand_tensor(rng, {5}, -1, 1);
            return grad_check(maybe_tamper(
                [s2, s3, s4, alpha, proj](const TensorPtr& x) {
                    return project(convex_combine({x, s2, s3, s4}, alpha), proj);
                },
                corrupt), point);
        });
        add_case("convex_combine_gate", [](Rng& rng, bool corrupt) {
            auto point = rand_tensor(rng, {4}, -2, 2);
            std::vector<TensorPtr> sigs;
            for (int i = 0; i < 4; ++i) sigs.push_back(rand_tensor(rng, {5}, -1, 1));
            auto proj = rand_tensor(rng, {5}, -1, 1);
            return grad_check(maybe_tamper(
                [sigs, proj](const TensorPtr& logits) {
                    return project(convex_combine(sigs, softmax_lastdims(logits, 1)), proj);
                },
                corrupt), point);
        });
        add_case("sum_spatial_l2", [](Rng& rng, bool corrupt) {
            auto point = rand_offset_tensor(rng, {2, 4, 2, 2}, 0.1, 1.0);
            return grad_check(maybe_tamper(
                [](const TensorPtr& x) { return sum_spatial_l2(x); }, corrupt), point);
        });
        add_case("l1_loss", [](Rng& rng, bool corrupt) {
            auto z = rand_tensor(rng, {8}, -1, 1);
            auto point = Tensor::zeros({8});
            // offset from z so |y - z| has no kink at the probe points
            for (std::size_t i = 0; i < 8; ++i) {
                const double off = 0.3 + rng.uniform();
                point->data[i] = z->data[i] + (rng.uniform() < 0.5 ? -off : off);
            }
            return grad_check(maybe_tamper(
                [z](const TensorPtr& y) { return l1_loss(y, z); }, corrupt), point);
        });
        add_case("neg_pearson_loss", [](Rng& rng, bool corrupt) {
            auto point = rand_tensor(rng, {8}, -1, 1);
            auto z = rand_tensor(rng, {8}, -1, 1);
            return grad_check(maybe_tamper(
                [z](const TensorPtr& y) { return neg_pearson_loss(y, z); }, corrupt), point);
        });
        add_case("regression_loss", [](Rng& rng, bool corrupt) {
            auto z = rand_tensor(rng, {8}, -1, 1);
            auto point = Tensor::zeros({8});
            for (std::size_t i = 0; i < 8; ++i) {
                const double off = 0.3 + rng.uniform();
                point->data[i] = z->data[i] + (rng.uniform() < 0.5 ? -off : off);
            }
            return grad_check(maybe_tamper(
                [z](const TensorPtr& y) { return regression_loss(y, z, 0.3); }, corrupt), point);
        });
        add_case("attention_consistency_maps", [](Rng& rng, bool corrupt) {
            auto point = rand_tensor(rng, {2, 4, 2, 2}, -1, 1);
            auto other = rand_tensor(rng, {2, 4, 2, 2}, -1, 1);
            return grad_check(maybe_tamper(
                [other](const TensorPtr& m) { return attention_consistency_loss(m, other); },
                corrupt), point);
        });
        add_case("attention_consistency_flipped", [](Rng& rng, bool corrupt) {
            auto point = rand_tensor(rng, {2, 4, 2, 2}, -1, 1);
            auto other = rand_tensor(rng, {2, 4, 2, 2}, -1, 1);
            return grad_check(maybe_tamper(
                [other](const TensorPtr& mf) {
                    return attention_consistency_loss(other, mf);
                },
                corrupt), point);
        });
        add_case("total_loss", [](Rng& rng, bool corrupt) {
            auto point = rand_tensor(rng, {8}, -1, 1);
            auto z = rand_tensor(rng, {8}, -1, 1);
            auto m = rand_tensor(rng, {2, 4, 2, 2}, -1, 1);
            auto mf = rand_tensor(rng, {2, 4, 2, 2}, -1, 1);
            return grad_check(maybe_tamper(
                [z, m, mf](const TensorPtr& y) {
                    auto reg_o = regression_loss(y, z, 0.3);
                    auto reg_f = regression_loss(hflip(y), z, 0.3);
                    return total_loss(reg_o, reg_f, attention_consistency_loss(m, mf), 0.5);
                },
                corrupt), point);
        });
        return cs;
    }();
    return cases;
}

} // namespace

std::vector<std::string> gradcheck_case_names() {
    std::vector<std::string> names;
    for (const auto& c : registry()) names.push_back(c.name);
    return names;
}

std::vector<GradCheckResult> run_gradcheck(std::uint64_t seed, int points,
                                           const std::string& corrupt_case) {
    const auto& cases = registry();
    if (!corrupt_case.empty()) {
        const bool known = std::any_of(cases.begin(), cases.end(),
                                       [&](const Case& c) { return c.name == corrupt_case; });
        if (!known) throw ValueError("run_gradcheck: unknown case '" + corrupt_case + "'");
    }
    std::vector<GradCheckResult> results;
    for (std::size_t ci = 0; ci < cases.size(); ++ci) {
        Rng rng = Rng::derive(seed, ci);
        double worst = 0.0;
        const bool corrupt = cases[ci].name == corrupt_case;
        for (int p = 0; p < points; ++p) {
            worst = std::max(worst, cases[ci].run(rng, corrupt));
        }
        results.push_back({cases[ci].name, worst});
    }
    return results;
}

} // namespace marppg::nn
