// SPDX-License-Identifier: Apache-2.0
#include "marppg/ops.hpp"

#include <cmath>
#include <cstring>

#include "marppg/errors.hpp"

namespace marppg::nn {

namespace {

TensorPtr make_op(const char* name, std::vector<int> shape, std::vector<double> data,
                  std::vector<TensorPtr> parents) {
    auto out = Tensor::make(std::move(shape), std::move(data));
    out->op = name;
    for (const auto& p : parents) {
        if (p->requires_grad) {
            out->requires_grad = true;
            break;
        }
    }
    out->parents = std::move(parents);
    return out;
}

void require_same_shape(const char* op, const TensorPtr& a, const TensorPtr& b) {
    if (a->shape != b->shape) {
        throw ShapeError(std::string(op) + ": shape mismatch " + shape_str(a->shape) + " vs " +
                         shape_str(b->shape));
    }
}

void require_rank(const char* op, const TensorPtr& a, int rank) {
    if (a->rank() != rank) {
        throw ShapeError(std::string(op) + ": expected rank " + std::to_string(rank) +
                         ", got shape " + shape_str(a->shape));
    }
}

bool wants_grad(const TensorPtr& t) { return t->requires_grad; }

void accum(const TensorPtr& t, std::size_t i, double g) {
    t->grad[i] += g;
}

} // namespace

// ---------------------------------------------------------------------------
// GEMM kernels. Row-major, accumulate into C. The ikj/kij orderings keep the
// innermost loop contiguous so the compiler vectorizes with FMA.
// ---------------------------------------------------------------------------

void gemm_nn(const double* a, const double* b, double* c, int m, int k, int n) {
    for (int i = 0; i < m; ++i) {
        const double* arow = a + static_cast<std::size_t>(i) * k;
        double* crow = c + static_cast<std::size_t>(i) * n;
        for (int p = 0; p < k; ++p) {
            const double av = arow[p];
            if (av == 0.0) continue;
            const double* brow = b + static_cast<std::size_t>(p) * n;
            for (int j = 0; j < n; ++j) crow[j] += av * brow[j];
        }
    }
}

void gemm_nt(const double* a, const double* b, double* c, int m, int k, int n) {
    // dot products with 8 independent accumulator lanes so the reduction
    // vectorizes under strict FP semantics (the lane order is fixed, so
    // results stay deterministic)
    constexpr int lanes = 8;
    const int k8 = k - (k % lanes);
    for (int i = 0; i < m; ++i) {
        const double* arow = a + static_cast<std::size_t>(i) * k;
        double* crow = c + static_cast<std::size_t>(i) * n;
        for (int j = 0; j < n; ++j) {
            const double* brow = b + static_cast<std::size_t>(j) * k;
            double acc[lanes] = {0, 0, 0, 0, 0, 0, 0, 0};
            for (int p = 0; p < k8; p += lanes) {
                for (int l = 0; l < lanes; ++l) acc[l] += arow[p + l] * brow[p + l];
            }
            double s = ((acc[0] + acc[1]) + (acc[2] + acc[3])) +
                       ((acc[4] + acc[5]) + (acc[6] + acc[7]));
            for (int p = k8; p < k; ++p) s += arow[p] * brow[p];
            crow[j] += s;
        }
    }
}

void gemm_tn(const double* a, const double* b, double* c, int m, int k, int n) {
    for (int p = 0; p < k; ++p) {
        const double* arow = a + static_cast<std::size_t>(p) * m;
        const double* brow = b + static_cast<std::size_t>(p) * n;
        for (int i = 0; i < m; ++i) {
            const double av = arow[i];
            if (av == 0.0) continue;
            double* crow = c + static_cast<std::size_t>(i) * n;
            for (int j = 0; j < n; ++j) crow[j] += av * brow[j];
        }
    }
}

// ---------------------------------------------------------------------------
// Elementwise ops
// ---------------------------------------------------------------------------

TensorPtr add(const TensorPtr& a, const TensorPtr& b) {
    require_same_shape("add", a, b);
    std::vector<double> out(a->data.size());
    for (std::size_t i = 0; i < out.size(); ++i) out[i] = a->data[i] + b->data[i];
    auto r = make_op("add", a->shape, std::move(out), {a, b});
    if (r->requires_grad) {
        r->backward_fn = [a, b](const Tensor& self) {
            if (wants_grad(a)) {
                a->ensure_grad();
                for (std::size_t i = 0; i < self.grad.size(); ++i) accum(a, i, self.grad[i]);
            }
            if (wants_grad(b)) {
                b->ensure_grad();
                for (std::size_t i = 0; i < self.grad.size(); ++i) accum(b, i, self.grad[i]);
            }
        };
    }
    return r;
}

TensorPtr sub(const TensorPtr& a, const TensorPtr& b) {
    require_same_shape("sub", a, b);
    std::vector<double> out(a->data.size());
    for (std::size_t i = 0; i < out.size(); ++i) out[i] = a->data[i] - b->data[i];
    auto r = make_op("sub", a->shape, std::move(out), {a, b});
    if (r->requires_grad) {
        r->backward_fn = [a, b](const Tensor& self) {
            if (wants_grad(a)) {
                a->ensure_grad();
                for (std::size_t i = 0; i < self.grad.size(); ++i) accum(a, i, self.grad[i]);
            }
            if (wants_grad(b)) {
                b->ensure_grad();
                for (std::size_t i = 0; i < self.grad.size(); ++i) accum(b, i, -self.grad[i]);
            }
        };
    }
    return r;
}

TensorPtr mul(const TensorPtr& a, const TensorPtr& b) {
    require_same_shape("mul", a, b);
    std::vector<double> out(a->data.size());
    for (std::size_t i = 0; i < out.size(); ++i) out[i] = a->data[i] * b->data[i];
    auto r = make_op("mul", a->shape, std::move(out), {a, b});
    if (r->requires_grad) {
        r->backward_fn = [a, b](const Tensor& self) {
            if (wants_grad(a)) {
                a->ensure_grad();
                for (std::size_t i = 0; i < self.grad.size(); ++i)
                    accum(a, i, self.grad[i] * b->data[i]);
            }
            if (wants_grad(b)) {
                b->ensure_grad();
                for (std::size_t i = 0; i < self.grad.size(); ++i)
                    accum(b, i, self.grad[i] * a->data[i]);
            }
        };
    }
    return r;
}

TensorPtr div_elem(const TensorPtr& a, const TensorPtr& b) {
    require_same_shape("div", a, b);
    std::vector<double> out(a->data.size());
    for (std::size_t i = 0; i < out.size(); ++i) out[i] = a->data[i] / b->data[i];
    auto r = make_op("div", a->shape, std::move(out), {a, b});
    if (r->requires_grad) {
        r->backward_fn = [a, b](const Tensor& self) {
            if (wants_grad(a)) {
                a->ensure_grad();
                for (std::size_t i = 0; i < self.grad.size(); ++i)
                    accum(a, i, self.grad[i] / b->data[i]);
            }
            if (wants_grad(b)) {
                b->ensure_grad();
                for (std::size_t i = 0; i < self.grad.size(); ++i)
                    accum(b, i, -self.grad[i] * a->data[i] / (b->data[i] * b->data[i]));
            }
        };
    }
    return r;
}

TensorPtr neg(const TensorPtr& a) { return scale(a, -1.0); }

TensorPtr scale(const TensorPtr& a, double c) {
    std::vector<double> out(a->data.size());
    for (std::size_t i = 0; i < out.size(); ++i) out[i] = a->data[i] * c;
    auto r = make_op("scale", a->shape, std::move(out), {a});
    if (r->requires_grad) {
        r->backward_fn = [a, c](const Tensor& self) {
            a->ensure_grad();
            for (std::size_t i = 0; i < self.grad.size(); ++i) accum(a, i, self.grad[i] * c);
        };
    }
    return r;
}

TensorPtr add_scalar(const TensorPtr& a, double c) {
    std::vector<double> out(a->data.size());
    for (std::size_t i = 0; i < out.size(); ++i) out[i] = a->data[i] + c;
    auto r = make_op("add_scalar", a->shape, std::move(out), {a});
    if (r->requires_grad) {
        r->backward_fn = [a](const Tensor& self) {
            a->ensure_grad();
            for (std::size_t i = 0; i < self.grad.size(); ++i) accum(a, i, self.grad[i]);
        };
    }
    return r;
}

TensorPtr abs_elem(const TensorPtr& a) {
    std::vector<double> out(a->data.size());
    for (std::size_t i = 0; i < out.size(); ++i) out[i] = std::fabs(a->data[i]);
    auto r = make_op("abs", a->shape, std::move(out), {a});
    if (r->requires_grad) {
        r->backward_fn = [a](const Tensor& self) {
            a->ensure_grad();
            for (std::size_t i = 0; i < self.grad.size(); ++i) {
                const double x = a->data[i];
                const double s = x > 0.0 ? 1.0 : (x < 0.0 ? -1.0 : 0.0);
                accum(a, i, self.grad[i] * s);
            }
        };
    }
    return r;
}

TensorPtr sqrt_elem(const TensorPtr& a) {
    std::vector<double> out(a->data.size());
    for (std::size_t i = 0; i < out.size(); ++i) out[i] = std::sqrt(a->data[i]);
    auto r = make_op("sqrt", a->shape, std::move(out), {a});
    if (r->requires_grad) {
        r->backward_fn = [a](const Tensor& self) {
            a->ensure_grad();
            for (std::size_t i = 0; i < self.grad.size(); ++i)
                accum(a, i, self.grad[i] * 0.5 / self.data[i]);
        };
    }
    return r;
}

TensorPtr relu(const TensorPtr& a) {
    std::vector<double> out(a->data.size());
    for (std::size_t i = 0; i < out.size(); ++i) out[i] = a->data[i] > 0.0 ? a->data[i] : 0.0;
    auto r = make_op("relu", a->shape, std::move(out), {a});
    if (r->requires_grad) {
        r->backward_fn = [a](const Tensor& self) {
            a->ensure_grad();
            for (std::size_t i = 0; i < self.grad.size(); ++i)
                if (a->data[i] > 0.0) accum(a, i, self.grad[i]);
        };
    }
    return r;
}

TensorPtr tanh_elem(const TensorPtr& a) {
    std::vector<double> out(a->data.size());
    for (std::size_t i = 0; i < out.size(); ++i) out[i] = std::tanh(a->data[i]);
    auto r = make_op("tanh", a->shape, std::move(out), {a});
    if (r->requires_grad) {
        r->backward_fn = [a](const Tensor& self) {
            a->ensure_grad();
            for (std::size_t i = 0; i < self.grad.size(); ++i)
                accum(a, i, self.grad[i] * (1.0 - self.data[i] * self.data[i]));
        };
    }
    return r;
}

// ---------------------------------------------------------------------------
// Reductions
// ---------------------------------------------------------------------------

TensorPtr sum_all(const TensorPtr& a) {
    double s = 0.0;
    for (double v : a->data) s += v;
    auto r = make_op("sum", {1}, {s}, {a});
    if (r->requires_grad) {
        r->backward_fn = [a](const Tensor& self) {
            a->ensure_grad();
            const double g = self.grad[0];
            for (std::size_t i = 0; i < a->data.size(); ++i) accum(a, i, g);
        };
    }
    return r;
}

TensorPtr mean_all(const TensorPtr& a) {
    return scale(sum_all(a), 1.0 / static_cast<double>(a->numel()));
}

// ---------------------------------------------------------------------------
// Linear algebra
// ---------------------------------------------------------------------------

TensorPtr matmul(const TensorPtr& a, const TensorPtr& b) {
    require_rank("matmul", a, 2);
    require_rank("matmul", b, 2);
    const int m = a->dim(0), k = a->dim(1), n = b->dim(1);
    if (b->dim(0) != k) {
        throw ShapeError("matmul: inner dims disagree, " + shape_str(a->shape) + " x " +
                         shape_str(b->shape));
    }
    std::vector<double> out(static_cast<std::size_t>(m) * n, 0.0);
    gemm_nn(a->data.data(), b->data.data(), out.data(), m, k, n);
    auto r = make_op("matmul", {m, n}, std::move(out), {a, b});
    if (r->requires_grad) {
        r->backward_fn = [a, b, m, k, n](const Tensor& self) {
            if (wants_grad(a)) {
                a->ensure_grad();
                gemm_nt(self.grad.data(), b->data.data(), a->grad.data(), m, n, k);
            }
            if (wants_grad(b)) {
                b->ensure_grad();
                gemm_tn(a->data.data(), self.grad.data(), b->grad.data(), k, m, n);
            }
        };
    }
    return r;
}

TensorPtr linear(const TensorPtr& x, const TensorPtr& w, const TensorPtr& b) {
    require_rank("linear", x, 2);
    require_rank("linear", w, 2);
    require_rank("linear", b, 1);
    const int n = x->dim(0), cin = x->dim(1), cout = w->dim(0);
    if (w->dim(1) != cin || b->dim(0) != cout) {
        throw ShapeError("linear: x " + shape_str(x->shape) + ", w " + shape_str(w->shape) +
                         ", b " + shape_str(b->shape));
    }
    std::vector<double> out(static_cast<std::size_t>(n) * cout);
    for (int i = 0; i < n; ++i)
        std::memcpy(out.data() + static_cast<std::size_t>(i) * cout, b->data.data(),
                    sizeof(double) * static_cast<std::size_t>(cout));
    gemm_nt(x->data.data(), w->data.data(), out.data(), n, cin, cout);
    auto r = make_op("linear", {n, cout}, std::move(out), {x, w, b});
    if (r->requires_grad) {
        r->backward_fn = [x, w, b, n, cin, cout](const Tensor& self) {
            if (wants_grad(x)) {
                x->ensure_grad();
                gemm_nn(self.grad.data(), w->data.data(), x->grad.data(), n, cout, cin);
            }
            if (wants_grad(w)) {
                w->ensure_grad();
                gemm_tn(self.grad.data(), x->data.data(), w->grad.data(), cout, n, cin);
            }
            if (wants_grad(b)) {
                b->ensure_grad();
                for (int i = 0; i < n; ++i)
                    for (int o = 0; o < cout; ++o)
                        b->grad[static_cast<std::size_t>(o)] +=
                            self.grad[static_cast<std::size_t>(i) * cout + o];
            }
        };
    }
    return r;
}

// ---------------------------------------------------------------------------
// Convolution via im2col + GEMM; columns are recomputed in backward rather
// than stored, trading FLOPs for a much smaller live set.
// ---------------------------------------------------------------------------

namespace {

void im2col(const double* x, int cin, int h, int w, int k, int pad, double* cols) {
    const int hw = h * w;
    for (int c = 0; c < cin; ++c) {
        for (int ki = 0; ki < k; ++ki) {
            for (int kj = 0; kj < k; ++kj) {
                double* row = cols + (static_cast<std::size_t>(c) * k * k + ki * k + kj) *
                                         static_cast<std::size_t>(hw);
                for (int i = 0; i < h; ++i) {
                    const int si = i + ki - pad;
                    if (si < 0 || si >= h) {
                        std::memset(row + static_cast<std::size_t>(i) * w, 0,
                                    sizeof(double) * static_cast<std::size_t>(w));
                        continue;
                    }
                    const double* src = x + (static_cast<std::size_t>(c) * h + si) * w;
                    double* dst = row + static_cast<std::size_t>(i) * w;
                    for (int j = 0; j < w; ++j) {
                        const int sj = j + kj - pad;
                        dst[j] = (sj >= 0 && sj < w) ? src[sj] : 0.0;
                    }
                }
            }
        }
    }
}

void col2im_add(const double* cols, int cin, int h, int w, int k, int pad, double* dx) {
    const int hw = h * w;
    for (int c = 0; c < cin; ++c) {
        for (int ki = 0; ki < k; ++ki) {
            for (int kj = 0; kj < k; ++kj) {
                const double* row = cols + (static_cast<std::size_t>(c) * k * k + ki * k + kj) *
                                               static_cast<std::size_t>(hw);
                for (int i = 0; i < h; ++i) {
                    const int si = i + ki - pad;
                    if (si < 0 || si >= h) continue;
                    double* dst = dx + (static_cast<std::size_t>(c) * h + si) * w;
                    const double* src = row + static_cast<std::size_t>(i) * w;
                    for (int j = 0; j < w; ++j) {
                        const int sj = j + kj - pad;
                        if (sj >= 0 && sj < w) dst[sj] += src[j];
                    }
                }
            }
        }
    }
}

} // namespace

TensorPtr conv2d(const TensorPtr& x, const TensorPtr& w, const TensorPtr& b) {
    require_rank("conv2d", x, 4);
    require_rank("conv2d", w, 4);
    require_rank("conv2d", b, 1);
    const int t = x->dim(0), cin = x->dim(1), h = x->dim(2), wd = x->dim(3);
    const int cout = w->dim(0), k = w->dim(2);
    if (w->dim(1) != cin || w->dim(3) != k || (k % 2) == 0 || b->dim(0) != cout) {
        throw ShapeError("conv2d: x " + shape_str(x->shape) + ", w " + shape_str(w->shape) +
                         ", b " + shape_str(b->shape));
    }
    const int pad = (k - 1) / 2;
    const int hw = h * wd;
    const int rows = cin * k * k;
    std::vector<double> cols(static_cast<std::size_t>(rows) * hw);
    std::vector<double> out(static_cast<std::size_t>(t) * cout * hw);
    for (int ti = 0; ti < t; ++ti) {
        const double* xt = x->data.data() + static_cast<std::size_t>(ti) * cin * hw;
        double* yt = out.data() + static_cast<std::size_t>(ti) * cout * hw;
        im2col(xt, cin, h, wd, k, pad, cols.data());
        for (int o = 0; o < cout; ++o) {
            double* yrow = yt + static_cast<std::size_t>(o) * hw;
            const double bias = b->data[static_cast<std::size_t>(o)];
            for (int i = 0; i < hw; ++i) yrow[i] = bias;
        }
        gemm_nn(w->data.data(), cols.data(), yt, cout, rows, hw);
    }
    auto r = make_op("conv2d", {t, cout, h, wd}, std::move(out), {x, w, b});
    if (r->requires_grad) {
        r->backward_fn = [x, w, b, t, cin, h, wd, cout, k, pad](const Tensor& self) {
            const int hw = h * wd;
            const int rows = cin * k * k;
            std::vector<double> cols(static_cast<std::size_t>(rows) * hw);
            std::vector<double> dcols;
            if (wants_grad(x)) dcols.resize(cols.size());
            if (wants_grad(x)) x->ensure_grad();
            if (wants_grad(w)) w->ensure_grad();
            if (wants_grad(b)) b->ensure_grad();
            for (int ti = 0; ti < t; ++ti) {
                const double* gy = self.grad.data() + static_cast<std::size_t>(ti) * cout * hw;
                if (wants_grad(w) || wants_grad(x)) {
                    const double* xt = x->data.data() + static_cast<std::size_t>(ti) * cin * hw;
                    im2col(xt, cin, h, wd, k, pad, cols.data());
                }
                if (wants_grad(w)) {
                    gemm_nt(gy, cols.data(), w->grad.data(), cout, hw, rows);
                }
                if (wants_grad(b)) {
                    for (int o = 0; o < cout; ++o) {
                        double s = 0.0;
                        const double* grow = gy + static_cast<std::size_t>(o) * hw;
                        for (int i = 0; i < hw; ++i) s += grow[i];
                        b->grad[static_cast<std::size_t>(o)] += s;
                    }
                }
                if (wants_grad(x)) {
                    std::fill(dcols.begin(), dcols.end(), 0.0);
                    gemm_tn(w->data.data(), gy, dcols.data(), rows, cout, hw);
                    col2im_add(dcols.data(), cin, h, wd, k, pad,
                               x->grad.data() + static_cast<std::size_t>(ti) * cin * hw);
                }
            }
        };
    }
    return r;
}

TensorPtr avgpool2x2(const TensorPtr& x) {
    require_rank("avgpool2x2", x, 4);
    const int t = x->dim(0), c = x->dim(1), h = x->dim(2), w = x->dim(3);
    if ((h % 2) != 0 || (w % 2) != 0) {
        throw ShapeError("avgpool2x2: spatial dims must be even, got " + shape_str(x->shape));
    }
    const int ho = h / 2, wo = w / 2;
    std::vector<double> out(static_cast<std::size_t>(t) * c * ho * wo);
    const std::size_t planes = static_cast<std::size_t>(t) * c;
    for (std::size_t p = 0; p < planes; ++p) {
        const double* src = x->data.data() + p * h * w;
        double* dst = out.data() + p * ho * wo;
        for (int i = 0; i < ho; ++i)
            for (int j = 0; j < wo; ++j) {
                const double* s0 = src + (2 * i) * w + 2 * j;
                const double* s1 = s0 + w;
                dst[static_cast<std::size_t>(i) * wo + j] = 0.25 * (s0[0] + s0[1] + s1[0] + s1[1]);
            }
    }
    auto r = make_op("avgpool2x2", {t, c, ho, wo}, std::move(out), {x});
    if (r->requires_grad) {
        r->backward_fn = [x, t, c, h, w, ho, wo](const Tensor& self) {
            x->ensure_grad();
            const std::size_t planes = static_cast<std::size_t>(t) * c;
            for (std::size_t p = 0; p < planes; ++p) {
                const double* g = self.grad.data() + p * ho * wo;
                double* dx = x->grad.data() + p * h * w;
                for (int i = 0; i < ho; ++i)
                    for (int j = 0; j < wo; ++j) {
                        const double gv = 0.25 * g[static_cast<std::size_t>(i) * wo + j];
                        double* d0 = dx + (2 * i) * w + 2 * j;
                        d0[0] += gv;
                        d0[1] += gv;
                        d0[w] += gv;
                        d0[w + 1] += gv;
                    }
            }
        };
    }
    return r;
}

TensorPtr softmax_lastdims(const TensorPtr& x, int n_last) {
    if (n_last < 1 || n_last > x->rank()) {
        throw ShapeError("softmax: n_last " + std::to_string(n_last) + " invalid for shape " +
                         shape_str(x->shape));
    }
    std::int64_t group = 1;
    for (int i = x->rank() - n_last; i < x->rank(); ++i) group *= x->dim(i);
    const std::int64_t batch = x->numel() / group;
    std::vector<double> out(x->data.size());
    for (std::int64_t bi = 0; bi < batch; ++bi) {
        const double* src = x->data.data() + bi * group;
        double* dst = out.data() + bi * group;
        double mx = src[0];
        for (std::int64_t i = 1; i < group; ++i) mx = std::max(mx, src[i]);
        double sum = 0.0;
        for (std::int64_t i = 0; i < group; ++i) {
            dst[i] = std::exp(src[i] - mx);
            sum += dst[i];
        }
        const double inv = 1.0 / sum;
        for (std::int64_t i = 0; i < group; ++i) dst[i] *= inv;
    }
    auto r = make_op("softmax", x->shape, std::move(out), {x});
    if (r->requires_grad) {
        r->backward_fn = [x, group, batch](const Tensor& self) {
            x->ensure_grad();
            for (std::int64_t bi = 0; bi < batch; ++bi) {
                const double* y = self.data.data() + bi * group;
                const double* g = self.grad.data() + bi * group;
                double dot = 0.0;
                for (std::int64_t i = 0; i < group; ++i) dot += y[i] * g[i];
                double* dx = x->grad.data() + bi * group;
                for (std::int64_t i = 0; i < group; ++i) dx[i] += y[i] * (g[i] - dot);
            }
        };
    }
    return r;
}

// ---------------------------------------------------------------------------
// Shape manipulation
// ---------------------------------------------------------------------------

TensorPtr reshape(const TensorPtr& x, std::vector<int> new_shape) {
    if (shape_numel(new_shape) != x->numel()) {
        throw ShapeError("reshape: " + shape_str(x->shape) + " -> " + shape_str(new_shape) +
                         " changes element count");
    }
    auto r = make_op("reshape", std::move(new_shape), x->data, {x});
    if (r->requires_grad) {
        r->backward_fn = [x](const Tensor& self) {
            x->ensure_grad();
            for (std::size_t i = 0; i < self.grad.size(); ++i) accum(x, i, self.grad[i]);
        };
    }
    return r;
}

TensorPtr slice_spatial(const TensorPtr& x, int h0, int h1, int w0, int w1) {
    require_rank("slice_spatial", x, 4);
    const int t = x->dim(0), c = x->dim(1), h = x->dim(2), w = x->dim(3);
    if (!(0 <= h0 && h0 < h1 && h1 <= h && 0 <= w0 && w0 < w1 && w1 <= w)) {
        throw ShapeError("slice_spatial: window out of range for " + shape_str(x->shape));
    }
    const int hs = h1 - h0, ws = w1 - w0;
    std::vector<double> out(static_cast<std::size_t>(t) * c * hs * ws);
    const std::size_t planes = static_cast<std::size_t>(t) * c;
    for (std::size_t p = 0; p < planes; ++p) {
        const double* src = x->data.data() + p * h * w;
        double* dst = out.data() + p * hs * ws;
        for (int i = 0; i < hs; ++i)
            std::memcpy(dst + static_cast<std::size_t>(i) * ws, src + (h0 + i) * w + w0,
                        sizeof(double) * static_cast<std::size_t>(ws));
    }
    auto r = make_op("slice_spatial", {t, c, hs, ws}, std::move(out), {x});
    if (r->requires_grad) {
        r->backward_fn = [x, t, c, h, w, h0, w0, hs, ws](const Tensor& self) {
            x->ensure_grad();
            const std::size_t planes = static_cast<std::size_t>(t) * c;
            for (std::size_t p = 0; p < planes; ++p) {
                const double* g = self.grad.data() + p * hs * ws;
                double* dx = x->grad.data() + p * h * w;
                for (int i = 0; i < hs; ++i)
                    for (int j = 0; j < ws; ++j)
                        dx[(h0 + i) * w + w0 + j] += g[static_cast<std::size_t>(i) * ws + j];
            }
        };
    }
    return r;
}

TensorPtr concat_quadrants(const TensorPtr& tl, const TensorPtr& tr, const TensorPtr& bl,
                           const TensorPtr& br) {
    require_rank("concat_quadrants", tl, 4);
    require_same_shape("concat_quadrants", tl, tr);
    require_same_shape("concat_quadrants", tl, bl);
    require_same_shape("concat_quadrants", tl, br);
    const int t = tl->dim(0), c = tl->dim(1), hq = tl->dim(2), wq = tl->dim(3);
    const int h = 2 * hq, w = 2 * wq;
    std::vector<double> out(static_cast<std::size_t>(t) * c * h * w);
    const std::size_t planes = static_cast<std::size_t>(t) * c;
    const TensorPtr quads[4] = {tl, tr, bl, br};
    for (std::size_t p = 0; p < planes; ++p) {
        double* dst = out.data() + p * h * w;
        for (int q = 0; q < 4; ++q) {
            const double* src = quads[q]->data.data() + p * hq * wq;
            const int ro = (q / 2) * hq, co = (q % 2) * wq;
            for (int i = 0; i < hq; ++i)
                std::memcpy(dst + (ro + i) * w + co, src + static_cast<std::size_t>(i) * wq,
                            sizeof(double) * static_cast<std::size_t>(wq));
        }
    }
    auto r = make_op("concat_quadrants", {t, c, h, w}, std::move(out), {tl, tr, bl, br});
    if (r->requires_grad) {
        r->backward_fn = [tl, tr, bl, br, t, c, hq, wq, h, w](const Tensor& self) {
            const TensorPtr quads[4] = {tl, tr, bl, br};
            const std::size_t planes = static_cast<std::size_t>(t) * c;
            for (int q = 0; q < 4; ++q) {
                if (!wants_grad(quads[q])) continue;
                quads[q]->ensure_grad();
                const int ro = (q / 2) * hq, co = (q % 2) * wq;
                for (std::size_t p = 0; p < planes; ++p) {
                    const double* g = self.grad.data() + p * h * w;
                    double* dq = quads[q]->grad.data() + p * hq * wq;
                    for (int i = 0; i < hq; ++i)
                        for (int j = 0; j < wq; ++j)
                            dq[static_cast<std::size_t>(i) * wq + j] += g[(ro + i) * w + co + j];
                }
            }
        };
    }
    return r;
}

TensorPtr hflip(const TensorPtr& x) {
    if (x->rank() < 1) throw ShapeError("hflip: rank-0 tensor");
    const int w = x->dim(x->rank() - 1);
    const std::int64_t rows = x->numel() / w;
    std::vector<double> out(x->data.size());
    for (std::int64_t rI = 0; rI < rows; ++rI) {
        const double* src = x->data.data() + rI * w;
        double* dst = out.data() + rI * w;
        for (int j = 0; j < w; ++j) dst[j] = src[w - 1 - j];
    }
    auto r = make_op("hflip", x->shape, std::move(out), {x});
    if (r->requires_grad) {
        r->backward_fn = [x, rows, w](const Tensor& self) {
            x->ensure_grad();
            for (std::int64_t rI = 0; rI < rows; ++rI) {
                const double* g = self.grad.data() + rI * w;
                double* dx = x->grad.data() + rI * w;
                for (int j = 0; j < w; ++j) dx[w - 1 - j] += g[j];
            }
        };
    }
    return r;
}

TensorPtr swap_expert_pairs(const TensorPtr& x) {
    require_rank("swap_expert_pairs", x, 4);
    if (x->dim(1) != 4) {
        throw ShapeError("swap_expert_pairs: expected 4 experts, got " + shape_str(x->shape));
    }
    const int t = x->dim(0), hw = x->dim(2) * x->dim(3);
    static constexpr int perm[4] = {1, 0, 3, 2};
    std::vector<double> out(x->data.size());
    for (int ti = 0; ti < t; ++ti)
        for (int e = 0; e < 4; ++e)
            std::memcpy(out.data() + (static_cast<std::size_t>(ti) * 4 + e) * hw,
                        x->data.data() + (static_cast<std::size_t>(ti) * 4 + perm[e]) * hw,
                        sizeof(double) * static_cast<std::size_t>(hw));
    auto r = make_op("swap_expert_pairs", x->shape, std::move(out), {x});
    if (r->requires_grad) {
        r->backward_fn = [x, t, hw](const Tensor& self) {
            x->ensure_grad();
            for (int ti = 0; ti < t; ++ti)
                for (int e = 0; e < 4; ++e) {
                    const double* g = self.grad.data() + (static_cast<std::size_t>(ti) * 4 + e) * hw;
                    double* dx = x->grad.data() + (static_cast<std::size_t>(ti) * 4 + perm[e]) * hw;
                    for (int i = 0; i < hw; ++i) dx[i] += g[i];
                }
        };
    }
    return r;
}

TensorPtr stack_expert_maps(const std::array<TensorPtr, 4>& maps) {
    for (const auto& m : maps) require_rank("stack_expert_maps", m, 3);
    for (int e = 1; e < 4; ++e) require_same_shape("stack_expert_maps", maps[0], maps[e]);
    const int t = maps[0]->dim(0), h = maps[0]->dim(1), w = maps[0]->dim(2);
    const int hw = h * w;
    std::vector<double> out(static_cast<std::size_t>(t) * 4 * hw);
    for (int ti = 0; ti < t; ++ti)
        for (int e = 0; e < 4; ++e)
            std::memcpy(out.data() + (static_cast<std::size_t>(ti) * 4 + e) * hw,
                        maps[static_cast<std::size_t>(e)]->data.data() +
                            static_cast<std::size_t>(ti) * hw,
                        sizeof(double) * static_cast<std::size_t>(hw));
    auto r = make_op("stack_expert_maps", {t, 4, h, w}, std::move(out),
                     {maps[0], maps[1], maps[2], maps[3]});
    if (r->requires_grad) {
        r->backward_fn = [maps, t, hw](const Tensor& self) {
            for (int e = 0; e < 4; ++e) {
                const auto& m = maps[static_cast<std::size_t>(e)];
                if (!wants_grad(m)) continue;
                m->ensure_grad();
                for (int ti = 0; ti < t; ++ti) {
                    const double* g = self.grad.data() + (static_cast<std::size_t>(ti) * 4 + e) * hw;
                    double* dm = m->grad.data() + static_cast<std::size_t>(ti) * hw;
                    for (int i = 0; i < hw; ++i) dm[i] += g[i];
                }
            }
        };
    }
    return r;
}

// ---------------------------------------------------------------------------
// Attention plumbing
// ---------------------------------------------------------------------------

TensorPtr cam_weighted_sum(const TensorPtr& f, const TensorPtr& w) {
    require_rank("cam_weighted_sum", f, 4);
    require_rank("cam_weighted_sum", w, 2);
    const int t = f->dim(0), c = f->dim(1), hw = f->dim(2) * f->dim(3);
    if (w->dim(0) != t || w->dim(1) != c) {
        throw ShapeError("cam_weighted_sum: f " + shape_str(f->shape) + " vs w " +
                         shape_str(w->shape));
    }
    std::vector<double> out(static_cast<std::size_t>(t) * hw, 0.0);
    for (int ti = 0; ti < t; ++ti) {
        const double* ft = f->data.data() + static_cast<std::size_t>(ti) * c * hw;
        const double* wt = w->data.data() + static_cast<std::size_t>(ti) * c;
        double* mt = out.data() + static_cast<std::size_t>(ti) * hw;
        for (int ci = 0; ci < c; ++ci) {
            const double wv = wt[ci];
            const double* fr = ft + static_cast<std::size_t>(ci) * hw;
            for (int i = 0; i < hw; ++i) mt[i] += wv * fr[i];
        }
    }
    auto r = make_op("cam_weighted_sum", {t, f->dim(2), f->dim(3)}, std::move(out), {f, w});
    if (r->requires_grad) {
        r->backward_fn = [f, w, t, c, hw](const Tensor& self) {
            if (wants_grad(f)) f->ensure_grad();
            if (wants_grad(w)) w->ensure_grad();
            for (int ti = 0; ti < t; ++ti) {
                const double* g = self.grad.data() + static_cast<std::size_t>(ti) * hw;
                const double* ft = f->data.data() + static_cast<std::size_t>(ti) * c * hw;
                const double* wt = w->data.data() + static_cast<std::size_t>(ti) * c;
                for (int ci = 0; ci < c; ++ci) {
                    if (wants_grad(w)) {
                        double s = 0.0;
                        const double* fr = ft + static_cast<std::size_t>(ci) * hw;
                        for (int i = 0; i < hw; ++i) s += g[i] * fr[i];
                        w->grad[static_cast<std::size_t>(ti) * c + ci] += s;
                    }
                    if (wants_grad(f)) {
                        double* df = f->grad.data() +
                                     (static_cast<std::size_t>(ti) * c + ci) * hw;
                        const double wv = wt[ci];
                        for (int i = 0; i < hw; ++i) df[i] += wv * g[i];
                    }
                }
            }
        };
    }
    return r;
}

TensorPtr spatial_weighted_pool(const TensorPtr& f, const TensorPtr& a) {
    require_rank("spatial_weighted_pool", f, 4);
    require_rank("spatial_weighted_pool", a, 3);
    const int t = f->dim(0), c = f->dim(1), hw = f->dim(2) * f->dim(3);
    if (a->dim(0) != t || a->dim(1) != f->dim(2) || a->dim(2) != f->dim(3)) {
        throw ShapeError("spatial_weighted_pool: f " + shape_str(f->shape) + " vs a " +
                         shape_str(a->shape));
    }
    std::vector<double> out(static_cast<std::size_t>(t) * c, 0.0);
    for (int ti = 0; ti < t; ++ti) {
        const double* ft = f->data.data() + static_cast<std::size_t>(ti) * c * hw;
        const double* at = a->data.data() + static_cast<std::size_t>(ti) * hw;
        double* pt = out.data() + static_cast<std::size_t>(ti) * c;
        for (int ci = 0; ci < c; ++ci) {
            double s = 0.0;
            const double* fr = ft + static_cast<std::size_t>(ci) * hw;
            for (int i = 0; i < hw; ++i) s += at[i] * fr[i];
            pt[ci] = s;
        }
    }
    auto r = make_op("spatial_weighted_pool", {t, c}, std::move(out), {f, a});
    if (r->requires_grad) {
        r->backward_fn = [f, a, t, c, hw](const Tensor& self) {
            if (wants_grad(f)) f->ensure_grad();
            if (wants_grad(a)) a->ensure_grad();
            for (int ti = 0; ti < t; ++ti) {
                const double* g = self.grad.data() + static_cast<std::size_t>(ti) * c;
                const double* ft = f->data.data() + static_cast<std::size_t>(ti) * c * hw;
                const double* at = a->data.data() + static_cast<std::size_t>(ti) * hw;
                for (int ci = 0; ci < c; ++ci) {
                    const double gv = g[ci];
                    const double* fr = ft + static_cast<std::size_t>(ci) * hw;
                    if (wants_grad(f)) {
                        double* df = f->grad.data() +
                                     (static_cast<std::size_t>(ti) * c + ci) * hw;
                        for (int i = 0; i < hw; ++i) df[i] += gv * at[i];
                    }
                    if (wants_grad(a)) {
                        double* da = a->grad.data() + static_cast<std::size_t>(ti) * hw;
                        for (int i = 0; i < hw; ++i) da[i] += gv * fr[i];
                    }
                }
            }
        };
    }
    return r;
}

TensorPtr global_avg_pool(const TensorPtr& f) {
    require_rank("global_avg_pool", f, 4);
    const int t = f->dim(0), c = f->dim(1), hw = f->dim(2) * f->dim(3);
    const double inv = 1.0 / (static_cast<double>(t) * hw);
    std::vector<double> out(static_cast<std::size_t>(c), 0.0);
    for (int ti = 0; ti < t; ++ti)
        for (int ci = 0; ci < c; ++ci) {
            const double* fr =
                f->data.data() + (static_cast<std::size_t>(ti) * c + ci) * hw;
            double s = 0.0;
            for (int i = 0; i < hw; ++i) s += fr[i];
            out[static_cast<std::size_t>(ci)] += s * inv;
        }
    auto r = make_op("global_avg_pool", {c}, std::move(out), {f});
    if (r->requires_grad) {
        r->backward_fn = [f, t, c, hw, inv](const Tensor& self) {
            f->ensure_grad();
            for (int ti = 0; ti < t; ++ti)
                for (int ci = 0; ci < c; ++ci) {
                    const double gv = self.grad[static_cast<std::size_t>(ci)] * inv;
                    double* df = f->grad.data() + (static_cast<std::size_t>(ti) * c + ci) * hw;
                    for (int i = 0; i < hw; ++i) df[i] += gv;
                }
        };
    }
    return r;
}

TensorPtr convex_combine(const std::vector<TensorPtr>& signals, const TensorPtr& alpha) {
    if (signals.empty()) throw ShapeError("convex_combine: no signals");
    require_rank("convex_combine", alpha, 1);
    const int e = static_cast<int>(signals.size());
    if (alpha->dim(0) != e) {
        throw ShapeError("convex_combine: " + std::to_string(e) + " signals vs alpha " +
                         shape_str(alpha->shape));
    }
    for (const auto& s : signals) {
        require_rank("convex_combine", s, 1);
        require_same_shape("convex_combine", signals[0], s);
    }
    const int t = signals[0]->dim(0);
    std::vector<double> out(static_cast<std::size_t>(t), 0.0);
    for (int ei = 0; ei < e; ++ei) {
        const double av = alpha->data[static_cast<std::size_t>(ei)];
        const auto& s = signals[static_cast<std::size_t>(ei)];
        for (int ti = 0; ti < t; ++ti) out[static_cast<std::size_t>(ti)] += av * s->data[static_cast<std::size_t>(ti)];
    }
    std::vector<TensorPtr> parents(signals.begin(), signals.end());
    parents.push_back(alpha);
    auto r = make_op("convex_combine", {t}, std::move(out), std::move(parents));
    if (r->requires_grad) {
        auto sigs = signals;
        r->backward_fn = [sigs, alpha, t](const Tensor& self) {
            for (std::size_t ei = 0; ei < sigs.size(); ++ei) {
                const auto& s = sigs[ei];
                const double av = alpha->data[ei];
                if (wants_grad(s)) {
                    s->ensure_grad();
                    for (int ti = 0; ti < t; ++ti)
                        s->grad[static_cast<std::size_t>(ti)] += av * self.grad[static_cast<std::size_t>(ti)];
                }
                if (wants_grad(alpha)) {
                    alpha->ensure_grad();
                    double dot = 0.0;
                    for (int ti = 0; ti < t; ++ti)
                        dot += self.grad[static_cast<std::size_t>(ti)] * s->data[static_cast<std::size_t>(ti)];
                    alpha->grad[ei] += dot;
                }
            }
        };
    }
    return r;
}

TensorPtr sum_spatial_l2(const TensorPtr& x) {
    require_rank("sum_spatial_l2", x, 4);
    const int maps = x->dim(0) * x->dim(1);
    const int hw = x->dim(2) * x->dim(3);
    auto norms = std::make_shared<std::vector<double>>(static_cast<std::size_t>(maps));
    double total = 0.0;
    for (int m = 0; m < maps; ++m) {
        const double* src = x->data.data() + static_cast<std::size_t>(m) * hw;
        double ss = 0.0;
        for (int i = 0; i < hw; ++i) ss += src[i] * src[i];
        const double nrm = std::sqrt(ss);
        (*norms)[static_cast<std::size_t>(m)] = nrm;
        total += nrm;
    }
    auto r = make_op("sum_spatial_l2", {1}, {total}, {x});
    if (r->requires_grad) {
        r->backward_fn = [x, norms, maps, hw](const Tensor& self) {
            x->ensure_grad();
            const double g = self.grad[0];
            for (int m = 0; m < maps; ++m) {
                const double nrm = (*norms)[static_cast<std::size_t>(m)];
                if (nrm == 0.0) continue;
                const double s = g / nrm;
                const double* src = x->data.data() + static_cast<std::size_t>(m) * hw;
                double* dx = x->grad.data() + static_cast<std::size_t>(m) * hw;
                for (int i = 0; i < hw; ++i) dx[i] += s * src[i];
            }
        };
    }
    return r;
}

} // namespace marppg::nn
