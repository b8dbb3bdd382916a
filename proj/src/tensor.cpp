#include "rdaf/tensor.hpp"

#include <algorithm>
#include <cmath>
#include <cstdlib>
#include <thread>
#include <unordered_set>

#ifdef _OPENMP
#include <omp.h>
#endif

namespace rdaf {

namespace detail {

int thread_count() {
    static const int cap = [] {
        int hw = static_cast<int>(std::thread::hardware_concurrency());
        if (hw <= 0) hw = 1;
        if (const char* env = std::getenv("RDAF_THREADS")) {
            int v = std::atoi(env);
            if (v >= 1) hw = std::min(hw, v);
        }
        return hw;
    }();
    return cap;
}

}  // namespace detail

namespace {

using detail::Node;

template <typename T>
using NodePtr = std::shared_ptr<Node<T>>;

template <typename T>
NodePtr<T> new_node(Shape s) {
    auto n = std::make_shared<Node<T>>();
    n->shape = s;
    n->value.assign(static_cast<size_t>(s.numel()), T(0));
    return n;
}

template <typename T>
void ensure_grad(Node<T>& n) {
    if (n.grad.empty()) n.grad.assign(n.value.size(), T(0));
}

// Attaches parents + backward only when some parent can receive a gradient.
template <typename T>
Tensor<T> finish(NodePtr<T> out, std::vector<NodePtr<T>> parents,
                 std::function<void(Node<T>&)> backward_fn) {
    bool needs = false;
    for (const auto& p : parents) needs = needs || p->needs_grad;
    if (needs) {
        out->needs_grad = true;
        out->parents = std::move(parents);
        out->backward_fn = std::move(backward_fn);
    }
    return Tensor<T>::from_node(std::move(out));
}

inline i64 idx4(const Shape& s, i64 n, i64 c, i64 y, i64 x) {
    return ((n * s.c + c) * s.h + y) * s.w + x;
}

}  // namespace

// ---------------------------------------------------------------------------
// elementwise ops
// ---------------------------------------------------------------------------

template <typename T>
Tensor<T> add(const Tensor<T>& a, const Tensor<T>& b) {
    RDAF_CHECK(a.shape() == b.shape(), "add: shape mismatch ", a.shape(), " vs ", b.shape());
    auto pa = a.node(), pb = b.node();
    auto out = new_node<T>(a.shape());
    const size_t n = out->value.size();
    for (size_t i = 0; i < n; ++i) out->value[i] = pa->value[i] + pb->value[i];
    return finish<T>(out, {pa, pb}, [pa, pb](Node<T>& self) {
        if (pa->needs_grad) {
            ensure_grad(*pa);
            for (size_t i = 0; i < self.grad.size(); ++i) pa->grad[i] += self.grad[i];
        }
        if (pb->needs_grad) {
            ensure_grad(*pb);
            for (size_t i = 0; i < self.grad.size(); ++i) pb->grad[i] += self.grad[i];
        }
    });
}

template <typename T>
Tensor<T> sub(const Tensor<T>& a, const Tensor<T>& b) {
    RDAF_CHECK(a.shape() == b.shape(), "sub: shape mismatch ", a.shape(), " vs ", b.shape());
    auto pa = a.node(), pb = b.node();
    auto out = new_node<T>(a.shape());
    const size_t n = out->value.size();
    for (size_t i = 0; i < n; ++i) out->value[i] = pa->value[i] - pb->value[i];
    return finish<T>(out, {pa, pb}, [pa, pb](Node<T>& self) {
        if (pa->needs_grad) {
            ensure_grad(*pa);
            for (size_t i = 0; i < self.grad.size(); ++i) pa->grad[i] += self.grad[i];
        }
        if (pb->needs_grad) {
            ensure_grad(*pb);
            for (size_t i = 0; i < self.grad.size(); ++i) pb->grad[i] -= self.grad[i];
        }
    });
}

template <typename T>
Tensor<T> mul(const Tensor<T>& a, const Tensor<T>& b) {
    RDAF_CHECK(a.shape() == b.shape(), "mul: shape mismatch ", a.shape(), " vs ", b.shape());
    auto pa = a.node(), pb = b.node();
    auto out = new_node<T>(a.shape());
    const size_t n = out->value.size();
    for (size_t i = 0; i < n; ++i) out->value[i] = pa->value[i] * pb->value[i];
    return finish<T>(out, {pa, pb}, [pa, pb](Node<T>& self) {
        if (pa->needs_grad) {
            ensure_grad(*pa);
            for (size_t i = 0; i < self.grad.size(); ++i)
                pa->grad[i] += self.grad[i] * pb->value[i];
        }
        if (pb->needs_grad) {
            ensure_grad(*pb);
            for (size_t i = 0; i < self.grad.size(); ++i)
                pb->grad[i] += self.grad[i] * pa->value[i];
        }
    });
}

template <typename T>
Tensor<T> scale(const Tensor<T>& a, T s) {
    auto pa = a.node();
    auto out = new_node<T>(a.shape());
    const size_t n = out->value.size();
    for (size_t i = 0; i < n; ++i) out->value[i] = pa->value[i] * s;
    return finish<T>(out, {pa}, [pa, s](Node<T>& self) {
        if (!pa->needs_grad) return;
        ensure_grad(*pa);
        for (size_t i = 0; i < self.grad.size(); ++i) pa->grad[i] += self.grad[i] * s;
    });
}

template <typename T>
Tensor<T> relu(const Tensor<T>& a) {
    auto pa = a.node();
    auto out = new_node<T>(a.shape());
    const size_t n = out->value.size();
    for (size_t i = 0; i < n; ++i) out->value[i] = pa->value[i] > T(0) ? pa->value[i] : T(0);
    return finish<T>(out, {pa}, [pa](Node<T>& self) {
        if (!pa->needs_grad) return;
        ensure_grad(*pa);
        for (size_t i = 0; i < self.grad.size(); ++i)
            if (pa->value[i] > T(0)) pa->grad[i] += self.grad[i];
    });
}

template <typename T>
Tensor<T> sigmoid(const Tensor<T>& a) {
    auto pa = a.node();
    auto out = new_node<T>(a.shape());
    const size_t n = out->value.size();
    for (size_t i = 0; i < n; ++i) {
        // Branch keeps exp() argument non-positive so large |x| cannot overflow.
        T x = pa->value[i];
        if (x >= T(0)) {
            out->value[i] = T(1) / (T(1) + std::exp(-x));
        } else {
            T e = std::exp(x);
            out->value[i] = e / (T(1) + e);
        }
    }
    return finish<T>(out, {pa}, [pa](Node<T>& self) {
        if (!pa->needs_grad) return;
        ensure_grad(*pa);
        for (size_t i = 0; i < self.grad.size(); ++i) {
            T y = self.value[i];
            pa->grad[i] += self.grad[i] * y * (T(1) - y);
        }
    });
}

template <typename T>
Tensor<T> abs(const Tensor<T>& a) {
    auto pa = a.node();
    auto out = new_node<T>(a.shape());
    const size_t n = out->value.size();
    for (size_t i = 0; i < n; ++i) out->value[i] = std::abs(pa->value[i]);
    return finish<T>(out, {pa}, [pa](Node<T>& self) {
        if (!pa->needs_grad) return;
        ensure_grad(*pa);
        for (size_t i = 0; i < self.grad.size(); ++i) {
            T x = pa->value[i];
            // subgradient 0 at x == 0
            if (x > T(0)) pa->grad[i] += self.grad[i];
            else if (x < T(0)) pa->grad[i] -= self.grad[i];
        }
    });
}

template <typename T>
Tensor<T> complex_abs(const Tensor<T>& re, const Tensor<T>& im) {
    RDAF_CHECK(re.shape() == im.shape(), "complex_abs: shape mismatch ", re.shape(), " vs ",
               im.shape());
    auto pr = re.node(), pi = im.node();
    auto out = new_node<T>(re.shape());
    const size_t n = out->value.size();
    for (size_t i = 0; i < n; ++i) out->value[i] = std::hypot(pr->value[i], pi->value[i]);
    return finish<T>(out, {pr, pi}, [pr, pi](Node<T>& self) {
        for (size_t i = 0; i < self.grad.size(); ++i) {
            T m = self.value[i];
            if (m == T(0)) continue;
            T g = self.grad[i] / m;
            if (pr->needs_grad) {
                ensure_grad(*pr);
                pr->grad[i] += g * pr->value[i];
            }
            if (pi->needs_grad) {
                ensure_grad(*pi);
                pi->grad[i] += g * pi->value[i];
            }
        }
    });
}

template <typename T>
Tensor<T> sum(const Tensor<T>& a) {
    auto pa = a.node();
    auto out = new_node<T>(Shape{1, 1, 1, 1});
    T acc = T(0);
    for (T v : pa->value) acc += v;
    out->value[0] = acc;
    return finish<T>(out, {pa}, [pa](Node<T>& self) {
        if (!pa->needs_grad) return;
        ensure_grad(*pa);
        T g = self.grad[0];
        for (size_t i = 0; i < pa->grad.size(); ++i) pa->grad[i] += g;
    });
}

template <typename T>
Tensor<T> mean(const Tensor<T>& a) {
    return scale(sum(a), T(1) / static_cast<T>(a.numel()));
}

template <typename T>
Tensor<T> concat_channels(const std::vector<Tensor<T>>& parts) {
    RDAF_CHECK(!parts.empty(), "concat_channels: no inputs");
    const Shape& s0 = parts[0].shape();
    i64 total_c = 0;
    std::vector<NodePtr<T>> parents;
    parents.reserve(parts.size());
    for (const auto& p : parts) {
        const Shape& s = p.shape();
        RDAF_CHECK(s.n == s0.n && s.h == s0.h && s.w == s0.w,
                   "concat_channels: spatial/batch mismatch ", s, " vs ", s0);
        total_c += s.c;
        parents.push_back(p.node());
    }
    Shape os{s0.n, total_c, s0.h, s0.w};
    auto out = new_node<T>(os);
    const i64 plane = s0.h * s0.w;
    for (i64 n = 0; n < os.n; ++n) {
        i64 co = 0;
        for (const auto& p : parents) {
            const i64 pc = p->shape.c;
            const T* src = p->value.data() + n * pc * plane;
            T* dst = out->value.data() + (n * total_c + co) * plane;
            std::copy(src, src + pc * plane, dst);
            co += pc;
        }
    }
    return finish<T>(out, parents, [parents, plane, total_c](Node<T>& self) {
        const Shape& os = self.shape;
        for (i64 n = 0; n < os.n; ++n) {
            i64 co = 0;
            for (const auto& p : parents) {
                const i64 pc = p->shape.c;
                if (p->needs_grad) {
                    ensure_grad(*p);
                    const T* src = self.grad.data() + (n * total_c + co) * plane;
                    T* dst = p->grad.data() + n * pc * plane;
                    for (i64 i = 0; i < pc * plane; ++i) dst[i] += src[i];
                }
                co += pc;
            }
        }
    });
}

// ---------------------------------------------------------------------------
// convolution kernels (gather form: each output element is one serial
// accumulation chain, so results are bit-identical for any thread count)
// ---------------------------------------------------------------------------

namespace {

template <typename T>
void conv2d_value(const Node<T>& x, const Node<T>& w, const Node<T>& b, Node<T>& y,
                  int stride, int pad) {
    const Shape xs = x.shape, ws = w.shape, ys = y.shape;
    const i64 planes = ys.n * ys.c;
#ifdef _OPENMP
#pragma omp parallel for num_threads(detail::thread_count()) schedule(static)
#endif
    for (i64 p = 0; p < planes; ++p) {
        const i64 n = p / ys.c, co = p % ys.c;
        const T bias = b.value[co];
        for (i64 oy = 0; oy < ys.h; ++oy) {
            for (i64 ox = 0; ox < ys.w; ++ox) {
                T acc = bias;
                const i64 y0 = oy * stride - pad, x0 = ox * stride - pad;
                for (i64 ci = 0; ci < ws.c; ++ci) {
                    for (i64 ky = 0; ky < ws.h; ++ky) {
                        const i64 iy = y0 + ky;
                        if (iy < 0 || iy >= xs.h) continue;
                        const T* xrow = &x.value[idx4(xs, n, ci, iy, 0)];
                        const T* wrow = &w.value[idx4(ws, co, ci, ky, 0)];
                        for (i64 kx = 0; kx < ws.w; ++kx) {
                            const i64 ix = x0 + kx;
                            if (ix < 0 || ix >= xs.w) continue;
                            acc += xrow[ix] * wrow[kx];
                        }
                    }
                }
                y.value[idx4(ys, n, co, oy, ox)] = acc;
            }
        }
    }
}

template <typename T>
void conv2d_grad_input(Node<T>& x, const Node<T>& w, const Node<T>& y, int stride, int pad) {
    const Shape xs = x.shape, ws = w.shape, ys = y.shape;
    const i64 planes = xs.n * xs.c;
#ifdef _OPENMP
#pragma omp parallel for num_threads(detail::thread_count()) schedule(static)
#endif
    for (i64 p = 0; p < planes; ++p) {
        const i64 n = p / xs.c, ci = p % xs.c;
        for (i64 iy = 0; iy < xs.h; ++iy) {
            for (i64 ix = 0; ix < xs.w; ++ix) {
                T acc = T(0);
                for (i64 co = 0; co < ws.n; ++co) {
                    for (i64 ky = 0; ky < ws.h; ++ky) {
                        const i64 ty = iy + pad - ky;
                        if (ty < 0 || ty % stride != 0) continue;
                        const i64 oy = ty / stride;
                        if (oy >= ys.h) continue;
                        for (i64 kx = 0; kx < ws.w; ++kx) {
                            const i64 tx = ix + pad - kx;
                            if (tx < 0 || tx % stride != 0) continue;
                            const i64 ox = tx / stride;
                            if (ox >= ys.w) continue;
                            acc += y.grad[idx4(ys, n, co, oy, ox)] *
                                   w.value[idx4(ws, co, ci, ky, kx)];
                        }
                    }
                }
                x.grad[idx4(xs, n, ci, iy, ix)] += acc;
            }
        }
    }
}

template <typename T>
void conv2d_grad_weight(const Node<T>& x, Node<T>& w, const Node<T>& y, int stride, int pad) {
    const Shape xs = x.shape, ws = w.shape, ys = y.shape;
    const i64 filters = ws.n * ws.c;
#ifdef _OPENMP
#pragma omp parallel for num_threads(detail::thread_count()) schedule(static)
#endif
    for (i64 f = 0; f < filters; ++f) {
        const i64 co = f / ws.c, ci = f % ws.c;
        for (i64 ky = 0; ky < ws.h; ++ky) {
            for (i64 kx = 0; kx < ws.w; ++kx) {
                T acc = T(0);
                for (i64 n = 0; n < ys.n; ++n) {
                    for (i64 oy = 0; oy < ys.h; ++oy) {
                        const i64 iy = oy * stride - pad + ky;
                        if (iy < 0 || iy >= xs.h) continue;
                        for (i64 ox = 0; ox < ys.w; ++ox) {
                            const i64 ix = ox * stride - pad + kx;
                            if (ix < 0 || ix >= xs.w) continue;
                            acc += y.grad[idx4(ys, n, co, oy, ox)] *
                                   x.value[idx4(xs, n, ci, iy, ix)];
                        }
                    }
                }
                w.grad[idx4(ws, co, ci, ky, kx)] += acc;
            }
        }
    }
}

template <typename T>
void conv_grad_bias(Node<T>& b, const Node<T>& y) {
    const Shape ys = y.shape;
    for (i64 co = 0; co < ys.c; ++co) {
        T acc = T(0);
        for (i64 n = 0; n < ys.n; ++n)
            for (i64 oy = 0; oy < ys.h; ++oy)
                for (i64 ox = 0; ox < ys.w; ++ox) acc += y.grad[idx4(ys, n, co, oy, ox)];
        b.grad[co] += acc;
    }
}

// Transposed conv: out[oy] pulls from input positions iy with oy = iy*s - p + ky.
template <typename T>
void convt_value(const Node<T>& x, const Node<T>& w, const Node<T>& b, Node<T>& y,
                 int stride, int pad) {
    const Shape xs = x.shape, ws = w.shape, ys = y.shape;
    const i64 planes = ys.n * ys.c;
#ifdef _OPENMP
#pragma omp parallel for num_threads(detail::thread_count()) schedule(static)
#endif
    for (i64 p = 0; p < planes; ++p) {
        const i64 n = p / ys.c, co = p % ys.c;
        const T bias = b.value[co];
        for (i64 oy = 0; oy < ys.h; ++oy) {
            for (i64 ox = 0; ox < ys.w; ++ox) {
                T acc = bias;
                for (i64 ci = 0; ci < xs.c; ++ci) {
                    for (i64 ky = 0; ky < ws.h; ++ky) {
                        const i64 ty = oy + pad - ky;
                        if (ty < 0 || ty % stride != 0) continue;
                        const i64 iy = ty / stride;
                        if (iy >= xs.h) continue;
                        for (i64 kx = 0; kx < ws.w; ++kx) {
                            const i64 tx = ox + pad - kx;
                            if (tx < 0 || tx % stride != 0) continue;
                            const i64 ix = tx / stride;
                            if (ix >= xs.w) continue;
                            acc += x.value[idx4(xs, n, ci, iy, ix)] *
                                   w.value[idx4(ws, ci, co, ky, kx)];
                        }
                    }
                }
                y.value[idx4(ys, n, co, oy, ox)] = acc;
            }
        }
    }
}

template <typename T>
void convt_grad_input(Node<T>& x, const Node<T>& w, const Node<T>& y, int stride, int pad) {
    const Shape xs = x.shape, ws = w.shape, ys = y.shape;
    const i64 planes = xs.n * xs.c;
#ifdef _OPENMP
#pragma omp parallel for num_threads(detail::thread_count()) schedule(static)
#endif
    for (i64 p = 0; p < planes; ++p) {
        const i64 n = p / xs.c, ci = p % xs.c;
        for (i64 iy = 0; iy < xs.h; ++iy) {
            for (i64 ix = 0; ix < xs.w; ++ix) {
                T acc = T(0);
                const i64 y0 = iy * stride - pad, x0 = ix * stride - pad;
                for (i64 co = 0; co < ys.c; ++co) {
                    for (i64 ky = 0; ky < ws.h; ++ky) {
                        const i64 oy = y0 + ky;
                        if (oy < 0 || oy >= ys.h) continue;
                        for (i64 kx = 0; kx < ws.w; ++kx) {
                            const i64 ox = x0 + kx;
                            if (ox < 0 || ox >= ys.w) continue;
                            acc += y.grad[idx4(ys, n, co, oy, ox)] *
                                   w.value[idx4(ws, ci, co, ky, kx)];
                        }
                    }
                }
                x.grad[idx4(xs, n, ci, iy, ix)] += acc;
            }
        }
    }
}

template <typename T>
void convt_grad_weight(const Node<T>& x, Node<T>& w, const Node<T>& y, int stride, int pad) {
    const Shape xs = x.shape, ws = w.shape, ys = y.shape;
    const i64 filters = ws.n * ws.c;
#ifdef _OPENMP
#pragma omp parallel for num_threads(detail::thread_count()) schedule(static)
#endif
    for (i64 f = 0; f < filters; ++f) {
        const i64 ci = f / ws.c, co = f % ws.c;
        for (i64 ky = 0; ky < ws.h; ++ky) {
            for (i64 kx = 0; kx < ws.w; ++kx) {
                T acc = T(0);
                for (i64 n = 0; n < xs.n; ++n) {
                    for (i64 iy = 0; iy < xs.h; ++iy) {
                        const i64 oy = iy * stride - pad + ky;
                        if (oy < 0 || oy >= ys.h) continue;
                        for (i64 ix = 0; ix < xs.w; ++ix) {
                            const i64 ox = ix * stride - pad + kx;
                            if (ox < 0 || ox >= ys.w) continue;
                            acc += x.value[idx4(xs, n, ci, iy, ix)] *
                                   y.grad[idx4(ys, n, co, oy, ox)];
                        }
                    }
                }
                w.grad[idx4(ws, ci, co, ky, kx)] += acc;
            }
        }
    }
}

}  // namespace

template <typename T>
Tensor<T> conv2d(const Tensor<T>& input, const Tensor<T>& weight, const Tensor<T>& bias,
                 int stride, int padding) {
    const Shape xs = input.shape(), ws = weight.shape(), bs = bias.shape();
    RDAF_CHECK(stride >= 1, "conv2d: stride must be positive, got ", stride);
    RDAF_CHECK(padding >= 0, "conv2d: padding must be non-negative, got ", padding);
    RDAF_CHECK(xs.c == ws.c, "conv2d: input channels ", xs.c, " != weight in-channels ", ws.c,
               " (input ", xs, ", weight ", ws, ")");
    RDAF_CHECK(bs == Shape{1, ws.n, 1, 1}, "conv2d: bias shape ", bs, " != (1,", ws.n, ",1,1)");
    const i64 oh = (xs.h + 2 * padding - ws.h) / stride + 1;
    const i64 ow = (xs.w + 2 * padding - ws.w) / stride + 1;
    RDAF_CHECK(xs.h + 2 * padding >= ws.h && xs.w + 2 * padding >= ws.w,
               "conv2d: kernel ", ws, " does not fit padded input ", xs, " pad ", padding);
    auto px = input.node(), pw = weight.node(), pb = bias.node();
    auto out = new_node<T>(Shape{xs.n, ws.n, oh, ow});
    conv2d_value(*px, *pw, *pb, *out, stride, padding);
    return finish<T>(out, {px, pw, pb}, [px, pw, pb, stride, padding](Node<T>& self) {
        if (px->needs_grad) {
            ensure_grad(*px);
            conv2d_grad_input(*px, *pw, self, stride, padding);
        }
        if (pw->needs_grad) {
            ensure_grad(*pw);
            conv2d_grad_weight(*px, *pw, self, stride, padding);
        }
        if (pb->needs_grad) {
            ensure_grad(*pb);
            conv_grad_bias(*pb, self);
        }
    });
}

template <typename T>
Tensor<T> conv_transpose2d(const Tensor<T>& input, const Tensor<T>& weight,
                           const Tensor<T>& bias, int stride, int padding) {
    const Shape xs = input.shape(), ws = weight.shape(), bs = bias.shape();
    RDAF_CHECK(stride >= 1, "conv_transpose2d: stride must be positive, got ", stride);
    RDAF_CHECK(padding >= 0, "conv_transpose2d: padding must be non-negative, got ", padding);
    RDAF_CHECK(xs.c == ws.n, "conv_transpose2d: input channels ", xs.c,
               " != weight in-channels ", ws.n, " (input ", xs, ", weight ", ws, ")");
    RDAF_CHECK(bs == Shape{1, ws.c, 1, 1}, "conv_transpose2d: bias shape ", bs, " != (1,", ws.c,
               ",1,1)");
    const i64 oh = (xs.h - 1) * stride - 2 * padding + ws.h;
    const i64 ow = (xs.w - 1) * stride - 2 * padding + ws.w;
    RDAF_CHECK(oh >= 1 && ow >= 1, "conv_transpose2d: non-positive output dims for input ", xs,
               " weight ", ws, " stride ", stride, " pad ", padding);
    auto px = input.node(), pw = weight.node(), pb = bias.node();
    auto out = new_node<T>(Shape{xs.n, ws.c, oh, ow});
    convt_value(*px, *pw, *pb, *out, stride, padding);
    return finish<T>(out, {px, pw, pb}, [px, pw, pb, stride, padding](Node<T>& self) {
        if (px->needs_grad) {
            ensure_grad(*px);
            convt_grad_input(*px, *pw, self, stride, padding);
        }
        if (pw->needs_grad) {
            ensure_grad(*pw);
            convt_grad_weight(*px, *pw, self, stride, padding);
        }
        if (pb->needs_grad) {
            ensure_grad(*pb);
            conv_grad_bias(*pb, self);
        }
    });
}

template <typename T>
Tensor<T> depthwise_conv2d(const Tensor<T>& input, const Tensor<T>& weight,
                           const Tensor<T>& bias) {
    const Shape xs = input.shape(), ws = weight.shape(), bs = bias.shape();
    RDAF_CHECK(ws.c == 1 && ws.h == 3 && ws.w == 3, "depthwise_conv2d: weight must be (C,1,3,3), got ", ws);
    RDAF_CHECK(xs.c == ws.n, "depthwise_conv2d: input channels ", xs.c,
               " != weight channels ", ws.n);
    RDAF_CHECK(bs == Shape{1, ws.n, 1, 1}, "depthwise_conv2d: bias shape ", bs, " != (1,", ws.n,
               ",1,1)");
    auto px = input.node(), pw = weight.node(), pb = bias.node();
    auto out = new_node<T>(xs);
    {
        const i64 planes = xs.n * xs.c;
#ifdef _OPENMP
#pragma omp parallel for num_threads(detail::thread_count()) schedule(static)
#endif
        for (i64 p = 0; p < planes; ++p) {
            const i64 n = p / xs.c, c = p % xs.c;
            const T bv = pb->value[c];
            for (i64 oy = 0; oy < xs.h; ++oy) {
                for (i64 ox = 0; ox < xs.w; ++ox) {
                    T acc = bv;
                    for (i64 ky = 0; ky < 3; ++ky) {
                        const i64 iy = oy - 1 + ky;
                        if (iy < 0 || iy >= xs.h) continue;
                        for (i64 kx = 0; kx < 3; ++kx) {
                            const i64 ix = ox - 1 + kx;
                            if (ix < 0 || ix >= xs.w) continue;
                            acc += px->value[idx4(xs, n, c, iy, ix)] *
                                   pw->value[idx4(ws, c, 0, ky, kx)];
                        }
                    }
                    out->value[idx4(xs, n, c, oy, ox)] = acc;
                }
            }
        }
    }
    return finish<T>(out, {px, pw, pb}, [px, pw, pb](Node<T>& self) {
        const Shape xs = px->shape, ws = pw->shape;
        if (px->needs_grad) {
            ensure_grad(*px);
            const i64 planes = xs.n * xs.c;
#ifdef _OPENMP
#pragma omp parallel for num_threads(detail::thread_count()) schedule(static)
#endif
            for (i64 p = 0; p < planes; ++p) {
                const i64 n = p / xs.c, c = p % xs.c;
                for (i64 iy = 0; iy < xs.h; ++iy) {
                    for (i64 ix = 0; ix < xs.w; ++ix) {
                        T acc = T(0);
                        for (i64 ky = 0; ky < 3; ++ky) {
                            const i64 oy = iy + 1 - ky;
                            if (oy < 0 || oy >= xs.h) continue;
                            for (i64 kx = 0; kx < 3; ++kx) {
                                const i64 ox = ix + 1 - kx;
                                if (ox < 0 || ox >= xs.w) continue;
                                acc += self.grad[idx4(xs, n, c, oy, ox)] *
                                       pw->value[idx4(ws, c, 0, ky, kx)];
                            }
                        }
                        px->grad[idx4(xs, n, c, iy, ix)] += acc;
                    }
                }
            }
        }
        if (pw->needs_grad) {
            ensure_grad(*pw);
            for (i64 c = 0; c < xs.c; ++c) {
                for (i64 ky = 0; ky < 3; ++ky) {
                    for (i64 kx = 0; kx < 3; ++kx) {
                        T acc = T(0);
                        for (i64 n = 0; n < xs.n; ++n) {
                            for (i64 oy = 0; oy < xs.h; ++oy) {
                                const i64 iy = oy - 1 + ky;
                                if (iy < 0 || iy >= xs.h) continue;
                                for (i64 ox = 0; ox < xs.w; ++ox) {
                                    const i64 ix = ox - 1 + kx;
                                    if (ix < 0 || ix >= xs.w) continue;
                                    acc += self.grad[idx4(xs, n, c, oy, ox)] *
                                           px->value[idx4(xs, n, c, iy, ix)];
                                }
                            }
                        }
                        pw->grad[idx4(ws, c, 0, ky, kx)] += acc;
                    }
                }
            }
        }
        if (pb->needs_grad) {
            ensure_grad(*pb);
            conv_grad_bias(*pb, self);
        }
    });
}

// ---------------------------------------------------------------------------
// backward
// ---------------------------------------------------------------------------

template <typename T>
void backward(const Tensor<T>& loss) {
    auto root = loss.node();
    RDAF_CHECK(root != nullptr, "backward: undefined tensor");
    RDAF_CHECK(root->shape.numel() == 1, "backward: loss must be scalar, shape ", root->shape);
    RDAF_CHECK(!root->consumed, "backward: graph already consumed (graphs are single-use)");
    root->consumed = true;

    // Iterative post-order DFS; `order` ends up children-before-parents.
    std::vector<Node<T>*> order;
    std::unordered_set<Node<T>*> visited;
    std::vector<std::pair<Node<T>*, size_t>> stack;
    stack.emplace_back(root.get(), 0);
    visited.insert(root.get());
    while (!stack.empty()) {
        auto& [node, next] = stack.back();
        if (next < node->parents.size()) {
            Node<T>* p = node->parents[next++].get();
            if (visited.insert(p).second) stack.emplace_back(p, 0);
        } else {
            order.push_back(node);
            stack.pop_back();
        }
    }

    for (Node<T>* n : order)
        if (n->needs_grad) ensure_grad(*n);
    ensure_grad(*root);
    root->grad[0] += T(1);

    // order is post-order, so iterating backwards visits each node before
    // its parents.
    for (auto it = order.rbegin(); it != order.rend(); ++it) {
        Node<T>* n = *it;
        if (n->backward_fn) n->backward_fn(*n);
    }

    // Release the graph; leaf gradients survive on their nodes.
    for (Node<T>* n : order) {
        n->backward_fn = nullptr;
        n->parents.clear();
    }
}

template <typename T>
Tensor<T> clamp_values(const Tensor<T>& a, T lo, T hi) {
    std::vector<T> v(a.data().begin(), a.data().end());
    for (T& x : v) x = std::clamp(x, lo, hi);
    return Tensor<T>::from_data(a.shape(), std::move(v));
}

// ---------------------------------------------------------------------------
// explicit instantiations
// ---------------------------------------------------------------------------

template class Tensor<float>;
template class Tensor<double>;

#define RDAF_INSTANTIATE_OPS(T)                                                   \
    template Tensor<T> add<T>(const Tensor<T>&, const Tensor<T>&);                \
    template Tensor<T> sub<T>(const Tensor<T>&, const Tensor<T>&);                \
    template Tensor<T> mul<T>(const Tensor<T>&, const Tensor<T>&);                \
    template Tensor<T> scale<T>(const Tensor<T>&, T);                             \
    template Tensor<T> relu<T>(const Tensor<T>&);                                 \
    template Tensor<T> sigmoid<T>(const Tensor<T>&);                              \
    template Tensor<T> abs<T>(const Tensor<T>&);                                  \
    template Tensor<T> complex_abs<T>(const Tensor<T>&, const Tensor<T>&);        \
    template Tensor<T> sum<T>(const Tensor<T>&);                                  \
    template Tensor<T> mean<T>(const Tensor<T>&);                                 \
    template Tensor<T> concat_channels<T>(const std::vector<Tensor<T>>&);         \
    template Tensor<T> conv2d<T>(const Tensor<T>&, const Tensor<T>&,              \
                                 const Tensor<T>&, int, int);                     \
    template Tensor<T> conv_transpose2d<T>(const Tensor<T>&, const Tensor<T>&,    \
                                           const Tensor<T>&, int, int);           \
    template Tensor<T> depthwise_conv2d<T>(const Tensor<T>&, const Tensor<T>&,    \
                                           const Tensor<T>&);                     \
    template void backward<T>(const Tensor<T>&);                                  \
    template Tensor<T> clamp_values<T>(const Tensor<T>&, T, T);

RDAF_INSTANTIATE_OPS(float)
RDAF_INSTANTIATE_OPS(double)
#undef RDAF_INSTANTIATE_OPS

}  // namespace rdaf
