#include "rdaf/fft.hpp"

#include <cmath>
#include <numbers>
#include <vector>

namespace rdaf {
namespace detail {
namespace {

constexpr double kPi = std::numbers::pi;

bool is_pow2(i64 n) { return n > 0 && (n & (n - 1)) == 0; }

i64 next_pow2(i64 n) {
    i64 p = 1;
    while (p < n) p <<= 1;
    return p;
}

// In-place radix-2 FFT, length must be a power of two.
void fft_pow2(std::span<double> re, std::span<double> im, int sign) {
    const i64 n = static_cast<i64>(re.size());
    // bit-reversal permutation
    for (i64 i = 1, j = 0; i < n; ++i) {
        i64 bit = n >> 1;
        for (; j & bit; bit >>= 1) j ^= bit;
        j ^= bit;
        if (i < j) {
            std::swap(re[i], re[j]);
            std::swap(im[i], im[j]);
        }
    }
    for (i64 len = 2; len <= n; len <<= 1) {
        const double ang = sign * 2.0 * kPi / static_cast<double>(len);
        const double wr = std::cos(ang), wi = std::sin(ang);
        for (i64 i = 0; i < n; i += len) {
            double cr = 1.0, ci = 0.0;
            for (i64 k = 0; k < len / 2; ++k) {
                const i64 a = i + k, b = i + k + len / 2;
                const double tr = re[b] * cr - im[b] * ci;
                const double ti = re[b] * ci + im[b] * cr;
                re[b] = re[a] - tr;
                im[b] = im[a] - ti;
                re[a] += tr;
                im[a] += ti;
                const double ncr = cr * wr - ci * wi;
                ci = cr * wi + ci * wr;
                cr = ncr;
            }
        }
    }
}

// Bluestein re-expresses an arbitrary-length DFT as a circular convolution
// carried by power-of-two FFTs.
void fft_bluestein(std::span<double> re, std::span<double> im, int sign) {
    const i64 n = static_cast<i64>(re.size());
    const i64 m = next_pow2(2 * n - 1);
    std::vector<double> ar(m, 0.0), ai(m, 0.0), br(m, 0.0), bi(m, 0.0);
    std::vector<double> wr(n), wi(n);
    for (i64 k = 0; k < n; ++k) {
        // k^2 mod 2n keeps the chirp angle small and exact
        const i64 k2 = (k * k) % (2 * n);
        const double ang = sign * kPi * static_cast<double>(k2) / static_cast<double>(n);
        wr[k] = std::cos(ang);
        wi[k] = std::sin(ang);
        ar[k] = re[k] * wr[k] - im[k] * wi[k];
        ai[k] = re[k] * wi[k] + im[k] * wr[k];
        br[k] = wr[k];
        bi[k] = -wi[k];
        if (k > 0) {
            br[m - k] = wr[k];
            bi[m - k] = -wi[k];
        }
    }
    fft_pow2(ar, ai, -1);
    fft_pow2(br, bi, -1);
    for (i64 k = 0; k < m; ++k) {
        const double r = ar[k] * br[k] - ai[k] * bi[k];
        ai[k] = ar[k] * bi[k] + ai[k] * br[k];
        ar[k] = r;
    }
    fft_pow2(ar, ai, +1);
    const double inv = 1.0 / static_cast<double>(m);
    for (i64 k = 0; k < n; ++k) {
        const double cr = ar[k] * inv, ci = ai[k] * inv;
        re[k] = cr * wr[k] - ci * wi[k];
        im[k] = cr * wi[k] + ci * wr[k];
    }
}

void fft_1d(std::span<double> re, std::span<double> im, int sign) {
    if (re.size() == 1) return;
    if (is_pow2(static_cast<i64>(re.size()))) {
        fft_pow2(re, im, sign);
    } else {
        fft_bluestein(re, im, sign);
    }
}

}  // namespace

void dft2_plane(std::span<double> re, std::span<double> im, i64 h, i64 w, int sign) {
    for (i64 y = 0; y < h; ++y)
        fft_1d(re.subspan(y * w, w), im.subspan(y * w, w), sign);
    std::vector<double> cr(h), ci(h);
    for (i64 x = 0; x < w; ++x) {
        for (i64 y = 0; y < h; ++y) {
            cr[y] = re[y * w + x];
            ci[y] = im[y * w + x];
        }
        fft_1d(cr, ci, sign);
        for (i64 y = 0; y < h; ++y) {
            re[y * w + x] = cr[y];
            im[y * w + x] = ci[y];
        }
    }
}

}  // namespace detail

namespace {

// Adjoint transform of a one-sided gradient seed; adds the real part into dst.
template <typename T>
void accumulate_adjoint(const std::vector<T>& seed, bool seed_is_imag, const Shape& s,
                        std::vector<T>& dst) {
    const i64 plane = s.h * s.w;
    std::vector<double> re(plane), im(plane);
    for (i64 p = 0; p < s.n * s.c; ++p) {
        const T* g = seed.data() + p * plane;
        for (i64 i = 0; i < plane; ++i) {
            re[i] = seed_is_imag ? 0.0 : static_cast<double>(g[i]);
            im[i] = seed_is_imag ? static_cast<double>(g[i]) : 0.0;
        }
        detail::dft2_plane(re, im, s.h, s.w, +1);
        T* out = dst.data() + p * plane;
        for (i64 i = 0; i < plane; ++i) out[i] += static_cast<T>(re[i]);
    }
}

}  // namespace

template <typename T>
ComplexGrid<T> fft2(const Tensor<T>& input) {
    const Shape s = input.shape();
    auto px = input.node();
    auto re_node = std::make_shared<detail::Node<T>>();
    auto im_node = std::make_shared<detail::Node<T>>();
    re_node->shape = s;
    im_node->shape = s;
    re_node->value.resize(static_cast<size_t>(s.numel()));
    im_node->value.resize(static_cast<size_t>(s.numel()));

    const i64 plane = s.h * s.w;
    std::vector<double> re(plane), im(plane);
    for (i64 p = 0; p < s.n * s.c; ++p) {
        const T* src = px->value.data() + p * plane;
        for (i64 i = 0; i < plane; ++i) {
            re[i] = static_cast<double>(src[i]);
            im[i] = 0.0;
        }
        detail::dft2_plane(re, im, s.h, s.w, -1);
        for (i64 i = 0; i < plane; ++i) {
            re_node->value[p * plane + i] = static_cast<T>(re[i]);
            im_node->value[p * plane + i] = static_cast<T>(im[i]);
        }
    }

    if (px->needs_grad) {
        re_node->needs_grad = true;
        re_node->parents = {px};
        re_node->backward_fn = [px](detail::Node<T>& self) {
            if (self.grad.empty()) return;
            if (px->grad.empty()) px->grad.assign(px->value.size(), T(0));
            accumulate_adjoint(self.grad, /*seed_is_imag=*/false, self.shape, px->grad);
        };
        im_node->needs_grad = true;
        im_node->parents = {px};
        im_node->backward_fn = [px](detail::Node<T>& self) {
            if (self.grad.empty()) return;
            if (px->grad.empty()) px->grad.assign(px->value.size(), T(0));
            accumulate_adjoint(self.grad, /*seed_is_imag=*/true, self.shape, px->grad);
        };
    }
    return ComplexGrid<T>{Tensor<T>::from_node(std::move(re_node)),
                          Tensor<T>::from_node(std::move(im_node))};
}

template ComplexGrid<float> fft2<float>(const Tensor<float>&);
template ComplexGrid<double> fft2<double>(const Tensor<double>&);

}  // namespace rdaf
