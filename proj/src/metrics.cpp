#include "rdaf/metrics.hpp"

#include <array>
#include <cmath>
#include <limits>

namespace rdaf {

double psnr(const ImageU8& pred, const ImageU8& target) {
    RDAF_CHECK(pred.h == target.h && pred.w == target.w && pred.channels == target.channels,
               "psnr: image dims differ (", pred.w, "x", pred.h, " vs ", target.w, "x", target.h,
               ")");
    double se = 0.0;
    for (size_t i = 0; i < pred.pix.size(); ++i) {
        const double d = static_cast<double>(pred.pix[i]) - static_cast<double>(target.pix[i]);
        se += d * d;
    }
    if (se == 0.0) return std::numeric_limits<double>::infinity();
    const double mse = se / static_cast<double>(pred.pix.size());
    return 10.0 * std::log10(255.0 * 255.0 / mse);
}

namespace {

constexpr int kWin = 11;
constexpr int kRadius = kWin / 2;

std::array<double, kWin> gaussian_taps() {
    std::array<double, kWin> g{};
    double sum = 0.0;
    for (int i = 0; i < kWin; ++i) {
        const double d = static_cast<double>(i - kRadius);
        g[static_cast<size_t>(i)] = std::exp(-(d * d) / (2.0 * 1.5 * 1.5));
        sum += g[static_cast<size_t>(i)];
    }
    for (double& v : g) v /= sum;
    return g;
}

// Separable Gaussian filter, valid region only: output is (h-10) x (w-10).
void blur_valid(const std::vector<double>& src, int h, int w, std::vector<double>& tmp,
                std::vector<double>& dst) {
    static const std::array<double, kWin> g = gaussian_taps();
    const int vw = w - 2 * kRadius;
    const int vh = h - 2 * kRadius;
    tmp.assign(static_cast<size_t>(h) * vw, 0.0);
    for (int y = 0; y < h; ++y)
        for (int x = 0; x < vw; ++x) {
            double acc = 0.0;
            for (int k = 0; k < kWin; ++k) acc += g[static_cast<size_t>(k)] * src[static_cast<size_t>(y) * w + x + k];
            tmp[static_cast<size_t>(y) * vw + x] = acc;
        }
    dst.assign(static_cast<size_t>(vh) * vw, 0.0);
    for (int y = 0; y < vh; ++y)
        for (int x = 0; x < vw; ++x) {
            double acc = 0.0;
            for (int k = 0; k < kWin; ++k) acc += g[static_cast<size_t>(k)] * tmp[static_cast<size_t>(y + k) * vw + x];
            dst[static_cast<size_t>(y) * vw + x] = acc;
        }
}

double ssim_plane(const std::vector<double>& a, const std::vector<double>& b, int h, int w) {
    constexpr double kC1 = (0.01 * 255.0) * (0.01 * 255.0);
    constexpr double kC2 = (0.03 * 255.0) * (0.03 * 255.0);
    const size_t n = a.size();
    std::vector<double> aa(n), bb(n), ab(n);
    for (size_t i = 0; i < n; ++i) {
        aa[i] = a[i] * a[i];
        bb[i] = b[i] * b[i];
        ab[i] = a[i] * b[i];
    }
    std::vector<double> tmp, mu_a, mu_b, m_aa, m_bb, m_ab;
    blur_valid(a, h, w, tmp, mu_a);
    blur_valid(b, h, w, tmp, mu_b);
    blur_valid(aa, h, w, tmp, m_aa);
    blur_valid(bb, h, w, tmp, m_bb);
    blur_valid(ab, h, w, tmp, m_ab);
    double acc = 0.0;
    for (size_t i = 0; i < mu_a.size(); ++i) {
        const double ma = mu_a[i], mb = mu_b[i];
        const double va = m_aa[i] - ma * ma;
        const double vb = m_bb[i] - mb * mb;
        const double cov = m_ab[i] - ma * mb;
        acc += ((2.0 * ma * mb + kC1) * (2.0 * cov + kC2)) /
               ((ma * ma + mb * mb + kC1) * (va + vb + kC2));
    }
    return acc / static_cast<double>(mu_a.size());
}

}  // namespace

double ssim(const ImageU8& pred, const ImageU8& target, SsimMode mode) {
    RDAF_CHECK(pred.h == target.h && pred.w == target.w && pred.channels == target.channels,
               "ssim: image dims differ");
    RDAF_CHECK(pred.h >= kWin && pred.w >= kWin, "ssim: image ", pred.w, "x", pred.h,
               " smaller than the ", kWin, "x", kWin, " window");
    const int h = pred.h, w = pred.w;
    const size_t plane = static_cast<size_t>(h) * w;
    std::vector<double> a(plane), b(plane);
    if (mode == SsimMode::luminance) {
        for (size_t i = 0; i < plane; ++i) {
            const size_t o = i * 3;
            a[i] = 0.299 * pred.pix[o] + 0.587 * pred.pix[o + 1] + 0.114 * pred.pix[o + 2];
            b[i] = 0.299 * target.pix[o] + 0.587 * target.pix[o + 1] + 0.114 * target.pix[o + 2];
        }
        return ssim_plane(a, b, h, w);
    }
    double acc = 0.0;
    for (int c = 0; c < 3; ++c) {
        for (size_t i = 0; i < plane; ++i) {
            a[i] = pred.pix[i * 3 + static_cast<size_t>(c)];
            b[i] = target.pix[i * 3 + static_cast<size_t>(c)];
        }
        acc += ssim_plane(a, b, h, w);
    }
    return acc / 3.0;
}

}  // namespace rdaf
