#pragma once

#include "rdaf/image.hpp"

namespace rdaf {

/// 10*log10(255^2 / MSE) over all channels; +inf for identical images.
double psnr(const ImageU8& pred, const ImageU8& target);

enum class SsimMode {
    per_channel,  // SSIM per RGB channel, then averaged
    luminance,    // ITU-R BT.601 luma first, single-channel SSIM
};

/// Single-scale SSIM: 11x11 Gaussian window (sigma 1.5), K1=0.01, K2=0.03,
/// L=255, averaged over valid window positions. Requires dims >= 11.
double ssim(const ImageU8& pred, const ImageU8& target, SsimMode mode = SsimMode::per_channel);

}  // namespace rdaf
