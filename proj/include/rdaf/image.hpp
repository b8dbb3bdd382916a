#pragma once

#include <cstdint>
#include <filesystem>
#include <vector>

#include "rdaf/tensor.hpp"

namespace rdaf {

/// 8-bit RGB image, row-major HWC.
struct ImageU8 {
    int h = 0;
    int w = 0;
    int channels = 3;
    std::vector<std::uint8_t> pix;

    std::uint8_t at(int y, int x, int c) const {
        return pix[static_cast<size_t>((y * w + x) * channels + c)];
    }
    std::uint8_t& at(int y, int x, int c) {
        return pix[static_cast<size_t>((y * w + x) * channels + c)];
    }
};

ImageU8 read_png(const std::filesystem::path& path);
void write_png(const std::filesystem::path& path, const ImageU8& img);

/// u8 -> [-1,1]: v / 127.5 - 1, as a (1,3,H,W) tensor.
Tensor<float> image_to_tensor(const ImageU8& img);

/// [-1,1] -> u8 with round-half-up after the affine map to [0,255];
/// values are clamped into range first.
ImageU8 tensor_to_image(const Tensor<float>& t);

/// Reflect-pads (edge-mirror, no duplicated border row) so both dims become
/// even; no-op for already-even dims.
Tensor<float> reflect_pad_to_even(const Tensor<float>& t);

/// Channel-mean + min-max normalization to a single-channel (replicated RGB)
/// heat map, for attention visualization.
template <typename T>
ImageU8 heat_map(const Tensor<T>& t);

extern template ImageU8 heat_map<float>(const Tensor<float>&);
extern template ImageU8 heat_map<double>(const Tensor<double>&);

}  // namespace rdaf
