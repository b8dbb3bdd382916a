#include "rdaf/image.hpp"

#include <png.h>

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <limits>
#include <memory>

namespace rdaf {

namespace {

struct FileCloser {
    void operator()(std::FILE* f) const {
        if (f) std::fclose(f);
    }
};
using FilePtr = std::unique_ptr<std::FILE, FileCloser>;

}  // namespace

ImageU8 read_png(const std::filesystem::path& path) {
    FilePtr fp(std::fopen(path.string().c_str(), "rb"));
    RDAF_CHECK(fp != nullptr, "read_png: cannot open ", path.string());

    png_structp png = png_create_read_struct(PNG_LIBPNG_VER_STRING, nullptr, nullptr, nullptr);
    RDAF_CHECK(png != nullptr, "read_png: png_create_read_struct failed");
    png_infop info = png_create_info_struct(png);
    if (!info) {
        png_destroy_read_struct(&png, nullptr, nullptr);
        throw std::invalid_argument("read_png: png_create_info_struct failed");
    }
    if (setjmp(png_jmpbuf(png))) {
        png_destroy_read_struct(&png, &info, nullptr);
        throw std::invalid_argument(detail::cat("read_png: failed to decode ", path.string()));
    }
    png_init_io(png, fp.get());
    png_read_info(png, info);

    const png_uint_32 w = png_get_image_width(png, info);
    const png_uint_32 h = png_get_image_height(png, info);
    const png_byte color = png_get_color_type(png, info);
    const png_byte depth = png_get_bit_depth(png, info);

    // Normalize everything to 8-bit RGB.
    if (depth == 16) png_set_strip_16(png);
    if (color == PNG_COLOR_TYPE_PALETTE) png_set_palette_to_rgb(png);
    if (color == PNG_COLOR_TYPE_GRAY && depth < 8) png_set_expand_gray_1_2_4_to_8(png);
    if (png_get_valid(png, info, PNG_INFO_tRNS)) png_set_tRNS_to_alpha(png);
    if (color == PNG_COLOR_TYPE_GRAY || color == PNG_COLOR_TYPE_GRAY_ALPHA)
        png_set_gray_to_rgb(png);
    if (color & PNG_COLOR_MASK_ALPHA || png_get_valid(png, info, PNG_INFO_tRNS))
        png_set_strip_alpha(png);
    png_read_update_info(png, info);

    ImageU8 img;
    img.h = static_cast<int>(h);
    img.w = static_cast<int>(w);
    img.channels = 3;
    img.pix.resize(static_cast<size_t>(img.h) * img.w * 3);
    RDAF_CHECK(png_get_rowbytes(png, info) == static_cast<size_t>(img.w) * 3,
               "read_png: unexpected row size in ", path.string());
    std::vector<png_bytep> rows(h);
    for (png_uint_32 y = 0; y < h; ++y) rows[y] = img.pix.data() + static_cast<size_t>(y) * w * 3;
    png_read_image(png, rows.data());
    png_read_end(png, nullptr);
    png_destroy_read_struct(&png, &info, nullptr);
    return img;
}

void write_png(const std::filesystem::path& path, const ImageU8& img) {
    RDAF_CHECK(img.channels == 3, "write_png: expected 3 channels, got ", img.channels);
    RDAF_CHECK(img.h >= 1 && img.w >= 1, "write_png: empty image");
    FilePtr fp(std::fopen(path.string().c_str(), "wb"));
    RDAF_CHECK(fp != nullptr, "write_png: cannot open ", path.string(), " for writing");

    png_structp png = png_create_write_struct(PNG_LIBPNG_VER_STRING, nullptr, nullptr, nullptr);
    RDAF_CHECK(png != nullptr, "write_png: png_create_write_struct failed");
    png_infop info = png_create_info_struct(png);
    if (!info) {
        png_destroy_write_struct(&png, nullptr);
        throw std::invalid_argument("write_png: png_create_info_struct failed");
    }
    if (setjmp(png_jmpbuf(png))) {
        png_destroy_write_struct(&png, &info);
        throw std::invalid_argument(detail::cat("write_png: failed to encode ", path.string()));
    }
    png_init_io(png, fp.get());
    png_set_IHDR(png, info, static_cast<png_uint_32>(img.w), static_cast<png_uint_32>(img.h), 8,
                 PNG_COLOR_TYPE_RGB, PNG_INTERLACE_NONE, PNG_COMPRESSION_TYPE_DEFAULT,
                 PNG_FILTER_TYPE_DEFAULT);
    png_write_info(png, info);
    std::vector<png_bytep> rows(static_cast<size_t>(img.h));
    for (int y = 0; y < img.h; ++y)
        rows[static_cast<size_t>(y)] =
            const_cast<png_bytep>(img.pix.data() + static_cast<size_t>(y) * img.w * 3);
    png_write_image(png, rows.data());
    png_write_end(png, nullptr);
    png_destroy_write_struct(&png, &info);
}

Tensor<float> image_to_tensor(const ImageU8& img) {
    RDAF_CHECK(img.channels == 3, "image_to_tensor: expected 3 channels");
    const Shape s{1, 3, img.h, img.w};
    std::vector<float> data(static_cast<size_t>(s.numel()));
    for (int c = 0; c < 3; ++c)
        for (int y = 0; y < img.h; ++y)
            for (int x = 0; x < img.w; ++x)
                data[static_cast<size_t>((c * img.h + y) * img.w + x)] =
                    static_cast<float>(img.at(y, x, c)) / 127.5f - 1.0f;
    return Tensor<float>::from_data(s, std::move(data));
}

ImageU8 tensor_to_image(const Tensor<float>& t) {
    const Shape s = t.shape();
    RDAF_CHECK(s.n == 1 && s.c == 3, "tensor_to_image: expected (1,3,H,W), got ", s);
    ImageU8 img;
    img.h = static_cast<int>(s.h);
    img.w = static_cast<int>(s.w);
    img.pix.resize(static_cast<size_t>(s.h * s.w * 3));
    const auto data = t.data();
    for (int c = 0; c < 3; ++c)
        for (int y = 0; y < img.h; ++y)
            for (int x = 0; x < img.w; ++x) {
                double v = data[static_cast<size_t>((c * s.h + y) * s.w + x)];
                v = std::clamp(v, -1.0, 1.0);
                const double level = std::floor((v + 1.0) * 127.5 + 0.5);  // round half up
                img.at(y, x, c) = static_cast<std::uint8_t>(std::clamp(level, 0.0, 255.0));
            }
    return img;
}

Tensor<float> reflect_pad_to_even(const Tensor<float>& t) {
    const Shape s = t.shape();
    const i64 ph = s.h % 2, pw = s.w % 2;
    if (ph == 0 && pw == 0) return t;
    RDAF_CHECK(s.h >= 2 || ph == 0, "reflect_pad_to_even: height too small to mirror");
    RDAF_CHECK(s.w >= 2 || pw == 0, "reflect_pad_to_even: width too small to mirror");
    const Shape os{s.n, s.c, s.h + ph, s.w + pw};
    std::vector<float> out(static_cast<size_t>(os.numel()));
    const auto src = t.data();
    for (i64 n = 0; n < s.n; ++n)
        for (i64 c = 0; c < s.c; ++c)
            for (i64 y = 0; y < os.h; ++y) {
                const i64 sy = y < s.h ? y : 2 * s.h - y - 2;
                for (i64 x = 0; x < os.w; ++x) {
                    const i64 sx = x < s.w ? x : 2 * s.w - x - 2;
                    out[static_cast<size_t>(((n * s.c + c) * os.h + y) * os.w + x)] =
                        src[static_cast<size_t>(((n * s.c + c) * s.h + sy) * s.w + sx)];
                }
            }
    return Tensor<float>::from_data(os, std::move(out));
}

template <typename T>
ImageU8 heat_map(const Tensor<T>& t) {
    const Shape s = t.shape();
    RDAF_CHECK(s.n == 1, "heat_map: expected batch of 1, got ", s);
    std::vector<double> plane(static_cast<size_t>(s.h * s.w), 0.0);
    const auto data = t.data();
    for (i64 c = 0; c < s.c; ++c)
        for (i64 i = 0; i < s.h * s.w; ++i)
            plane[static_cast<size_t>(i)] += static_cast<double>(data[(c * s.h * s.w) + i]);
    double lo = std::numeric_limits<double>::infinity(), hi = -lo;
    for (double& v : plane) {
        v /= static_cast<double>(s.c);
        lo = std::min(lo, v);
        hi = std::max(hi, v);
    }
    const double range = hi - lo;
    ImageU8 img;
    img.h = static_cast<int>(s.h);
    img.w = static_cast<int>(s.w);
    img.pix.resize(plane.size() * 3);
    for (size_t i = 0; i < plane.size(); ++i) {
        const double unit = range > 0.0 ? (plane[i] - lo) / range : 0.0;
        const auto level = static_cast<std::uint8_t>(std::lround(unit * 255.0));
        img.pix[i * 3] = img.pix[i * 3 + 1] = img.pix[i * 3 + 2] = level;
    }
    return img;
}

template ImageU8 heat_map<float>(const Tensor<float>&);
template ImageU8 heat_map<double>(const Tensor<double>&);

}  // namespace rdaf
