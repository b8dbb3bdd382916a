#include "rdaf/data.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <iostream>
#include <map>
#include <numbers>

namespace rdaf {

std::vector<double> motion_kernel(const BlurSpec& spec, int& side) {
    spec.validate();
    side = spec.kernel_len | 1;  // odd side always covers the segment
    std::vector<double> k(static_cast<size_t>(side) * side, 0.0);
    const int r = side / 2;
    if (spec.kernel_len == 1) {
        k[static_cast<size_t>(r) * side + r] = 1.0;
        return k;
    }
    const double span = static_cast<double>(spec.kernel_len - 1);
    const double dx = std::cos(spec.angle), dy = std::sin(spec.angle);
    const double wpt = 1.0 / static_cast<double>(spec.n_subframes);
    for (int i = 0; i < spec.n_subframes; ++i) {
        const double t = static_cast<double>(i) / static_cast<double>(spec.n_subframes - 1) - 0.5;
        const double px = r + t * span * dx;
        const double py = r + t * span * dy;
        const int x0 = static_cast<int>(std::floor(px));
        const int y0 = static_cast<int>(std::floor(py));
        const double fx = px - x0, fy = py - y0;
        // bilinear splat
        for (int oy = 0; oy <= 1; ++oy)
            for (int ox = 0; ox <= 1; ++ox) {
                const int xx = x0 + ox, yy = y0 + oy;
                if (xx < 0 || xx >= side || yy < 0 || yy >= side) continue;
                const double w = (ox ? fx : 1.0 - fx) * (oy ? fy : 1.0 - fy);
                k[static_cast<size_t>(yy) * side + xx] += wpt * w;
            }
    }
    double sum = 0.0;
    for (double v : k) sum += v;
    for (double& v : k) v /= sum;
    return k;
}

ImagePair synth_blur(const Tensor<float>& sharp, const BlurSpec& spec, const std::string& id) {
    const Shape s = sharp.shape();
    int side = 0;
    const std::vector<double> kernel = motion_kernel(spec, side);
    RDAF_CHECK(side <= s.h && side <= s.w, "synth_blur: kernel side ", side,
               " exceeds image dims ", s.h, "x", s.w);
    const int r = side / 2;
    std::vector<float> out(static_cast<size_t>(s.numel()));
    const auto src = sharp.data();
    // Periodic extension keeps the kernel energy-conserving at the borders,
    // so the global mean survives exactly (up to rounding).
    auto wrap = [](i64 i, i64 n) {
        i %= n;
        return i < 0 ? i + n : i;
    };
    for (i64 n = 0; n < s.n; ++n)
        for (i64 c = 0; c < s.c; ++c) {
            const float* plane = src.data() + (n * s.c + c) * s.h * s.w;
            float* dst = out.data() + (n * s.c + c) * s.h * s.w;
            for (i64 y = 0; y < s.h; ++y)
                for (i64 x = 0; x < s.w; ++x) {
                    double acc = 0.0;
                    for (int ky = 0; ky < side; ++ky) {
                        const i64 sy = wrap(y + ky - r, s.h);
                        for (int kx = 0; kx < side; ++kx) {
                            const double w = kernel[static_cast<size_t>(ky) * side + kx];
                            if (w == 0.0) continue;
                            const i64 sx = wrap(x + kx - r, s.w);
                            acc += w * static_cast<double>(plane[sy * s.w + sx]);
                        }
                    }
                    dst[y * s.w + x] = static_cast<float>(acc);
                }
        }
    ImagePair pair;
    pair.sharp = sharp;
    pair.blurred = Tensor<float>::from_data(s, std::move(out));
    pair.id = id;
    return pair;
}

namespace {

void fill_rect(std::vector<float>& img, i64 size, i64 c, i64 y0, i64 x0, i64 h, i64 w, float v) {
    float* plane = img.data() + c * size * size;
    for (i64 y = y0; y < std::min(y0 + h, size); ++y)
        for (i64 x = x0; x < std::min(x0 + w, size); ++x)
            plane[y * size + x] = v;
}

void draw_stroke(std::vector<float>& img, i64 size, SplitMix64& rng) {
    const double x0 = rng.uniform(0.0, static_cast<double>(size));
    const double y0 = rng.uniform(0.0, static_cast<double>(size));
    const double ang = rng.uniform(0.0, 2.0 * std::numbers::pi);
    const double len = rng.uniform(static_cast<double>(size) / 8.0, static_cast<double>(size) / 2.0);
    const int thick = static_cast<int>(rng.uniform_int(1, 2));
    float col[3];
    for (float& v : col) v = static_cast<float>(rng.uniform(-1.0, 1.0));
    const int steps = static_cast<int>(len * 2.0) + 1;
    for (int i = 0; i <= steps; ++i) {
        const double t = static_cast<double>(i) / steps;
        const i64 cy = static_cast<i64>(std::lround(y0 + t * len * std::sin(ang)));
        const i64 cx = static_cast<i64>(std::lround(x0 + t * len * std::cos(ang)));
        for (i64 dy = 0; dy < thick; ++dy)
            for (i64 dx = 0; dx < thick; ++dx) {
                const i64 y = cy + dy, x = cx + dx;
                if (y < 0 || y >= size || x < 0 || x >= size) continue;
                for (i64 c = 0; c < 3; ++c)
                    img[static_cast<size_t>((c * size + y) * size + x)] = col[c];
            }
    }
}

}  // namespace

std::vector<ImagePair> synth_dataset(int n, int size, std::uint64_t seed) {
    RDAF_CHECK(n >= 1, "synth_dataset: n must be >= 1, got ", n);
    RDAF_CHECK(size >= 32 && size % 2 == 0, "synth_dataset: size must be even and >= 32, got ",
               size);
    std::vector<ImagePair> pairs;
    pairs.reserve(static_cast<size_t>(n));
    for (int i = 0; i < n; ++i) {
        SplitMix64 rng(SplitMix64::mix(seed, static_cast<std::uint64_t>(i)));
        std::vector<float> img(static_cast<size_t>(3) * size * size);
        // smooth background gradient
        for (i64 c = 0; c < 3; ++c) {
            const float a = static_cast<float>(rng.uniform(-0.5, 0.5));
            const float gx = static_cast<float>(rng.uniform(-0.6, 0.6));
            const float gy = static_cast<float>(rng.uniform(-0.6, 0.6));
            for (i64 y = 0; y < size; ++y)
                for (i64 x = 0; x < size; ++x)
                    img[static_cast<size_t>((c * size + y) * size + x)] =
                        a + gx * static_cast<float>(x) / size + gy * static_cast<float>(y) / size;
        }
        const int n_rects = static_cast<int>(rng.uniform_int(4, 8));
        for (int rct = 0; rct < n_rects; ++rct) {
            const i64 y0 = rng.uniform_int(0, size - 2);
            const i64 x0 = rng.uniform_int(0, size - 2);
            const i64 h = rng.uniform_int(size / 16, size / 3);
            const i64 w = rng.uniform_int(size / 16, size / 3);
            for (i64 c = 0; c < 3; ++c)
                fill_rect(img, size, c, y0, x0, h, w, static_cast<float>(rng.uniform(-1.0, 1.0)));
        }
        const int n_strokes = static_cast<int>(rng.uniform_int(6, 12));
        for (int st = 0; st < n_strokes; ++st) draw_stroke(img, size, rng);
        for (float& v : img) v = std::clamp(v, -1.0f, 1.0f);

        BlurSpec spec;
        spec.kernel_len = static_cast<int>(rng.uniform_int(2, 6)) * 2 + 1;  // odd, 5..13
        spec.angle = rng.uniform(0.0, std::numbers::pi);
        spec.n_subframes = 40;
        spec.seed = SplitMix64::mix(seed, static_cast<std::uint64_t>(i) ^ 0x5Du);
        auto sharp = Tensor<float>::from_data(Shape{1, 3, size, size}, std::move(img));
        char id[32];
        std::snprintf(id, sizeof(id), "synth_%04d", i);
        pairs.push_back(synth_blur(sharp, spec, id));
    }
    return pairs;
}

namespace {

Tensor<float> crop(const Tensor<float>& t, i64 y0, i64 x0, i64 h, i64 w) {
    const Shape s = t.shape();
    std::vector<float> out(static_cast<size_t>(s.n * s.c * h * w));
    const auto src = t.data();
    for (i64 n = 0; n < s.n; ++n)
        for (i64 c = 0; c < s.c; ++c)
            for (i64 y = 0; y < h; ++y)
                for (i64 x = 0; x < w; ++x)
                    out[static_cast<size_t>(((n * s.c + c) * h + y) * w + x)] =
                        src[static_cast<size_t>(((n * s.c + c) * s.h + y0 + y) * s.w + x0 + x)];
    return Tensor<float>::from_data(Shape{s.n, s.c, h, w}, std::move(out));
}

Tensor<float> flip(const Tensor<float>& t, bool horizontal) {
    const Shape s = t.shape();
    std::vector<float> out(static_cast<size_t>(s.numel()));
    const auto src = t.data();
    for (i64 n = 0; n < s.n; ++n)
        for (i64 c = 0; c < s.c; ++c)
            for (i64 y = 0; y < s.h; ++y)
                for (i64 x = 0; x < s.w; ++x) {
                    const i64 sy = horizontal ? y : s.h - 1 - y;
                    const i64 sx = horizontal ? s.w - 1 - x : x;
                    out[static_cast<size_t>(((n * s.c + c) * s.h + y) * s.w + x)] =
                        src[static_cast<size_t>(((n * s.c + c) * s.h + sy) * s.w + sx)];
                }
    return Tensor<float>::from_data(s, std::move(out));
}

Tensor<float> rot90(const Tensor<float>& t) {
    const Shape s = t.shape();
    const Shape os{s.n, s.c, s.w, s.h};
    std::vector<float> out(static_cast<size_t>(s.numel()));
    const auto src = t.data();
    for (i64 n = 0; n < s.n; ++n)
        for (i64 c = 0; c < s.c; ++c)
            for (i64 y = 0; y < os.h; ++y)
                for (i64 x = 0; x < os.w; ++x)
                    // counter-clockwise: (y, x) <- (x, H_out - 1 - y) of the source
                    out[static_cast<size_t>(((n * s.c + c) * os.h + y) * os.w + x)] =
                        src[static_cast<size_t>(((n * s.c + c) * s.h + x) * s.w + (s.w - 1 - y))];
    return Tensor<float>::from_data(os, std::move(out));
}

}  // namespace

ImagePair augment(const ImagePair& pair, SplitMix64& rng, int crop_size, bool geometric) {
    const Shape s = pair.blurred.shape();
    RDAF_CHECK(pair.sharp.shape() == s, "augment: pair shapes differ");
    i64 ch = crop_size > 0 ? crop_size : s.h;
    i64 cw = crop_size > 0 ? crop_size : s.w;
    RDAF_CHECK(ch <= s.h && cw <= s.w, "augment: crop ", ch, "x", cw,
               " larger than image ", s.h, "x", s.w);
    const i64 y0 = s.h == ch ? 0 : rng.uniform_int(0, s.h - ch);
    const i64 x0 = s.w == cw ? 0 : rng.uniform_int(0, s.w - cw);
    ImagePair out;
    out.id = pair.id;
    out.blurred = crop(pair.blurred, y0, x0, ch, cw);
    out.sharp = crop(pair.sharp, y0, x0, ch, cw);
    if (!geometric) return out;
    const bool fh = rng.bernoulli();
    const bool fv = rng.bernoulli();
    // non-square crops only rotate by multiples of 180 degrees
    const int quarter = ch == cw ? static_cast<int>(rng.uniform_int(0, 3))
                                 : 2 * static_cast<int>(rng.uniform_int(0, 1));
    auto apply = [&](Tensor<float> t) {
        if (fh) t = flip(t, true);
        if (fv) t = flip(t, false);
        for (int k = 0; k < quarter; ++k) t = rot90(t);
        return t;
    };
    out.blurred = apply(out.blurred);
    out.sharp = apply(out.sharp);
    return out;
}

PairDirectory::PairDirectory(const std::filesystem::path& root) {
    namespace fs = std::filesystem;
    const fs::path blur_dir = root / "blur";
    const fs::path sharp_dir = root / "sharp";
    RDAF_CHECK(fs::is_directory(blur_dir), "PairDirectory: missing directory ",
               blur_dir.string());
    RDAF_CHECK(fs::is_directory(sharp_dir), "PairDirectory: missing directory ",
               sharp_dir.string());
    std::map<std::string, fs::path> sharp_files;
    for (const auto& e : fs::directory_iterator(sharp_dir))
        if (e.path().extension() == ".png") sharp_files[e.path().filename().string()] = e.path();
    std::map<std::string, fs::path> blur_files;
    for (const auto& e : fs::directory_iterator(blur_dir))
        if (e.path().extension() == ".png") blur_files[e.path().filename().string()] = e.path();
    for (const auto& [name, path] : blur_files) {
        auto it = sharp_files.find(name);
        if (it == sharp_files.end()) {
            std::cerr << "warning: " << path.string() << " has no sharp counterpart, skipped\n";
            continue;
        }
        entries_.push_back({path, it->second, fs::path(name).stem().string()});
    }
    for (const auto& [name, path] : sharp_files)
        if (!blur_files.contains(name))
            std::cerr << "warning: " << path.string() << " has no blurred counterpart, skipped\n";
}

ImagePair PairDirectory::load(size_t i) const {
    const Entry& e = entries_.at(i);
    ImagePair pair;
    pair.blurred = image_to_tensor(read_png(e.blurred));
    pair.sharp = image_to_tensor(read_png(e.sharp));
    pair.id = e.id;
    RDAF_CHECK(pair.blurred.shape() == pair.sharp.shape(), "PairDirectory: pair ", e.id,
               " has mismatched dims ", pair.blurred.shape(), " vs ", pair.sharp.shape());
    return pair;
}

void write_pair_dir(const std::filesystem::path& root, const std::vector<ImagePair>& pairs) {
    namespace fs = std::filesystem;
    fs::create_directories(root / "blur");
    fs::create_directories(root / "sharp");
    std::string manifest;
    for (const auto& p : pairs) {
        write_png(root / "blur" / (p.id + ".png"), tensor_to_image(p.blurred));
        write_png(root / "sharp" / (p.id + ".png"), tensor_to_image(p.sharp));
        manifest += p.id + "\n";
    }
    std::ofstream mf(root / "manifest.txt", std::ios::trunc);
    mf << manifest;
}

}  // namespace rdaf
