#pragma once

#include <filesystem>
#include <string>
#include <vector>

#include "rdaf/image.hpp"
#include "rdaf/rng.hpp"

namespace rdaf {

/// Blurred/sharp training pair, both (1,3,H,W) in [-1,1].
struct ImagePair {
    Tensor<float> blurred;
    Tensor<float> sharp;
    std::string id;
};

/// Linear motion blur: a length/angle segment rasterized from n_subframes
/// sample points, normalized to sum 1.
struct BlurSpec {
    int kernel_len = 9;
    double angle = 0.0;  // radians
    int n_subframes = 32;
    std::uint64_t seed = 0;

    void validate() const {
        RDAF_CHECK(kernel_len >= 1 && kernel_len <= 31, "BlurSpec: kernel_len must be in 1..31, got ",
                   kernel_len);
        RDAF_CHECK(n_subframes >= 2, "BlurSpec: n_subframes must be >= 2, got ", n_subframes);
    }
};

/// Square kernel of side kernel_len (odd-sized; even lengths round up),
/// normalized to sum 1. kernel_len == 1 is the identity.
std::vector<double> motion_kernel(const BlurSpec& spec, int& side);

/// Convolves with the motion kernel under reflective padding. The global
/// mean is preserved to ~1e-6.
ImagePair synth_blur(const Tensor<float>& sharp, const BlurSpec& spec,
                     const std::string& id = "synthetic");

/// Procedural sharp images (rectangles, strokes, radial gradients) blurred
/// with per-pair randomized specs; bit-reproducible from the seed.
std::vector<ImagePair> synth_dataset(int n, int size, std::uint64_t seed);

/// Same random crop / flips / k*90-degree rotation applied to both images.
/// crop_size 0 keeps the full frame.
ImagePair augment(const ImagePair& pair, SplitMix64& rng, int crop_size,
                  bool geometric = true);

/// Lazily decoded blur/ + sharp/ paired directory; pairs are matched by
/// filename, unmatched files are skipped with a warning on stderr.
class PairDirectory {
  public:
    explicit PairDirectory(const std::filesystem::path& root);

    size_t size() const { return entries_.size(); }
    bool empty() const { return entries_.empty(); }
    ImagePair load(size_t i) const;
    const std::string& id(size_t i) const { return entries_[i].id; }

  private:
    struct Entry {
        std::filesystem::path blurred;
        std::filesystem::path sharp;
        std::string id;
    };
    std::vector<Entry> entries_;
};

/// Writes pairs as root/blur/<id>.png + root/sharp/<id>.png and a manifest
/// listing the pair ids.
void write_pair_dir(const std::filesystem::path& root, const std::vector<ImagePair>& pairs);

}  // namespace rdaf
