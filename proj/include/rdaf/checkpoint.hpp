#pragma once

#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>
#include <vector>

#include "rdaf/network.hpp"

namespace rdaf {

/// On-disk layout: magic "RDAF", u32 format version, u32 record count, then
/// per record {u32 name length, UTF-8 name, u8 dtype tag, u8 rank, u32 dims,
/// raw little-endian values}. Optimizer moments live under "opt/", run
/// metadata under "meta/".
namespace ckpt {

constexpr std::uint32_t kVersion = 1;

enum class DType : std::uint8_t { f32 = 0, f64 = 1, u64 = 2 };

struct Record {
    std::string name;
    DType dtype = DType::f32;
    std::vector<std::uint32_t> dims;
    std::vector<std::uint8_t> raw;  // little-endian payload

    i64 element_count() const;
    /// Values widened to double regardless of stored dtype.
    std::vector<double> as_doubles() const;
    std::vector<std::uint64_t> as_u64() const;
};

struct Archive {
    std::vector<Record> records;

    const Record* find(const std::string& name) const;
    Record& add(const std::string& name, DType dtype, std::vector<std::uint32_t> dims);

    void add_scalar_u64(const std::string& name, std::uint64_t v);
    std::optional<std::uint64_t> scalar_u64(const std::string& name) const;

    template <typename T>
    void add_tensor(const std::string& name, const Tensor<T>& t);
};

void save(const std::filesystem::path& path, const Archive& a);
Archive load(const std::filesystem::path& path);

}  // namespace ckpt

/// Epoch/step counters and the run seed carried alongside the weights.
struct CheckpointMeta {
    std::uint64_t epoch = 0;
    std::uint64_t step = 0;
    std::uint64_t seed = 0;
};

/// Serializes the architecture so a checkpoint is self-describing.
void write_network_config(ckpt::Archive& a, const NetworkConfig& cfg);
NetworkConfig read_network_config(const ckpt::Archive& a);

void write_meta(ckpt::Archive& a, const CheckpointMeta& m);
CheckpointMeta read_meta(const ckpt::Archive& a);

template <typename T>
void write_params(ckpt::Archive& a, NetParams<T>& net);

/// Copies stored values into an existing network; every parameter must have
/// a record of matching extents. Lists all mismatches in the diagnostic.
template <typename T>
void read_params(const ckpt::Archive& a, NetParams<T>& net);

#define RDAF_DECLARE_CKPT(T)                                                   \
    extern template void ckpt::Archive::add_tensor<T>(const std::string&,      \
                                                      const Tensor<T>&);       \
    extern template void write_params<T>(ckpt::Archive&, NetParams<T>&);       \
    extern template void read_params<T>(const ckpt::Archive&, NetParams<T>&);

RDAF_DECLARE_CKPT(float)
RDAF_DECLARE_CKPT(double)
#undef RDAF_DECLARE_CKPT

}  // namespace rdaf
