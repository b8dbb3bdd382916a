#include "rdaf/checkpoint.hpp"

#include <bit>
#include <cstring>
#include <fstream>

namespace rdaf {
namespace ckpt {

namespace {

constexpr char kMagic[4] = {'R', 'D', 'A', 'F'};

size_t dtype_size(DType d) {
    switch (d) {
        case DType::f32: return 4;
        case DType::f64: return 8;
        case DType::u64: return 8;
    }
    throw std::invalid_argument("checkpoint: unknown dtype tag");
}

template <typename T>
void put(std::string& buf, T v) {
    // Host is little-endian; raw copy preserves the on-disk contract.
    static_assert(std::endian::native == std::endian::little);
    const char* p = reinterpret_cast<const char*>(&v);
    buf.append(p, sizeof(T));
}

template <typename T>
T take(const std::vector<std::uint8_t>& buf, size_t& off, const char* what) {
    RDAF_CHECK(off + sizeof(T) <= buf.size(), "checkpoint: truncated file while reading ", what);
    T v;
    std::memcpy(&v, buf.data() + off, sizeof(T));
    off += sizeof(T);
    return v;
}

template <typename T>
DType dtype_of();
template <>
DType dtype_of<float>() { return DType::f32; }
template <>
DType dtype_of<double>() { return DType::f64; }

}  // namespace

i64 Record::element_count() const {
    i64 n = 1;
    for (std::uint32_t d : dims) n *= static_cast<i64>(d);
    return n;
}

std::vector<double> Record::as_doubles() const {
    const i64 n = element_count();
    std::vector<double> out(static_cast<size_t>(n));
    if (dtype == DType::f32) {
        RDAF_CHECK(raw.size() == static_cast<size_t>(n) * 4, "checkpoint: bad payload for ", name);
        for (i64 i = 0; i < n; ++i) {
            float v;
            std::memcpy(&v, raw.data() + i * 4, 4);
            out[i] = v;
        }
    } else if (dtype == DType::f64) {
        RDAF_CHECK(raw.size() == static_cast<size_t>(n) * 8, "checkpoint: bad payload for ", name);
        std::memcpy(out.data(), raw.data(), raw.size());
    } else {
        throw std::invalid_argument(detail::cat("checkpoint: ", name, " is not a float record"));
    }
    return out;
}

std::vector<std::uint64_t> Record::as_u64() const {
    RDAF_CHECK(dtype == DType::u64, "checkpoint: ", name, " is not a u64 record");
    const i64 n = element_count();
    RDAF_CHECK(raw.size() == static_cast<size_t>(n) * 8, "checkpoint: bad payload for ", name);
    std::vector<std::uint64_t> out(static_cast<size_t>(n));
    std::memcpy(out.data(), raw.data(), raw.size());
    return out;
}

const Record* Archive::find(const std::string& name) const {
    for (const auto& r : records)
        if (r.name == name) return &r;
    return nullptr;
}

Record& Archive::add(const std::string& name, DType dtype, std::vector<std::uint32_t> dims) {
    Record r;
    r.name = name;
    r.dtype = dtype;
    r.dims = std::move(dims);
    records.push_back(std::move(r));
    return records.back();
}

void Archive::add_scalar_u64(const std::string& name, std::uint64_t v) {
    Record& r = add(name, DType::u64, {});
    r.raw.resize(8);
    std::memcpy(r.raw.data(), &v, 8);
}

std::optional<std::uint64_t> Archive::scalar_u64(const std::string& name) const {
    const Record* r = find(name);
    if (!r) return std::nullopt;
    auto v = r->as_u64();
    RDAF_CHECK(v.size() == 1, "checkpoint: ", name, " is not scalar");
    return v[0];
}

template <typename T>
void Archive::add_tensor(const std::string& name, const Tensor<T>& t) {
    const Shape s = t.shape();
    Record& r = add(name, dtype_of<T>(),
                    {static_cast<std::uint32_t>(s.n), static_cast<std::uint32_t>(s.c),
                     static_cast<std::uint32_t>(s.h), static_cast<std::uint32_t>(s.w)});
    r.raw.resize(t.data().size() * sizeof(T));
    std::memcpy(r.raw.data(), t.data().data(), r.raw.size());
}

void save(const std::filesystem::path& path, const Archive& a) {
    std::string buf;
    buf.append(kMagic, 4);
    put<std::uint32_t>(buf, kVersion);
    put<std::uint32_t>(buf, static_cast<std::uint32_t>(a.records.size()));
    for (const auto& r : a.records) {
        put<std::uint32_t>(buf, static_cast<std::uint32_t>(r.name.size()));
        buf.append(r.name);
        buf.push_back(static_cast<char>(r.dtype));
        buf.push_back(static_cast<char>(r.dims.size()));
        for (std::uint32_t d : r.dims) put<std::uint32_t>(buf, d);
        RDAF_CHECK(r.raw.size() ==
                       static_cast<size_t>(r.element_count()) * dtype_size(r.dtype),
                   "checkpoint: payload size mismatch for ", r.name);
        buf.append(reinterpret_cast<const char*>(r.raw.data()), r.raw.size());
    }
    std::ofstream f(path, std::ios::binary | std::ios::trunc);
    RDAF_CHECK(f.good(), "checkpoint: cannot open ", path.string(), " for writing");
    f.write(buf.data(), static_cast<std::streamsize>(buf.size()));
    RDAF_CHECK(f.good(), "checkpoint: write failed for ", path.string());
}

Archive load(const std::filesystem::path& path) {
    std::ifstream f(path, std::ios::binary);
    RDAF_CHECK(f.good(), "checkpoint: cannot open ", path.string());
    std::vector<std::uint8_t> buf((std::istreambuf_iterator<char>(f)),
                                  std::istreambuf_iterator<char>());
    size_t off = 0;
    RDAF_CHECK(buf.size() >= 4 && std::memcmp(buf.data(), kMagic, 4) == 0,
               "checkpoint: ", path.string(), " does not start with the RDAF magic");
    off = 4;
    const auto version = take<std::uint32_t>(buf, off, "version");
    RDAF_CHECK(version == kVersion, "checkpoint: unsupported format version ", version);
    const auto count = take<std::uint32_t>(buf, off, "record count");
    Archive a;
    a.records.reserve(count);
    for (std::uint32_t i = 0; i < count; ++i) {
        Record r;
        const auto name_len = take<std::uint32_t>(buf, off, "name length");
        RDAF_CHECK(off + name_len <= buf.size(), "checkpoint: truncated record name");
        r.name.assign(reinterpret_cast<const char*>(buf.data() + off), name_len);
        off += name_len;
        r.dtype = static_cast<DType>(take<std::uint8_t>(buf, off, "dtype"));
        dtype_size(r.dtype);  // validates the tag
        const auto rank = take<std::uint8_t>(buf, off, "rank");
        for (std::uint8_t d = 0; d < rank; ++d)
            r.dims.push_back(take<std::uint32_t>(buf, off, "dims"));
        const size_t bytes = static_cast<size_t>(r.element_count()) * dtype_size(r.dtype);
        RDAF_CHECK(off + bytes <= buf.size(), "checkpoint: truncated payload for ", r.name);
        r.raw.assign(buf.begin() + static_cast<std::ptrdiff_t>(off),
                     buf.begin() + static_cast<std::ptrdiff_t>(off + bytes));
        off += bytes;
        a.records.push_back(std::move(r));
    }
    RDAF_CHECK(off == buf.size(), "checkpoint: ", buf.size() - off, " trailing bytes in ",
               path.string());
    return a;
}

template void Archive::add_tensor<float>(const std::string&, const Tensor<float>&);
template void Archive::add_tensor<double>(const std::string&, const Tensor<double>&);

}  // namespace ckpt

// ---------------------------------------------------------------------------
// network <-> archive
// ---------------------------------------------------------------------------

void write_network_config(ckpt::Archive& a, const NetworkConfig& cfg) {
    a.add_scalar_u64("meta/arch/stages", static_cast<std::uint64_t>(cfg.stages));
    {
        ckpt::Record& r = a.add("meta/arch/blocks_per_stage", ckpt::DType::u64,
                                {static_cast<std::uint32_t>(cfg.blocks_per_stage.size())});
        r.raw.resize(cfg.blocks_per_stage.size() * 8);
        for (size_t i = 0; i < cfg.blocks_per_stage.size(); ++i) {
            const std::uint64_t v = static_cast<std::uint64_t>(cfg.blocks_per_stage[i]);
            std::memcpy(r.raw.data() + i * 8, &v, 8);
        }
    }
    a.add_scalar_u64("meta/arch/conv_layers", static_cast<std::uint64_t>(cfg.block.conv_layers));
    a.add_scalar_u64("meta/arch/filters", static_cast<std::uint64_t>(cfg.block.filters));
    a.add_scalar_u64("meta/arch/use_am", cfg.block.use_am);
    a.add_scalar_u64("meta/arch/use_afm", cfg.block.use_afm);
    a.add_scalar_u64("meta/arch/use_lrl", cfg.block.use_lrl);
    a.add_scalar_u64("meta/arch/eq4_literal", cfg.block.eq4_literal);
    a.add_scalar_u64("meta/arch/gate_last_conv", cfg.block.gate_last_conv);
    a.add_scalar_u64("meta/arch/in_channels", static_cast<std::uint64_t>(cfg.in_channels));
    a.add_scalar_u64("meta/arch/head_kernel", static_cast<std::uint64_t>(cfg.head_kernel));
    a.add_scalar_u64("meta/arch/variant", cfg.variant == BlockVariant::rdb ? 1 : 0);
    a.add_scalar_u64("meta/arch/rdb_growth", static_cast<std::uint64_t>(cfg.rdb_growth));
}

NetworkConfig read_network_config(const ckpt::Archive& a) {
    NetworkConfig cfg;
    auto need = [&](const std::string& name) {
        auto v = a.scalar_u64(name);
        RDAF_CHECK(v.has_value(), "checkpoint: missing record ", name);
        return *v;
    };
    cfg.stages = static_cast<int>(need("meta/arch/stages"));
    const ckpt::Record* bps = a.find("meta/arch/blocks_per_stage");
    RDAF_CHECK(bps != nullptr, "checkpoint: missing record meta/arch/blocks_per_stage");
    cfg.blocks_per_stage.clear();
    for (std::uint64_t v : bps->as_u64()) cfg.blocks_per_stage.push_back(static_cast<int>(v));
    cfg.block.conv_layers = static_cast<int>(need("meta/arch/conv_layers"));
    cfg.block.filters = static_cast<int>(need("meta/arch/filters"));
    cfg.block.use_am = need("meta/arch/use_am") != 0;
    cfg.block.use_afm = need("meta/arch/use_afm") != 0;
    cfg.block.use_lrl = need("meta/arch/use_lrl") != 0;
    cfg.block.eq4_literal = need("meta/arch/eq4_literal") != 0;
    cfg.block.gate_last_conv = need("meta/arch/gate_last_conv") != 0;
    cfg.in_channels = static_cast<int>(need("meta/arch/in_channels"));
    cfg.head_kernel = static_cast<int>(need("meta/arch/head_kernel"));
    cfg.variant = need("meta/arch/variant") == 1 ? BlockVariant::rdb : BlockVariant::rdaf;
    cfg.rdb_growth = static_cast<int>(need("meta/arch/rdb_growth"));
    cfg.validate();
    return cfg;
}

void write_meta(ckpt::Archive& a, const CheckpointMeta& m) {
    a.add_scalar_u64("meta/epoch", m.epoch);
    a.add_scalar_u64("meta/step", m.step);
    a.add_scalar_u64("meta/seed", m.seed);
}

CheckpointMeta read_meta(const ckpt::Archive& a) {
    CheckpointMeta m;
    m.epoch = a.scalar_u64("meta/epoch").value_or(0);
    m.step = a.scalar_u64("meta/step").value_or(0);
    m.seed = a.scalar_u64("meta/seed").value_or(0);
    return m;
}

template <typename T>
void write_params(ckpt::Archive& a, NetParams<T>& net) {
    for_each_param<T>(net, [&](const std::string& name, Tensor<T>& t) {
        a.add_tensor<T>(name, t);
    });
}

template <typename T>
void read_params(const ckpt::Archive& a, NetParams<T>& net) {
    std::vector<std::string> problems;
    for_each_param<T>(net, [&](const std::string& name, Tensor<T>& t) {
        const ckpt::Record* r = a.find(name);
        if (!r) {
            problems.push_back(detail::cat(name, ": missing"));
            return;
        }
        const Shape s = t.shape();
        const std::vector<std::uint32_t> want{
            static_cast<std::uint32_t>(s.n), static_cast<std::uint32_t>(s.c),
            static_cast<std::uint32_t>(s.h), static_cast<std::uint32_t>(s.w)};
        if (r->dims != want) {
            std::string dims;
            for (auto d : r->dims) dims += detail::cat(d, " ");
            problems.push_back(detail::cat(name, ": stored dims [", dims, "] vs expected ", s));
            return;
        }
        const auto vals = r->as_doubles();
        auto dst = t.data_mut();
        for (size_t i = 0; i < vals.size(); ++i) dst[i] = static_cast<T>(vals[i]);
    });
    if (!problems.empty()) {
        std::string msg = "checkpoint: incompatible records:";
        for (const auto& p : problems) msg += "\n  " + p;
        throw std::invalid_argument(msg);
    }
}

template void write_params<float>(ckpt::Archive&, NetParams<float>&);
template void write_params<double>(ckpt::Archive&, NetParams<double>&);
template void read_params<float>(const ckpt::Archive&, NetParams<float>&);
template void read_params<double>(const ckpt::Archive&, NetParams<double>&);

}  // namespace rdaf
