#pragma once

#include <functional>
#include <optional>
#include <string>
#include <vector>

#include "rdaf/blocks.hpp"

namespace rdaf {

enum class BlockVariant { rdaf, rdb };

/// Whole-network hyperparameters. The encoder-decoder of every stage is
/// head conv (7x7) -> stride-2 conv -> block stack -> stride-2 transposed
/// conv -> tail conv producing a residual added to the input image.
struct NetworkConfig {
    int stages = 1;
    std::vector<int> blocks_per_stage{16};
    RDAFBConfig block;  // block.filters is the network width
    int in_channels = 3;
    int head_kernel = 7;
    BlockVariant variant = BlockVariant::rdaf;
    int rdb_growth = 0;  // 0 = auto-match the rdaf parameter budget

    /// 16 blocks, 4 conv layers, 128 filters (~14.2M parameters).
    static NetworkConfig reference_single_stage();
    /// Three stages of 10/10/12 blocks (~28.8M parameters).
    static NetworkConfig reference_multi_stage();

    void validate() const;
    int resolved_growth() const;
};

template <typename T>
struct RdbParams {
    std::vector<Conv2dParams<T>> convs;  // 3x3, densely concatenated inputs
    Conv2dParams<T> fusion;              // 1x1 local fusion back to `filters`
};

template <typename T>
struct StageParams {
    Conv2dParams<T> head, down, up, tail;
    std::vector<RdafbParams<T>> blocks;
    std::vector<RdbParams<T>> rdb_blocks;
};

template <typename T>
struct NetParams {
    std::vector<StageParams<T>> stages;
    std::vector<Conv2dParams<T>> sam_proj;  // per stage boundary, 1x1 image->gate
    std::vector<Conv2dParams<T>> csff;      // per stage boundary, 1x1 on half-res features
};

template <typename T>
struct StageOutput {
    Tensor<T> restored;       // same extents as the stage input image
    Tensor<T> features_full;  // decoder features at image resolution
    Tensor<T> features_half;  // pre-upsample features
    AttentionTaps<T> attention_snapshots;
};

struct ForwardOptions {
    bool clamp_output = false;  // inference-only clamp of restored to [-1,1]
    int capture_stage = -1;     // attention snapshots: -1 = off
    int capture_block = -1;     // -1 = every block of the captured stage
};

template <typename T>
NetParams<T> make_network(const NetworkConfig& cfg, InitMode mode, std::uint64_t seed);

/// carried_sam / carried_csff come from the previous stage (null for the
/// first stage). Image dims must be even.
template <typename T>
StageOutput<T> stage_forward(const NetParams<T>& net, int stage_idx, const Tensor<T>& image,
                             const Tensor<T>* carried_sam, const Tensor<T>* carried_csff,
                             const NetworkConfig& cfg, const ForwardOptions& opts = {});

/// Runs every stage on the original-resolution image, threading SAM-gated
/// full-res features and CSFF half-res features across stage boundaries.
template <typename T>
std::vector<StageOutput<T>> multi_stage_forward(const NetParams<T>& net, const Tensor<T>& image,
                                                const NetworkConfig& cfg,
                                                const ForwardOptions& opts = {});

template <typename T>
void for_each_param(NetParams<T>& net,
                    const std::function<void(const std::string&, Tensor<T>&)>& fn);

template <typename T>
void zero_all_grads(NetParams<T>& net);

/// Exact scalar parameter count (weights + biases) from the configuration.
i64 count_params(const NetworkConfig& cfg);

/// Actual count over a built network; must agree with count_params(cfg).
template <typename T>
i64 count_params(NetParams<T>& net);

/// Analytic per-layer cost at the given input size.
struct CostTally {
    i64 params = 0;
    i64 macs = 0;         // conv multiply-accumulates
    i64 elementwise = 0;  // activations, gates, adds, bias applications
};
CostTally tally_network(const NetworkConfig& cfg, i64 h, i64 w);

/// Operation count at (h, w): mac_factor * MACs + one per elementwise op.
/// The default factor 1 mirrors the MAC-counting convention used by the
/// published budgets for this architecture family; pass 2 for strict
/// multiply+add FLOPs.
i64 estimate_flops(const NetworkConfig& cfg, i64 h, i64 w, double mac_factor = 1.0);

/// Single conv layer cost helper.
i64 conv2d_flops(i64 kh, i64 kw, i64 in_c, i64 out_c, i64 out_h, i64 out_w,
                 double mac_factor = 1.0);

// ---- RDB comparison variant ----

i64 rdb_param_count(int conv_layers, int filters, int growth);
/// Growth rate whose RDB block parameter count lands within 2% of the
/// RDAFB budget for the same layer count and width.
int rdb_growth_for(const RDAFBConfig& block);

template <typename T>
RdbParams<T> make_rdb(int conv_layers, int filters, int growth, InitMode mode, SplitMix64& rng);

template <typename T>
Tensor<T> rdb_forward(const RdbParams<T>& p, const Tensor<T>& input);

#define RDAF_DECLARE_NETWORK(T)                                                              \
    extern template NetParams<T> make_network<T>(const NetworkConfig&, InitMode,             \
                                                 std::uint64_t);                             \
    extern template StageOutput<T> stage_forward<T>(const NetParams<T>&, int,                \
                                                    const Tensor<T>&, const Tensor<T>*,     \
                                                    const Tensor<T>*, const NetworkConfig&, \
                                                    const ForwardOptions&);                  \
    extern template std::vector<StageOutput<T>> multi_stage_forward<T>(                      \
        const NetParams<T>&, const Tensor<T>&, const NetworkConfig&, const ForwardOptions&); \
    extern template void for_each_param<T>(                                                  \
        NetParams<T>&, const std::function<void(const std::string&, Tensor<T>&)>&);         \
    extern template void zero_all_grads<T>(NetParams<T>&);                                   \
    extern template i64 count_params<T>(NetParams<T>&);                                      \
    extern template RdbParams<T> make_rdb<T>(int, int, int, InitMode, SplitMix64&);          \
    extern template Tensor<T> rdb_forward<T>(const RdbParams<T>&, const Tensor<T>&);

RDAF_DECLARE_NETWORK(float)
RDAF_DECLARE_NETWORK(double)
#undef RDAF_DECLARE_NETWORK

}  // namespace rdaf
