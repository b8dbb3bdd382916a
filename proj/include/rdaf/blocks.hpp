#pragma once

#include <string>
#include <utility>
#include <vector>

#include "rdaf/rng.hpp"
#include "rdaf/tensor.hpp"

namespace rdaf {

/// Residual dense attention fusion block hyperparameters plus the ablation
/// switches. AFM fuses AM outputs, so use_afm requires use_am.
struct RDAFBConfig {
    int conv_layers = 4;
    int filters = 128;
    bool use_am = true;
    bool use_afm = true;
    bool use_lrl = true;
    /// Gate layer features with the block input instead of the layer's own
    /// feature (the literal reading of the recalibration step).
    bool eq4_literal = false;
    /// Also gate the last conv output before it enters the residual.
    bool gate_last_conv = false;

    void validate() const {
        RDAF_CHECK(conv_layers >= 1, "RDAFBConfig: conv_layers must be >= 1, got ", conv_layers);
        RDAF_CHECK(filters >= 1, "RDAFBConfig: filters must be >= 1, got ", filters);
        RDAF_CHECK(!use_afm || use_am, "RDAFBConfig: use_afm requires use_am");
    }
};

/// Sigmoid-gated map with the same shape as the feature it recalibrates;
/// every element lies strictly in (0,1).
template <typename T>
struct AttentionMap {
    Tensor<T> map;
};

template <typename T>
struct Conv2dParams {
    Tensor<T> weight;
    Tensor<T> bias;
};

/// Pixel attention: 1x1 conv (C -> C) followed by sigmoid.
template <typename T>
struct AttentionModuleParams {
    Conv2dParams<T> proj;
};

/// Attention fusion: channel-concat of the accumulated maps, 1x1 fusion conv
/// (arity*C -> C), then a separable 3x3 stage (depthwise + pointwise).
/// A final sigmoid keeps the output a valid attention map.
template <typename T>
struct AttentionFusionParams {
    Conv2dParams<T> fuse;
    Conv2dParams<T> dw;
    Conv2dParams<T> pw;
    int arity = 0;
};

template <typename T>
struct RdafbParams {
    std::vector<Conv2dParams<T>> convs;          // conv_layers 3x3 convs
    std::vector<AttentionModuleParams<T>> ams;   // empty when !use_am
    std::vector<AttentionFusionParams<T>> afms;  // empty when !use_afm
};

enum class InitMode {
    zeros,
    /// Feature convs from U(-1/sqrt(fan_in), 1/sqrt(fan_in)); attention convs
    /// start at zero so every gate opens at 0.5. Biases zero.
    fan_in_uniform,
};

/// Labeled attention maps captured during a forward pass ("am0" gates the
/// block input, "am<i>"/"afm<i>" belong to conv layer i).
template <typename T>
using AttentionTaps = std::vector<std::pair<std::string, Tensor<T>>>;

template <typename T>
Conv2dParams<T> make_conv_params(i64 out_c, i64 in_c, i64 kh, i64 kw, InitMode mode,
                                 SplitMix64& rng);

template <typename T>
RdafbParams<T> make_rdafb(const RDAFBConfig& cfg, InitMode mode, SplitMix64& rng);

template <typename T>
AttentionMap<T> attention_module(const AttentionModuleParams<T>& p, const Tensor<T>& feature);

template <typename T>
AttentionMap<T> attention_fusion(const AttentionFusionParams<T>& p,
                                 const std::vector<AttentionMap<T>>& maps);

/// Full block: gate the input, run the conv chain with per-layer gating
/// (fused maps when use_afm), and add the residual when use_lrl.
template <typename T>
Tensor<T> rdafb_forward(const RdafbParams<T>& p, const Tensor<T>& input, const RDAFBConfig& cfg,
                        AttentionTaps<T>* taps = nullptr);

template <typename T>
void for_each_rdafb_param(RdafbParams<T>& p, const std::string& prefix,
                          const std::function<void(const std::string&, Tensor<T>&)>& fn);

/// Scalar parameter count of one block under cfg (builder-independent).
i64 rdafb_param_count(const RDAFBConfig& cfg);

#define RDAF_DECLARE_BLOCKS(T)                                                               \
    extern template Conv2dParams<T> make_conv_params<T>(i64, i64, i64, i64, InitMode,        \
                                                        SplitMix64&);                        \
    extern template RdafbParams<T> make_rdafb<T>(const RDAFBConfig&, InitMode, SplitMix64&); \
    extern template AttentionMap<T> attention_module<T>(const AttentionModuleParams<T>&,     \
                                                        const Tensor<T>&);                   \
    extern template AttentionMap<T> attention_fusion<T>(const AttentionFusionParams<T>&,     \
                                                        const std::vector<AttentionMap<T>>&); \
    extern template Tensor<T> rdafb_forward<T>(const RdafbParams<T>&, const Tensor<T>&,      \
                                               const RDAFBConfig&, AttentionTaps<T>*);       \
    extern template void for_each_rdafb_param<T>(                                            \
        RdafbParams<T>&, const std::string&,                                                 \
        const std::function<void(const std::string&, Tensor<T>&)>&);

RDAF_DECLARE_BLOCKS(float)
RDAF_DECLARE_BLOCKS(double)
#undef RDAF_DECLARE_BLOCKS

}  // namespace rdaf
