#include "rdaf/network.hpp"

#include <cmath>
#include <cstdlib>
#include <limits>

namespace rdaf {

NetworkConfig NetworkConfig::reference_single_stage() {
    NetworkConfig cfg;
    cfg.stages = 1;
    cfg.blocks_per_stage = {16};
    return cfg;
}

NetworkConfig NetworkConfig::reference_multi_stage() {
    NetworkConfig cfg;
    cfg.stages = 3;
    cfg.blocks_per_stage = {10, 10, 12};
    return cfg;
}

void NetworkConfig::validate() const {
    RDAF_CHECK(stages >= 1 && stages <= 3, "NetworkConfig: stages must be in 1..3, got ", stages);
    RDAF_CHECK(static_cast<int>(blocks_per_stage.size()) == stages,
               "NetworkConfig: blocks_per_stage has ", blocks_per_stage.size(),
               " entries for ", stages, " stages");
    for (int n : blocks_per_stage)
        RDAF_CHECK(n >= 1, "NetworkConfig: blocks per stage must be >= 1, got ", n);
    RDAF_CHECK(head_kernel >= 1 && head_kernel % 2 == 1,
               "NetworkConfig: head_kernel must be odd, got ", head_kernel);
    RDAF_CHECK(in_channels >= 1, "NetworkConfig: in_channels must be >= 1");
    RDAF_CHECK(rdb_growth >= 0, "NetworkConfig: rdb_growth must be >= 0");
    block.validate();
}

int NetworkConfig::resolved_growth() const {
    if (variant != BlockVariant::rdb) return 0;
    return rdb_growth > 0 ? rdb_growth : rdb_growth_for(block);
}

// ---------------------------------------------------------------------------
// builders
// ---------------------------------------------------------------------------

template <typename T>
NetParams<T> make_network(const NetworkConfig& cfg, InitMode mode, std::uint64_t seed) {
    cfg.validate();
    const i64 f = cfg.block.filters;
    const int k = cfg.head_kernel;
    NetParams<T> net;
    const int growth = cfg.resolved_growth();
    for (int s = 0; s < cfg.stages; ++s) {
        SplitMix64 rng(SplitMix64::mix(seed, static_cast<std::uint64_t>(s)));
        StageParams<T> st;
        st.head = make_conv_params<T>(f, cfg.in_channels, k, k, mode, rng);
        st.down = make_conv_params<T>(f, f, 3, 3, mode, rng);
        for (int b = 0; b < cfg.blocks_per_stage[s]; ++b) {
            if (cfg.variant == BlockVariant::rdaf)
                st.blocks.push_back(make_rdafb<T>(cfg.block, mode, rng));
            else
                st.rdb_blocks.push_back(
                    make_rdb<T>(cfg.block.conv_layers, cfg.block.filters, growth, mode, rng));
        }
        // transposed conv weight layout is [in, out, kh, kw]
        st.up = make_conv_params<T>(f, f, 4, 4, mode, rng);
        st.tail = make_conv_params<T>(cfg.in_channels, f, k, k, mode, rng);
        net.stages.push_back(std::move(st));
    }
    SplitMix64 rng(SplitMix64::mix(seed, 0xb0a7ULL));
    SplitMix64 unused(0);
    for (int b = 0; b + 1 < cfg.stages; ++b) {
        // SAM projections are attention convs: start at zero like the AMs.
        net.sam_proj.push_back(make_conv_params<T>(f, cfg.in_channels, 1, 1, InitMode::zeros, unused));
        net.csff.push_back(make_conv_params<T>(f, f, 1, 1, mode, rng));
    }
    return net;
}

template <typename T>
RdbParams<T> make_rdb(int conv_layers, int filters, int growth, InitMode mode, SplitMix64& rng) {
    RDAF_CHECK(growth >= 1, "make_rdb: growth must be >= 1, got ", growth);
    RdbParams<T> p;
    for (int i = 0; i < conv_layers; ++i)
        p.convs.push_back(make_conv_params<T>(growth, filters + i * growth, 3, 3, mode, rng));
    p.fusion =
        make_conv_params<T>(filters, filters + conv_layers * growth, 1, 1, mode, rng);
    return p;
}

// ---------------------------------------------------------------------------
// forward passes
// ---------------------------------------------------------------------------

template <typename T>
Tensor<T> rdb_forward(const RdbParams<T>& p, const Tensor<T>& input) {
    std::vector<Tensor<T>> feats{input};
    for (const auto& conv : p.convs) {
        Tensor<T> x = feats.size() == 1 ? feats[0] : concat_channels(feats);
        feats.push_back(relu(conv2d(x, conv.weight, conv.bias, 1, 1)));
    }
    Tensor<T> fused = conv2d(concat_channels(feats), p.fusion.weight, p.fusion.bias, 1, 0);
    return add(input, fused);
}

template <typename T>
StageOutput<T> stage_forward(const NetParams<T>& net, int stage_idx, const Tensor<T>& image,
                             const Tensor<T>* carried_sam, const Tensor<T>* carried_csff,
                             const NetworkConfig& cfg, const ForwardOptions& opts) {
    cfg.validate();
    const Shape s = image.shape();
    RDAF_CHECK(s.c == cfg.in_channels, "stage_forward: image has ", s.c, " channels, expected ",
               cfg.in_channels);
    RDAF_CHECK(s.h % 2 == 0 && s.w % 2 == 0, "stage_forward: image dims ", s.h, "x", s.w,
               " must be even; reflect-pad to even and crop the result back");
    RDAF_CHECK(stage_idx >= 0 && stage_idx < cfg.stages, "stage_forward: stage ", stage_idx,
               " out of range");
    RDAF_CHECK((carried_csff != nullptr) == (stage_idx > 0),
               "stage_forward: carried features must be present exactly for stages > 0");

    const StageParams<T>& st = net.stages[stage_idx];
    const int pad = cfg.head_kernel / 2;

    Tensor<T> x = conv2d(image, st.head.weight, st.head.bias, 1, pad);
    if (carried_sam) x = add(x, *carried_sam);
    Tensor<T> d = conv2d(x, st.down.weight, st.down.bias, 2, 1);
    if (carried_csff) {
        const auto& c = net.csff[stage_idx - 1];
        d = add(d, conv2d(*carried_csff, c.weight, c.bias, 1, 0));
    }

    StageOutput<T> out;
    Tensor<T> f = d;
    const int n_blocks = cfg.blocks_per_stage[stage_idx];
    for (int b = 0; b < n_blocks; ++b) {
        AttentionTaps<T> taps;
        const bool capture = opts.capture_stage == stage_idx &&
                             (opts.capture_block < 0 || opts.capture_block == b);
        if (cfg.variant == BlockVariant::rdaf)
            f = rdafb_forward(st.blocks[b], f, cfg.block, capture ? &taps : nullptr);
        else
            f = rdb_forward(st.rdb_blocks[b], f);
        for (auto& [label, map] : taps)
            out.attention_snapshots.emplace_back(
                detail::cat("stage", stage_idx, "/block", b, "/", label), map);
    }

    Tensor<T> u = conv_transpose2d(f, st.up.weight, st.up.bias, 2, 1);
    Tensor<T> r = conv2d(u, st.tail.weight, st.tail.bias, 1, pad);
    Tensor<T> restored = add(image, r);
    if (opts.clamp_output) restored = clamp_values(restored, T(-1), T(1));

    out.restored = restored;
    out.features_full = u;
    out.features_half = f;
    return out;
}

template <typename T>
std::vector<StageOutput<T>> multi_stage_forward(const NetParams<T>& net, const Tensor<T>& image,
                                                const NetworkConfig& cfg,
                                                const ForwardOptions& opts) {
    cfg.validate();
    std::vector<StageOutput<T>> outs;
    Tensor<T> carried_sam, carried_csff;
    for (int s = 0; s < cfg.stages; ++s) {
        const bool has_carried = s > 0;
        StageOutput<T> o =
            stage_forward(net, s, image, has_carried ? &carried_sam : nullptr,
                          has_carried ? &carried_csff : nullptr, cfg, opts);
        if (s + 1 < cfg.stages) {
            const auto& proj = net.sam_proj[s];
            Tensor<T> gate = sigmoid(conv2d(o.restored, proj.weight, proj.bias, 1, 0));
            carried_sam = mul(o.features_full, gate);
            carried_csff = o.features_half;
        }
        outs.push_back(std::move(o));
    }
    return outs;
}

// ---------------------------------------------------------------------------
// parameter iteration
// ---------------------------------------------------------------------------

template <typename T>
void for_each_param(NetParams<T>& net,
                    const std::function<void(const std::string&, Tensor<T>&)>& fn) {
    auto conv = [&](const std::string& name, Conv2dParams<T>& c) {
        fn(name + "/w", c.weight);
        fn(name + "/b", c.bias);
    };
    for (size_t s = 0; s < net.stages.size(); ++s) {
        StageParams<T>& st = net.stages[s];
        const std::string p = detail::cat("stage", s);
        conv(p + "/head", st.head);
        conv(p + "/down", st.down);
        for (size_t b = 0; b < st.blocks.size(); ++b)
            for_each_rdafb_param(st.blocks[b], detail::cat(p, "/block", b), fn);
        for (size_t b = 0; b < st.rdb_blocks.size(); ++b) {
            RdbParams<T>& rdb = st.rdb_blocks[b];
            for (size_t i = 0; i < rdb.convs.size(); ++i)
                conv(detail::cat(p, "/block", b, "/conv", i), rdb.convs[i]);
            conv(detail::cat(p, "/block", b, "/fusion"), rdb.fusion);
        }
        conv(p + "/up", st.up);
        conv(p + "/tail", st.tail);
    }
    for (size_t b = 0; b < net.sam_proj.size(); ++b)
        conv(detail::cat("sam", b, "/proj"), net.sam_proj[b]);
    for (size_t b = 0; b < net.csff.size(); ++b)
        conv(detail::cat("csff", b, "/conv"), net.csff[b]);
}

template <typename T>
void zero_all_grads(NetParams<T>& net) {
    for_each_param<T>(net, [](const std::string&, Tensor<T>& t) { t.zero_grad(); });
}

template <typename T>
i64 count_params(NetParams<T>& net) {
    i64 total = 0;
    for_each_param<T>(net, [&](const std::string&, Tensor<T>& t) { total += t.numel(); });
    return total;
}

// ---------------------------------------------------------------------------
// analytic parameter / cost accounting
// ---------------------------------------------------------------------------

namespace {

struct TallySink {
    CostTally t;

    void conv(i64 kh, i64 kw, i64 in_c, i64 out_c, i64 out_h, i64 out_w) {
        t.params += kh * kw * in_c * out_c + out_c;
        t.macs += kh * kw * in_c * out_c * out_h * out_w;
        t.elementwise += out_c * out_h * out_w;  // bias
    }
    // Transposed conv: every input element scatters through the full kernel,
    // so MACs count by input extent.
    void conv_t(i64 kh, i64 kw, i64 in_c, i64 out_c, i64 in_h, i64 in_w, i64 out_h, i64 out_w) {
        t.params += kh * kw * in_c * out_c + out_c;
        t.macs += kh * kw * in_c * out_c * in_h * in_w;
        t.elementwise += out_c * out_h * out_w;  // bias
    }
    void depthwise(i64 c, i64 out_h, i64 out_w) {
        t.params += c * 9 + c;
        t.macs += 9 * c * out_h * out_w;
        t.elementwise += c * out_h * out_w;
    }
    void elem(i64 count) { t.elementwise += count; }
};

void tally_rdafb(TallySink& s, const RDAFBConfig& b, i64 h, i64 w) {
    const i64 f = b.filters;
    const i64 px = h * w;
    const int C = b.conv_layers;
    const int n_am = b.use_am ? C + (b.gate_last_conv ? 1 : 0) : 0;
    for (int i = 0; i < C; ++i) {
        s.conv(3, 3, f, f, h, w);
        if (i + 1 < C) s.elem(f * px);  // relu
    }
    for (int i = 0; i < n_am; ++i) {
        s.conv(1, 1, f, f, h, w);  // AM projection
        s.elem(f * px);            // sigmoid
        s.elem(f * px);            // gate multiply
    }
    if (b.use_afm) {
        for (int i = 1; i <= n_am - 1; ++i) {
            s.conv(1, 1, (i + 1) * f, f, h, w);
            s.depthwise(f, h, w);
            s.conv(1, 1, f, f, h, w);
            s.elem(f * px);  // post-fusion sigmoid
        }
    }
    if (b.use_lrl) s.elem(f * px);  // residual add
}

void tally_rdb(TallySink& s, int C, i64 f, i64 g, i64 h, i64 w) {
    const i64 px = h * w;
    for (int i = 0; i < C; ++i) {
        s.conv(3, 3, f + i * g, g, h, w);
        s.elem(g * px);  // relu
    }
    s.conv(1, 1, f + C * g, f, h, w);
    s.elem(f * px);  // residual add
}

}  // namespace

CostTally tally_network(const NetworkConfig& cfg, i64 h, i64 w) {
    cfg.validate();
    RDAF_CHECK(h >= 2 && w >= 2 && h % 2 == 0 && w % 2 == 0,
               "tally_network: dims must be even, got ", h, "x", w);
    const i64 f = cfg.block.filters;
    const i64 k = cfg.head_kernel;
    const i64 hh = h / 2, hw = w / 2;
    const int growth = cfg.resolved_growth();
    TallySink s;
    for (int stage = 0; stage < cfg.stages; ++stage) {
        s.conv(k, k, cfg.in_channels, f, h, w);  // head
        if (stage > 0) s.elem(f * h * w);        // SAM feature injection
        s.conv(3, 3, f, f, hh, hw);              // downsample
        if (stage > 0) {
            s.conv(1, 1, f, f, hh, hw);  // CSFF transfer
            s.elem(f * hh * hw);
        }
        for (int b = 0; b < cfg.blocks_per_stage[stage]; ++b) {
            if (cfg.variant == BlockVariant::rdaf)
                tally_rdafb(s, cfg.block, hh, hw);
            else
                tally_rdb(s, cfg.block.conv_layers, f, growth, hh, hw);
        }
        s.conv_t(4, 4, f, f, hh, hw, h, w);      // upsample
        s.conv(k, k, f, cfg.in_channels, h, w);  // tail
        s.elem(cfg.in_channels * h * w);         // residual add
        if (stage + 1 < cfg.stages) {
            s.conv(1, 1, cfg.in_channels, f, h, w);  // SAM projection
            s.elem(f * h * w);                       // sigmoid
            s.elem(f * h * w);                       // gate multiply
        }
    }
    return s.t;
}

i64 count_params(const NetworkConfig& cfg) {
    // Resolution-independent; tally at the smallest legal size.
    return tally_network(cfg, 2, 2).params;
}

i64 conv2d_flops(i64 kh, i64 kw, i64 in_c, i64 out_c, i64 out_h, i64 out_w, double mac_factor) {
    const double macs = static_cast<double>(kh * kw * in_c * out_c) *
                        static_cast<double>(out_h * out_w);
    return static_cast<i64>(std::llround(mac_factor * macs));
}

i64 estimate_flops(const NetworkConfig& cfg, i64 h, i64 w, double mac_factor) {
    const CostTally t = tally_network(cfg, h, w);
    return static_cast<i64>(std::llround(mac_factor * static_cast<double>(t.macs))) +
           t.elementwise;
}

// ---------------------------------------------------------------------------
// RDB sizing
// ---------------------------------------------------------------------------

i64 rdb_param_count(int conv_layers, int filters, int growth) {
    const i64 f = filters, g = growth;
    i64 total = 0;
    for (int i = 0; i < conv_layers; ++i) total += 9 * g * (f + i * g) + g;
    total += (f + conv_layers * g) * f + f;
    return total;
}

int rdb_growth_for(const RDAFBConfig& block) {
    const i64 target = rdafb_param_count(block);
    int best = 1;
    i64 best_diff = std::numeric_limits<i64>::max();
    for (int g = 1; g <= 4 * block.filters; ++g) {
        const i64 diff = std::llabs(rdb_param_count(block.conv_layers, block.filters, g) - target);
        if (diff < best_diff) {
            best_diff = diff;
            best = g;
        }
    }
    RDAF_CHECK(static_cast<double>(best_diff) <= 0.02 * static_cast<double>(target),
               "rdb_growth_for: no growth rate lands within 2% of ", target,
               " parameters (closest diff ", best_diff, ")");
    return best;
}

// ---------------------------------------------------------------------------
// explicit instantiations
// ---------------------------------------------------------------------------

#define RDAF_INSTANTIATE_NETWORK(T)                                                           \
    template NetParams<T> make_network<T>(const NetworkConfig&, InitMode, std::uint64_t);     \
    template StageOutput<T> stage_forward<T>(const NetParams<T>&, int, const Tensor<T>&,      \
                                             const Tensor<T>*, const Tensor<T>*,              \
                                             const NetworkConfig&, const ForwardOptions&);    \
    template std::vector<StageOutput<T>> multi_stage_forward<T>(                              \
        const NetParams<T>&, const Tensor<T>&, const NetworkConfig&, const ForwardOptions&);  \
    template void for_each_param<T>(NetParams<T>&,                                            \
                                    const std::function<void(const std::string&, Tensor<T>&)>&); \
    template void zero_all_grads<T>(NetParams<T>&);                                           \
    template i64 count_params<T>(NetParams<T>&);                                              \
    template RdbParams<T> make_rdb<T>(int, int, int, InitMode, SplitMix64&);                  \
    template Tensor<T> rdb_forward<T>(const RdbParams<T>&, const Tensor<T>&);

RDAF_INSTANTIATE_NETWORK(float)
RDAF_INSTANTIATE_NETWORK(double)
#undef RDAF_INSTANTIATE_NETWORK

}  // namespace rdaf
