#include "rdaf/blocks.hpp"

#include <cmath>

namespace rdaf {

template <typename T>
Conv2dParams<T> make_conv_params(i64 out_c, i64 in_c, i64 kh, i64 kw, InitMode mode,
                                 SplitMix64& rng) {
    Conv2dParams<T> p;
    const Shape ws{out_c, in_c, kh, kw};
    if (mode == InitMode::zeros) {
        p.weight = Tensor<T>::zeros(ws, /*requires_grad=*/true);
    } else {
        const double bound = 1.0 / std::sqrt(static_cast<double>(in_c * kh * kw));
        std::vector<T> w(static_cast<size_t>(ws.numel()));
        for (auto& v : w) v = static_cast<T>(rng.uniform(-bound, bound));
        p.weight = Tensor<T>::from_data(ws, std::move(w), /*requires_grad=*/true);
    }
    p.bias = Tensor<T>::zeros(Shape{1, out_c, 1, 1}, /*requires_grad=*/true);
    return p;
}

template <typename T>
RdafbParams<T> make_rdafb(const RDAFBConfig& cfg, InitMode mode, SplitMix64& rng) {
    cfg.validate();
    const i64 f = cfg.filters;
    RdafbParams<T> p;
    for (int i = 0; i < cfg.conv_layers; ++i)
        p.convs.push_back(make_conv_params<T>(f, f, 3, 3, mode, rng));
    if (cfg.use_am) {
        // Attention convs always start at zero: every gate opens at 0.5.
        SplitMix64 unused(0);
        const int n_am = cfg.conv_layers + (cfg.gate_last_conv ? 1 : 0);
        for (int i = 0; i < n_am; ++i)
            p.ams.push_back({make_conv_params<T>(f, f, 1, 1, InitMode::zeros, unused)});
        if (cfg.use_afm) {
            const int n_afm = n_am - 1;
            for (int i = 1; i <= n_afm; ++i) {
                AttentionFusionParams<T> afm;
                afm.arity = i + 1;
                afm.fuse = make_conv_params<T>(f, (i + 1) * f, 1, 1, InitMode::zeros, unused);
                afm.dw = make_conv_params<T>(f, 1, 3, 3, InitMode::zeros, unused);
                afm.pw = make_conv_params<T>(f, f, 1, 1, InitMode::zeros, unused);
                p.afms.push_back(std::move(afm));
            }
        }
    }
    return p;
}

template <typename T>
AttentionMap<T> attention_module(const AttentionModuleParams<T>& p, const Tensor<T>& feature) {
    RDAF_CHECK(feature.shape().c == p.proj.weight.shape().c,
               "attention_module: feature channels ", feature.shape().c,
               " != configured filters ", p.proj.weight.shape().c);
    return {sigmoid(conv2d(feature, p.proj.weight, p.proj.bias, 1, 0))};
}

template <typename T>
AttentionMap<T> attention_fusion(const AttentionFusionParams<T>& p,
                                 const std::vector<AttentionMap<T>>& maps) {
    RDAF_CHECK(maps.size() >= 2, "attention_fusion: needs at least 2 maps, got ", maps.size());
    RDAF_CHECK(static_cast<int>(maps.size()) == p.arity, "attention_fusion: got ", maps.size(),
               " maps for a fusion of arity ", p.arity);
    std::vector<Tensor<T>> parts;
    parts.reserve(maps.size());
    const Shape& s0 = maps[0].map.shape();
    for (const auto& m : maps) {
        const Shape& s = m.map.shape();
        RDAF_CHECK(s.n == s0.n && s.h == s0.h && s.w == s0.w,
                   "attention_fusion: spatial mismatch ", s, " vs ", s0);
        parts.push_back(m.map);
    }
    Tensor<T> fused = conv2d(concat_channels(parts), p.fuse.weight, p.fuse.bias, 1, 0);
    fused = depthwise_conv2d(fused, p.dw.weight, p.dw.bias);
    fused = conv2d(fused, p.pw.weight, p.pw.bias, 1, 0);
    return {sigmoid(fused)};
}

template <typename T>
Tensor<T> rdafb_forward(const RdafbParams<T>& p, const Tensor<T>& input, const RDAFBConfig& cfg,
                        AttentionTaps<T>* taps) {
    cfg.validate();
    RDAF_CHECK(input.shape().c == cfg.filters, "rdafb_forward: input channels ", input.shape().c,
               " != filters ", cfg.filters, " (input ", input.shape(), ")");
    const int C = cfg.conv_layers;

    std::vector<AttentionMap<T>> maps;
    Tensor<T> prev = input;
    if (cfg.use_am) {
        AttentionMap<T> m0 = attention_module(p.ams[0], input);
        if (taps) taps->emplace_back("am0", m0.map);
        maps.push_back(m0);
        prev = mul(m0.map, input);
    }

    Tensor<T> last;
    for (int i = 1; i <= C; ++i) {
        const bool is_last = (i == C);
        Tensor<T> f = conv2d(prev, p.convs[i - 1].weight, p.convs[i - 1].bias, 1, 1);
        if (!is_last) f = relu(f);  // the last conv feeds the residual without relu
        const bool gate = cfg.use_am && (!is_last || cfg.gate_last_conv);
        if (gate) {
            AttentionMap<T> mi = attention_module(p.ams[i], f);
            if (taps) taps->emplace_back(detail::cat("am", i), mi.map);
            maps.push_back(mi);
            AttentionMap<T> g = mi;
            if (cfg.use_afm) {
                g = attention_fusion(p.afms[i - 1], maps);
                if (taps) taps->emplace_back(detail::cat("afm", i), g.map);
            }
            f = mul(g.map, cfg.eq4_literal ? input : f);
        }
        if (is_last)
            last = f;
        else
            prev = f;
    }
    return cfg.use_lrl ? add(input, last) : last;
}

template <typename T>
void for_each_rdafb_param(RdafbParams<T>& p, const std::string& prefix,
                          const std::function<void(const std::string&, Tensor<T>&)>& fn) {
    auto conv = [&](const std::string& name, Conv2dParams<T>& c) {
        fn(name + "/w", c.weight);
        fn(name + "/b", c.bias);
    };
    for (size_t i = 0; i < p.convs.size(); ++i)
        conv(detail::cat(prefix, "/conv", i), p.convs[i]);
    for (size_t i = 0; i < p.ams.size(); ++i)
        conv(detail::cat(prefix, "/am", i), p.ams[i].proj);
    for (size_t i = 0; i < p.afms.size(); ++i) {
        conv(detail::cat(prefix, "/afm", i + 1, "/fuse"), p.afms[i].fuse);
        conv(detail::cat(prefix, "/afm", i + 1, "/dw"), p.afms[i].dw);
        conv(detail::cat(prefix, "/afm", i + 1, "/pw"), p.afms[i].pw);
    }
}

i64 rdafb_param_count(const RDAFBConfig& cfg) {
    cfg.validate();
    const i64 f = cfg.filters;
    i64 total = cfg.conv_layers * (f * f * 9 + f);
    if (cfg.use_am) {
        const i64 n_am = cfg.conv_layers + (cfg.gate_last_conv ? 1 : 0);
        total += n_am * (f * f + f);
        if (cfg.use_afm) {
            for (i64 i = 1; i <= n_am - 1; ++i) {
                total += (i + 1) * f * f + f;  // fuse
                total += f * 9 + f;            // depthwise
                total += f * f + f;            // pointwise
            }
        }
    }
    return total;
}

#define RDAF_INSTANTIATE_BLOCKS(T)                                                           \
    template Conv2dParams<T> make_conv_params<T>(i64, i64, i64, i64, InitMode, SplitMix64&); \
    template RdafbParams<T> make_rdafb<T>(const RDAFBConfig&, InitMode, SplitMix64&);        \
    template AttentionMap<T> attention_module<T>(const AttentionModuleParams<T>&,            \
                                                 const Tensor<T>&);                          \
    template AttentionMap<T> attention_fusion<T>(const AttentionFusionParams<T>&,            \
                                                 const std::vector<AttentionMap<T>>&);       \
    template Tensor<T> rdafb_forward<T>(const RdafbParams<T>&, const Tensor<T>&,             \
                                        const RDAFBConfig&, AttentionTaps<T>*);              \
    template void for_each_rdafb_param<T>(                                                   \
        RdafbParams<T>&, const std::string&,                                                 \
        const std::function<void(const std::string&, Tensor<T>&)>&);

RDAF_INSTANTIATE_BLOCKS(float)
RDAF_INSTANTIATE_BLOCKS(double)
#undef RDAF_INSTANTIATE_BLOCKS

}  // namespace rdaf
