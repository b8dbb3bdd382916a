#pragma once

#include "rdaf/fft.hpp"
#include "rdaf/network.hpp"

namespace rdaf {

struct LossConfig {
    double lambda = 0.1;  // weight of the frequency term
    /// Measure the spectral difference as |Re|+|Im| per bin (default) or as
    /// the complex modulus.
    bool complex_modulus = false;

    void validate() const {
        RDAF_CHECK(std::isfinite(lambda) && lambda >= 0.0,
                   "LossConfig: lambda must be finite and >= 0, got ", lambda);
    }
};

/// Mean absolute difference; subgradient 0 at ties.
template <typename T>
Tensor<T> l1_loss(const Tensor<T>& pred, const Tensor<T>& target);

/// Mean over spectrum bins of the forward-DFT difference, |Re d| + |Im d|
/// per bin (or |d| with modulus=true). Differentiable through the DFT
/// adjoint.
template <typename T>
Tensor<T> frequency_loss(const Tensor<T>& pred, const Tensor<T>& target, bool modulus = false);

/// Sum over stages of content + lambda * frequency terms.
template <typename T>
Tensor<T> total_loss(const std::vector<StageOutput<T>>& stage_outputs, const Tensor<T>& target,
                     const LossConfig& cfg);

#define RDAF_DECLARE_LOSSES(T)                                                             \
    extern template Tensor<T> l1_loss<T>(const Tensor<T>&, const Tensor<T>&);              \
    extern template Tensor<T> frequency_loss<T>(const Tensor<T>&, const Tensor<T>&, bool); \
    extern template Tensor<T> total_loss<T>(const std::vector<StageOutput<T>>&,            \
                                            const Tensor<T>&, const LossConfig&);

RDAF_DECLARE_LOSSES(float)
RDAF_DECLARE_LOSSES(double)
#undef RDAF_DECLARE_LOSSES

}  // namespace rdaf
