#include "rdaf/losses.hpp"

namespace rdaf {

template <typename T>
Tensor<T> l1_loss(const Tensor<T>& pred, const Tensor<T>& target) {
    RDAF_CHECK(pred.shape() == target.shape(), "l1_loss: shape mismatch ", pred.shape(), " vs ",
               target.shape());
    return mean(abs(sub(pred, target)));
}

template <typename T>
Tensor<T> frequency_loss(const Tensor<T>& pred, const Tensor<T>& target, bool modulus) {
    RDAF_CHECK(pred.shape() == target.shape(), "frequency_loss: shape mismatch ", pred.shape(),
               " vs ", target.shape());
    ComplexGrid<T> fp = fft2(pred);
    ComplexGrid<T> ft = fft2(target);
    Tensor<T> dre = sub(fp.real, ft.real);
    Tensor<T> dim = sub(fp.imag, ft.imag);
    if (modulus) return mean(complex_abs(dre, dim));
    return add(mean(abs(dre)), mean(abs(dim)));
}

template <typename T>
Tensor<T> total_loss(const std::vector<StageOutput<T>>& stage_outputs, const Tensor<T>& target,
                     const LossConfig& cfg) {
    cfg.validate();
    RDAF_CHECK(!stage_outputs.empty(), "total_loss: no stage outputs");
    Tensor<T> acc;
    for (const auto& stage : stage_outputs) {
        RDAF_CHECK(stage.restored.shape() == target.shape(), "total_loss: stage output ",
                   stage.restored.shape(), " does not match target ", target.shape());
        Tensor<T> term = add(l1_loss(stage.restored, target),
                             scale(frequency_loss(stage.restored, target, cfg.complex_modulus),
                                   static_cast<T>(cfg.lambda)));
        acc = acc.defined() ? add(acc, term) : term;
    }
    return acc;
}

#define RDAF_INSTANTIATE_LOSSES(T)                                                  \
    template Tensor<T> l1_loss<T>(const Tensor<T>&, const Tensor<T>&);              \
    template Tensor<T> frequency_loss<T>(const Tensor<T>&, const Tensor<T>&, bool); \
    template Tensor<T> total_loss<T>(const std::vector<StageOutput<T>>&, const Tensor<T>&, \
                                     const LossConfig&);

RDAF_INSTANTIATE_LOSSES(float)
RDAF_INSTANTIATE_LOSSES(double)
#undef RDAF_INSTANTIATE_LOSSES

}  // namespace rdaf
